// EventSource wrapper. The browser reconnects on its own; every (re)open
// triggers onOpen so the caller can resync missed state via GET /alerts.

import type { StreamPayload } from "./types.js";

export interface StreamHandlers {
  onOpen: () => void;
  onEvent: (seq: number, payload: StreamPayload) => void;
  onDown: () => void;
}

export function openStream(url: string, handlers: StreamHandlers): () => void {
  const source = new EventSource(url);
  source.onopen = () => handlers.onOpen();
  source.onerror = () => handlers.onDown();
  source.addEventListener("alert", (ev: MessageEvent<string>) => {
    const seq = Number.parseInt(ev.lastEventId || "0", 10) || 0;
    try {
      handlers.onEvent(seq, JSON.parse(ev.data) as StreamPayload);
    } catch {
      // a malformed frame should not kill the stream
    }
  });
  return () => source.close();
}
