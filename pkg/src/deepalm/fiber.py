"""Fiber plant and OTDR instrument simulator.

Stands in for the physical measurement hardware: a route is a polyline of
waypoints with a list of optical events (connectors, splices, bends, cuts),
and :func:`synthesize_trace` renders the one-way backscatter trace an OTDR
would display for it, in display dB. Operator-injected incidents mutate the
event list through :func:`apply_incident` so the next synthesized trace shows
the fault.

Display conventions (chosen to match real OTDR screens):

* the trace slope is the attenuation coefficient, ``alpha`` dB/km one-way;
* a lossy event is a downward step of its one-way ``loss_db``;
* a reflective event is a rectangular peak of width ``pulse_width_m`` rising
  ``(reflectance_db - backscatter_coeff_db) / 2`` above the backscatter line,
  clipped at the receiver saturation level;
* beyond a cut or the fiber end the trace sits at the noise floor.

Noise is additive Gaussian in dB with a constant std and a hard floor -- a
simplification of linear-domain receiver noise that keeps traces reproducible
bit for bit from the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Optional, Sequence

from .prng import Xorshift64Star
from .serde import (
    FORMAT_ROUTE,
    FORMAT_TRACE,
    FormatError,
    format_rfc3339,
    parse_rfc3339,
)

SPEED_OF_LIGHT_M_S = 2.99792458e8

EVENT_KINDS = ("connector", "splice", "bend", "cut", "sensor_trigger", "fiber_end")
TERMINAL_KINDS = ("cut", "fiber_end")

INCIDENT_KINDS = (
    "fiber_cut",
    "fiber_bend",
    "connector_degradation",
    "sensor_trigger",
    "device_overheat",
    "login_burst",
)
FIBER_INCIDENT_KINDS = ("fiber_cut", "fiber_bend", "connector_degradation", "sensor_trigger")

CUT_REFLECTANCE_DB = -40.0


class SimulationError(ValueError):
    """Invalid route, event list, or incident."""


@dataclass(frozen=True)
class FiberEventSpec:
    """One optical event on a route; ``reflectance_db`` absent means the
    event is purely lossy."""

    position_m: float
    kind: str
    loss_db: float = 0.0
    reflectance_db: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise SimulationError(f"unknown event kind {self.kind!r}")
        if self.loss_db < 0:
            raise SimulationError("loss_db must be >= 0")
        if self.reflectance_db is not None and self.reflectance_db > 0:
            raise SimulationError("reflectance_db must be <= 0")

    @property
    def is_terminal(self) -> bool:
        return self.kind in TERMINAL_KINDS

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "position_m": self.position_m,
            "kind": self.kind,
            "loss_db": self.loss_db,
        }
        if self.reflectance_db is not None:
            doc["reflectance_db"] = self.reflectance_db
        return doc

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "FiberEventSpec":
        return FiberEventSpec(
            position_m=float(doc["position_m"]),
            kind=str(doc["kind"]),
            loss_db=float(doc.get("loss_db", 0.0)),
            reflectance_db=(
                float(doc["reflectance_db"]) if doc.get("reflectance_db") is not None else None
            ),
        )


@dataclass(frozen=True)
class FiberRoute:
    """A monitored fiber span: geometry plus the as-built event list.

    Waypoints are (latitude_deg, longitude_deg, cumulative_fiber_m) with
    strictly increasing fiber distance, starting at 0 and ending at
    ``length_m``. Fiber distance is stored explicitly because cable length
    exceeds the geodesic distance (slack loops, conduits).
    """

    route_id: str
    length_m: float
    attenuation_db_per_km: float
    waypoints: tuple[tuple[float, float, float], ...]
    baseline_events: tuple[FiberEventSpec, ...] = ()
    group_index: float = 1.468

    def __post_init__(self) -> None:
        if self.length_m <= 0:
            raise SimulationError("length_m must be > 0")
        if self.attenuation_db_per_km <= 0:
            raise SimulationError("attenuation_db_per_km must be > 0")
        if len(self.waypoints) < 2:
            raise SimulationError("route needs at least two waypoints")
        dists = [w[2] for w in self.waypoints]
        if dists[0] != 0.0:
            raise SimulationError("first waypoint must be at fiber distance 0")
        if dists[-1] != self.length_m:
            raise SimulationError("last waypoint must be at fiber distance length_m")
        if any(b <= a for a, b in zip(dists, dists[1:])):
            raise SimulationError("waypoint fiber distances must be strictly increasing")
        for lat, lon, _ in self.waypoints:
            if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
                raise SimulationError("waypoint coordinates out of range")
        validate_events(self.baseline_events, self.length_m)

    def to_json(self) -> dict[str, Any]:
        return {
            "format": FORMAT_ROUTE,
            "route_id": self.route_id,
            "length_m": self.length_m,
            "attenuation_db_per_km": self.attenuation_db_per_km,
            "group_index": self.group_index,
            "waypoints": [list(w) for w in self.waypoints],
            "baseline_events": [e.to_json() for e in self.baseline_events],
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "FiberRoute":
        if doc.get("format") not in (None, FORMAT_ROUTE):
            raise FormatError(f"not a {FORMAT_ROUTE} document")
        try:
            return FiberRoute(
                route_id=str(doc["route_id"]),
                length_m=float(doc["length_m"]),
                attenuation_db_per_km=float(doc["attenuation_db_per_km"]),
                group_index=float(doc.get("group_index", 1.468)),
                waypoints=tuple(
                    (float(w[0]), float(w[1]), float(w[2])) for w in doc["waypoints"]
                ),
                baseline_events=tuple(
                    FiberEventSpec.from_json(e) for e in doc.get("baseline_events", [])
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad route document: {exc}") from exc


@dataclass(frozen=True)
class OtdrParams:
    """Instrument settings for one measurement."""

    sample_spacing_m: float = 10.0
    pulse_width_m: float = 20.0
    launch_level_db: float = 30.0
    backscatter_coeff_db: float = -73.0
    noise_std_db_linear_equiv: float = 0.05
    noise_floor_db: float = -25.0
    saturation_db: Optional[float] = None
    seed: int = 1

    def __post_init__(self) -> None:
        if self.sample_spacing_m <= 0 or self.pulse_width_m <= 0:
            raise SimulationError("sample spacing and pulse width must be > 0")
        if self.noise_std_db_linear_equiv < 0:
            raise SimulationError("noise_std_db_linear_equiv must be >= 0")
        if self.saturation_db is None:
            object.__setattr__(self, "saturation_db", self.launch_level_db + 5.0)
        if self.noise_floor_db >= self.launch_level_db:
            raise SimulationError("noise_floor_db must be below launch_level_db")
        if self.sample_spacing_m > self.pulse_width_m * 10:
            raise SimulationError("sample_spacing_m too coarse for pulse_width_m")
        if not (0 <= self.seed < 2**64):
            raise SimulationError("seed must be a 64-bit unsigned integer")

    def to_json(self) -> dict[str, Any]:
        return {
            "sample_spacing_m": self.sample_spacing_m,
            "pulse_width_m": self.pulse_width_m,
            "launch_level_db": self.launch_level_db,
            "backscatter_coeff_db": self.backscatter_coeff_db,
            "noise_std_db_linear_equiv": self.noise_std_db_linear_equiv,
            "noise_floor_db": self.noise_floor_db,
            "saturation_db": self.saturation_db,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "OtdrParams":
        return OtdrParams(
            sample_spacing_m=float(doc.get("sample_spacing_m", 10.0)),
            pulse_width_m=float(doc.get("pulse_width_m", 20.0)),
            launch_level_db=float(doc.get("launch_level_db", 30.0)),
            backscatter_coeff_db=float(doc.get("backscatter_coeff_db", -73.0)),
            noise_std_db_linear_equiv=float(doc.get("noise_std_db_linear_equiv", 0.05)),
            noise_floor_db=float(doc.get("noise_floor_db", -25.0)),
            saturation_db=(
                float(doc["saturation_db"]) if doc.get("saturation_db") is not None else None
            ),
            seed=int(doc.get("seed", 1)),
        )


@dataclass(frozen=True)
class OtdrTrace:
    """One rendered backscatter measurement in display dB."""

    route_id: str
    captured_at: datetime
    params: OtdrParams
    samples: tuple[float, ...]
    ground_truth: Optional[tuple[FiberEventSpec, ...]] = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def span_m(self) -> float:
        return (len(self.samples) - 1) * self.params.sample_spacing_m

    def position_of(self, index: int) -> float:
        return index * self.params.sample_spacing_m

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "format": FORMAT_TRACE,
            "route_id": self.route_id,
            "captured_at": format_rfc3339(self.captured_at),
            "params": self.params.to_json(),
            "samples": list(self.samples),
        }
        if self.ground_truth is not None:
            doc["ground_truth"] = [e.to_json() for e in self.ground_truth]
        return doc

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "OtdrTrace":
        if doc.get("format") != FORMAT_TRACE:
            raise FormatError(f"not a {FORMAT_TRACE} document")
        try:
            return OtdrTrace(
                route_id=str(doc["route_id"]),
                captured_at=parse_rfc3339(doc["captured_at"]),
                params=OtdrParams.from_json(doc["params"]),
                samples=tuple(float(s) for s in doc["samples"]),
                ground_truth=(
                    tuple(FiberEventSpec.from_json(e) for e in doc["ground_truth"])
                    if doc.get("ground_truth") is not None
                    else None
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad trace document: {exc}") from exc


@dataclass(frozen=True)
class IncidentSpec:
    """An operator-injected incident, aimed at one route, device, or log
    source depending on its kind."""

    incident_id: str
    kind: str
    magnitude: float = 0.0
    route_id: Optional[str] = None
    device_id: Optional[str] = None
    log_source: Optional[str] = None
    position_m: Optional[float] = None
    injected_at: datetime = field(
        default_factory=lambda: datetime.fromtimestamp(0, tz=timezone.utc)
    )

    def __post_init__(self) -> None:
        if self.kind not in INCIDENT_KINDS:
            raise SimulationError(f"unknown incident kind {self.kind!r}")
        if self.kind in FIBER_INCIDENT_KINDS:
            if not self.route_id:
                raise SimulationError(f"{self.kind} incident needs route_id")
            if self.position_m is None:
                raise SimulationError(f"{self.kind} incident needs position_m")
        elif self.kind == "device_overheat":
            if not self.device_id:
                raise SimulationError("device_overheat incident needs device_id")
        elif self.kind == "login_burst":
            if not self.log_source:
                raise SimulationError("login_burst incident needs log_source")

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "incident_id": self.incident_id,
            "kind": self.kind,
            "magnitude": self.magnitude,
            "injected_at": format_rfc3339(self.injected_at),
        }
        for key in ("route_id", "device_id", "log_source", "position_m"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        return doc

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "IncidentSpec":
        try:
            return IncidentSpec(
                incident_id=str(doc.get("incident_id", "")),
                kind=str(doc["kind"]),
                magnitude=float(doc.get("magnitude", 0.0)),
                route_id=doc.get("route_id"),
                device_id=doc.get("device_id"),
                log_source=doc.get("log_source"),
                position_m=(
                    float(doc["position_m"]) if doc.get("position_m") is not None else None
                ),
                injected_at=(
                    parse_rfc3339(doc["injected_at"])
                    if doc.get("injected_at")
                    else datetime.fromtimestamp(0, tz=timezone.utc)
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SimulationError):
                raise
            raise SimulationError(f"bad incident spec: {exc}") from exc


def validate_events(events: Sequence[FiberEventSpec], length_m: float) -> None:
    """Events must be sorted, inside the route, and nothing past a terminal."""
    prev = -math.inf
    terminal_at: Optional[float] = None
    for ev in events:
        if not (0.0 <= ev.position_m <= length_m):
            raise SimulationError(
                f"event at {ev.position_m} m outside route of {length_m} m"
            )
        if ev.position_m < prev:
            raise SimulationError("events must be sorted by position")
        if terminal_at is not None and ev.position_m > terminal_at:
            raise SimulationError(
                f"event at {ev.position_m} m lies beyond terminal event at {terminal_at} m"
            )
        if ev.is_terminal and terminal_at is None:
            terminal_at = ev.position_m
        prev = ev.position_m


def sample_spacing_from_time(sample_interval_s: float, group_index: float) -> float:
    """Convert the digitizer interval to meters of fiber per sample:
    dz = c * dt / (2 * n_g), the factor 2 covering the round trip."""
    if sample_interval_s <= 0 or group_index <= 0:
        raise SimulationError("sample interval and group index must be > 0")
    return SPEED_OF_LIGHT_M_S * sample_interval_s / (2.0 * group_index)


def synthesize_trace(
    route: FiberRoute,
    events: Sequence[FiberEventSpec],
    params: OtdrParams,
    captured_at: Optional[datetime] = None,
) -> OtdrTrace:
    """Render the display-dB trace for a route with the given event list.

    The noiseless level is ``launch - alpha * z - sum(losses at or before
    z)``; reflective peaks ride on top of that line; past a cut or the fiber
    end only the noise floor remains. Per-sample Gaussian noise comes from a
    fresh deterministic generator seeded by ``params.seed``, and the result
    is clamped to [noise_floor - 3 sigma, saturation].
    """
    events = sorted_events_checked(events, route.length_m)
    spacing = params.sample_spacing_m
    n = int(math.floor(route.length_m / spacing)) + 1
    alpha_per_m = route.attenuation_db_per_km / 1000.0

    terminal = next((ev for ev in events if ev.is_terminal), None)
    terminal_pos = terminal.position_m if terminal is not None else math.inf

    # Cumulative non-terminal loss lookup, ordered by position.
    loss_positions = [ev.position_m for ev in events if not ev.is_terminal]
    loss_steps = [ev.loss_db for ev in events if not ev.is_terminal]

    def cumulative_loss(z: float) -> float:
        total = 0.0
        for pos, loss in zip(loss_positions, loss_steps):
            if pos > z:
                break
            total += loss
        return total

    def peak_height(ev: FiberEventSpec) -> float:
        if ev.reflectance_db is None:
            return 0.0
        return max(0.0, (ev.reflectance_db - params.backscatter_coeff_db) / 2.0)

    reflective = [(ev.position_m, peak_height(ev)) for ev in events if peak_height(ev) > 0.0]

    rng = Xorshift64Star(params.seed)
    sigma = params.noise_std_db_linear_equiv
    floor = params.noise_floor_db
    saturation = params.saturation_db
    lower = floor - 3.0 * sigma

    samples = []
    for i in range(n):
        z = i * spacing
        if z >= terminal_pos:
            # Inside the terminal event's own pulse a reflective cut still
            # shows its peak above the incoming line; after that, floor only.
            if terminal is not None and z < terminal_pos + params.pulse_width_m:
                h = peak_height(terminal)
                if h > 0.0:
                    line = params.launch_level_db - alpha_per_m * z - cumulative_loss(z)
                    level = min(line + h, saturation)
                else:
                    level = floor
            else:
                level = floor
        else:
            level = params.launch_level_db - alpha_per_m * z - cumulative_loss(z)
            bump = 0.0
            for pos, h in reflective:
                if pos <= z < pos + params.pulse_width_m:
                    bump = max(bump, h)
            if bump > 0.0:
                level = min(level + bump, saturation)
        noisy = level + rng.gaussian(0.0, sigma)
        samples.append(min(max(noisy, lower), saturation))

    return OtdrTrace(
        route_id=route.route_id,
        captured_at=captured_at or datetime.now(tz=timezone.utc),
        params=params,
        samples=tuple(samples),
        ground_truth=tuple(events),
    )


def sorted_events_checked(
    events: Sequence[FiberEventSpec], length_m: float
) -> tuple[FiberEventSpec, ...]:
    validate_events(events, length_m)
    return tuple(events)


def apply_incident(route: FiberRoute, incident: IncidentSpec) -> tuple[FiberEventSpec, ...]:
    """Apply a fiber-domain incident to the route's event list and return the
    updated sequence (the route itself is immutable; callers keep the result).

    fiber_cut truncates everything past the cut and inserts a reflective
    terminal break; fiber_bend adds a non-reflective loss of ``magnitude``
    dB; connector_degradation raises the loss of the nearest connector;
    sensor_trigger adds a half-magnitude loss signature at the sensor.
    Re-applying the same cut is a no-op.
    """
    if incident.kind not in FIBER_INCIDENT_KINDS:
        raise SimulationError(f"incident kind {incident.kind!r} does not target a fiber route")
    if incident.route_id != route.route_id:
        raise SimulationError(
            f"incident targets route {incident.route_id!r}, not {route.route_id!r}"
        )
    pos = float(incident.position_m)
    if not (0.0 <= pos <= route.length_m):
        raise SimulationError(f"position {pos} m outside route of {route.length_m} m")

    events = list(route.baseline_events)

    if incident.kind == "fiber_cut":
        kept = [ev for ev in events if ev.position_m <= pos]
        if any(ev.kind == "cut" and ev.position_m == pos for ev in kept):
            return tuple(kept)
        kept = [ev for ev in kept if not (ev.is_terminal and ev.position_m == pos)]
        kept.append(
            FiberEventSpec(
                position_m=pos, kind="cut", loss_db=0.0, reflectance_db=CUT_REFLECTANCE_DB
            )
        )
        kept.sort(key=lambda ev: ev.position_m)
        return tuple(kept)

    terminal_at = min(
        (ev.position_m for ev in events if ev.is_terminal), default=math.inf
    )
    if pos > terminal_at:
        raise SimulationError(
            f"position {pos} m lies beyond the fiber end at {terminal_at} m"
        )

    if incident.kind == "fiber_bend":
        events.append(
            FiberEventSpec(position_m=pos, kind="bend", loss_db=float(incident.magnitude))
        )
    elif incident.kind == "sensor_trigger":
        events.append(
            FiberEventSpec(
                position_m=pos, kind="sensor_trigger", loss_db=0.5 * float(incident.magnitude)
            )
        )
    elif incident.kind == "connector_degradation":
        connectors = [i for i, ev in enumerate(events) if ev.kind == "connector"]
        if not connectors:
            raise SimulationError(f"route {route.route_id!r} has no connector to degrade")
        nearest = min(connectors, key=lambda i: abs(events[i].position_m - pos))
        ev = events[nearest]
        events[nearest] = replace(ev, loss_db=ev.loss_db + float(incident.magnitude))

    events.sort(key=lambda ev: ev.position_m)
    return tuple(events)
