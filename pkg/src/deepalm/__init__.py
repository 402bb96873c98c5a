"""deepalm: holistic optical-network monitoring without hardware.

Fiber plant simulation and OTDR analysis, device aging and remaining-useful-
life estimation, security-log analytics, and a unified alerting service that
ties the three domains to geographic positions.
"""

__version__ = "0.1.0"
