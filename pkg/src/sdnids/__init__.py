"""Simulated SDN intrusion detection loop: mirrored switch, rule-based IDS,
and a controller that installs drop rules for flooding hosts."""

__version__ = "0.1.0"
