"""One-shot imitation through attributed waypoints."""

__version__ = "0.1.0"
