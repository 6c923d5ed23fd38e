"""Virtual Traffic Lights over a lossy V2V broadcast channel."""

__version__ = "0.1.0"
