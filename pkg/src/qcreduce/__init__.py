"""Circuit length reduction over restricted discrete gate sets."""

__version__ = "0.1.0"
