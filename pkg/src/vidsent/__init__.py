"""Event recognition and sentence generation from object-detector output."""

__version__ = "0.1.0"
