"""Privacy amplification from Bell-inequality violation under no-signaling constraints."""

__version__ = "0.1.0"
