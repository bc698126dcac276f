"""Double KMS states, Calderon projectors and flat extension on a discretized horizon model."""

__version__ = "0.1.0"
