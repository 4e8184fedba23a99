"""HTTP service exposing database construction, training, reduction,
verification, benchmarking, and raw unitary lookup."""

from .app import create_app

__all__ = ["create_app"]
