"""HTTP service exposing the training/attack workflow."""

from .app import create_app

__all__ = ["create_app"]
