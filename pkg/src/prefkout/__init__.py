"""Preferential-attachment k-out digraphs: samplers, exact laws and limit checks."""

__version__ = "0.1.0"

from .model import INFINITY, DomainError, ModelParams  # noqa: E402

__all__ = ["INFINITY", "DomainError", "ModelParams", "__version__"]
