"""HTTP/JSON service exposing the pipeline to the CLI and the web console."""

from .app import ApiConfig, ApiError, create_app, serve

__all__ = ["ApiConfig", "ApiError", "create_app", "serve"]
