"""HTTP service exposing the prediction toolkit.

Run with ``uvicorn meshinsight.service:app``.
"""

from .app import create_app

app = create_app()

__all__ = ["app", "create_app"]
