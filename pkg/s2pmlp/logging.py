import logging
import sys
import time
from contextlib import contextmanager
from typing import Iterator, Optional, TextIO

import structlog

from s2pmlp import config

# Configure structlog for structured JSON logging
structlog.configure(
    processors=[
        structlog.stdlib.filter_by_level,
        structlog.contextvars.merge_contextvars,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.JSONRenderer(),
    ],
    logger_factory=structlog.stdlib.LoggerFactory(),
)


def get_logger(name: str = "s2pmlp"):
    """Get a configured structured logger"""
    return structlog.get_logger(name)


@contextmanager
def session_context(session_id: str) -> Iterator[None]:
    """Bind session_id to every log line emitted inside the block"""
    with structlog.contextvars.bound_contextvars(session_id=session_id):
        yield


def init_logging(level: Optional[str] = None, stream: Optional[TextIO] = None):
    log_level = (level or config.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, log_level, logging.INFO),
        format="%(message)s",
        stream=stream or sys.stdout,
    )


class NodeRequestMiddleware:
    """ASGI middleware for the client node.

    Every log line emitted while serving a request (protocol sessions
    included) carries its request_id; the id is taken from X-Request-ID or
    minted like a session id, and echoed back on the response.
    """

    HEADER = b"x-request-id"

    def __init__(self, app):
        self.app = app
        self.logger = get_logger("node")

    async def __call__(self, scope, receive, send):
        if scope["type"] != "http":
            return await self.app(scope, receive, send)

        request_id = next(
            (value.decode("latin1") for key, value in scope.get("headers", []) if key.lower() == self.HEADER),
            None,
        )
        if not request_id:
            from s2pmlp.utils import new_session_id
            request_id = new_session_id()

        async def send_with_id(message):
            if message["type"] == "http.response.start":
                headers = list(message.get("headers", []))
                headers.append((self.HEADER, request_id.encode("latin1")))
                message = {**message, "headers": headers}
            await send(message)

        endpoint = scope.get("path", "")
        start_time = time.perf_counter()
        with structlog.contextvars.bound_contextvars(request_id=request_id, endpoint=endpoint):
            self.logger.info("node_request_start", method=scope.get("method", ""))
            try:
                await self.app(scope, receive, send_with_id)
            except Exception as exc:
                self.logger.error("node_request_failed", error=str(exc), error_type=type(exc).__name__)
                raise
            finally:
                self.logger.info("node_request_end", duration=time.perf_counter() - start_time)
