import asyncio
import queue
import uuid
from typing import Any, Callable, List, TypeVar

import structlog
from tenacity import Retrying, retry_if_exception_type, stop_after_delay, wait_exponential
from tenacity.stop import stop_base

from s2pmlp.errors import ProtocolAbortError

logger = structlog.get_logger()

T = TypeVar("T")


class stop_when(stop_base):
    """Stop retrying as soon as the predicate holds"""

    def __init__(self, predicate: Callable[[], bool]):
        self.predicate = predicate

    def __call__(self, retry_state) -> bool:
        return self.predicate()


def wait_for_message(
    channel: "queue.Queue[T]",
    *,
    timeout: float,
    is_closed: Callable[[], bool],
    poll_ms: int = 1,
    max_poll_ms: int = 50,
) -> T:
    """Blocking receive with exponential back-off polling.

    Raises ProtocolAbortError when the channel stays empty and the session is
    closed or the timeout expires.
    """
    try:
        return channel.get_nowait()
    except queue.Empty:
        pass

    retrying = Retrying(
        stop=stop_after_delay(timeout) | stop_when(is_closed),
        wait=wait_exponential(multiplier=poll_ms / 1000, max=max_poll_ms / 1000),
        retry=retry_if_exception_type(queue.Empty),
        reraise=True,
    )
    try:
        return retrying(channel.get_nowait)
    except queue.Empty:
        reason = "session closed" if is_closed() else "receive timed out"
        logger.warning("Receive aborted", reason=reason, timeout=timeout)
        raise ProtocolAbortError(reason) from None


# Parallel execution with bounded concurrency
async def execute_parallel(
    func: Callable[[Any], T],
    items: List[Any],
    max_concurrency: int = 4,
) -> List[T]:
    """Run a blocking function on multiple items in worker threads with bounded concurrency"""
    semaphore = asyncio.Semaphore(max_concurrency)

    async def _wrapped_func(item):
        async with semaphore:
            return await asyncio.to_thread(func, item)

    return await asyncio.gather(*(_wrapped_func(item) for item in items))


def new_session_id() -> str:
    """Generate a unique session ID for log correlation"""
    return uuid.uuid4().hex
