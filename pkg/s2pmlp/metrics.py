import time
from typing import Optional

from prometheus_client import Counter, Gauge, Histogram
from prometheus_fastapi_instrumentator import Instrumentator, metrics

MESSAGES_SENT = Counter(
    "s2p_messages_sent_total",
    "Directed messages sent between parties",
    ["sender", "receiver", "phase"],
)

BYTES_SENT = Counter(
    "s2p_bytes_sent_total",
    "Payload bytes sent between parties (8 bytes per element)",
    ["sender", "receiver", "phase"],
)

VERIFY_CHECKS = Counter(
    "s2p_verify_checks_total",
    "Result verification checks by outcome",
    ["party", "outcome"],
)

PROTOCOL_LATENCY = Histogram(
    "s2p_protocol_latency_seconds",
    "Wall time of protocol invocations",
    ["protocol"],
    buckets=[0.0001, 0.0005, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.5, 1, 5],
)

TRAINING_EPOCHS = Counter(
    "s2p_training_epochs_total",
    "Completed secure training epochs",
)

SESSIONS_OPEN = Gauge(
    "s2p_sessions_open",
    "Sessions currently open",
)

PROTOCOL_FAILURES = Counter(
    "s2p_protocol_failures_total",
    "Protocol invocations that raised, by error type",
    ["protocol", "error_type"],
)


class ProtocolTimer:
    """Wall time of one protocol invocation; failures are counted by error type"""

    def __init__(self, protocol: str):
        self.protocol = protocol
        self.start: Optional[float] = None

    def __enter__(self) -> "ProtocolTimer":
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start is None:
            return
        PROTOCOL_LATENCY.labels(protocol=self.protocol).observe(time.perf_counter() - self.start)
        if exc_type is not None:
            PROTOCOL_FAILURES.labels(protocol=self.protocol, error_type=exc_type.__name__).inc()


# Set up instrumentator for the client-node service
instrumentator = Instrumentator()
instrumentator.add(metrics.default())
instrumentator.add(metrics.requests())


def timer(protocol: str) -> ProtocolTimer:
    return ProtocolTimer(protocol)
