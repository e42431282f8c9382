"""Four-party logical runtime.

A Session owns one FIFO channel per ordered pair of parties, counts every
directed send as one round at 8 bytes per element, and charges wall time to
the current protocol phase. Parties are simulated in one process; protocols
are written as straight-line scripts that interleave the parties' steps.
"""
import json
import time
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from queue import Queue
from typing import Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from s2pmlp import config
from s2pmlp.errors import ProtocolAbortError, ReportWriteError, UsageError
from s2pmlp.logging import get_logger
from s2pmlp.matcore import RealMatrix, derive_rng
from s2pmlp.metrics import BYTES_SENT, MESSAGES_SENT, SESSIONS_OPEN
from s2pmlp.schemas import CommMetrics, NetProfile
from s2pmlp.utils import new_session_id, wait_for_message

logger = get_logger("netsim")

ELEMENT_BYTES = 8

Payload = Union[RealMatrix, Tuple[RealMatrix, ...]]


class PartyId(str, Enum):
    ALICE = "alice"
    BOB = "bob"
    CS = "cs"
    CLIENT = "client"


class Phase(str, Enum):
    PREPROCESS = "preprocess"
    ONLINE = "online"
    VERIFY = "verify"


@dataclass(frozen=True)
class Message:
    """One directed send as seen by the tamper hook"""
    seq: int
    sender: PartyId
    receiver: PartyId
    phase: Phase
    payload: Payload


@dataclass(frozen=True)
class TranscriptRecord:
    seq: int
    sender: PartyId
    receiver: PartyId
    shapes: List[Tuple[int, ...]]
    bytes: int
    phase: Phase

    def to_json(self) -> Dict:
        return {
            "seq": self.seq,
            "from": self.sender.value,
            "to": self.receiver.value,
            "shape": [list(s) for s in self.shapes],
            "bytes": self.bytes,
            "phase": self.phase.value,
        }


TamperHook = Callable[[Message], Payload]


def _freeze(payload: Payload) -> Payload:
    """Copy payload arrays and make the copies read-only"""
    def _one(matrix) -> RealMatrix:
        copy = np.array(matrix, dtype=np.float64)
        copy.setflags(write=False)
        return copy

    if isinstance(payload, tuple):
        return tuple(_one(m) for m in payload)
    return _one(payload)


def _elements(payload: Payload) -> int:
    if isinstance(payload, tuple):
        return sum(int(np.size(m)) for m in payload)
    return int(np.size(payload))


def _shapes(payload: Payload) -> List[Tuple[int, ...]]:
    if isinstance(payload, tuple):
        return [tuple(np.shape(m)) for m in payload]
    return [tuple(np.shape(payload))]


@dataclass(eq=False)
class Session:
    """Channels, accounting and randomness for one protocol run.

    The seed keys every party's generators; the clock is injectable so reports
    can be made time-independent.
    """
    seed: int = 0
    tamper: Optional[TamperHook] = None
    clock: Callable[[], float] = time.perf_counter
    recv_timeout: float = config.RECV_TIMEOUT
    session_id: str = field(default_factory=new_session_id)

    metrics: CommMetrics = field(init=False)
    transcript: List[TranscriptRecord] = field(init=False)
    closed: bool = field(init=False, default=False)

    def __post_init__(self):
        self.metrics = CommMetrics()
        self.transcript = []
        self._channels: Dict[Tuple[PartyId, PartyId], Queue] = {
            (src, dst): Queue() for src in PartyId for dst in PartyId if src != dst
        }
        self._instances: Counter = Counter()
        self._phases: List[Phase] = [Phase.ONLINE]
        self._mark = self.clock()
        SESSIONS_OPEN.inc()

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    # randomness

    def instance(self, protocol: str) -> str:
        """Fresh label for the next invocation of a protocol in this session"""
        self._instances[protocol] += 1
        return f"{protocol}#{self._instances[protocol]}"

    def rng(self, party: PartyId, label: str, role: str = "") -> np.random.Generator:
        return derive_rng(self.seed, party.value, label, role)

    # timing

    def _charge(self):
        now = self.clock()
        phase = self._phases[-1].value
        self.metrics.phase_times[phase] += now - self._mark
        self._mark = now

    @contextmanager
    def phase(self, phase: Phase) -> Iterator[None]:
        """Charge elapsed time inside the block to phase"""
        self._charge()
        self._phases.append(phase)
        try:
            yield
        finally:
            self._charge()
            self._phases.pop()

    @property
    def current_phase(self) -> Phase:
        return self._phases[-1]

    # transport

    def send(self, sender: PartyId, receiver: PartyId, payload: Payload) -> None:
        if sender == receiver:
            raise UsageError(f"{sender.value} cannot send to itself")
        if self.closed:
            raise ProtocolAbortError("session is closed")

        payload = _freeze(payload)
        phase = self.current_phase
        size = _elements(payload) * ELEMENT_BYTES
        seq = self.metrics.rounds

        self.metrics.rounds += 1
        self.metrics.bytes_sent += size
        self.metrics.phase_rounds[phase.value] += 1
        self.metrics.phase_bytes[phase.value] += size
        self.transcript.append(
            TranscriptRecord(seq, sender, receiver, _shapes(payload), size, phase)
        )
        MESSAGES_SENT.labels(sender=sender.value, receiver=receiver.value, phase=phase.value).inc()
        BYTES_SENT.labels(sender=sender.value, receiver=receiver.value, phase=phase.value).inc(size)

        if self.tamper is not None:
            payload = self.tamper(Message(seq, sender, receiver, phase, payload))
        self._channels[(sender, receiver)].put(payload)

    def recv(self, at: PartyId, sender: PartyId) -> Payload:
        """Oldest undelivered payload on (sender, at); blocks until one arrives"""
        if at == sender:
            raise UsageError(f"{at.value} cannot receive from itself")
        return wait_for_message(
            self._channels[(sender, at)],
            timeout=self.recv_timeout,
            is_closed=lambda: self.closed,
        )

    def close(self) -> None:
        if self.closed:
            return
        self._charge()
        self.closed = True
        SESSIONS_OPEN.dec()
        logger.debug(
            "session_closed",
            session_id=self.session_id,
            rounds=self.metrics.rounds,
            bytes_sent=self.metrics.bytes_sent,
        )

    # inspection

    def snapshot(self) -> CommMetrics:
        """Copy of the counters with time charged up to now"""
        self._charge()
        return self.metrics.model_copy(deep=True)

    def cs_isolated(self) -> bool:
        """CS only sends, and only while preprocessing"""
        for record in self.transcript:
            if record.receiver == PartyId.CS:
                return False
            if record.sender == PartyId.CS and record.phase != Phase.PREPROCESS:
                return False
        return True

    def dump_transcript(self, path: Union[str, Path]) -> None:
        """Write the transcript as JSON lines"""
        try:
            with open(path, "w", encoding="utf-8") as handle:
                for record in self.transcript:
                    handle.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
        except OSError as exc:
            raise ReportWriteError(str(exc)) from exc


def frozen_clock() -> float:
    return 0.0


def simulate_time(metrics: CommMetrics, profile: NetProfile) -> float:
    """rounds * latency + bits / bandwidth + local compute time"""
    return (
        metrics.rounds * profile.latency
        + metrics.bytes_sent * 8 / profile.bandwidth
        + sum(metrics.phase_times.values())
    )
