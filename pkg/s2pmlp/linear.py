"""Masked linear algebra between Alice and Bob with commodity-server help.

Each primitive runs three phases on the session:

  preprocess  CS draws masks R_a, R_b, the standard S_t and its shares r_a, r_b
  online      the owners exchange masked inputs and build additive result shares
  verify      both owners check VF_a + VF_b = S_t against random 0/1 vectors

s2pm produces shares of a matrix product, s2prip shares of row inner products.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np

from s2pmlp import config
from s2pmlp.errors import DimensionError, TamperDetectedError, UnsupportedDimensionError
from s2pmlp.logging import get_logger
from s2pmlp.matcore import RealMatrix, gen_rank_deficient, pad_inner, row_inner
from s2pmlp.metrics import VERIFY_CHECKS, timer
from s2pmlp.netsim import PartyId, Phase, Session
from s2pmlp.schemas import SplitConfig

logger = get_logger("linear")

Holders = Tuple[PartyId, PartyId]
ALICE_LEFT: Holders = (PartyId.ALICE, PartyId.BOB)
BOB_LEFT: Holders = (PartyId.BOB, PartyId.ALICE)


class SharePair(NamedTuple):
    """Additive shares of one matrix, ordered (Alice, Bob)"""
    at_alice: RealMatrix
    at_bob: RealMatrix

    def reconstruct(self) -> RealMatrix:
        return self.at_alice + self.at_bob


@dataclass(frozen=True)
class MaskBundle:
    """Preprocessing output delivered to one owner"""
    R: RealMatrix
    r: RealMatrix
    St: RealMatrix

    def payload(self) -> Tuple[RealMatrix, RealMatrix, RealMatrix]:
        return self.R, self.r, self.St


@dataclass(frozen=True)
class ShareOutcome:
    """One owner's result share and verification matrix"""
    V: RealMatrix
    VF: RealMatrix


class VerifyMode(str, Enum):
    MATMUL = "matmul"
    ROWDOT = "rowdot"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    failed_round: Optional[int] = None


def _matmul_mask(rows: int, cols: int, rng: np.random.Generator, scale: float) -> RealMatrix:
    # a single row or column already has rank 1, below the inner dimension
    if min(rows, cols) >= 2:
        return gen_rank_deficient(rows, cols, rng, scale)
    return rng.uniform(-scale, scale, size=(rows, cols))


def cs_preprocess_matmul(
    n: int, s: int, m: int, rng: np.random.Generator, scale: float
) -> Tuple[MaskBundle, MaskBundle]:
    """Rank-deficient masks for an n×s by s×m product"""
    if s < 2:
        raise UnsupportedDimensionError(f"inner dimension must be >= 2, got {s}")
    r_left = _matmul_mask(n, s, rng, scale)
    r_right = _matmul_mask(s, m, rng, scale)
    standard = r_left @ r_right
    share = rng.uniform(-scale, scale, size=(n, m))
    return (
        MaskBundle(r_left, share, standard),
        MaskBundle(r_right, standard - share, standard),
    )


def cs_preprocess_rowdot(
    n: int, m: int, rng: np.random.Generator, scale: float
) -> Tuple[MaskBundle, MaskBundle]:
    """Full masks for an n×m row inner product"""
    r_left = rng.uniform(-scale, scale, size=(n, m))
    r_right = rng.uniform(-scale, scale, size=(n, m))
    standard = row_inner(r_left, r_right)
    share = rng.uniform(-scale, scale, size=(n, 1))
    return (
        MaskBundle(r_left, share, standard),
        MaskBundle(r_right, standard - share, standard),
    )


def verify_shares(
    vf_self: RealMatrix,
    vf_other: RealMatrix,
    standard: RealMatrix,
    rounds: int,
    mode: VerifyMode,
    rng: np.random.Generator,
    tolerance: float = config.VERIFY_TOLERANCE,
) -> Verdict:
    """Randomised check that vf_self + vf_other equals the standard.

    Each round draws a 0/1 vector and rejects if any component of the
    projected difference exceeds the scaled tolerance.
    """
    diff = vf_self + vf_other - standard
    tau = tolerance * (
        1.0
        + np.linalg.norm(vf_self, np.inf)
        + np.linalg.norm(vf_other, np.inf)
        + np.linalg.norm(standard, np.inf)
    )
    selector_len = diff.shape[1] if mode == VerifyMode.MATMUL else diff.shape[0]
    for index in range(rounds):
        selector = rng.integers(0, 2, size=(selector_len, 1)).astype(np.float64)
        residual = diff @ selector if mode == VerifyMode.MATMUL else diff * selector
        if not np.all(np.isfinite(residual)) or np.any(np.abs(residual) > tau):
            return Verdict(False, index)
    return Verdict(True)


_Product = Callable[[RealMatrix, RealMatrix], RealMatrix]


def output_mask(
    left_hat: RealMatrix, right: RealMatrix, mode: VerifyMode, rng: np.random.Generator, scale: float
) -> RealMatrix:
    """Right holder's result share: uniform in ±scale times the magnitude of
    the product it hides, so the masked share keeps the product's precision"""
    product: _Product = np.matmul if mode == VerifyMode.MATMUL else row_inner
    magnitude = product(np.abs(left_hat), np.abs(right))
    magnitude = np.where(magnitude > 0, magnitude, 1.0)
    return rng.uniform(-scale, scale, size=magnitude.shape) * magnitude


def _masked_product(
    session: Session,
    protocol: str,
    left: RealMatrix,
    right: RealMatrix,
    cfg: SplitConfig,
    mode: VerifyMode,
    holders: Holders,
) -> Tuple[ShareOutcome, ShareOutcome]:
    """Run one masked product; outcomes come back ordered (Alice, Bob)"""
    label = session.instance(protocol)
    left_party, right_party = holders
    product: _Product = np.matmul if mode == VerifyMode.MATMUL else row_inner
    scale = cfg.mask_scale

    with timer(protocol):
        with session.phase(Phase.PREPROCESS):
            cs_rng = session.rng(PartyId.CS, label)
            if mode == VerifyMode.MATMUL:
                bundle_left, bundle_right = cs_preprocess_matmul(
                    left.shape[0], left.shape[1], right.shape[1], cs_rng, scale
                )
            else:
                bundle_left, bundle_right = cs_preprocess_rowdot(*left.shape, cs_rng, scale)
            session.send(PartyId.CS, left_party, bundle_left.payload())
            session.send(PartyId.CS, right_party, bundle_right.payload())

        with session.phase(Phase.ONLINE):
            # left holder disguises its input
            r_left, share_left, standard_left = session.recv(left_party, PartyId.CS)
            session.send(left_party, right_party, left + r_left)

            # right holder disguises its input
            r_right, share_right, standard_right = session.recv(right_party, PartyId.CS)
            session.send(right_party, left_party, right + r_right)

            # right holder draws its share and answers with (VF, T)
            left_hat = session.recv(right_party, left_party)
            v_right = output_mask(left_hat, right, mode, session.rng(right_party, label), scale)
            vf_right = v_right - product(left_hat, right)
            session.send(right_party, left_party, (vf_right, share_right - vf_right))

            # left holder completes its share
            right_hat = session.recv(left_party, right_party)
            vf_right_seen, t_seen = session.recv(left_party, right_party)
            masked = product(r_left, right_hat)
            v_left = t_seen + share_left - masked
            vf_left = v_left + masked
            session.send(left_party, right_party, vf_left)
            vf_left_seen = session.recv(right_party, left_party)

        with session.phase(Phase.VERIFY):
            for party, own, other, standard in (
                (left_party, vf_left, vf_right_seen, standard_left),
                (right_party, vf_right, vf_left_seen, standard_right),
            ):
                verdict = verify_shares(
                    own, other, standard, cfg.verify_rounds, mode,
                    session.rng(party, label, "verify"),
                )
                if not verdict.accepted:
                    VERIFY_CHECKS.labels(party=party.value, outcome="reject").inc()
                    logger.warning(
                        "verification_rejected",
                        protocol=label,
                        party=party.value,
                        round_index=verdict.failed_round,
                    )
                    raise TamperDetectedError(label, party.value, verdict.failed_round)
                VERIFY_CHECKS.labels(party=party.value, outcome="accept").inc()
                session.metrics.verifications += 1

    logger.debug("protocol_complete", protocol=label, shape=list(standard_left.shape))
    outcome_left = ShareOutcome(v_left, vf_left)
    outcome_right = ShareOutcome(v_right, vf_right)
    if left_party == PartyId.ALICE:
        return outcome_left, outcome_right
    return outcome_right, outcome_left


def s2pm(
    session: Session,
    a: RealMatrix,
    b: RealMatrix,
    cfg: SplitConfig,
    *,
    holders: Holders = ALICE_LEFT,
) -> Tuple[ShareOutcome, ShareOutcome]:
    """Shares of a @ b, where holders[0] owns a and holders[1] owns b.

    Returns (outcome at Alice, outcome at Bob).
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return _masked_product(session, "s2pm", a, b, cfg, VerifyMode.MATMUL, holders)


def s2prip(
    session: Session,
    a: RealMatrix,
    b: RealMatrix,
    cfg: SplitConfig,
    *,
    holders: Holders = ALICE_LEFT,
) -> Tuple[ShareOutcome, ShareOutcome]:
    """Shares of the row inner products of a and b (n×1)"""
    if a.ndim != 2 or a.shape != b.shape:
        raise DimensionError(f"row inner product needs equal shapes, got {a.shape} and {b.shape}")
    return _masked_product(session, "s2prip", a, b, cfg, VerifyMode.ROWDOT, holders)


def s2phm(
    session: Session,
    alice: Tuple[RealMatrix, RealMatrix],
    bob: Tuple[RealMatrix, RealMatrix],
    cfg: SplitConfig,
) -> SharePair:
    """Shares of (A1 + B1) @ (A2 + B2) from Alice's (A1, A2) and Bob's (B1, B2)"""
    a1, a2 = alice
    b1, b2 = bob
    if a1.shape != b1.shape or a2.shape != b2.shape:
        raise DimensionError("both owners must hold operands of the same shapes")
    cross_a, cross_b = s2pm(session, a1, b2, cfg, holders=ALICE_LEFT)
    swap_a, swap_b = s2pm(session, b1, a2, cfg, holders=BOB_LEFT)
    return SharePair(
        a1 @ a2 + cross_a.V + swap_a.V,
        b1 @ b2 + cross_b.V + swap_b.V,
    )


def secure_matmul(
    session: Session,
    alice: Tuple[RealMatrix, RealMatrix],
    bob: Tuple[RealMatrix, RealMatrix],
    cfg: SplitConfig,
) -> SharePair:
    """s2phm that also accepts an inner dimension of 1 by zero padding"""
    a1, a2 = pad_inner(*alice)
    b1, b2 = pad_inner(*bob)
    return s2phm(session, (a1, a2), (b1, b2), cfg)
