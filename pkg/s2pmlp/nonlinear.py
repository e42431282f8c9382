"""Exact nonlinear operators on additively shared matrices.

All operators reduce to s2prip over locally encoded inputs:
elementwise products via the split/rotation encoding, the ReLU derivative
via the sign-preserving encoding, reciprocals by scale collapse, and softmax
as a composition of the three.
"""
from typing import Optional, Tuple

import numpy as np

from s2pmlp.errors import DimensionError, ExpRangeError, SingularInputError
from s2pmlp.linear import ALICE_LEFT, BOB_LEFT, Holders, SharePair, s2prip
from s2pmlp.logging import get_logger
from s2pmlp.matcore import (
    RealMatrix,
    drl_encode_alice,
    drl_encode_bob,
    hcopy,
    hsum,
    nonzero_uniform,
    ra2t,
    rb2t,
    relu_prime,
    reshape,
)
from s2pmlp.netsim import PartyId, Session
from s2pmlp.schemas import SplitConfig

logger = get_logger("nonlinear")

# largest share magnitude accepted by the local exponential
EXP_LIMIT = 700.0


def _same_shape(*matrices: RealMatrix) -> Tuple[int, int]:
    shape = matrices[0].shape
    if len(shape) != 2 or any(m.shape != shape for m in matrices[1:]):
        raise DimensionError(f"operands must share one 2-D shape, got {[m.shape for m in matrices]}")
    return shape


def s2php(
    session: Session,
    a: RealMatrix,
    b: RealMatrix,
    cfg: SplitConfig,
    *,
    holders: Holders = ALICE_LEFT,
) -> SharePair:
    """Shares of a ⊙ b, where holders[0] owns a and holders[1] owns b"""
    n, m = _same_shape(a, b)
    label = session.instance("s2php")
    left_party, right_party = holders
    t_left = ra2t(a, cfg.rho, session.rng(left_party, label, "split"))
    t_right = rb2t(b, cfg.rho, session.rng(right_party, label, "split"))
    at_alice, at_bob = s2prip(session, t_left, t_right, cfg, holders=holders)
    return SharePair(reshape(at_alice.V, n, m), reshape(at_bob.V, n, m))


def s2phhp(
    session: Session,
    alice: Tuple[RealMatrix, RealMatrix],
    bob: Tuple[RealMatrix, RealMatrix],
    cfg: SplitConfig,
) -> SharePair:
    """Shares of (A1 + B1) ⊙ (A2 + B2)"""
    a1, a2 = alice
    b1, b2 = bob
    _same_shape(a1, a2, b1, b2)
    cross = s2php(session, a1, b2, cfg, holders=ALICE_LEFT)
    swap = s2php(session, b1, a2, cfg, holders=BOB_LEFT)
    return SharePair(
        a1 * a2 + cross.at_alice + swap.at_alice,
        b1 * b2 + cross.at_bob + swap.at_bob,
    )


def _scale_factor(share: RealMatrix, rng: np.random.Generator, grow_only: bool = False) -> RealMatrix:
    """Nonzero random factors of magnitude about 1 / |share|.

    With grow_only, entries already of magnitude >= 1 get a unit factor.
    """
    _, exponent = np.frexp(share)
    if grow_only:
        exponent = np.minimum(exponent, 0)
    return np.ldexp(nonzero_uniform(share.shape, rng), -np.clip(exponent, -1000, 1000))


def s2pscr(
    session: Session,
    a: RealMatrix,
    b: RealMatrix,
    cfg: SplitConfig,
    *,
    alice_scale: Optional[RealMatrix] = None,
) -> SharePair:
    """Shares of alice_scale / (a + b), elementwise; alice_scale defaults to 1.

    Alice and Bob scale by private nonzero P and Q sized to their own
    shares. Bob learns only P ⊙ Q ⊙ (a + b), inverts it locally, and a last
    product with Alice's P ⊙ alice_scale removes P. alice_scale lets Alice
    keep a reciprocal of huge or tiny inputs near magnitude 1.
    """
    shape = _same_shape(a, b)
    label = session.instance("s2pscr")
    p = _scale_factor(a, session.rng(PartyId.ALICE, label))
    q = _scale_factor(b, session.rng(PartyId.BOB, label), grow_only=True)

    first = s2php(session, p * a, q, cfg)
    second = s2php(session, q * b, p, cfg, holders=BOB_LEFT)
    session.send(PartyId.ALICE, PartyId.BOB, first.at_alice + second.at_alice)
    collapsed = session.recv(PartyId.BOB, PartyId.ALICE) + first.at_bob + second.at_bob

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inverse = q / collapsed
    if not np.all(np.isfinite(inverse)):
        logger.warning("reciprocal_singular", protocol=label)
        raise SingularInputError(f"{label}: reconstructed input has (near) zero entries")
    if alice_scale is not None:
        p = p * alice_scale
    return s2php(session, p, inverse, cfg)


def s2pdrl(session: Session, a: RealMatrix, b: RealMatrix, cfg: SplitConfig) -> SharePair:
    """relu'(a + b), revealed to both owners as the same 0/1 matrix"""
    n, m = _same_shape(a, b)
    label = session.instance("s2pdrl")
    t_a, _ = drl_encode_alice(a, cfg.rho, session.rng(PartyId.ALICE, label, "encode"))
    t_b, _ = drl_encode_bob(b, cfg.rho, session.rng(PartyId.BOB, label, "encode"))
    at_alice, at_bob = s2prip(session, t_a, t_b, cfg)

    scaled_a = reshape(at_alice.V, n, m)
    scaled_b = reshape(at_bob.V, n, m)
    session.send(PartyId.ALICE, PartyId.BOB, scaled_a)
    session.send(PartyId.BOB, PartyId.ALICE, scaled_b)
    return SharePair(
        relu_prime(scaled_a + session.recv(PartyId.ALICE, PartyId.BOB)),
        relu_prime(session.recv(PartyId.BOB, PartyId.ALICE) + scaled_b),
    )


def s2prl(session: Session, a: RealMatrix, b: RealMatrix, cfg: SplitConfig) -> SharePair:
    """Shares of relu(a + b)"""
    mask = s2pdrl(session, a, b, cfg)
    return SharePair(mask.at_alice * a, mask.at_bob * b)


def _check_exp_range(share: RealMatrix, party: PartyId):
    if np.max(np.abs(share)) > EXP_LIMIT:
        raise ExpRangeError(f"{party.value} share exceeds ±{EXP_LIMIT:g}")


def _unscale(
    session: Session,
    joint: SharePair,
    scaled_inverse: SharePair,
    scale: RealMatrix,
    cfg: SplitConfig,
) -> SharePair:
    """Shares of joint ⊙ hcopy(w / scale), where w is shared and scale is Alice's.

    Expands (J_a + J_b)(w_a + w_b) / scale into Alice's local term, one
    Alice-left product and one Bob-left product over both of Bob's terms
    side by side, so the cost stays that of a hybrid product.
    """
    _, m = joint.at_alice.shape
    inv_scale = hcopy(1.0 / scale, m)
    w_a = hcopy(scaled_inverse.at_alice, m)
    w_b = hcopy(scaled_inverse.at_bob, m)
    j_a, j_b = joint

    alice_left = s2php(session, j_a * inv_scale, w_b, cfg)
    bob_left = s2php(
        session,
        np.hstack([j_b, j_b * w_b]),
        np.hstack([w_a * inv_scale, inv_scale]),
        cfg,
        holders=BOB_LEFT,
    )
    return SharePair(
        j_a * w_a * inv_scale + alice_left.at_alice + bob_left.at_alice[:, :m] + bob_left.at_alice[:, m:],
        alice_left.at_bob + bob_left.at_bob[:, :m] + bob_left.at_bob[:, m:],
    )


def s2psm(session: Session, a: RealMatrix, b: RealMatrix, cfg: SplitConfig) -> SharePair:
    """Shares of the row-wise softmax of a + b.

    Softmax ignores per-row constants, so each owner shifts its own rows:
    Bob's exponentials sit in (0, 1] and Alice puts her row maxima near the
    top of the float range. That leaves room for the row maximum of a + b to
    fall short of the sum of the two share maxima by up to EXP_LIMIT, which
    Bob's spread guard ensures. Alice keeps the power of two nearest her row
    sums to herself, so the reciprocal and the final products stay near
    magnitude 1.
    """
    _, m = _same_shape(a, b)
    _check_exp_range(a, PartyId.ALICE)
    _check_exp_range(b, PartyId.BOB)
    b_shift = b - b.max(axis=1, keepdims=True)
    if np.min(b_shift) < -EXP_LIMIT:
        raise ExpRangeError(f"{PartyId.BOB.value} shares spread more than {EXP_LIMIT:g} within a row")
    exp_a = np.exp(a - a.max(axis=1, keepdims=True) + (EXP_LIMIT - np.log(m)))
    exp_b = np.exp(b_shift)

    joint = s2php(session, exp_a, exp_b, cfg)
    sum_a = hsum(joint.at_alice)
    scale = np.ldexp(1.0, np.maximum(np.frexp(sum_a)[1], 0))
    scaled_inverse = s2pscr(session, sum_a, hsum(joint.at_bob), cfg, alice_scale=scale)
    return _unscale(session, joint, scaled_inverse, scale, cfg)
