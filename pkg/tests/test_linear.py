"""
Unit tests for masked matrix products and result verification
"""
import numpy as np
import pytest
from prometheus_client import REGISTRY

from s2pmlp import complexity
from s2pmlp.errors import DimensionError, TamperDetectedError, UnsupportedDimensionError
from s2pmlp.linear import (
    BOB_LEFT,
    VerifyMode,
    cs_preprocess_matmul,
    output_mask,
    s2phm,
    s2pm,
    s2prip,
    secure_matmul,
    verify_shares,
)
from s2pmlp.matcore import numerical_rank, row_inner
from s2pmlp.netsim import PartyId, Session, frozen_clock
from s2pmlp.schemas import SplitConfig

pytestmark = pytest.mark.unit

SHAPES = [(1, 2, 1), (1, 3, 4), (4, 2, 1), (3, 3, 3), (7, 5, 2), (20, 20, 20)]


def _draw(rng, *shape):
    return rng.uniform(-10, 10, size=shape)


class TestS2PM:
    """Test shares of matrix products"""

    @pytest.mark.parametrize("n,s,m", SHAPES)
    def test_reconstructs_product(self, session, cfg, rng, n, s, m):
        """Test V_a + V_b = A B for several shapes"""
        a, b = _draw(rng, n, s), _draw(rng, s, m)
        out_a, out_b = s2pm(session, a, b, cfg)
        np.testing.assert_allclose(out_a.V + out_b.V, a @ b, rtol=1e-10, atol=1e-10)

    def test_bob_holds_left_operand(self, session, cfg, rng):
        """Test swapped holders still return (Alice, Bob) shares of the product"""
        a, b = _draw(rng, 4, 3), _draw(rng, 3, 5)
        out_a, out_b = s2pm(session, a, b, cfg, holders=BOB_LEFT)
        np.testing.assert_allclose(out_a.V + out_b.V, a @ b, rtol=1e-10, atol=1e-10)

    def test_round_and_byte_counts(self, session, cfg, rng):
        """Test 6 rounds and the closed-form byte count"""
        s2pm(session, _draw(rng, 5, 4), _draw(rng, 4, 3), cfg)
        assert session.metrics.rounds == 6
        assert session.metrics.bytes_sent == 8 * complexity.matmul_elements(5, 4, 3)
        assert session.metrics.phase_rounds == {"preprocess": 2, "online": 4, "verify": 0}
        assert session.metrics.verifications == 2

    def test_cs_only_preprocesses(self, session, cfg, rng):
        """Test the commodity server never receives and only sends offline"""
        s2pm(session, _draw(rng, 3, 3), _draw(rng, 3, 3), cfg)
        assert session.cs_isolated()

    def test_inner_dimension_one_rejected(self, session, cfg, rng):
        """Test an inner dimension of 1 is unsupported"""
        with pytest.raises(UnsupportedDimensionError):
            s2pm(session, _draw(rng, 3, 1), _draw(rng, 1, 3), cfg)

    def test_shape_mismatch(self, session, cfg, rng):
        """Test non-conforming operands raise DimensionError"""
        with pytest.raises(DimensionError):
            s2pm(session, _draw(rng, 3, 2), _draw(rng, 3, 2), cfg)

    def test_inputs_are_disguised(self, cfg, rng):
        """Test the masked inputs on the wire differ from the private inputs"""
        seen = {}

        def observe(message):
            seen[message.seq] = message.payload
            return message.payload

        a, b = _draw(rng, 4, 4), _draw(rng, 4, 4)
        with Session(seed=3, tamper=observe, clock=frozen_clock) as session:
            s2pm(session, a, b, cfg)
        assert not np.allclose(seen[2], a)
        assert not np.allclose(seen[3], b)

    def test_masks_are_rank_deficient(self, rng):
        """Test CS masks for square products lose one rank"""
        left, right = cs_preprocess_matmul(6, 6, 6, rng, 1e-2)
        assert numerical_rank(left.R) == 5
        assert numerical_rank(right.R) == 5
        np.testing.assert_allclose(left.r + right.r, left.St, atol=1e-15)

    def test_deterministic_under_seed(self, cfg, rng):
        """Test the same seed reproduces the same shares"""
        a, b = _draw(rng, 3, 3), _draw(rng, 3, 3)
        with Session(seed=11) as first, Session(seed=11) as second:
            out_first = s2pm(first, a, b, cfg)
            out_second = s2pm(second, a, b, cfg)
        np.testing.assert_array_equal(out_first[0].V, out_second[0].V)


class TestS2PRIP:
    """Test shares of row inner products"""

    @pytest.mark.parametrize("n,m", [(1, 1), (1, 5), (6, 1), (10, 4), (30, 30)])
    def test_reconstructs_row_inner(self, session, cfg, rng, n, m):
        """Test V_a + V_b equals the per-row dot products"""
        a, b = _draw(rng, n, m), _draw(rng, n, m)
        out_a, out_b = s2prip(session, a, b, cfg)
        assert out_a.V.shape == (n, 1)
        np.testing.assert_allclose(out_a.V + out_b.V, row_inner(a, b), rtol=1e-10, atol=1e-10)

    def test_round_and_byte_counts(self, session, cfg, rng):
        """Test 6 rounds and the closed-form byte count"""
        s2prip(session, _draw(rng, 8, 3), _draw(rng, 8, 3), cfg)
        assert session.metrics.rounds == 6
        assert session.metrics.bytes_sent == 8 * complexity.rowdot_elements(8, 3)

    def test_shape_mismatch(self, session, cfg, rng):
        """Test different shapes raise DimensionError"""
        with pytest.raises(DimensionError):
            s2prip(session, _draw(rng, 2, 3), _draw(rng, 3, 2), cfg)


class TestS2PHM:
    """Test products of additively shared operands"""

    @pytest.mark.parametrize("n,s,m", [(1, 2, 1), (3, 4, 2), (10, 10, 10)])
    def test_reconstructs_product(self, session, cfg, rng, n, s, m):
        """Test shares of (A1 + B1)(A2 + B2)"""
        a1, b1 = _draw(rng, n, s), _draw(rng, n, s)
        a2, b2 = _draw(rng, s, m), _draw(rng, s, m)
        result = s2phm(session, (a1, a2), (b1, b2), cfg)
        np.testing.assert_allclose(result.reconstruct(), (a1 + b1) @ (a2 + b2), rtol=1e-10, atol=1e-9)
        assert session.metrics.rounds == 12

    def test_secure_matmul_pads_inner_one(self, session, cfg, rng):
        """Test an inner dimension of 1 is padded instead of refused"""
        a1, b1 = _draw(rng, 4, 1), _draw(rng, 4, 1)
        a2, b2 = _draw(rng, 1, 3), _draw(rng, 1, 3)
        result = secure_matmul(session, (a1, a2), (b1, b2), cfg)
        np.testing.assert_allclose(result.reconstruct(), (a1 + b1) @ (a2 + b2), rtol=1e-10, atol=1e-10)

    def test_owner_shape_mismatch(self, session, cfg, rng):
        """Test owners must hold operands of equal shapes"""
        with pytest.raises(DimensionError):
            s2phm(session, (_draw(rng, 2, 2), _draw(rng, 2, 2)), (_draw(rng, 2, 3), _draw(rng, 2, 2)), cfg)


class TestVerifyShares:
    """Test the randomised share check"""

    def test_accepts_consistent_shares(self, rng):
        """Test VF_a + VF_b = S_t passes every round"""
        standard = rng.normal(size=(4, 4))
        vf = rng.normal(size=(4, 4))
        verdict = verify_shares(vf, standard - vf, standard, 10, VerifyMode.MATMUL, rng)
        assert verdict.accepted and verdict.failed_round is None

    def test_rejects_perturbed_shares(self, rng):
        """Test a dense perturbation is caught in the first rounds"""
        standard = rng.normal(size=(4, 4))
        vf = rng.normal(size=(4, 4))
        verdict = verify_shares(vf + 1.0, standard - vf, standard, 10, VerifyMode.MATMUL, rng)
        assert not verdict.accepted

    def test_rejects_non_finite(self, rng):
        """Test NaN in a verification matrix is a reject"""
        standard = np.zeros((3, 1))
        vf = np.array([[np.nan], [0.0], [0.0]])
        verdict = verify_shares(vf, standard, standard, 5, VerifyMode.ROWDOT, rng)
        assert not verdict.accepted


def _add_one_at(payload, position):
    matrix = np.array(payload, dtype=np.float64)
    matrix[position] += 1.0
    return matrix


@pytest.mark.slow
class TestVerificationMonteCarlo:
    """Test soundness and completeness over many seeded runs"""

    TRIALS = 1000

    @pytest.mark.parametrize("target", ["vf_right", "vf_left"])
    def test_tampered_vf_always_rejected(self, rng, target):
        """Test a unit perturbation of one VF entry is never accepted with l=20"""
        cfg = SplitConfig(verify_rounds=20, seed=1)
        accepted = 0
        for trial in range(self.TRIALS):
            a, b = _draw(rng, 3, 3), _draw(rng, 3, 3)
            position = tuple(rng.integers(0, 3, size=2))

            def tamper(message):
                # seq 4 carries (VF_b, T) to Alice, seq 5 carries VF_a to Bob
                if target == "vf_right" and message.seq == 4:
                    vf, t = message.payload
                    return _add_one_at(vf, position), t
                if target == "vf_left" and message.seq == 5:
                    return _add_one_at(message.payload, position)
                return message.payload

            with Session(seed=trial, tamper=tamper, clock=frozen_clock) as session:
                try:
                    s2pm(session, a, b, cfg)
                    accepted += 1
                except TamperDetectedError as exc:
                    assert exc.protocol == "s2pm#1"
        assert accepted == 0

    def test_tampered_t_rejected_by_both(self, rng):
        """Test corrupting T is caught"""
        cfg = SplitConfig(verify_rounds=20, seed=2)

        def tamper(message):
            if message.seq == 4:
                vf, t = message.payload
                return vf, _add_one_at(t, (0, 0))
            return message.payload

        with Session(seed=5, tamper=tamper, clock=frozen_clock) as session:
            with pytest.raises(TamperDetectedError):
                s2pm(session, _draw(rng, 3, 3), _draw(rng, 3, 3), cfg)

    def test_honest_runs_never_rejected(self, rng):
        """Test 1000 honest runs over varied shapes and scales all pass"""
        cfg = SplitConfig(verify_rounds=20, seed=3)
        for trial in range(self.TRIALS):
            n, s, m = (int(x) for x in rng.integers(1, 6, size=3))
            s = max(s, 2)
            scale = 10.0 ** rng.integers(-4, 5)
            a, b = _draw(rng, n, s) * scale, _draw(rng, s, m)
            with Session(seed=trial, clock=frozen_clock) as session:
                out_a, out_b = s2pm(session, a, b, cfg)
            np.testing.assert_allclose(out_a.V + out_b.V, a @ b, rtol=1e-9, atol=1e-9 * scale)

    def test_tampered_masked_input_passes_verification(self, rng, cfg):
        """Test a shifted masked input is outside what the check covers"""
        a, b = _draw(rng, 3, 3), _draw(rng, 3, 3)

        def tamper(message):
            if message.seq == 2:
                return _add_one_at(message.payload, (0, 0))
            return message.payload

        with Session(seed=9, tamper=tamper, clock=frozen_clock) as session:
            out_a, out_b = s2pm(session, a, b, cfg)
        assert not np.allclose(out_a.V + out_b.V, a @ b)

    def test_miss_probability(self):
        """Test the analytic miss probability of one s2pm with l=20"""
        assert complexity.miss_probability("s2pm", 20) == pytest.approx(4.0 ** -20)
        assert complexity.miss_probability("s2pm", 20) < 1e-11


class TestOutputMask:
    """Test the right holder's result share"""

    def test_scales_with_product(self, rng):
        """Test the share stays within ±scale of the hidden product's magnitude"""
        left = _draw(rng, 4, 3) * 1e6
        right = _draw(rng, 3, 2)
        mask = output_mask(left, right, VerifyMode.MATMUL, rng, 1e-2)
        assert np.all(np.abs(mask) <= 1e-2 * (np.abs(left) @ np.abs(right)))
        assert np.max(np.abs(mask)) > 1e-2

    def test_zero_product_magnitude(self, rng):
        """Test an all-zero operand still yields a ±scale share"""
        mask = output_mask(np.zeros((3, 2)), np.zeros((3, 2)), VerifyMode.ROWDOT, rng, 1e-2)
        assert mask.shape == (3, 1)
        assert np.all(np.abs(mask) <= 1e-2)


class TestProtocolMetrics:
    """Test protocol counters exported to Prometheus"""

    def test_tamper_counts_a_failure(self, rng):
        """Test a rejected run increments the failure counter for its protocol"""
        cfg = SplitConfig(verify_rounds=40, seed=1)
        labels = {"protocol": "s2pm", "error_type": "TamperDetectedError"}
        before = REGISTRY.get_sample_value("s2p_protocol_failures_total", labels) or 0.0

        def tamper(message):
            if message.seq == 5:
                return _add_one_at(message.payload, (0, 0))
            return message.payload

        with Session(seed=5, tamper=tamper, clock=frozen_clock) as session:
            with pytest.raises(TamperDetectedError):
                s2pm(session, _draw(rng, 3, 3), _draw(rng, 3, 3), cfg)
        assert REGISTRY.get_sample_value("s2p_protocol_failures_total", labels) == before + 1

    def test_honest_run_observes_latency(self, session, cfg, rng):
        """Test a completed run adds one latency observation"""
        labels = {"protocol": "s2prip"}
        before = REGISTRY.get_sample_value("s2p_protocol_latency_seconds_count", labels) or 0.0
        s2prip(session, _draw(rng, 2, 3), _draw(rng, 2, 3), cfg)
        assert REGISTRY.get_sample_value("s2p_protocol_latency_seconds_count", labels) == before + 1
