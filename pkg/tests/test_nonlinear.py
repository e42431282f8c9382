"""
Unit tests for exact nonlinear operators on shared matrices
"""
import numpy as np
import pytest

from s2pmlp import complexity
from s2pmlp.errors import DimensionError, ExpRangeError, SingularInputError
from s2pmlp.linear import SharePair
from s2pmlp.matcore import relu, relu_prime
from s2pmlp.nonlinear import s2pdrl, s2phhp, s2php, s2prl, s2pscr, s2psm
from s2pmlp.plain import softmax
from s2pmlp.schemas import SplitConfig

pytestmark = pytest.mark.unit

SHAPES = [(1, 1), (1, 6), (6, 1), (8, 5), (25, 25)]


def _shares(rng, shape, low=-5.0, high=5.0, scale=1e-2):
    """Shares of a uniform matrix with Bob holding a small mask"""
    value = rng.uniform(low, high, size=shape)
    mask = rng.uniform(-scale, scale, size=shape)
    return value - mask, mask


def _signed_magnitudes(rng, shape, low=1.0, high=10.0):
    return rng.uniform(low, high, size=shape) * np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)


class TestHadamard:
    """Test elementwise products"""

    @pytest.mark.parametrize("shape", SHAPES)
    def test_s2php(self, session, cfg, rng, shape):
        """Test shares of A ⊙ B to a few units in the last place"""
        a, b = _signed_magnitudes(rng, shape), _signed_magnitudes(rng, shape)
        result = s2php(session, a, b, cfg)
        np.testing.assert_allclose(result.reconstruct(), a * b, rtol=5e-15, atol=0)

    @pytest.mark.parametrize("rho", [2, 3, 4])
    def test_s2php_split_parameter(self, session, rng, rho):
        """Test larger rho gives the same product with rho² columns per entry"""
        cfg = SplitConfig(rho=rho, seed=1)
        a, b = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        np.testing.assert_allclose(s2php(session, a, b, cfg).reconstruct(), a * b, rtol=1e-11, atol=1e-15)
        assert session.metrics.bytes_sent == 8 * complexity.hadamard_elements(4, 4, rho)

    def test_s2php_rounds(self, session, cfg, rng):
        """Test one s2php costs 6 rounds"""
        s2php(session, rng.normal(size=(3, 3)), rng.normal(size=(3, 3)), cfg)
        assert session.metrics.rounds == 6

    def test_s2php_sign_and_zero(self, session, cfg):
        """Test zeros and mixed signs multiply exactly"""
        a = np.array([[0.0, -2.0, 3.0]])
        b = np.array([[5.0, 4.0, -0.5]])
        np.testing.assert_allclose(s2php(session, a, b, cfg).reconstruct(), [[0.0, -8.0, -1.5]], atol=1e-12)

    def test_s2php_shape_mismatch(self, session, cfg):
        """Test operands of different shapes are refused"""
        with pytest.raises(DimensionError):
            s2php(session, np.ones((2, 2)), np.ones((2, 3)), cfg)

    @pytest.mark.parametrize("shape", [(1, 1), (5, 3), (12, 12)])
    def test_s2phhp(self, session, cfg, rng, shape):
        """Test shares of (A1 + B1) ⊙ (A2 + B2) in 12 rounds"""
        a1, a2, b1, b2 = (rng.uniform(-3, 3, size=shape) for _ in range(4))
        result = s2phhp(session, (a1, a2), (b1, b2), cfg)
        np.testing.assert_allclose(result.reconstruct(), (a1 + b1) * (a2 + b2), rtol=1e-11, atol=1e-12)
        assert session.metrics.rounds == 12


class TestReciprocal:
    """Test the scale-collapse reciprocal"""

    @pytest.mark.parametrize("shape", SHAPES)
    def test_s2pscr(self, session, cfg, rng, shape):
        """Test shares of 1 / (A + B) over a wide magnitude range"""
        x = np.exp(rng.uniform(np.log(0.1), np.log(1e4), size=shape))
        x *= np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
        b = rng.uniform(-1, 1, size=shape)
        result = s2pscr(session, x - b, b, cfg)
        np.testing.assert_allclose(result.reconstruct(), 1.0 / x, rtol=1e-12)

    @pytest.mark.parametrize("exponent", [-8, -4, 0, 2])
    def test_s2pscr_small_inputs(self, session, cfg, rng, exponent):
        """Test relative error stays flat as inputs shrink and outputs grow"""
        x = _signed_magnitudes(rng, (6, 6)) * 10.0 ** exponent
        share = x * rng.uniform(-0.5, 0.5, size=x.shape)
        result = s2pscr(session, x - share, share, cfg).reconstruct()
        np.testing.assert_allclose(result, 1.0 / x, rtol=1e-12)

    def test_s2pscr_mixed_magnitudes(self, session, cfg, rng):
        """Test norm-wise error over entries spanning sixteen decades"""
        x = _signed_magnitudes(rng, (8, 8)) * 10.0 ** rng.integers(-8, 9, size=(8, 8))
        share = x * rng.uniform(-0.5, 0.5, size=x.shape)
        result = s2pscr(session, x - share, share, cfg).reconstruct()
        oracle = 1.0 / x
        assert np.max(np.abs(result - oracle)) <= 1e-12 * np.max(np.abs(oracle))

    def test_s2pscr_alice_scale(self, session, cfg, rng):
        """Test alice_scale multiplies the reciprocal entry by entry"""
        x = _signed_magnitudes(rng, (4, 3))
        scale = np.ldexp(1.0, rng.integers(-4, 21, size=(4, 3)))
        result = s2pscr(session, x - 0.25, np.full_like(x, 0.25), cfg, alice_scale=scale)
        np.testing.assert_allclose(result.reconstruct(), scale / x, rtol=1e-12)
        assert session.metrics.rounds == 19

    def test_s2pscr_rounds_and_bytes(self, session, cfg, rng):
        """Test 19 rounds and the closed-form byte count"""
        a, b = _shares(rng, (4, 4), 1.0, 5.0)
        s2pscr(session, a, b, cfg)
        assert session.metrics.rounds == 19
        assert session.metrics.bytes_sent == 8 * complexity.reciprocal_elements(4, 4, cfg.rho)

    def test_s2pscr_zero_input(self, session, cfg, mocker):
        """Test an exactly zero collapsed value raises SingularInputError"""
        zeros = SharePair(np.zeros((2, 2)), np.zeros((2, 2)))
        mocker.patch("s2pmlp.nonlinear.s2php", return_value=zeros)
        with pytest.raises(SingularInputError):
            s2pscr(session, np.ones((2, 2)), -np.ones((2, 2)), cfg)


class TestRelu:
    """Test the ReLU derivative and ReLU"""

    @pytest.mark.parametrize("shape", SHAPES)
    def test_s2pdrl_reveals_same_mask(self, session, cfg, rng, shape):
        """Test both owners obtain relu'(A + B)"""
        a, b = _shares(rng, shape, scale=1.0)
        result = s2pdrl(session, a, b, cfg)
        expected = relu_prime(a + b)
        np.testing.assert_array_equal(result.at_alice, expected)
        np.testing.assert_array_equal(result.at_bob, expected)

    def test_s2pdrl_rounds_and_bytes(self, session, cfg, rng):
        """Test 8 rounds and the closed-form byte count"""
        a, b = _shares(rng, (3, 5))
        s2pdrl(session, a, b, cfg)
        assert session.metrics.rounds == 8
        assert session.metrics.bytes_sent == 8 * complexity.drelu_elements(3, 5, cfg.rho)

    @pytest.mark.parametrize("shape", SHAPES)
    def test_s2prl(self, session, cfg, rng, shape):
        """Test shares of relu(A + B)"""
        a, b = _shares(rng, shape)
        result = s2prl(session, a, b, cfg)
        np.testing.assert_allclose(result.reconstruct(), relu(a + b), rtol=1e-14, atol=1e-15)
        assert session.metrics.rounds == 8


class TestSoftmax:
    """Test the row-wise softmax"""

    @pytest.mark.parametrize("shape", SHAPES)
    def test_s2psm(self, session, cfg, rng, shape):
        """Test shares of softmax(A + B)"""
        a, b = _shares(rng, shape)
        result = s2psm(session, a, b, cfg).reconstruct()
        np.testing.assert_allclose(result, softmax(a + b), atol=1e-11)
        np.testing.assert_allclose(result.sum(axis=1), np.ones(shape[0]), atol=1e-10)

    def test_s2psm_large_bob_share(self, session, cfg, rng):
        """Test both owners holding sizeable shares still reconstructs"""
        a = rng.uniform(-20, 20, size=(6, 4))
        b = rng.uniform(-3, 3, size=(6, 4))
        np.testing.assert_allclose(s2psm(session, a, b, cfg).reconstruct(), softmax(a + b), atol=1e-11)

    @pytest.mark.parametrize("k", [5.0, 20.0, 40.0, 300.0])
    def test_s2psm_opposite_sign_shares(self, session, cfg, k):
        """Test shares that cancel within a row give the softmax of the sum"""
        a = np.array([[k, -k], [1.0, 2.0]])
        b = np.array([[-k, k], [0.0, 0.0]])
        result = s2psm(session, a, b, cfg).reconstruct()
        np.testing.assert_allclose(result[0], [0.5, 0.5], atol=1e-11)
        np.testing.assert_allclose(result, softmax(a + b), atol=1e-11)

    @pytest.mark.parametrize("s", [50.0, 300.0, 699.0])
    def test_s2psm_maxima_in_different_columns(self, session, cfg, s):
        """Test share maxima in different columns far from the sum's maximum"""
        a = np.array([[s, s - 30.0, 0.0], [0.0, 1.0, 2.0]])
        b = np.array([[-s + 5.0, -s + 40.0, -s + 20.0], [2.0, 1.0, 0.0]])
        result = s2psm(session, a, b, cfg).reconstruct()
        np.testing.assert_allclose(result, softmax(a + b), atol=1e-11)
        np.testing.assert_allclose(result.sum(axis=1), [1.0, 1.0], atol=1e-10)

    @pytest.mark.parametrize("s", [50.0, 300.0, 699.0])
    def test_s2psm_swapped_roles(self, session, cfg, s):
        """Test Bob holding the large share with its maximum off the sum's"""
        a = np.array([[-s + 5.0, -s + 40.0, -s + 20.0]])
        b = np.array([[s, s - 30.0, 0.0]])
        result = s2psm(session, a, b, cfg).reconstruct()
        np.testing.assert_allclose(result, softmax(a + b), atol=1e-11)

    def test_s2psm_symmetric_large_shares_rejected(self, session, cfg):
        """Test a row spread beyond 700 in Bob's share raises ExpRangeError"""
        a = np.array([[699.0, -699.0]])
        with pytest.raises(ExpRangeError):
            s2psm(session, a, -a, cfg)

    @pytest.mark.parametrize("owner", ["alice", "bob"])
    def test_s2psm_share_just_past_limit(self, session, cfg, owner):
        """Test a single share of 701 raises ExpRangeError for either owner"""
        big = np.array([[701.0, 0.0]])
        small = np.zeros((1, 2))
        a, b = (big, small) if owner == "alice" else (small, big)
        with pytest.raises(ExpRangeError):
            s2psm(session, a, b, cfg)

    def test_s2psm_rounds_and_bytes(self, session, cfg, rng):
        """Test 37 rounds and the closed-form byte count"""
        a, b = _shares(rng, (5, 3))
        s2psm(session, a, b, cfg)
        assert session.metrics.rounds == 37
        assert session.metrics.bytes_sent == 8 * complexity.softmax_elements(5, 3, cfg.rho)

    def test_s2psm_exp_range(self, session, cfg):
        """Test a share beyond ±700 raises ExpRangeError"""
        with pytest.raises(ExpRangeError):
            s2psm(session, np.full((2, 2), 800.0), np.zeros((2, 2)), cfg)
