"""Protocol micro-benchmarks against plaintext oracles.

Inputs follow a significand scheme: ±1.a1…a15 × 10^e with e uniform in
[-delta, delta]. Reports carry measured traffic, simulated LAN/WAN time, the
closed-form traffic and the error against the oracle.
"""
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from s2pmlp import complexity, config
from s2pmlp.errors import UsageError
from s2pmlp.linear import s2phm, s2pm, s2prip
from s2pmlp.logging import get_logger, session_context
from s2pmlp.matcore import RealMatrix, derive_rng, dtrans, relu, relu_prime, row_inner
from s2pmlp.mlp import s2pg_mlp
from s2pmlp.netsim import Session, frozen_clock, simulate_time
from s2pmlp.nonlinear import s2pdrl, s2phhp, s2php, s2prl, s2pscr, s2psm
from s2pmlp.plain import softmax
from s2pmlp.schemas import NET_PROFILES, BenchReport, ScalingReport, SplitConfig, Traffic, VerifySummary

logger = get_logger("bench")

DEFAULT_DELTAS = (0, 2, 4, 6, 8)


def sample_significand(rng: np.random.Generator, shape: Tuple[int, int], delta: int) -> RealMatrix:
    """±1.a1…a15 × 10^e with e uniform in [-delta, delta]"""
    significand = 1.0 + rng.integers(0, 10**15, size=shape) / 1e15
    exponent = rng.integers(-delta, delta + 1, size=shape)
    sign = np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
    return sign * significand * np.power(10.0, exponent)


class _Inputs:
    """Draws bench operands and additive shares of them"""

    def __init__(self, rng: np.random.Generator, delta: int, scale: float):
        self.rng = rng
        self.delta = delta
        self.scale = scale

    def draw(self, rows: int, cols: int) -> RealMatrix:
        return sample_significand(self.rng, (rows, cols), self.delta)

    def shared(self, rows: int, cols: int, relative: bool = False) -> Tuple[RealMatrix, RealMatrix]:
        """Additive shares of a fresh draw.

        relative=True sizes the mask to each value, keeping the shares free of
        cancellation for protocols that are sensitive to it.
        """
        value = self.draw(rows, cols)
        if relative:
            mask = value * self.rng.uniform(-0.5, 0.5, size=(rows, cols))
        else:
            mask = self.rng.uniform(-self.scale, self.scale, size=(rows, cols))
        return value - mask, mask


Runner = Callable[[Session, _Inputs, int, SplitConfig], Tuple[RealMatrix, RealMatrix]]


def _bench_s2pm(session, inputs, dim, cfg):
    a, b = inputs.draw(dim, dim), inputs.draw(dim, dim)
    out_a, out_b = s2pm(session, a, b, cfg)
    return out_a.V + out_b.V, a @ b


def _bench_s2prip(session, inputs, dim, cfg):
    a, b = inputs.draw(dim, dim), inputs.draw(dim, dim)
    out_a, out_b = s2prip(session, a, b, cfg)
    return out_a.V + out_b.V, row_inner(a, b)


def _bench_s2phm(session, inputs, dim, cfg):
    a1, a2, b1, b2 = (inputs.draw(dim, dim) for _ in range(4))
    result = s2phm(session, (a1, a2), (b1, b2), cfg)
    return result.reconstruct(), (a1 + b1) @ (a2 + b2)


def _bench_s2php(session, inputs, dim, cfg):
    a, b = inputs.draw(dim, dim), inputs.draw(dim, dim)
    return s2php(session, a, b, cfg).reconstruct(), a * b


def _bench_s2phhp(session, inputs, dim, cfg):
    a1, a2, b1, b2 = (inputs.draw(dim, dim) for _ in range(4))
    result = s2phhp(session, (a1, a2), (b1, b2), cfg)
    return result.reconstruct(), (a1 + b1) * (a2 + b2)


def _bench_s2pscr(session, inputs, dim, cfg):
    a, b = inputs.shared(dim, dim, relative=True)
    return s2pscr(session, a, b, cfg).reconstruct(), 1.0 / (a + b)


def _bench_s2pdrl(session, inputs, dim, cfg):
    a, b = inputs.shared(dim, dim)
    return s2pdrl(session, a, b, cfg).at_alice, relu_prime(a + b)


def _bench_s2prl(session, inputs, dim, cfg):
    a, b = inputs.shared(dim, dim)
    return s2prl(session, a, b, cfg).reconstruct(), relu(a + b)


def _bench_s2psm(session, inputs, dim, cfg):
    # significands stay below 2, so shares fit the ±700 exponent guard up to delta 2
    a, b = inputs.shared(dim, dim, relative=True)
    return s2psm(session, a, b, cfg).reconstruct(), softmax(a + b)


def _bench_s2pg(session, inputs, dim, cfg):
    g_a, g_b = inputs.shared(dim, dim)
    w_a, w_b = inputs.shared(dim + 1, dim)
    x_a, x_b = inputs.shared(dim, dim)
    result = s2pg_mlp(session, w_a, w_b, g_a, g_b, x_a, x_b, cfg)
    oracle = ((g_a + g_b) @ dtrans(w_a + w_b)) * relu_prime(x_a + x_b)
    return result.reconstruct(), oracle


BENCHES: Dict[str, Runner] = {
    "s2pm": _bench_s2pm,
    "s2prip": _bench_s2prip,
    "s2phm": _bench_s2phm,
    "s2php": _bench_s2php,
    "s2phhp": _bench_s2phhp,
    "s2pscr": _bench_s2pscr,
    "s2pdrl": _bench_s2pdrl,
    "s2prl": _bench_s2prl,
    "s2psm": _bench_s2psm,
    "s2pg": _bench_s2pg,
}

# protocols built on s2pm need an inner dimension of at least 2
_MATMUL_BASED = {"s2pm", "s2phm", "s2pg"}


def max_relative_error(result: RealMatrix, oracle: RealMatrix) -> float:
    """Element-wise max relative error; absolute error where the oracle is 0"""
    error = np.abs(result - oracle)
    scale = np.abs(oracle)
    relative = np.where(scale > 0, error / np.where(scale > 0, scale, 1.0), error)
    return float(np.max(relative))


def normwise_relative_error(result: RealMatrix, oracle: RealMatrix) -> float:
    scale = float(np.max(np.abs(oracle)))
    error = float(np.max(np.abs(result - oracle)))
    return error / scale if scale > 0 else error


def run_bench(
    protocol: str,
    dim: int,
    rho: int = config.DEFAULT_RHO,
    verify_rounds: int = config.DEFAULT_VERIFY_ROUNDS,
    seed: int = config.DEFAULT_SEED,
    delta: int = 4,
    mask_scale: float = config.DEFAULT_MASK_SCALE,
    clock: Callable[[], float] = frozen_clock,
) -> BenchReport:
    """Run one protocol on seeded square dim×dim inputs"""
    if protocol not in BENCHES:
        raise UsageError(f"unknown protocol {protocol!r}; expected one of {sorted(BENCHES)}")
    if dim < 1:
        raise UsageError("dim must be >= 1")
    if protocol in _MATMUL_BASED and dim < 2:
        raise UsageError(f"{protocol} needs dim >= 2 for rank-deficient masks")
    if delta < 0:
        raise UsageError("delta must be >= 0")

    cfg = SplitConfig(rho=rho, verify_rounds=verify_rounds, mask_scale=mask_scale, seed=seed)
    inputs = _Inputs(derive_rng(seed, "bench-inputs", protocol), delta, mask_scale)
    with Session(seed=seed, clock=clock) as session, session_context(session.session_id):
        result, oracle = BENCHES[protocol](session, inputs, dim, cfg)
        metrics = session.snapshot()

    compute = sum(metrics.phase_times.values())
    report = BenchReport(
        protocol=protocol,
        dims=[dim, dim],
        rho=rho,
        delta=delta,
        seed=seed,
        mask_scale=mask_scale,
        metrics=metrics,
        simulated={name: simulate_time(metrics, profile) for name, profile in NET_PROFILES.items()},
        verify_share=metrics.phase_times["verify"] / compute if compute > 0 else 0.0,
        mre=max_relative_error(result, oracle),
        nre=normwise_relative_error(result, oracle),
        verify=VerifySummary(
            accepted=True,
            rounds=verify_rounds,
            checks=metrics.verifications,
            miss_probability=complexity.miss_probability(protocol, verify_rounds),
        ),
        analytic=Traffic(
            rounds=complexity.PROTOCOL_ROUNDS[protocol],
            bytes=complexity.expected_bytes(protocol, dim, rho),
        ),
    )
    logger.info(
        "bench_complete",
        protocol=protocol,
        dim=dim,
        rounds=metrics.rounds,
        bytes_sent=metrics.bytes_sent,
        mre=report.mre,
    )
    return report


def run_precision_sweep(
    protocol: str,
    dim: int,
    deltas: Sequence[int] = DEFAULT_DELTAS,
    **kwargs,
) -> List[BenchReport]:
    return [run_bench(protocol, dim, delta=delta, **kwargs) for delta in deltas]


def run_scaling(
    protocol: str,
    dims: Sequence[int],
    **kwargs,
) -> ScalingReport:
    """Least-squares fit of bytes against matrix area"""
    if len(dims) < 2:
        raise UsageError("scaling needs at least two dims")
    reports = [run_bench(protocol, dim, **kwargs) for dim in dims]
    areas = np.array([dim * dim for dim in dims], dtype=np.float64)
    traffic = np.array([r.metrics.bytes_sent for r in reports], dtype=np.float64)
    slope, intercept = np.polyfit(areas, traffic, 1)
    fitted = slope * areas + intercept
    total = float(np.sum((traffic - traffic.mean()) ** 2))
    residual = float(np.sum((traffic - fitted) ** 2))
    return ScalingReport(
        protocol=protocol,
        dims=list(dims),
        areas=[int(a) for a in areas],
        bytes=[int(b) for b in traffic],
        slope=float(slope),
        intercept=float(intercept),
        r_squared=1.0 - residual / total if total > 0 else 1.0,
    )
