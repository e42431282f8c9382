"""Closed-form traffic of every protocol.

Element counts assume 8-byte reals; CS distributions are included. Bench
reports compare these against the counters of the session.
"""
from typing import Callable, Dict, Sequence

from s2pmlp.errors import UsageError
from s2pmlp.netsim import ELEMENT_BYTES

PROTOCOL_ROUNDS: Dict[str, int] = {
    "s2pm": 6,
    "s2prip": 6,
    "s2phm": 12,
    "s2php": 6,
    "s2phhp": 12,
    "s2pscr": 19,
    "s2pdrl": 8,
    "s2prl": 8,
    "s2psm": 37,
    "s2pg": 20,
}

# verified masked-product primitives inside each protocol
PRIMITIVES: Dict[str, int] = {
    "s2pm": 1,
    "s2prip": 1,
    "s2phm": 2,
    "s2php": 1,
    "s2phhp": 2,
    "s2pscr": 3,
    "s2pdrl": 1,
    "s2prl": 1,
    "s2psm": 6,
    "s2pg": 3,
}


def matmul_elements(n: int, s: int, m: int) -> int:
    # CS: (R_a, r_a, S_t) + (R_b, r_b, S_t); online: Â, B̂, (VF_b, T), VF_a
    return 2 * n * s + 2 * s * m + 7 * n * m


def rowdot_elements(n: int, m: int) -> int:
    return 4 * n * m + 7 * n


def hadamard_elements(n: int, m: int, rho: int) -> int:
    return rowdot_elements(n * m, rho * rho)


def drelu_elements(n: int, m: int, rho: int) -> int:
    return rowdot_elements(n * m, 2 * rho) + 2 * n * m


def reciprocal_elements(n: int, m: int, rho: int) -> int:
    return 3 * hadamard_elements(n, m, rho) + n * m


def softmax_elements(n: int, m: int, rho: int) -> int:
    # joint exponentials, row-sum reciprocal, then the rescaling products:
    # one Alice-left n×m and one Bob-left n×2m
    return (
        hadamard_elements(n, m, rho)
        + reciprocal_elements(n, 1, rho)
        + hadamard_elements(n, m, rho)
        + hadamard_elements(n, 2 * m, rho)
    )


def hybrid_matmul_elements(n: int, s: int, m: int) -> int:
    return 2 * matmul_elements(n, s, m)


def gradient_elements(n: int, d_next: int, d: int, rho: int) -> int:
    """s2pg for G (n×d_next), W ((d+1)×d_next), X (n×d)"""
    return drelu_elements(n, d, rho) + hybrid_matmul_elements(n, d_next, d)


_SQUARE_ELEMENTS: Dict[str, Callable[[int, int], int]] = {
    "s2pm": lambda d, rho: matmul_elements(d, d, d),
    "s2prip": lambda d, rho: rowdot_elements(d, d),
    "s2phm": lambda d, rho: hybrid_matmul_elements(d, d, d),
    "s2php": lambda d, rho: hadamard_elements(d, d, rho),
    "s2phhp": lambda d, rho: 2 * hadamard_elements(d, d, rho),
    "s2pscr": lambda d, rho: reciprocal_elements(d, d, rho),
    "s2pdrl": lambda d, rho: drelu_elements(d, d, rho),
    "s2prl": lambda d, rho: drelu_elements(d, d, rho),
    "s2psm": lambda d, rho: softmax_elements(d, d, rho),
    "s2pg": lambda d, rho: gradient_elements(d, d, d, rho),
}


def expected_bytes(protocol: str, dim: int, rho: int) -> int:
    """Bytes of one run on square dim×dim operands"""
    if protocol not in _SQUARE_ELEMENTS:
        raise UsageError(f"unknown protocol {protocol!r}")
    return ELEMENT_BYTES * _SQUARE_ELEMENTS[protocol](dim, rho)


def miss_probability(protocol: str, verify_rounds: int) -> float:
    """Chance that tampering survives every check of one run"""
    if protocol not in PRIMITIVES:
        raise UsageError(f"unknown protocol {protocol!r}")
    return 4.0 ** (-verify_rounds * PRIMITIVES[protocol])


def mlp_predict_rounds(layers: int) -> int:
    return (
        layers * PROTOCOL_ROUNDS["s2phm"]
        + (layers - 1) * PROTOCOL_ROUNDS["s2prl"]
        + PROTOCOL_ROUNDS["s2psm"]
    )


def mlp_batch_rounds(layers: int) -> int:
    """Forward pass, hidden-layer gradients and one hybrid product per weight update"""
    return (
        mlp_predict_rounds(layers)
        + (layers - 1) * PROTOCOL_ROUNDS["s2pg"]
        + layers * PROTOCOL_ROUNDS["s2phm"]
    )


def mlp_predict_bytes(batch: int, dims: Sequence[int], rho: int) -> int:
    """Bytes of one secure forward pass over a batch; inner dims of 1 are padded to 2"""
    elements = 0
    for index in range(1, len(dims)):
        inner = max(dims[index - 1] + 1, 2)
        elements += hybrid_matmul_elements(batch, inner, dims[index])
        if index < len(dims) - 1:
            elements += drelu_elements(batch, dims[index], rho)
    elements += softmax_elements(batch, dims[-1], rho)
    return ELEMENT_BYTES * elements
