"""Matrix value type, seeded randomness and the local reshaping and encoding
transforms used by the protocols.

Matrices are float64 numpy arrays with two axes. Every function here is pure:
it returns a new array and draws randomness only from the generator passed in.
"""
import hashlib
from typing import Tuple

import numpy as np
import numpy.typing as npt

from s2pmlp.errors import DimensionError, NonFiniteError, UnsupportedDimensionError

RealMatrix = npt.NDArray[np.float64]

# float64 significand width including the hidden bit
_SIGNIFICAND_BITS = 53


def as_matrix(value, *, name: str = "matrix") -> RealMatrix:
    """Copy value into a finite float64 matrix with two axes"""
    matrix = np.array(value, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return matrix


def derive_rng(seed: int, *labels: str) -> np.random.Generator:
    """Counter-based generator keyed by seed and labels.

    Identical seed and labels give an identical stream.
    """
    digest = hashlib.blake2b(
        "/".join([str(seed), *labels]).encode("utf-8"), digest_size=16
    ).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


def m2v(matrix: RealMatrix) -> RealMatrix:
    """Row-major flattening into an nm×1 column"""
    return np.array(matrix, dtype=np.float64).reshape(-1, 1)


def reshape(vector: RealMatrix, rows: int, cols: int) -> RealMatrix:
    """Row-major inverse of m2v"""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.size != rows * cols:
        raise DimensionError(f"cannot reshape {vector.size} entries into {rows}x{cols}")
    return vector.reshape(rows, cols).copy()


def diag_to_matrix(square: RealMatrix, rows: int, cols: int) -> RealMatrix:
    """Read the diagonal of an nm×nm matrix back into n×m, row-major"""
    square = np.asarray(square, dtype=np.float64)
    if square.ndim != 2 or square.shape[0] != square.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {square.shape}")
    if square.shape[0] != rows * cols:
        raise DimensionError(f"diagonal of length {square.shape[0]} does not fill {rows}x{cols}")
    return np.diag(square).reshape(rows, cols).copy()


def addcol(xa: RealMatrix, xb: RealMatrix) -> Tuple[RealMatrix, RealMatrix]:
    """Augment both shares with the bias column: ones for Alice, zeros for Bob"""
    if xa.shape != xb.shape:
        raise DimensionError(f"share shapes differ: {xa.shape} vs {xb.shape}")
    n = xa.shape[0]
    return (
        np.hstack([np.ones((n, 1)), xa]),
        np.hstack([np.zeros((n, 1)), xb]),
    )


def dtrans(weights: RealMatrix) -> RealMatrix:
    """Drop the bias row and transpose"""
    if weights.shape[0] < 2:
        raise DimensionError("weight matrix needs a bias row and at least one weight row")
    return weights[1:].T.copy()


def hsum(matrix: RealMatrix) -> RealMatrix:
    return matrix.sum(axis=1, keepdims=True)


def hcopy(column: RealMatrix, cols: int) -> RealMatrix:
    if column.ndim != 2 or column.shape[1] != 1:
        raise DimensionError(f"expected an n×1 column, got shape {column.shape}")
    if cols < 1:
        raise DimensionError("cols must be >= 1")
    return np.repeat(column, cols, axis=1)


def row_inner(a: RealMatrix, b: RealMatrix) -> RealMatrix:
    """Row inner product: n×m, n×m -> n×1"""
    return np.einsum("ij,ij->i", a, b)[:, None]


def pad_inner(left: RealMatrix, right: RealMatrix) -> Tuple[RealMatrix, RealMatrix]:
    """Pad a product of inner dimension 1 to inner dimension 2 with zeros.

    left @ right is unchanged.
    """
    if left.shape[1] != 1:
        return left, right
    return (
        np.hstack([left, np.zeros_like(left)]),
        np.vstack([right, np.zeros_like(right)]),
    )


def split_same_sign_rows(values: npt.ArrayLike, rho: int, rng: np.random.Generator) -> RealMatrix:
    """Split every value into rho parts of its own sign.

    Returns an N×rho matrix whose rows sum exactly to the inputs. The parts are
    integer multiples of the input's last significand bit, cut at uniform
    integer points, so every partial sum is representable.
    """
    if rho < 2:
        raise UnsupportedDimensionError("rho must be >= 2")
    flat = np.asarray(values, dtype=np.float64).ravel()
    fraction, exponent = np.frexp(np.abs(flat))
    units = np.ldexp(fraction, _SIGNIFICAND_BITS).astype(np.int64)

    cuts = rng.integers(0, units[:, None] + 1, size=(flat.size, rho - 1))
    cuts.sort(axis=1)
    bounds = np.concatenate(
        [np.zeros((flat.size, 1), dtype=np.int64), cuts, units[:, None]], axis=1
    )
    pieces = np.diff(bounds, axis=1).astype(np.float64)
    parts = np.ldexp(pieces, (exponent - _SIGNIFICAND_BITS)[:, None])
    return np.copysign(parts, flat[:, None])


def split_same_sign(x: float, rho: int, rng: np.random.Generator) -> npt.NDArray[np.float64]:
    return split_same_sign_rows([x], rho, rng)[0]


def ra2t(a: RealMatrix, rho: int, rng: np.random.Generator) -> RealMatrix:
    """Row i holds rho copies of the split vector of the i-th entry of a"""
    alpha = split_same_sign_rows(a, rho, rng)
    return np.tile(alpha, (1, rho))


def rb2t(b: RealMatrix, rho: int, rng: np.random.Generator) -> RealMatrix:
    """Row i holds the rho cyclic rotations of the split vector of b_i, shuffled.

    The rotations pair every index of the ra2t row with every index of this
    row exactly once, so the row dot product equals a_i * b_i.
    """
    beta = split_same_sign_rows(b, rho, rng)
    count = beta.shape[0]
    order = rng.permuted(np.tile(np.arange(rho), (count, 1)), axis=1)
    index = (np.arange(rho)[None, None, :] + order[:, :, None]) % rho
    rotated = beta[np.arange(count)[:, None, None], index]
    return rotated.reshape(count, rho * rho)


def _interleave(first: RealMatrix, second: RealMatrix) -> RealMatrix:
    out = np.empty((first.shape[0], 2 * first.shape[1]))
    out[:, 0::2] = first
    out[:, 1::2] = second
    return out


def drl_encode_alice(a: RealMatrix, rho: int, rng: np.random.Generator) -> Tuple[RealMatrix, float]:
    """p * (alpha_1, 1, alpha_2, 1, ...) per entry of a"""
    alpha = split_same_sign_rows(a, rho, rng)
    p = float(rng.uniform(0.5, 2.0))
    return p * _interleave(alpha, np.ones_like(alpha)), p


def drl_encode_bob(b: RealMatrix, rho: int, rng: np.random.Generator) -> Tuple[RealMatrix, float]:
    """q * (1, beta_1, 1, beta_2, ...) per entry of b"""
    beta = split_same_sign_rows(b, rho, rng)
    q = float(rng.uniform(0.5, 2.0))
    return q * _interleave(np.ones_like(beta), beta), q


def drl_encode(
    a: RealMatrix, b: RealMatrix, rho: int, rng: np.random.Generator
) -> Tuple[RealMatrix, RealMatrix, float, float]:
    """Sign-preserving encoding: row dot of the outputs is p*q*(a_i + b_i)"""
    if a.shape != b.shape:
        raise DimensionError(f"shapes differ: {a.shape} vs {b.shape}")
    t_a, p = drl_encode_alice(a, rho, rng)
    t_b, q = drl_encode_bob(b, rho, rng)
    return t_a, t_b, p, q


def gen_rank_deficient(rows: int, cols: int, rng: np.random.Generator, scale: float = 1.0) -> RealMatrix:
    """Random matrix of rank min(rows, cols) - 1 with entries in [-scale, scale]"""
    if min(rows, cols) < 2:
        raise UnsupportedDimensionError(
            f"rank-deficient mask needs both dims >= 2, got {rows}x{cols}"
        )
    transpose = rows > cols
    short, long = (cols, rows) if transpose else (rows, cols)

    basis = rng.uniform(-scale, scale, size=(short - 1, long))
    weights = rng.uniform(-1.0, 1.0, size=short - 1)
    weights /= np.abs(weights).sum()
    matrix = np.vstack([basis, weights @ basis])
    matrix = matrix[rng.permutation(short)][:, rng.permutation(long)]
    return matrix.T.copy() if transpose else matrix


def numerical_rank(matrix: RealMatrix, rel_tol: float = 1e-10) -> int:
    """Rank by Gaussian elimination with partial pivoting.

    Pivots at or below rel_tol * ||matrix||_inf count as zero.
    """
    work = np.array(matrix, dtype=np.float64)
    threshold = rel_tol * np.linalg.norm(work, np.inf)
    rows, cols = work.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot = rank + int(np.argmax(np.abs(work[rank:, col])))
        if abs(work[pivot, col]) <= threshold:
            continue
        work[[rank, pivot]] = work[[pivot, rank]]
        factors = work[rank + 1:, col] / work[rank, col]
        work[rank + 1:] -= np.outer(factors, work[rank])
        rank += 1
    return rank


def nonzero_uniform(shape: Tuple[int, ...], rng: np.random.Generator, low: float = 0.5, high: float = 2.0) -> RealMatrix:
    """Entries uniform on [-high, -low] ∪ [low, high]"""
    magnitude = rng.uniform(low, high, size=shape)
    sign = np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
    return magnitude * sign


def relu(matrix: RealMatrix) -> RealMatrix:
    return np.maximum(matrix, 0.0)


def relu_prime(matrix: RealMatrix) -> RealMatrix:
    # tie at 0 maps to 0
    return (matrix > 0).astype(np.float64)
