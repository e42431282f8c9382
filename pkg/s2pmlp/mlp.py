"""Secure two-party MLP over vertically partitioned data.

Alice and Bob hold additive shares of the input, of every weight matrix and
of every intermediate. Layer l computes X^(l) = Z^(l-1) Ŵ^(l) with s2phm,
hidden activations use s2prl and the output layer s2psm. Backward
propagation computes every hidden gradient with s2pg_mlp on the pre-update
weights, then updates each layer with one more s2phm.
"""
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from s2pmlp.errors import DimensionError, FormatError, ReportWriteError, UsageError
from s2pmlp.linear import SharePair, secure_matmul
from s2pmlp.logging import get_logger
from s2pmlp.matcore import RealMatrix, addcol, derive_rng, dtrans
from s2pmlp.metrics import TRAINING_EPOCHS
from s2pmlp.netsim import Session
from s2pmlp.nonlinear import s2pdrl, s2prl, s2psm
from s2pmlp.plain import PlainModel, batch_slices, check_labels, check_layers, epoch_order, xavier_init
from s2pmlp.schemas import ColumnStats, LayerPayload, MLPConfig, ModelShareFile, SplitConfig

logger = get_logger("mlp")


@dataclass
class ModelShares:
    """One party's weight shares, layer l of shape (d_{l-1}+1)×d_l"""
    layers: List[RealMatrix]
    columns: Optional[ColumnStats] = None

    def copy(self) -> "ModelShares":
        return ModelShares([w.copy() for w in self.layers], self.columns)


@dataclass
class LayerCache:
    """Shares of X^(l) and of Z^(l) (Z^(0) is the augmented input)"""
    X_star: List[RealMatrix] = field(default_factory=list)
    Z_star: List[RealMatrix] = field(default_factory=list)


class ForwardPass(NamedTuple):
    y_alice: RealMatrix
    y_bob: RealMatrix
    cache_alice: LayerCache
    cache_bob: LayerCache


@dataclass(frozen=True)
class EpochEvent:
    """State handed to the training hook after every epoch"""
    epoch: int
    alice: ModelShares
    bob: ModelShares
    loss_terms: List[Tuple[RealMatrix, RealMatrix, RealMatrix]]


EpochHook = Callable[[EpochEvent], None]


def reconstruct(alice: ModelShares, bob: ModelShares) -> PlainModel:
    return PlainModel([wa + wb for wa, wb in zip(alice.layers, bob.layers)])


def share_model(model: PlainModel, split: SplitConfig) -> Tuple[ModelShares, ModelShares]:
    """Alice gets W - mask, Bob gets the mask"""
    rng = derive_rng(split.seed, "init-mask")
    alice, bob = [], []
    for weights in model.layers:
        mask = rng.uniform(-split.mask_scale, split.mask_scale, size=weights.shape)
        alice.append(weights - mask)
        bob.append(mask)
    return ModelShares(alice), ModelShares(bob)


def init_model(cfg: MLPConfig) -> Tuple[PlainModel, ModelShares, ModelShares]:
    """Plaintext init and its shares, so both trainers start from the same weights"""
    plain = xavier_init(cfg)
    alice, bob = share_model(plain, cfg.split)
    return plain, alice, bob


def embed_inputs(xa: RealMatrix, xb: RealMatrix, width: int) -> Tuple[RealMatrix, RealMatrix]:
    """Turn vertical halves into additive shares of the full feature matrix.

    Inputs that already have the full width are taken as additive shares.
    """
    if xa.shape[0] != xb.shape[0]:
        raise DimensionError(f"row counts differ: {xa.shape[0]} vs {xb.shape[0]}")
    if xa.shape[1] == xb.shape[1] == width:
        return xa, xb
    if xa.shape[1] + xb.shape[1] != width:
        raise DimensionError(
            f"feature halves of widths {xa.shape[1]} and {xb.shape[1]} do not make {width}"
        )
    rows = xa.shape[0]
    return (
        np.hstack([xa, np.zeros((rows, xb.shape[1]))]),
        np.hstack([np.zeros((rows, xa.shape[1])), xb]),
    )


def s2pg_mlp(
    session: Session,
    w_next_alice: RealMatrix,
    w_next_bob: RealMatrix,
    g_next_alice: RealMatrix,
    g_next_bob: RealMatrix,
    x_alice: RealMatrix,
    x_bob: RealMatrix,
    cfg: SplitConfig,
) -> SharePair:
    """Shares of (G^(l+1) dtrans(Ŵ^(l+1))) ⊙ relu'(X^(l))"""
    gate = s2pdrl(session, x_alice, x_bob, cfg)
    back = secure_matmul(
        session,
        (g_next_alice, dtrans(w_next_alice)),
        (g_next_bob, dtrans(w_next_bob)),
        cfg,
    )
    return SharePair(gate.at_alice * back.at_alice, gate.at_bob * back.at_bob)


def s2pmlp_fp(
    session: Session,
    dims: Sequence[int],
    z_alice: RealMatrix,
    z_bob: RealMatrix,
    w_alice: ModelShares,
    w_bob: ModelShares,
    cfg: SplitConfig,
) -> ForwardPass:
    """Forward pass over augmented input shares"""
    check_layers(dims, w_alice.layers)
    check_layers(dims, w_bob.layers)
    if z_alice.shape[1] != dims[0] + 1 or z_bob.shape != z_alice.shape:
        raise DimensionError(f"augmented input must be n×{dims[0] + 1}")

    cache_alice = LayerCache(Z_star=[z_alice])
    cache_bob = LayerCache(Z_star=[z_bob])
    last = len(dims) - 2
    for index in range(len(dims) - 1):
        x = secure_matmul(
            session,
            (z_alice, w_alice.layers[index]),
            (z_bob, w_bob.layers[index]),
            cfg,
        )
        cache_alice.X_star.append(x.at_alice)
        cache_bob.X_star.append(x.at_bob)
        if index == last:
            y = s2psm(session, x.at_alice, x.at_bob, cfg)
            return ForwardPass(y.at_alice, y.at_bob, cache_alice, cache_bob)
        y = s2prl(session, x.at_alice, x.at_bob, cfg)
        z_alice, z_bob = addcol(y.at_alice, y.at_bob)
        cache_alice.Z_star.append(z_alice)
        cache_bob.Z_star.append(z_bob)
    raise DimensionError("network needs at least one layer")


def s2pmlp_bp(
    session: Session,
    dims: Sequence[int],
    y_alice: RealMatrix,
    y_bob: RealMatrix,
    onehot: RealMatrix,
    cache_alice: LayerCache,
    cache_bob: LayerCache,
    w_alice: ModelShares,
    w_bob: ModelShares,
    lr: float,
    cfg: SplitConfig,
) -> Tuple[ModelShares, ModelShares]:
    """One gradient step; returns new shares and leaves the inputs untouched"""
    count = len(dims) - 1
    g_alice: List[Optional[RealMatrix]] = [None] * count
    g_bob: List[Optional[RealMatrix]] = [None] * count
    # labels are public; Alice carries the label term
    g_alice[-1] = y_alice - onehot
    g_bob[-1] = y_bob
    for index in range(count - 2, -1, -1):
        g = s2pg_mlp(
            session,
            w_alice.layers[index + 1],
            w_bob.layers[index + 1],
            g_alice[index + 1],
            g_bob[index + 1],
            cache_alice.X_star[index],
            cache_bob.X_star[index],
            cfg,
        )
        g_alice[index], g_bob[index] = g

    new_alice, new_bob = [], []
    for index in range(count):
        step = secure_matmul(
            session,
            (cache_alice.Z_star[index].T, g_alice[index]),
            (cache_bob.Z_star[index].T, g_bob[index]),
            cfg,
        )
        new_alice.append(w_alice.layers[index] - lr * step.at_alice)
        new_bob.append(w_bob.layers[index] - lr * step.at_bob)
    return ModelShares(new_alice, w_alice.columns), ModelShares(new_bob, w_bob.columns)


def s2pmlp_train(
    session: Session,
    cfg: MLPConfig,
    x_alice: RealMatrix,
    x_bob: RealMatrix,
    onehot: RealMatrix,
    init: Optional[Tuple[ModelShares, ModelShares]] = None,
    on_epoch: Optional[EpochHook] = None,
) -> Tuple[ModelShares, ModelShares]:
    """Mini-batch training over vertical halves (or full-width additive shares)"""
    rows = x_alice.shape[0]
    if rows == 0:
        raise UsageError("cannot train on an empty dataset")
    check_labels(onehot, rows, cfg.dims[-1])
    share_a, share_b = embed_inputs(x_alice, x_bob, cfg.dims[0])
    z_alice, z_bob = addcol(share_a, share_b)

    if init is None:
        _, w_alice, w_bob = init_model(cfg)
    else:
        w_alice, w_bob = init[0].copy(), init[1].copy()

    for epoch in range(1, cfg.epochs + 1):
        order = epoch_order(cfg, rows, epoch)
        loss_terms = []
        for part in batch_slices(rows, cfg.batch):
            idx = order[part]
            fp = s2pmlp_fp(session, cfg.dims, z_alice[idx], z_bob[idx], w_alice, w_bob, cfg.split)
            loss_terms.append((fp.y_alice, fp.y_bob, onehot[idx]))
            w_alice, w_bob = s2pmlp_bp(
                session, cfg.dims, fp.y_alice, fp.y_bob, onehot[idx],
                fp.cache_alice, fp.cache_bob, w_alice, w_bob, cfg.lr, cfg.split,
            )
        TRAINING_EPOCHS.inc()
        logger.info(
            "epoch_complete",
            epoch=epoch,
            batches=len(loss_terms),
            rounds=session.metrics.rounds,
            bytes_sent=session.metrics.bytes_sent,
        )
        if on_epoch is not None:
            on_epoch(EpochEvent(epoch, w_alice.copy(), w_bob.copy(), loss_terms))
    return w_alice, w_bob


def s2pmlp_predict(
    session: Session,
    dims: Sequence[int],
    x_alice: RealMatrix,
    x_bob: RealMatrix,
    w_alice: ModelShares,
    w_bob: ModelShares,
    cfg: SplitConfig,
) -> SharePair:
    """Shares of the class probabilities for every row"""
    share_a, share_b = embed_inputs(x_alice, x_bob, dims[0])
    z_alice, z_bob = addcol(share_a, share_b)
    fp = s2pmlp_fp(session, dims, z_alice, z_bob, w_alice, w_bob, cfg)
    return SharePair(fp.y_alice, fp.y_bob)


# serialization

_BINARY_MAGIC = b"S2PW"


def _to_file(shares: ModelShares, party: str, dims: Sequence[int]) -> ModelShareFile:
    return ModelShareFile(
        party=party,
        dims=list(dims),
        columns=shares.columns,
        layers=[
            LayerPayload(rows=w.shape[0], cols=w.shape[1], data=w.ravel().tolist())
            for w in shares.layers
        ],
    )


def save_model_shares(
    shares: ModelShares,
    path: Union[str, Path],
    *,
    party: str,
    dims: Sequence[int],
    binary: bool = False,
) -> None:
    """Write one party's shares as JSON or as flat little-endian binary"""
    try:
        if binary:
            with open(path, "wb") as handle:
                handle.write(_BINARY_MAGIC + struct.pack("<I", len(shares.layers)))
                for weights in shares.layers:
                    handle.write(struct.pack("<II", *weights.shape))
                    handle.write(np.ascontiguousarray(weights, dtype="<f8").tobytes())
        else:
            document = _to_file(shares, party, dims)
            Path(path).write_text(document.model_dump_json(), encoding="utf-8")
    except OSError as exc:
        raise ReportWriteError(str(exc)) from exc


def load_model_shares(path: Union[str, Path]) -> Tuple[ModelShares, Optional[List[int]]]:
    """Read shares written by save_model_shares; dims are None for binary files"""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read model share file {path}: {exc}") from exc
    if raw.startswith(_BINARY_MAGIC):
        return _load_binary(raw), None
    try:
        document = ModelShareFile.model_validate(json.loads(raw.decode("utf-8")))
    except (ValueError, ValidationError) as exc:
        raise FormatError(f"invalid model share file {path}: {exc}") from exc
    layers = [np.array(l.data, dtype=np.float64).reshape(l.rows, l.cols) for l in document.layers]
    check_layers(document.dims, layers)
    return ModelShares(layers, document.columns), document.dims


def _load_binary(raw: bytes) -> ModelShares:
    offset = len(_BINARY_MAGIC)
    try:
        (count,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        layers = []
        for _ in range(count):
            rows, cols = struct.unpack_from("<II", raw, offset)
            offset += 8
            size = rows * cols * 8
            if offset + size > len(raw):
                raise FormatError("truncated binary model share file")
            layers.append(np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=offset).reshape(rows, cols).astype(np.float64))
            offset += size
    except struct.error as exc:
        raise FormatError(f"truncated binary model share file: {exc}") from exc
    if offset != len(raw):
        raise FormatError("trailing bytes in binary model share file")
    return ModelShares(layers)
