"""End-to-end runs: secure training next to the plaintext reference, and
secure prediction from saved model shares."""
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from s2pmlp import config
from s2pmlp.datasets import Dataset, apply_columns, fit_columns, load_csv, vertical_split, with_split
from s2pmlp.errors import DimensionError, ReportWriteError, UsageError
from s2pmlp.logging import get_logger, session_context
from s2pmlp.matcore import RealMatrix
from s2pmlp.mlp import (
    EpochEvent,
    init_model,
    load_model_shares,
    reconstruct,
    s2pmlp_predict,
    s2pmlp_train,
    save_model_shares,
)
from s2pmlp.netsim import Session, frozen_clock, simulate_time
from s2pmlp.plain import PlainModel, accuracy, cross_entropy, plain_mlp_predict, plain_mlp_train
from s2pmlp.schemas import NET_PROFILES, ColumnStats, CommMetrics, EpochReport, MLPConfig, PredictReport, SplitConfig, TrainReport

logger = get_logger("trainer")

# hyperparameters for large image sets
LARGE_DEFAULTS = {"hidden": 128, "batch": 128, "lr": 0.01}


def weight_divergence(secure: PlainModel, plain: PlainModel) -> float:
    """Largest absolute entry difference over all layers"""
    return max(float(np.max(np.abs(s - p))) for s, p in zip(secure.layers, plain.layers))


def _simulated(metrics: CommMetrics) -> Dict[str, float]:
    return {name: simulate_time(metrics, profile) for name, profile in NET_PROFILES.items()}


def _party_inputs(dataset: Dataset) -> Tuple[RealMatrix, RealMatrix, ColumnStats, ColumnStats]:
    """Standardised halves and each party's column statistics, fitted on training rows"""
    raw_alice, raw_bob = vertical_split(dataset.features)
    stats_alice = fit_columns(raw_alice[dataset.train_idx])
    stats_bob = fit_columns(raw_bob[dataset.train_idx])
    return (
        apply_columns(raw_alice, stats_alice),
        apply_columns(raw_bob, stats_bob),
        stats_alice,
        stats_bob,
    )


def run_train(
    dataset_path: Union[str, Path],
    label_column: str,
    hidden: Optional[int] = 16,
    batch: Optional[int] = 16,
    lr: Optional[float] = 0.1,
    epochs: int = 5,
    seed: int = config.DEFAULT_SEED,
    out_dir: Optional[Union[str, Path]] = None,
    test_size: float = 0.2,
    rho: int = config.DEFAULT_RHO,
    verify_rounds: int = config.DEFAULT_VERIFY_ROUNDS,
    mask_scale: float = config.DEFAULT_MASK_SCALE,
    shuffle: bool = False,
    large: bool = False,
    classes: Optional[Sequence[str]] = None,
    clock: Callable[[], float] = frozen_clock,
) -> TrainReport:
    """Train securely and in plaintext from the same initial weights"""
    if large:
        hidden, batch, lr = LARGE_DEFAULTS["hidden"], LARGE_DEFAULTS["batch"], LARGE_DEFAULTS["lr"]
    dataset = with_split(load_csv(dataset_path, label_column, classes), test_size, seed)
    if not dataset.train_idx:
        raise UsageError("training split is empty")

    x_alice, x_bob, stats_alice, stats_bob = _party_inputs(dataset)
    onehot = dataset.labels_onehot
    train, test = dataset.train_idx, dataset.test_idx
    cfg = MLPConfig(
        dims=[dataset.features.shape[1], hidden, len(dataset.classes)],
        batch=batch,
        epochs=epochs,
        lr=lr,
        shuffle=shuffle,
        split=SplitConfig(rho=rho, verify_rounds=verify_rounds, mask_scale=mask_scale, seed=seed),
    )
    plain_init, init_alice, init_bob = init_model(cfg)

    plain_history: Dict[int, Tuple[PlainModel, float]] = {}

    def on_plain_epoch(epoch: int, model: PlainModel, losses: List[float]):
        plain_history[epoch] = (model.copy(), float(np.sum(losses)))

    features = np.hstack([x_alice, x_bob])
    plain_model = plain_mlp_train(cfg, features[train], onehot[train], init=plain_init, on_epoch=on_plain_epoch)

    history: List[EpochReport] = []
    with Session(seed=seed, clock=clock) as session, session_context(session.session_id):
        previous = session.snapshot()

        def on_secure_epoch(event: EpochEvent):
            nonlocal previous
            current = session.snapshot()
            spent = current.delta(previous)
            previous = current
            plain_at_epoch, plain_loss = plain_history[event.epoch]
            loss = sum(cross_entropy(ya + yb, y) for ya, yb, y in event.loss_terms)
            history.append(
                EpochReport(
                    epoch=event.epoch,
                    loss=loss,
                    plain_loss=plain_loss,
                    divergence=weight_divergence(reconstruct(event.alice, event.bob), plain_at_epoch),
                    metrics=spent,
                    simulated=_simulated(spent),
                )
            )

        w_alice, w_bob = s2pmlp_train(
            session, cfg, x_alice[train], x_bob[train], onehot[train],
            init=(init_alice, init_bob), on_epoch=on_secure_epoch,
        )
    w_alice.columns, w_bob.columns = stats_alice, stats_bob

    secure_accuracy = plain_accuracy = agreement = 0.0
    if test:
        with Session(seed=seed, clock=clock) as session:
            probs = s2pmlp_predict(session, cfg.dims, x_alice[test], x_bob[test], w_alice, w_bob, cfg.split).reconstruct()
        plain_probs = plain_mlp_predict(plain_model, features[test])
        secure_accuracy = accuracy(probs, onehot[test])
        plain_accuracy = accuracy(plain_probs, onehot[test])
        agreement = float(np.mean(probs.argmax(axis=1) == plain_probs.argmax(axis=1)))

    model_paths: Dict[str, str] = {}
    if out_dir is not None:
        target = Path(out_dir)
        try:
            target.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ReportWriteError(f"cannot create {target}: {exc}") from exc
        for party, shares in (("alice", w_alice), ("bob", w_bob)):
            path = target / f"model_{party}.json"
            save_model_shares(shares, path, party=party, dims=cfg.dims)
            model_paths[party] = str(path)

    report = TrainReport(
        dataset=Path(dataset_path).name,
        dims=list(cfg.dims),
        batch=cfg.batch,
        lr=cfg.lr,
        epochs=cfg.epochs,
        seed=seed,
        train_rows=len(train),
        test_rows=len(test),
        secure_accuracy=secure_accuracy,
        plain_accuracy=plain_accuracy,
        label_agreement=agreement,
        max_divergence=max((h.divergence for h in history), default=0.0),
        history=history,
        model_paths=model_paths,
    )
    logger.info(
        "training_complete",
        dataset=report.dataset,
        secure_accuracy=secure_accuracy,
        plain_accuracy=plain_accuracy,
        max_divergence=report.max_divergence,
    )
    return report


def run_predict(
    dataset_path: Union[str, Path],
    label_column: Optional[str],
    model_alice: Union[str, Path],
    model_bob: Union[str, Path],
    seed: int = config.DEFAULT_SEED,
    rho: int = config.DEFAULT_RHO,
    verify_rounds: int = config.DEFAULT_VERIFY_ROUNDS,
    mask_scale: float = config.DEFAULT_MASK_SCALE,
    classes: Optional[Sequence[str]] = None,
    clock: Callable[[], float] = frozen_clock,
) -> PredictReport:
    """Secure inference over every row of a CSV.

    Accuracy is reported only when label_column is given; unlabelled rows
    are predicted as class indices unless classes names them.
    """
    w_alice, dims = load_model_shares(model_alice)
    w_bob, dims_bob = load_model_shares(model_bob)
    dims = dims or dims_bob
    if dims is None:
        raise UsageError("prediction needs at least one JSON model share file to know the layer dims")

    dataset = load_csv(dataset_path, label_column, classes)
    if dataset.features.shape[1] != dims[0]:
        raise DimensionError(f"model expects {dims[0]} features, dataset has {dataset.features.shape[1]}")
    class_names = dataset.classes or [str(i) for i in range(dims[-1])]
    if len(class_names) != dims[-1]:
        raise DimensionError(f"model predicts {dims[-1]} classes, dataset has {len(class_names)}")

    raw_alice, raw_bob = vertical_split(dataset.features)
    x_alice = apply_columns(raw_alice, w_alice.columns) if w_alice.columns else raw_alice
    x_bob = apply_columns(raw_bob, w_bob.columns) if w_bob.columns else raw_bob

    cfg = SplitConfig(rho=rho, verify_rounds=verify_rounds, mask_scale=mask_scale, seed=seed)
    with Session(seed=seed, clock=clock) as session, session_context(session.session_id):
        probs = s2pmlp_predict(session, dims, x_alice, x_bob, w_alice, w_bob, cfg).reconstruct()
        metrics = session.snapshot()

    labels = [class_names[i] for i in probs.argmax(axis=1)]
    report = PredictReport(
        dataset=Path(dataset_path).name,
        rows=dataset.rows,
        accuracy=accuracy(probs, dataset.labels_onehot) if label_column is not None else None,
        predictions=labels,
        metrics=metrics,
        simulated=_simulated(metrics),
    )
    logger.info("prediction_complete", dataset=report.dataset, rows=report.rows, accuracy=report.accuracy)
    return report
