"""Dataset ingestion and vertical partitioning.

CSV files carry a header, numeric feature columns and one categorical label
column. Alice owns the first ⌈d/2⌉ feature columns and Bob the rest; each
party standardises only its own columns.
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from s2pmlp.errors import FormatError, UsageError
from s2pmlp.logging import get_logger
from s2pmlp.matcore import RealMatrix
from s2pmlp.schemas import ColumnStats

logger = get_logger("datasets")


@dataclass(frozen=True)
class Dataset:
    features: RealMatrix
    labels_onehot: RealMatrix
    classes: List[str]
    feature_names: List[str]
    labels: List[str]
    train_idx: List[int] = field(default_factory=list)
    test_idx: List[int] = field(default_factory=list)

    @property
    def rows(self) -> int:
        return self.features.shape[0]

    def part(self, which: str) -> Tuple[RealMatrix, RealMatrix]:
        idx = self.train_idx if which == "train" else self.test_idx
        return self.features[idx], self.labels_onehot[idx]


def load_csv(
    path: Union[str, Path],
    label_column: Optional[str],
    classes: Optional[Sequence[str]] = None,
) -> Dataset:
    """Parse a headered CSV; classes default to the sorted distinct labels.

    Without a label column every column is a feature, the one-hot matrix has
    no columns and classes are whatever the caller passed.
    Row numbers in errors count data rows from 1 (the header excluded).
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc

    if label_column is not None and label_column not in frame.columns:
        raise FormatError(f"label column {label_column!r} not found", column=label_column)
    feature_names = [c for c in frame.columns if c != label_column]
    if not feature_names:
        raise FormatError("no feature columns")

    numeric = frame[feature_names].apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = numeric.isna().to_numpy() | ~np.isfinite(numeric.to_numpy(dtype=np.float64, na_value=np.nan))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise FormatError("malformed numeric cell", row=int(row) + 1, column=feature_names[col])

    features = numeric.to_numpy(dtype=np.float64)
    if label_column is None:
        labels: List[str] = []
        class_list = list(classes or [])
        onehot = np.zeros((features.shape[0], 0))
    else:
        labels = [value.strip() for value in frame[label_column].tolist()]
        class_list = list(classes) if classes is not None else sorted(set(labels))
        position = {name: i for i, name in enumerate(class_list)}
        onehot = np.zeros((len(labels), len(class_list)))
        for row, label in enumerate(labels):
            if label not in position:
                raise FormatError(f"unknown class label {label!r}", row=row + 1, column=label_column)
            onehot[row, position[label]] = 1.0

    logger.info("dataset_loaded", path=str(path), rows=features.shape[0], features=features.shape[1], classes=len(class_list))
    return Dataset(
        features=features,
        labels_onehot=onehot,
        classes=class_list,
        feature_names=feature_names,
        labels=labels,
        train_idx=list(range(features.shape[0])),
        test_idx=[],
    )


def with_split(dataset: Dataset, test_size: float, seed: int) -> Dataset:
    """Stratified train/test split, reproducible from seed"""
    indices = np.arange(dataset.rows)
    if test_size <= 0:
        return replace(dataset, train_idx=indices.tolist(), test_idx=[])
    train, test = train_test_split(
        indices,
        test_size=test_size,
        random_state=seed % 2**32,
        stratify=dataset.labels_onehot.argmax(axis=1),
    )
    return replace(dataset, train_idx=sorted(train.tolist()), test_idx=sorted(test.tolist()))


def alice_width(width: int) -> int:
    return -(-width // 2)


def vertical_split(
    features: RealMatrix, rng: Optional[np.random.Generator] = None
) -> Tuple[RealMatrix, RealMatrix]:
    """First ⌈d/2⌉ columns to Alice, the rest to Bob.

    With rng the columns are permuted before the cut.
    """
    width = features.shape[1]
    if width < 2:
        raise UsageError("vertical partitioning needs at least 2 feature columns")
    if rng is not None:
        features = features[:, rng.permutation(width)]
    cut = alice_width(width)
    return features[:, :cut].copy(), features[:, cut:].copy()


def fit_columns(train_part: RealMatrix) -> ColumnStats:
    """Column statistics of one party's training rows"""
    scaler = StandardScaler().fit(train_part)
    return ColumnStats(mean=scaler.mean_.tolist(), scale=scaler.scale_.tolist())


def apply_columns(part: RealMatrix, stats: ColumnStats) -> RealMatrix:
    return (part - np.asarray(stats.mean)) / np.asarray(stats.scale)
