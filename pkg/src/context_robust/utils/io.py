"""
Dataset CSV files (header context,x1,...,xd,y) and JSON result files
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from ..exceptions import DataError
from ..model import Dataset

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _expected_header(d: int):
    return ["context"] + [f"x{j}" for j in range(1, d + 1)] + ["y"]


def read_dataset_csv(path: PathLike, num_contexts: Optional[int] = None) -> Dataset:
    """
    Read a dataset CSV.

    Raises:
        DataError: unreadable file, wrong header, or a malformed row (the
            message names its line number, the header being line 1)
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except FileNotFoundError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"malformed CSV {path}: {e}") from e

    columns = [c.strip() for c in frame.columns]
    d = len(columns) - 2
    if d < 1 or columns != _expected_header(d):
        raise DataError(f"{path}: header must be context,x1,...,xd,y, got {','.join(columns)}")
    if frame.empty:
        raise DataError(f"{path}: no data rows")

    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataError(f"{path}, line {row + 2}: malformed row {','.join(frame.iloc[row].tolist())}")

    contexts = numeric["context"].to_numpy(dtype=float)
    whole = np.round(contexts)
    if np.any(whole != contexts):
        row = int(np.flatnonzero(whole != contexts)[0])
        raise DataError(f"{path}, line {row + 2}: context id must be an integer")

    values = numeric.to_numpy(dtype=float)
    dataset = Dataset.from_arrays(
        features=values[:, 1:-1],
        responses=values[:, -1],
        contexts=whole.astype(np.int64),
        num_contexts=num_contexts,
        metadata={"source": str(path)},
    )
    logger.info(f"Read {dataset.n} samples in {dataset.num_contexts} contexts from {path}")
    return dataset


def write_dataset_csv(dataset: Dataset, path: PathLike):
    """Write a dataset with its original context labels"""
    labels = np.array([dataset.label_map.get(int(c), int(c)) for c in dataset.contexts])
    frame = pd.DataFrame(dataset.features, columns=_expected_header(dataset.d)[1:-1])
    frame.insert(0, "context", labels)
    frame["y"] = dataset.responses
    frame.to_csv(path, index=False, lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: PathLike):
    frame.to_csv(path, index=False, lineterminator="\n")


def dumps_json(data: Any) -> str:
    return json.dumps(data, indent=2, allow_nan=False)


def write_json(data: Any, path: PathLike):
    Path(path).write_text(dumps_json(data) + "\n", encoding="utf-8")


def sidecar_path(out: PathLike) -> Path:
    """<stem>.config.json next to an output file"""
    out = Path(out)
    return out.with_name(f"{out.stem}.config.json")


def write_config_sidecar(out: PathLike, resolved: Dict[str, Any]) -> Path:
    path = sidecar_path(out)
    write_json(resolved, path)
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read JSON file {path}: {e}") from e
    if not isinstance(data, dict):
        raise DataError(f"{path} must hold a JSON object")
    return data
