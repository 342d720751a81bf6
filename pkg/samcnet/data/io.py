"""
CSV ingestion and export.

Points file: ``sample_id,x,y,category`` (one row per point).
Labels file: ``sample_id,label``.
Errors carry the 1-based file line (the header is line 1).
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from samcnet.data.pattern import CategoryVocabulary, Dataset, PointPattern
from samcnet.errors import ParseError

logger = logging.getLogger(__name__)

POINT_COLUMNS = ["sample_id", "x", "y", "category"]
LABEL_COLUMNS = ["sample_id", "label"]


def _read_table(path: Path, columns: list[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ParseError(str(path), int(match.group(1)) if match else 0, str(exc)) from exc
    except pd.errors.EmptyDataError as exc:
        raise ParseError(str(path), 1, "empty file") from exc
    if list(frame.columns) != columns:
        raise ParseError(str(path), 1, f"expected header {','.join(columns)}, got {','.join(map(str, frame.columns))}")
    for col in columns:
        blank = frame[col].isna() | (frame[col].str.strip() == "")
        if blank.any():
            row = int(np.flatnonzero(blank.to_numpy())[0])
            raise ParseError(str(path), row + 2, f"missing value in column {col!r}")
    return frame


def load_csv(
    points_path: str | Path,
    labels_path: str | Path,
    vocabulary: CategoryVocabulary | None = None,
    class_names: tuple[str, ...] | None = None,
) -> Dataset:
    """
    Build a Dataset from a points/labels CSV pair.

    Without an explicit vocabulary (or class list) one is inferred from
    the files and sorted by name. With one, unseen names are parse errors.
    Patterns come out in labels-file order; points keep file order.
    """
    points_path, labels_path = Path(points_path), Path(labels_path)
    points = _read_table(points_path, POINT_COLUMNS)
    labels = _read_table(labels_path, LABEL_COLUMNS)

    if class_names is None:
        class_names = tuple(sorted(set(labels["label"])))
    class_ids = {name: i for i, name in enumerate(class_names)}

    label_of: dict[str, int] = {}
    for row, (sid, label) in enumerate(zip(labels["sample_id"], labels["label"])):
        if sid in label_of:
            raise ParseError(str(labels_path), row + 2, f"duplicate sample_id {sid!r}")
        if label not in class_ids:
            raise ParseError(str(labels_path), row + 2, f"unknown label {label!r}")
        label_of[sid] = class_ids[label]

    xs = pd.to_numeric(points["x"], errors="coerce").to_numpy(dtype=np.float64)
    ys = pd.to_numeric(points["y"], errors="coerce").to_numpy(dtype=np.float64)
    bad = ~(np.isfinite(xs) & np.isfinite(ys))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseError(str(points_path), row + 2, "non-numeric coordinate")

    if vocabulary is None:
        vocabulary = CategoryVocabulary.from_names(points["category"])
    cats = np.empty(len(points), dtype=np.int64)
    for row, name in enumerate(points["category"]):
        if name not in vocabulary.ids:
            raise ParseError(str(points_path), row + 2, f"unknown category {name!r}")
        cats[row] = vocabulary.ids[name]

    members: dict[str, list[int]] = {}
    for row, sid in enumerate(points["sample_id"]):
        if sid not in label_of:
            raise ParseError(str(points_path), row + 2, f"sample_id {sid!r} has no label")
        members.setdefault(sid, []).append(row)

    patterns = []
    for row, sid in enumerate(labels["sample_id"]):
        rows = members.get(sid)
        if not rows:
            raise ParseError(str(labels_path), row + 2, f"sample_id {sid!r} has no points")
        idx = np.asarray(rows)
        coords = np.column_stack([xs[idx], ys[idx]])
        patterns.append(PointPattern(sid, coords, cats[idx], label_of[sid]))

    dataset = Dataset(vocabulary, tuple(patterns), tuple(class_names))
    logger.info(
        "Loaded %d patterns (%d points, %d categories, %d classes) from %s",
        len(dataset), len(points), len(vocabulary), len(class_names), points_path,
    )
    return dataset


def write_csv(dataset: Dataset, points_path: str | Path, labels_path: str | Path) -> None:
    """Write the points/labels pair that ``load_csv`` reads back."""
    names = np.asarray(dataset.vocabulary.names, dtype=object)
    frames = [
        pd.DataFrame({
            "sample_id": p.sample_id,
            "x": p.coords[:, 0],
            "y": p.coords[:, 1],
            "category": names[p.categories],
        })
        for p in dataset.patterns
    ]
    points = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=POINT_COLUMNS)
    labels = pd.DataFrame({
        "sample_id": [p.sample_id for p in dataset.patterns],
        "label": [dataset.class_names[p.label] for p in dataset.patterns],
    })
    points.to_csv(points_path, index=False, columns=POINT_COLUMNS, lineterminator="\n")
    labels.to_csv(labels_path, index=False, columns=LABEL_COLUMNS, lineterminator="\n")
    logger.info("Wrote %d patterns to %s", len(dataset), points_path)
