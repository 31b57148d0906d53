"""Panel time-series data model, CSV ingestion and temporal splitting.

Missing target observations are stored as ``NaN`` inside the ``targets``
array. ``NaN`` is the only missing marker; series never have silent gaps
because timestamps must form a regular grid.
"""
import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Mapping, Optional, Sequence

import numpy as np

from ._validation import check_positive_int
from .exceptions import (
    InsufficientLengthError,
    OrderingError,
    ParseError,
    SchemaError,
)

MISSING = float("nan")

NUMERIC = "numeric"
CATEGORICAL = "categorical"


def _freeze(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def _freeze_features(features):
    if features is None:
        return None
    return {name: _freeze(values) for name, values in features.items()}


def _arrays_equal(a, b):
    if a is None or b is None:
        return a is None and b is None
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    if a.dtype.kind == "f" or b.dtype.kind == "f":
        return bool(np.array_equal(a, b, equal_nan=True))
    return bool(np.all(a == b))


def _features_equal(a, b):
    if a is None or b is None:
        return a is None and b is None
    if set(a) != set(b):
        return False
    return all(_arrays_equal(a[k], b[k]) for k in a)


@dataclass(frozen=True, eq=False)
class TimeSeriesRecord:
    """One (possibly multivariate) series of a panel.

    Parameters
    ----------
    series_id : str
    targets : array-like of shape (T,) or (T, d)
        Observed targets; ``NaN`` marks a missing observation.
    past_features : mapping of name -> array of length T, optional
    future_features : mapping of name -> array of length H, optional
        Values of future-known features over the forecast horizon.
    timestamps : sequence of int or datetime, optional
    """

    series_id: str
    targets: np.ndarray
    past_features: Optional[Mapping[str, np.ndarray]] = None
    future_features: Optional[Mapping[str, np.ndarray]] = None
    timestamps: Optional[tuple] = None

    def __post_init__(self):
        targets = np.asarray(self.targets, dtype=float)
        if targets.ndim == 1:
            targets = targets[:, None]
        if targets.ndim != 2 or targets.shape[0] < 1 or targets.shape[1] < 1:
            raise SchemaError(
                f"series {self.series_id!r}: targets must be (T, d) with T >= 1"
            )
        object.__setattr__(self, "targets", _freeze(targets))
        T = targets.shape[0]
        if self.past_features is not None:
            for name, values in self.past_features.items():
                if len(values) != T:
                    raise SchemaError(
                        f"series {self.series_id!r}: past feature {name!r} has "
                        f"length {len(values)}, expected {T}"
                    )
        object.__setattr__(self, "past_features", _freeze_features(self.past_features))
        object.__setattr__(
            self, "future_features", _freeze_features(self.future_features)
        )
        if self.timestamps is not None:
            if len(self.timestamps) != T:
                raise SchemaError(f"series {self.series_id!r}: timestamp count != T")
            object.__setattr__(self, "timestamps", tuple(self.timestamps))

    @property
    def length(self):
        return self.targets.shape[0]

    @property
    def n_dims(self):
        return self.targets.shape[1]

    def equals(self, other):
        return (
            self.series_id == other.series_id
            and _arrays_equal(self.targets, other.targets)
            and _features_equal(self.past_features, other.past_features)
            and _features_equal(self.future_features, other.future_features)
            and self.timestamps == other.timestamps
        )

    def slice(self, start, stop=None):
        """Return a new record restricted to observations ``[start:stop]``."""
        past = None
        if self.past_features is not None:
            past = {k: v[start:stop] for k, v in self.past_features.items()}
        ts = None if self.timestamps is None else self.timestamps[start:stop]
        return replace(
            self, targets=self.targets[start:stop], past_features=past, timestamps=ts
        )


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """An ordered collection of series sharing horizon, period and feature schema."""

    name: str
    series: tuple
    horizon: int
    seasonal_period: int = 1
    feature_kinds: Mapping[str, str] = field(default_factory=dict)
    future_known: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        object.__setattr__(self, "feature_kinds", dict(self.feature_kinds))
        object.__setattr__(self, "future_known", tuple(self.future_known))
        if len(self.series) < 1:
            raise SchemaError("a dataset needs at least one series")
        check_positive_int(self.horizon, "horizon")
        check_positive_int(self.seasonal_period, "seasonal_period")
        dims = {s.n_dims for s in self.series}
        if len(dims) != 1:
            raise SchemaError(f"series disagree on target dimension: {sorted(dims)}")
        expected = set(self.feature_kinds)
        for s in self.series:
            names = set(s.past_features or {})
            if names != expected:
                raise SchemaError(
                    f"series {s.series_id!r} features {sorted(names)} do not match "
                    f"schema {sorted(expected)}"
                )
        unknown = set(self.future_known) - expected
        if unknown:
            raise SchemaError(f"future-known features not in schema: {sorted(unknown)}")
        for kind in self.feature_kinds.values():
            if kind not in (NUMERIC, CATEGORICAL):
                raise SchemaError(f"unknown feature kind {kind!r}")

    def __len__(self):
        return len(self.series)

    def __iter__(self):
        return iter(self.series)

    @property
    def n_dims(self):
        return self.series[0].n_dims

    @property
    def lengths(self):
        return [s.length for s in self.series]

    @property
    def n_observations(self):
        return int(sum(self.lengths))

    def with_series(self, series, **changes):
        return replace(self, series=tuple(series), **changes)

    def equals(self, other):
        return (
            self.name == other.name
            and self.horizon == other.horizon
            and self.seasonal_period == other.seasonal_period
            and dict(self.feature_kinds) == dict(other.feature_kinds)
            and tuple(self.future_known) == tuple(other.future_known)
            and len(self.series) == len(other.series)
            and all(a.equals(b) for a, b in zip(self.series, other.series))
        )


@dataclass(frozen=True, eq=False)
class TemporalSplit:
    """Train part plus the last ``validation_horizon`` observations of each series."""

    train: PanelDataset
    validation_horizon: int
    full: PanelDataset

    @property
    def validation_targets(self):
        h = self.validation_horizon
        return [s.targets[-h:] for s in self.full.series]

    def reconstruct(self):
        """Concatenate train and validation back into full target arrays."""
        return [
            np.concatenate([tr.targets, va], axis=0)
            for tr, va in zip(self.train.series, self.validation_targets)
        ]


def tail(series, h):
    """Last ``min(h, T)`` target observations of ``series``, original order."""
    h = check_positive_int(h, "h")
    return series.targets[-h:]


def temporal_holdout(dataset, horizon):
    """Split off the final ``horizon`` observations of every series.

    Future-known feature values of the held-out window become the
    ``future_features`` of the train records so that a model fitted on the
    train part can forecast the validation window.
    """
    horizon = check_positive_int(horizon, "horizon")
    train_series = []
    for s in dataset.series:
        if s.length <= horizon:
            raise InsufficientLengthError(
                f"series {s.series_id!r} has {s.length} observations, needs more "
                f"than the horizon {horizon}",
                series_id=s.series_id,
            )
        cut = s.length - horizon
        head = s.slice(0, cut)
        future = None
        if dataset.future_known:
            future = {k: s.past_features[k][cut:] for k in dataset.future_known}
        train_series.append(replace(head, future_features=future))
    train = dataset.with_series(train_series, horizon=horizon)
    return TemporalSplit(train=train, validation_horizon=horizon, full=dataset)


# -- CSV ingestion ---------------------------------------------------------


def _parse_timestamp(text, row):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"unparseable timestamp {text!r}", row=row) from None


def _month_index(ts):
    return ts.year * 12 + ts.month - 1


def _check_regular(series_id, stamps, rows):
    """Reject non-increasing or irregularly spaced timestamps."""
    kinds = {type(t) for t in stamps}
    if len(kinds) > 1:
        raise OrderingError(f"series {series_id!r} mixes integer and ISO timestamps")
    for k in range(1, len(stamps)):
        if not stamps[k] > stamps[k - 1]:
            raise OrderingError(
                f"series {series_id!r}: timestamp at row {rows[k]} does not "
                f"increase"
            )
    if len(stamps) < 3:
        return
    if isinstance(stamps[0], int):
        steps = {b - a for a, b in zip(stamps, stamps[1:])}
        if len(steps) == 1:
            return
    else:
        steps = {b - a for a, b in zip(stamps, stamps[1:])}
        if len(steps) == 1:
            return
        # calendar months have unequal lengths; accept a constant month step
        same_offset = len({(t.day, t.time()) for t in stamps}) == 1
        month_steps = {
            _month_index(b) - _month_index(a) for a, b in zip(stamps, stamps[1:])
        }
        if same_offset and len(month_steps) == 1:
            return
    raise OrderingError(
        f"series {series_id!r} is not on an equally spaced grid (irregular "
        f"frequency is unsupported)"
    )


def _parse_float(text, row, column):
    text = text.strip()
    if text == "":
        return MISSING
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"column {column!r}: not a number: {text!r}", row=row) from None


def read_metadata(meta_path):
    with open(meta_path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"metadata is not valid JSON: {exc}") from None
    for key in ("horizon", "seasonal_period"):
        if key not in meta:
            raise SchemaError(f"metadata lacks required key {key!r}")
    meta.setdefault("future_known_features", [])
    meta.setdefault("categorical_features", [])
    return meta


def _read_rows(csv_path):
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV file", row=1) from None
        except csv.Error as exc:
            raise ParseError(str(exc), row=1) from None
        header = [h.strip() for h in header]
        rows = []
        try:
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        f"expected {len(header)} fields, found {len(row)}",
                        row=reader.line_num,
                    )
                rows.append((reader.line_num, row))
        except csv.Error as exc:
            raise ParseError(str(exc), row=reader.line_num) from None
    return header, rows


def load_dataset(csv_path, meta_path, name=None, future_csv=None):
    """Load a long-format CSV plus JSON metadata into a :class:`PanelDataset`.

    The CSV header is ``series_id,timestamp,target[,<feature>...]``; multiple
    target dimensions use columns ``target_0, target_1, ...``. An empty
    target cell becomes a missing marker. ``future_csv`` optionally supplies
    future-known feature values for the horizon after each series ends
    (same layout, no target column required).
    """
    meta = read_metadata(meta_path)
    header, rows = _read_rows(csv_path)
    for required in ("series_id", "timestamp"):
        if required not in header:
            raise SchemaError(f"CSV lacks required column {required!r}")
    target_cols = [h for h in header if h == "target" or h.startswith("target_")]
    if not target_cols:
        raise SchemaError("CSV has no target column")
    feature_cols = [
        h for h in header if h not in ("series_id", "timestamp") and h not in target_cols
    ]
    categorical = set(meta["categorical_features"])
    future_known = list(meta["future_known_features"])
    for col in set(categorical) | set(future_known):
        if col not in feature_cols:
            raise SchemaError(f"metadata names feature {col!r} absent from the CSV")
    index = {h: k for k, h in enumerate(header)}

    grouped = {}
    for line, row in rows:
        sid = row[index["series_id"]].strip()
        if not sid:
            raise ParseError("empty series_id", row=line)
        ts = _parse_timestamp(row[index["timestamp"]], line)
        target = [_parse_float(row[index[c]], line, c) for c in target_cols]
        feats = {}
        for c in feature_cols:
            cell = row[index[c]].strip()
            if c in categorical:
                feats[c] = cell if cell else None
            else:
                feats[c] = _parse_float(cell, line, c)
        grouped.setdefault(sid, []).append((line, ts, target, feats))

    future = _load_future(future_csv, feature_cols, categorical, future_known) if future_csv else {}

    series = []
    for sid, items in grouped.items():
        stamps = [it[1] for it in items]
        _check_regular(sid, stamps, [it[0] for it in items])
        targets = np.array([it[2] for it in items], dtype=float)
        past = None
        if feature_cols:
            past = {}
            for c in feature_cols:
                vals = [it[3][c] for it in items]
                past[c] = np.array(vals, dtype=object if c in categorical else float)
        fut = future.get(sid)
        series.append(
            TimeSeriesRecord(
                series_id=sid,
                targets=targets,
                past_features=past,
                future_features=fut,
                timestamps=tuple(stamps),
            )
        )
    kinds = {c: (CATEGORICAL if c in categorical else NUMERIC) for c in feature_cols}
    return PanelDataset(
        name=name or meta.get("name") or _stem(csv_path),
        series=series,
        horizon=int(meta["horizon"]),
        seasonal_period=int(meta["seasonal_period"]),
        feature_kinds=kinds,
        future_known=future_known,
    )


def _load_future(future_csv, feature_cols, categorical, future_known):
    header, rows = _read_rows(future_csv)
    index = {h: k for k, h in enumerate(header)}
    missing = [c for c in future_known if c not in index]
    if missing or "series_id" not in index:
        raise SchemaError(f"future CSV lacks columns {missing or ['series_id']}")
    grouped = {}
    for line, row in rows:
        sid = row[index["series_id"]].strip()
        feats = {}
        for c in future_known:
            cell = row[index[c]].strip()
            feats[c] = (cell or None) if c in categorical else _parse_float(cell, line, c)
        grouped.setdefault(sid, []).append(feats)
    out = {}
    for sid, items in grouped.items():
        out[sid] = {
            c: np.array(
                [it[c] for it in items], dtype=object if c in categorical else float
            )
            for c in future_known
        }
    return out


def _stem(path):
    import os

    return os.path.splitext(os.path.basename(str(path)))[0]


def _format_float(value):
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def _format_timestamp(ts):
    return ts.isoformat() if isinstance(ts, datetime) else str(ts)


def write_dataset(dataset, csv_path, meta_path):
    """Write ``dataset`` in the long CSV + JSON metadata layout read by :func:`load_dataset`."""
    d = dataset.n_dims
    target_cols = ["target"] if d == 1 else [f"target_{k}" for k in range(d)]
    feature_cols = list(dataset.feature_kinds)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series_id", "timestamp", *target_cols, *feature_cols])
        for s in dataset.series:
            stamps = s.timestamps or tuple(range(s.length))
            for t in range(s.length):
                cells = [s.series_id, _format_timestamp(stamps[t])]
                cells += [_format_float(v) for v in s.targets[t]]
                for c in feature_cols:
                    v = s.past_features[c][t]
                    if dataset.feature_kinds[c] == CATEGORICAL:
                        cells.append("" if v is None else str(v))
                    else:
                        cells.append(_format_float(v))
                writer.writerow(cells)
    meta = {
        "name": dataset.name,
        "horizon": dataset.horizon,
        "seasonal_period": dataset.seasonal_period,
        "future_known_features": list(dataset.future_known),
        "categorical_features": [
            c for c, k in dataset.feature_kinds.items() if k == CATEGORICAL
        ],
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)


def from_arrays(name, arrays, horizon, seasonal_period=1, ids: Optional[Sequence[str]] = None):
    """Build a feature-free dataset from a list of target arrays (integer timestamps)."""
    if ids is None:
        ids = [f"s{k}" for k in range(len(arrays))]
    series = []
    for i, a in zip(ids, arrays):
        a = np.asarray(a, dtype=float)
        series.append(TimeSeriesRecord(series_id=str(i), targets=a, timestamps=tuple(range(len(a)))))
    return PanelDataset(
        name=name, series=series, horizon=horizon, seasonal_period=seasonal_period
    )
