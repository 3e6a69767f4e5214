"""Observations of an unevenly sampled series and their file formats.

Two on-disk formats are understood:

* CSV with columns ``x,y,sigma``. The header line is optional, lines starting
  with ``#`` are comments.
* JSON object ``{"kind": ..., "observations": [[x, y, sigma], ...]}``.
"""
import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError, ValidationError

__all__ = [
    "KINDS",
    "Observation",
    "TimeSeries",
    "load_timeseries",
    "save_timeseries",
    "dumps_timeseries",
    "center_abscissa",
    "MIN_OBSERVATIONS",
]

KINDS = ("doppler", "transit_timing", "generic")
MIN_OBSERVATIONS = 3


@dataclass(frozen=True)
class Observation:
    x: float
    y: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError("x and y must be finite")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"sigma must be positive and finite, got {self.sigma!r}")


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Immutable, x-sorted set of observations.

    Parameters
    ----------
    x, y, sigma : array_like
        Abscissa (time in days or transit index), observable and its 1-sigma
        uncertainty.  Rows are sorted by ``x`` on construction (stable, so
        duplicate abscissae keep their input order).
    kind : {'doppler', 'transit_timing', 'generic'}
        Only affects labels in reports.

    Attributes
    ----------
    order : ndarray of int
        ``order[k]`` is the input row index of sorted observation ``k``.
    """

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    kind: str = "generic"
    order: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        s = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if not (x.ndim == y.ndim == s.ndim == 1 and x.size == y.size == s.size):
            raise ValidationError("x, y and sigma must be 1-d arrays of equal length")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        for name, a in (("x", x), ("y", y), ("sigma", s)):
            bad = np.flatnonzero(~np.isfinite(a))
            if bad.size:
                raise ValidationError(f"non-finite {name}", row=int(bad[0]) + 1)
        bad = np.flatnonzero(s <= 0)
        if bad.size:
            raise ValidationError(f"sigma must be positive, got {s[bad[0]]!r}", row=int(bad[0]) + 1)
        base = np.arange(x.size) if self.order is None else np.asarray(self.order, dtype=int)
        perm = np.argsort(x, kind="stable")
        object.__setattr__(self, "x", _readonly(x[perm]))
        object.__setattr__(self, "y", _readonly(y[perm]))
        object.__setattr__(self, "sigma", _readonly(s[perm]))
        order = base[perm].copy()
        order.setflags(write=False)
        object.__setattr__(self, "order", order)

    @classmethod
    def from_observations(cls, observations, kind="generic"):
        obs = list(observations)
        return cls(
            [o.x for o in obs], [o.y for o in obs], [o.sigma for o in obs], kind=kind
        )

    @property
    def observations(self):
        return [Observation(*row) for row in zip(self.x.tolist(), self.y.tolist(), self.sigma.tolist())]

    def __len__(self):
        return self.x.size

    @property
    def span(self):
        """Observing baseline ``max(x) - min(x)``."""
        return float(self.x[-1] - self.x[0]) if self.x.size else 0.0

    @property
    def n_duplicates(self):
        """Number of observations sharing an abscissa with the previous one."""
        return int(np.count_nonzero(np.diff(self.x) == 0))

    @property
    def weighted_precision(self):
        """``<1/sigma^2>^(-1/2)``, the weighted average measurement precision."""
        return float(np.mean(self.sigma ** -2.0) ** -0.5)

    def validate_for_analysis(self):
        if len(self) < MIN_OBSERVATIONS:
            raise ValidationError(
                f"at least {MIN_OBSERVATIONS} observations are required, got {len(self)}"
            )
        if not self.span > 0:
            raise ValidationError("observations must span a positive range of x")
        return self

    def with_values(self, x=None, y=None, sigma=None):
        """Copy with some columns replaced (columns are in sorted order)."""
        return TimeSeries(
            self.x if x is None else x,
            self.y if y is None else y,
            self.sigma if sigma is None else sigma,
            kind=self.kind,
            order=self.order,
        )

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.kind == other.kind
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.sigma, other.sigma)
        )

    __hash__ = None


def center_abscissa(ts):
    """Return ``(centered_series, offset)`` with ``x -> x - mean(x)``."""
    offset = float(np.mean(ts.x))
    return ts.with_values(x=ts.x - offset), offset


def _infer_format(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("csv", "json"):
            raise DataError(f"unknown format {fmt!r}")
        return fmt
    return "json" if Path(path).suffix.lower() == ".json" else "csv"


def _parse_csv(text, kind):
    rows = []
    columns = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, _, value = stripped[1:].partition(":")
            if key.strip().lower() == "kind" and value.strip() in KINDS and kind == "generic":
                kind = value.strip()
            continue
        fields = [f.strip() for f in next(csv.reader([stripped]))]
        if columns is None and not rows:
            names = [f.lower() for f in fields]
            if set(names) == {"x", "y", "sigma"}:
                columns = [names.index(c) for c in ("x", "y", "sigma")]
                continue
        if len(fields) != 3:
            raise ParseError(f"expected 3 columns, found {len(fields)}", row=lineno)
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise ParseError(f"cannot parse {stripped!r} as numbers", row=lineno) from None
        if columns is not None:
            vals = [vals[i] for i in columns]
        _check_row(vals, lineno)
        rows.append(vals)
    if not rows:
        raise ParseError("no observations found")
    a = np.array(rows)
    return TimeSeries(a[:, 0], a[:, 1], a[:, 2], kind=kind)


def _check_row(vals, row):
    x, y, s = vals
    if not all(math.isfinite(v) for v in vals):
        raise ValidationError("non-finite value", row=row)
    if s <= 0:
        raise ValidationError(f"sigma must be positive, got {s!r}", row=row)


def _parse_json(text, kind):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "observations" not in doc:
        raise ParseError("JSON input must be an object with an 'observations' list")
    kind = doc.get("kind", kind)
    rows = []
    for i, row in enumerate(doc["observations"], start=1):
        if not isinstance(row, (list, tuple)) or len(row) != 3:
            raise ParseError("each observation must be [x, y, sigma]", row=i)
        try:
            vals = [float(v) for v in row]
        except (TypeError, ValueError):
            raise ParseError(f"non-numeric observation {row!r}", row=i) from None
        _check_row(vals, i)
        rows.append(vals)
    if not rows:
        raise ParseError("no observations found")
    a = np.array(rows)
    return TimeSeries(a[:, 0], a[:, 1], a[:, 2], kind=kind)


def load_timeseries(path, format=None, kind="generic"):
    """Read a series from ``path``.

    Parameters
    ----------
    path : str or Path
    format : {'csv', 'json'}, optional
        Inferred from the file suffix when omitted.
    kind : str
        Series kind for CSV input (JSON carries its own).

    Raises
    ------
    ParseError
        Malformed row or wrong column count.
    ValidationError
        Non-positive sigma or non-finite value; the message names the row.
    """
    fmt = _infer_format(path, format)
    text = Path(path).read_text(encoding="utf-8")
    if fmt == "json":
        return _parse_json(text, kind)
    return _parse_csv(text, kind)


def dumps_timeseries(ts, format="csv"):
    """Serialize ``ts`` (sorted order); floats use shortest round-trip repr."""
    if format == "json":
        obs = [[float(a), float(b), float(c)] for a, b, c in zip(ts.x, ts.y, ts.sigma)]
        return json.dumps({"kind": ts.kind, "observations": obs}, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"# kind: {ts.kind}\n")
    buf.write("x,y,sigma\n")
    for a, b, c in zip(ts.x.tolist(), ts.y.tolist(), ts.sigma.tolist()):
        buf.write(f"{a!r},{b!r},{c!r}\n")
    return buf.getvalue()


def save_timeseries(ts, path, format=None):
    fmt = _infer_format(path, format)
    Path(path).write_text(dumps_timeseries(ts, fmt), encoding="utf-8")
