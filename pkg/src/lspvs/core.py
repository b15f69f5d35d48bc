"""Shared data types, validation, seeded random streams and dataset I/O."""

from __future__ import annotations

import csv
import json
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyData,
    InvalidWeights,
    NonFiniteData,
    ParseError,
)


def as_weights(values, name: str = "w") -> np.ndarray:
    """Coerce to a float vector of strictly positive, finite weights."""
    w = np.asarray(values, dtype=float)
    if w.ndim != 1:
        raise InvalidWeights(f"{name} must be one-dimensional", field=name)
    if w.size == 0:
        raise EmptyData(f"{name} is empty", field=name)
    if not np.all(np.isfinite(w)):
        raise NonFiniteData(f"{name} contains non-finite values", field=name)
    if np.any(w <= 0):
        raise InvalidWeights(f"{name} must be strictly positive", field=name)
    return w


def as_gamma(values, name: str = "gamma") -> np.ndarray:
    """Coerce a 0/1 sequence to a boolean inclusion vector."""
    g = np.asarray(values)
    if g.ndim != 1:
        raise InvalidWeights(f"{name} must be one-dimensional", field=name)
    if g.dtype != bool:
        gf = g.astype(float)
        if not np.all((gf == 0) | (gf == 1)):
            raise InvalidWeights(f"{name} entries must be exactly 0 or 1", field=name)
        g = gf == 1
    return g


@dataclass(frozen=True)
class RegressionData:
    y: np.ndarray
    X: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        # private copies, frozen below
        y = np.array(self.y, dtype=float)
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if y.ndim != 1 or X.ndim != 2:
            raise DimensionMismatch("y must be a vector and X a matrix")
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatch(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries",
                field="X", rows=X.shape[0], n=y.shape[0],
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise NonFiniteData("data contains NaN or Inf")
        names = self.feature_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != X.shape[1]:
                raise DimensionMismatch(
                    f"{len(names)} feature names for {X.shape[1]} columns",
                    field="feature_names",
                )
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def names(self) -> list[str]:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{j + 1}" for j in range(self.p)]

    def subset(self, rows) -> RegressionData:
        return RegressionData(self.y[rows], self.X[rows], self.feature_names)


@dataclass(frozen=True)
class Centering:
    """Means (and optional scales) removed by :func:`standardize`."""

    x_mean: np.ndarray
    y_mean: float
    x_scale: np.ndarray
    constant_columns: tuple[int, ...] = ()

    def original_beta(self, beta) -> np.ndarray:
        return np.asarray(beta, dtype=float) / self.x_scale

    def intercept(self, beta) -> float:
        return float(self.y_mean - self.x_mean @ self.original_beta(beta))


def validate_dimensions(data: RegressionData, w) -> None:
    if data.n == 0:
        raise EmptyData("data has no rows", field="y")
    w = np.asarray(w)
    if w.shape[0] != data.p:
        raise DimensionMismatch(
            f"X has {data.p} columns but w has length {w.shape[0]}",
            field="w", p=data.p, w_length=int(w.shape[0]),
        )


def standardize(data: RegressionData, scale: bool = False) -> tuple[RegressionData, Centering]:
    """Center y and the columns of X; optionally scale columns to unit variance.

    Zero-variance columns are kept (centered to zero) and reported in
    ``Centering.constant_columns``.
    """
    if data.n == 0:
        raise EmptyData("data has no rows", field="y")
    if data.n < 2:
        raise EmptyData("standardize needs at least two rows", field="y")
    x_mean = data.X.mean(axis=0)
    y_mean = float(data.y.mean())
    Xc = data.X - x_mean
    yc = data.y - y_mean
    sd = Xc.std(axis=0)
    constant = tuple(int(j) for j in np.flatnonzero(sd <= 1e-12 * (1 + np.abs(x_mean))))
    if constant:
        Xc[:, list(constant)] = 0.0
        warnings.warn(f"zero-variance columns: {list(constant)}", stacklevel=2)
    x_scale = np.ones(data.p)
    if scale:
        x_scale = np.where(sd > 0, sd, 1.0)
        x_scale[list(constant)] = 1.0
        Xc = Xc / x_scale
    return (
        RegressionData(yc, Xc, data.feature_names),
        Centering(x_mean, y_mean, x_scale, constant),
    )


@dataclass(frozen=True)
class RngSeed:
    """Key for an independent, reproducible random stream.

    Streams with distinct ``stream_id`` are statistically independent and do
    not depend on the order in which they are created.
    """

    seed: int
    stream_id: tuple[int, ...] = field(default=())

    def __post_init__(self):
        sid = self.stream_id
        if isinstance(sid, (int, np.integer)):
            sid = (int(sid),)
        object.__setattr__(self, "stream_id", tuple(int(s) for s in sid))

    def child(self, *ids: int) -> RngSeed:
        return RngSeed(self.seed, self.stream_id + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(ss))


def make_rng(seed, *stream: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, RngSeed):
        return seed.child(*stream).generator()
    return RngSeed(int(seed), stream).generator()


def _parse_float(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} at {where}", field=where) from None
    if not np.isfinite(v):
        raise NonFiniteData(f"non-finite value {text!r} at {where}", field=where)
    return v


def _from_columns(columns: dict[str, Sequence[float]], response: str) -> RegressionData:
    if response not in columns:
        raise ParseError(f"response column {response!r} not found", field=response)
    names = [c for c in columns if c != response]
    y = np.asarray(columns[response], dtype=float)
    X = np.column_stack([np.asarray(columns[c], dtype=float) for c in names]) if names else np.empty((len(y), 0))
    return RegressionData(y, X, tuple(names))


def read_dataset(path, response: str = "y") -> RegressionData:
    """Load a CSV (header row) or columnar JSON dataset."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
        if not isinstance(raw, dict):
            raise ParseError(f"{path}: expected an object of columns")
        cols = {}
        for name, values in raw.items():
            if not isinstance(values, list):
                raise ParseError(f"column {name!r} is not a list", field=name)
            cols[name] = [_parse_float(str(v), f"{name}[{i}]") for i, v in enumerate(values)]
        return _from_columns(cols, response)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path} is empty") from None
        header = [h.strip() for h in header]
        cols = {h: [] for h in header}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"line {lineno}: expected {len(header)} fields", field=f"line {lineno}")
            for h, v in zip(header, row):
                cols[h].append(_parse_float(v.strip(), f"{h}:{lineno}"))
    return _from_columns(cols, response)


def write_dataset(path, data: RegressionData, response: str = "y") -> None:
    path = Path(path)
    names = data.names()
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([response] + names)
        for i in range(data.n):
            writer.writerow([repr(float(data.y[i]))] + [repr(float(v)) for v in data.X[i]])
