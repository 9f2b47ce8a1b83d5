"""Core data model: semimetric matrices, distributions, samples, point clouds.

All types are immutable after construction (backing arrays are frozen), so
they can be shared freely across worker threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    LengthMismatchError,
    NegativeEntryError,
    NonSquareError,
    NonzeroDiagonalError,
    ParseError,
    ValidationError,
    ZeroExactError,
)

SYMMETRY_TOL = 1e-9
DIAGONAL_TOL = 1e-9
MASS_TOL = 1e-9


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SemimetricMatrix:
    """Symmetric nonnegative matrix with zero diagonal.

    The triangle inequality is deliberately not required.
    """

    d: np.ndarray

    @property
    def n(self):
        return self.d.shape[0]

    def __post_init__(self):
        object.__setattr__(self, "d", _frozen(self.d))


@dataclass(frozen=True)
class Distribution:
    """Probability vector over the point set."""

    p: np.ndarray

    @property
    def n(self):
        return self.p.shape[0]

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 1:
            raise ValidationError("distribution must be a 1-d vector")
        if np.any(p < 0):
            raise NegativeEntryError("distribution has negative mass")
        s = p.sum()
        if abs(s - 1.0) > MASS_TOL:
            raise ValidationError(f"distribution mass {s!r} deviates from 1 by more than {MASS_TOL}")
        object.__setattr__(self, "p", _frozen(p / s))


@dataclass(frozen=True)
class TrainSample:
    """A pair of distribution indices with their measured exact W1 distance."""

    mu: int
    rho: int
    w1: float

    def __post_init__(self):
        if self.w1 < 0:
            raise ValidationError("w1 must be nonnegative")


@dataclass(frozen=True)
class PointCloud:
    coords: np.ndarray

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def dim(self):
        return self.coords.shape[1]

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] < 2:
            raise ValidationError("point cloud must be n x dim with n >= 2")
        if not np.all(np.isfinite(c)):
            raise ValidationError("point cloud has non-finite coordinates")
        object.__setattr__(self, "coords", _frozen(c))


def validate_semimetric(raw) -> SemimetricMatrix:
    """Validate a raw square matrix as a semimetric.

    Small asymmetries (ASCII round-off) are repaired by averaging with the
    transpose; a diagonal entry above 1e-9 in magnitude is an error.
    """
    d = np.asarray(raw, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValidationError("matrix has non-finite entries")
    if np.any(np.abs(np.diagonal(d)) > DIAGONAL_TOL):
        raise NonzeroDiagonalError("diagonal magnitude exceeds 1e-9")
    d = 0.5 * (d + d.T)
    if np.any(d < 0):
        raise NegativeEntryError("matrix has negative entries")
    d = d.copy()
    np.fill_diagonal(d, 0.0)
    return SemimetricMatrix(d)


def euclidean_matrix(points: PointCloud) -> SemimetricMatrix:
    """Pairwise l2 distance matrix of a point cloud."""
    c = points.coords
    diff = c[:, None, :] - c[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return SemimetricMatrix(d)


def mean_relative_error(approx, exact):
    """Mean and population std of |approx - exact| / exact."""
    a = np.asarray(approx, dtype=np.float64)
    e = np.asarray(exact, dtype=np.float64)
    if a.shape != e.shape:
        raise LengthMismatchError(f"length mismatch: {a.shape} vs {e.shape}")
    if np.any(e <= 0):
        raise ZeroExactError("exact values must be strictly positive")
    r = np.abs(a - e) / e
    return float(r.mean()), float(r.std())


# ---------------------------------------------------------------------------
# File I/O.  Decimal values are written with 17 significant digits so that
# write-then-read round trips are lossless for float64.


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, m: SemimetricMatrix):
    with open(path, "w") as f:
        for row in m.d:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def read_matrix_csv(path) -> SemimetricMatrix:
    rows = _read_float_rows(path)
    n = len(rows)
    for i, row in enumerate(rows):
        if len(row) != n:
            raise ParseError(f"matrix row has {len(row)} values, expected {n}", line=i + 1)
    return validate_semimetric(np.array(rows))


def write_points_csv(path, pc: PointCloud):
    with open(path, "w") as f:
        f.write(f"{pc.n},{pc.dim}\n")
        for row in pc.coords:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def read_points_csv(path) -> PointCloud:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ParseError("empty point cloud file", line=1)
    head = lines[0].split(",")
    if len(head) != 2:
        raise ParseError("expected header 'n,dim'", line=1)
    try:
        n, dim = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError("non-integer header fields", line=1) from None
    rows = _parse_float_rows(lines[1:], offset=2)
    if len(rows) != n:
        raise ParseError(f"expected {n} point rows, got {len(rows)}")
    for i, row in enumerate(rows):
        if len(row) != dim:
            raise ParseError(f"point row has {len(row)} values, expected {dim}", line=i + 2)
    return PointCloud(np.array(rows))


def write_distributions_csv(path, dists):
    with open(path, "w") as f:
        for dist in dists:
            f.write(",".join(_fmt(x) for x in dist.p) + "\n")


def read_distributions_csv(path, n=None):
    rows = _read_float_rows(path)
    out = []
    for i, row in enumerate(rows):
        if n is not None and len(row) != n:
            raise ParseError(f"distribution row has {len(row)} values, expected {n}", line=i + 1)
        try:
            out.append(Distribution(np.array(row)))
        except ValidationError as exc:
            raise ParseError(f"invalid distribution: {exc}", line=i + 1) from exc
    return out


def write_samples_jsonl(path, samples):
    with open(path, "w") as f:
        for s in samples:
            f.write(json.dumps({"mu": s.mu, "rho": s.rho, "w1": s.w1}) + "\n")


def read_samples_jsonl(path):
    out = []
    with open(path) as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(TrainSample(int(obj["mu"]), int(obj["rho"]), float(obj["w1"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad sample record: {exc}", line=i + 1) from exc
    return out


def _read_float_rows(path):
    with open(path) as f:
        return _parse_float_rows(f.read().splitlines(), offset=1)


def _parse_float_rows(lines, offset=1):
    rows = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        cells = line.split(",")
        row = []
        for j, cell in enumerate(cells):
            try:
                row.append(float(cell))
            except ValueError:
                raise ParseError(f"bad decimal value {cell!r}", line=i + offset, column=j + 1) from None
        rows.append(row)
    return rows


def check_same_n(*sizes):
    if len(set(sizes)) > 1:
        raise DimensionMismatchError(f"size mismatch: {sizes}")
