"""Weighted-grid Hilbert spaces.

A function space here is a finite grid of support points together with
positive quadrature weights.  Inner products are plain weighted sums, so
every L2 computation in the package reduces to dense linear algebra on
values tabulated at the grid nodes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import GridMismatchError

DEFAULT_ORTHO_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GridMeasure:
    """Discrete measure: support points (1-d or 2-d) plus positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[1] not in (1, 2):
            raise ValueError("points must be 1-d or 2-d vectors")
        if w.shape != (pts.shape[0],):
            raise GridMismatchError(
                f"weights shape {w.shape} does not match {pts.shape[0]} points"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("points and weights must be finite")
        if np.any(w <= 0):
            raise ValueError("all weights must be positive")
        order = np.lexsort(pts.T)
        if pts.shape[0] > 1 and np.any(
            np.all(np.diff(pts[order], axis=0) == 0.0, axis=1)
        ):
            raise ValueError("support points must be pairwise distinct")
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_probability(self) -> bool:
        return abs(float(self.weights.sum()) - 1.0) <= 1e-12

    @property
    def axis_sizes(self) -> tuple[int, ...]:
        return tuple(np.unique(self.points[:, k]).size for k in range(self.dim))

    def coords(self, axis: int = 0) -> np.ndarray:
        return self.points[:, axis]

    @staticmethod
    def uniform(n: int, a: float = 0.0, b: float = 1.0) -> "GridMeasure":
        """Midpoint grid on [a, b] with equal weights summing to b - a."""
        h = (b - a) / n
        pts = a + h * (np.arange(n) + 0.5)
        return GridMeasure(pts, np.full(n, h))

    @staticmethod
    def trapezoid(points: Sequence[float]) -> "GridMeasure":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("trapezoid rule needs a sorted 1-d grid")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("trapezoid grid must be strictly increasing")
        w = np.empty_like(pts)
        w[1:-1] = (pts[2:] - pts[:-2]) / 2.0
        w[0] = (pts[1] - pts[0]) / 2.0
        w[-1] = (pts[-1] - pts[-2]) / 2.0
        return GridMeasure(pts, w)

    @staticmethod
    def from_density(
        points: Sequence[float], density: Sequence[float], normalize: bool = True
    ) -> "GridMeasure":
        """Probability measure with trapezoid quadrature times a density."""
        base = GridMeasure.trapezoid(points)
        d = np.asarray(density, dtype=float)
        if np.any(d <= 0):
            raise ValueError("density must be strictly positive on the grid")
        w = base.weights * d
        if normalize:
            w = w / w.sum()
        return GridMeasure(base.points[:, 0], w)

    @staticmethod
    def tensor(mx: "GridMeasure", my: "GridMeasure") -> "GridMeasure":
        """Tensor product of two 1-d measures; first factor varies slowest."""
        if mx.dim != 1 or my.dim != 1:
            raise ValueError("tensor products are built from 1-d measures")
        px, py = np.meshgrid(mx.coords(), my.coords(), indexing="ij")
        pts = np.column_stack([px.ravel(), py.ravel()])
        w = np.outer(mx.weights, my.weights).ravel()
        return GridMeasure(pts, w)

    def same_as(self, other: "GridMeasure") -> bool:
        if self is other:
            return True
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def to_csv(self, path: str) -> None:
        headers = [f"x{k+1}" for k in range(self.dim)] + ["weight"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(headers)
            for p, w in zip(self.points, self.weights):
                wr.writerow([repr(float(v)) for v in p] + [repr(float(w))])

    @staticmethod
    def from_csv(path: str) -> "GridMeasure":
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        data = np.atleast_2d(data)
        return GridMeasure(data[:, :-1], data[:, -1])


@dataclass(frozen=True)
class GridFunction:
    """Real values tabulated at the nodes of a grid measure."""

    values: np.ndarray
    measure: GridMeasure

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=float))
        if v.shape != (self.measure.size,):
            raise GridMismatchError(
                f"{v.shape[0]} values for a {self.measure.size}-point measure"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("function values must be finite")
        object.__setattr__(self, "values", _readonly(v))

    @staticmethod
    def constant(measure: GridMeasure, c: float) -> "GridFunction":
        return GridFunction(np.full(measure.size, float(c)), measure)

    @staticmethod
    def zero(measure: GridMeasure) -> "GridFunction":
        return GridFunction.constant(measure, 0.0)

    @staticmethod
    def from_callable(measure: GridMeasure, fn: Callable) -> "GridFunction":
        if measure.dim == 1:
            vals = np.asarray(fn(measure.coords()), dtype=float)
        else:
            vals = np.asarray(fn(measure.points[:, 0], measure.points[:, 1]))
        return GridFunction(np.broadcast_to(vals, (measure.size,)), measure)

    def _check(self, other: "GridFunction") -> None:
        if not self.measure.same_as(other.measure):
            raise GridMismatchError("grid functions live on different measures")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.values + other.values, self.measure)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.values - other.values, self.measure)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.values * float(c), self.measure)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(-self.values, self.measure)

    def to_csv(self, path: str) -> None:
        headers = [f"x{k+1}" for k in range(self.measure.dim)] + ["value"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(headers)
            for p, v in zip(self.measure.points, self.values):
                wr.writerow([repr(float(u)) for u in p] + [repr(float(v))])

    @staticmethod
    def from_csv(path: str, measure: GridMeasure) -> "GridFunction":
        data = np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1))
        pts = data[:, :-1]
        if not np.allclose(pts, measure.points, rtol=0, atol=1e-12):
            raise GridMismatchError(f"{path} was not tabulated on this measure")
        return GridFunction(data[:, -1], measure)


def inner(f: GridFunction, g: GridFunction, mu: GridMeasure | None = None) -> float:
    """Weighted inner product sum_i w_i f_i g_i."""
    mu = mu or f.measure
    if not (f.measure.same_as(mu) and g.measure.same_as(mu)):
        raise GridMismatchError("inner product operands must share one measure")
    return float(np.dot(mu.weights, f.values * g.values))


def norm(f: GridFunction) -> float:
    return float(np.sqrt(np.dot(f.measure.weights, f.values**2)))


@dataclass(frozen=True)
class OrthonormalBasis:
    """Ordered family of grid functions, pairwise orthonormal under the measure.

    May be empty, in which case the measure must be supplied explicitly.
    """

    functions: tuple
    measure: GridMeasure | None = None
    ortho_tol: float = DEFAULT_ORTHO_TOL
    check: bool = True

    def __post_init__(self):
        fns = tuple(self.functions)
        mu = self.measure if fns == () else fns[0].measure
        if mu is None:
            raise ValueError("an empty basis needs an explicit measure")
        for f in fns:
            if not f.measure.same_as(mu):
                raise GridMismatchError("basis elements live on different measures")
        object.__setattr__(self, "functions", fns)
        object.__setattr__(self, "measure", mu)
        if self.check and fns:
            mat = self.matrix()
            gram = (mat * mu.weights[:, None]).T @ mat
            if not np.allclose(gram, np.eye(len(fns)), rtol=0, atol=self.ortho_tol):
                worst = np.abs(gram - np.eye(len(fns))).max()
                raise ValueError(
                    f"family is not orthonormal (worst Gram defect {worst:.2e})"
                )

    def __len__(self) -> int:
        return len(self.functions)

    def __getitem__(self, j: int) -> GridFunction:
        return self.functions[j]

    def __iter__(self) -> Iterator[GridFunction]:
        return iter(self.functions)

    def matrix(self) -> np.ndarray:
        """Node-by-element array of basis values."""
        return np.column_stack([f.values for f in self.functions])


def gram_schmidt(
    fs: Iterable[GridFunction],
    mu: GridMeasure,
    tol: float = 1e-10,
    ortho_tol: float = DEFAULT_ORTHO_TOL,
) -> tuple[OrthonormalBasis, list[int]]:
    """Orthonormalize a family by modified Gram-Schmidt with reorthogonalization.

    Elements whose residual norm falls below ``tol`` are dropped; the second
    return value lists their indices in the input order.  An empty input
    yields an empty basis, not an error.
    """
    if tol <= 0:
        raise ValueError("drop tolerance must be positive")
    fs = list(fs)
    kept: list[GridFunction] = []
    dropped: list[int] = []
    for idx, f in enumerate(fs):
        if not f.measure.same_as(mu):
            raise GridMismatchError("input functions must live on the given measure")
        v = f.values.copy()
        w = mu.weights
        for _ in range(2):  # MGS with one reorthogonalization pass
            for q in kept:
                v -= np.dot(w, v * q.values) * q.values
        r = float(np.sqrt(np.dot(w, v * v)))
        if r < tol:
            dropped.append(idx)
            continue
        kept.append(GridFunction(v / r, mu))
    return OrthonormalBasis(tuple(kept), measure=mu, ortho_tol=ortho_tol), dropped


def project(f: GridFunction, basis: OrthonormalBasis) -> GridFunction:
    """Orthogonal projection of f onto the span of the basis."""
    if len(basis) == 0:
        return GridFunction.zero(f.measure)
    if not f.measure.same_as(basis.measure):
        raise GridMismatchError("function and basis live on different measures")
    mat = basis.matrix()
    coeffs = (mat * basis.measure.weights[:, None]).T @ f.values
    return GridFunction(mat @ coeffs, f.measure)


def fourier_coeffs(f: GridFunction, basis: OrthonormalBasis) -> np.ndarray:
    """Coefficients <f, u_j> against an orthonormal basis."""
    if not f.measure.same_as(basis.measure):
        raise GridMismatchError("function and basis live on different measures")
    mat = basis.matrix()
    return (mat * basis.measure.weights[:, None]).T @ f.values


def cosine_basis(measure: GridMeasure, n_funcs: int) -> OrthonormalBasis:
    """Discrete cosine family, exactly orthonormal on a uniform midpoint grid.

    The first element is the constant function; element j is
    sqrt(2) cos(j pi t) evaluated at the midpoint parameters t = (i+1/2)/n.
    """
    if measure.dim != 1:
        raise ValueError("cosine basis requires a 1-d measure")
    n = measure.size
    if n_funcs > n:
        raise ValueError("cannot build more basis functions than grid points")
    if np.ptp(measure.weights) > 1e-14 * measure.weights[0]:
        raise ValueError("cosine basis requires uniform weights")
    wsum = measure.weights.sum()
    t = (np.arange(n) + 0.5) / n
    fns = []
    for j in range(n_funcs):
        if j == 0:
            vals = np.full(n, 1.0 / np.sqrt(wsum))
        else:
            vals = np.sqrt(2.0 / wsum) * np.cos(j * np.pi * t)
        fns.append(GridFunction(vals, measure))
    return OrthonormalBasis(fns)


def measure_to_json(mu: GridMeasure) -> dict:
    return {
        "points": mu.points.tolist(),
        "weights": mu.weights.tolist(),
        "probability": mu.is_probability,
    }


def measure_from_json(payload: dict) -> GridMeasure:
    return GridMeasure(np.asarray(payload["points"]), np.asarray(payload["weights"]))


def function_to_json(f: GridFunction) -> dict:
    return {"values": f.values.tolist(), "measure": measure_to_json(f.measure)}


def dump_json(payload: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
