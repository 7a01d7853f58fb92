"""Dense linear operators between weighted-grid spaces.

An operator stores its kernel table K on codomain x domain nodes and acts by
quadrature, (T f)(s) = sum_t w_t K(s, t) f(t).  Adjoints, singular value
decompositions and Hilbert-Schmidt norms are all taken with respect to the
weighted inner products of the two grids, not the plain Euclidean ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMarginalError, GridMismatchError
from .fnspace import GridFunction, GridMeasure, OrthonormalBasis

MAX_AXIS_POINTS = 512


@dataclass(frozen=True)
class KernelSpec:
    """Tabulated kernel values on codomain x domain nodes (density-ratio units)."""

    values: np.ndarray
    nonnegative: bool = False

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(vals)):
            raise ValueError("kernel entries must be finite")
        if self.nonnegative and np.any(vals < 0):
            raise ValueError("kernel flagged nonnegative has negative entries")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class LinearOperator:
    """Kernel-table operator from one weighted grid to another."""

    entries: np.ndarray
    domain: GridMeasure
    codomain: GridMeasure

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if e.shape != (self.codomain.size, self.domain.size):
            raise GridMismatchError(
                f"entries shape {e.shape} does not match "
                f"codomain x domain = ({self.codomain.size}, {self.domain.size})"
            )
        if not np.all(np.isfinite(e)):
            raise ValueError("operator entries must be finite")
        for mu in (self.domain, self.codomain):
            if max(mu.axis_sizes) > MAX_AXIS_POINTS:
                raise ValueError(
                    f"grid axis exceeds the dense-storage cap of {MAX_AXIS_POINTS}"
                )
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def action_matrix(self) -> np.ndarray:
        """Matrix sending node values to node values (weights absorbed)."""
        return self.entries * self.domain.weights[None, :]

    def __call__(self, f: GridFunction) -> GridFunction:
        return apply(self, f)

    def __add__(self, other: "LinearOperator") -> "LinearOperator":
        self._check_compatible(other)
        return LinearOperator(self.entries + other.entries, self.domain, self.codomain)

    def __sub__(self, other: "LinearOperator") -> "LinearOperator":
        self._check_compatible(other)
        return LinearOperator(self.entries - other.entries, self.domain, self.codomain)

    def __mul__(self, c: float) -> "LinearOperator":
        return LinearOperator(self.entries * float(c), self.domain, self.codomain)

    __rmul__ = __mul__

    def _check_compatible(self, other: "LinearOperator") -> None:
        if not (
            self.domain.same_as(other.domain) and self.codomain.same_as(other.codomain)
        ):
            raise GridMismatchError("operators act between different spaces")

    @staticmethod
    def identity(mu: GridMeasure) -> "LinearOperator":
        return LinearOperator(np.diag(1.0 / mu.weights), mu, mu)

    @staticmethod
    def zero(dom: GridMeasure, cod: GridMeasure) -> "LinearOperator":
        return LinearOperator(np.zeros((cod.size, dom.size)), dom, cod)


def apply(op: LinearOperator, f: GridFunction) -> GridFunction:
    if not f.measure.same_as(op.domain):
        raise GridMismatchError("function does not live on the operator domain")
    return GridFunction(op.entries @ (op.domain.weights * f.values), op.codomain)


def from_kernel(
    kernel: KernelSpec | np.ndarray, dom: GridMeasure, cod: GridMeasure
) -> LinearOperator:
    """Integral operator (T g)(s) = sum_t w_t K(s, t) g(t)."""
    if not isinstance(kernel, KernelSpec):
        kernel = KernelSpec(np.asarray(kernel))
    return LinearOperator(kernel.values, dom, cod)


def conditional_expectation(
    joint: np.ndarray,
    dom: GridMeasure,
    cod: GridMeasure,
    weight: np.ndarray | None = None,
) -> LinearOperator:
    """Conditional expectation operator built from a joint density table.

    ``joint[i, j]`` is the joint density of (X, W) at (x_i, w_j) relative to
    the product of the two grid measures, so a table identically one encodes
    independence.  The operator maps g on the X grid to
    E[a(X, W) g(X) | W] on the W grid; ``weight`` supplies a(x, w) and
    defaults to one.  Conditioning points with no marginal mass are rejected.
    """
    joint = np.asarray(joint, dtype=float)
    if joint.shape != (dom.size, cod.size):
        raise GridMismatchError(
            f"joint table shape {joint.shape} != (dom, cod) = "
            f"({dom.size}, {cod.size})"
        )
    if np.any(joint < 0):
        raise ValueError("joint density table must be nonnegative")
    marg = dom.weights @ joint
    bad = np.flatnonzero(marg <= 0)
    if bad.size:
        j = int(bad[0])
        raise DegenerateMarginalError(
            f"zero conditional mass at codomain point index {j}, "
            f"coordinates {cod.points[j]}"
        )
    a = np.ones_like(joint) if weight is None else np.asarray(weight, dtype=float)
    if a.shape != joint.shape:
        raise GridMismatchError("weight table must match the joint table shape")
    kernel = (a * joint / marg[None, :]).T
    return LinearOperator(kernel, dom, cod)


def adjoint(op: LinearOperator) -> LinearOperator:
    """Adjoint with respect to the weighted inner products (kernel transpose)."""
    return LinearOperator(op.entries.T, op.codomain, op.domain)


@dataclass(frozen=True)
class SvdDecomposition:
    """Weighted singular value decomposition of a grid operator."""

    singular_values: np.ndarray
    right_functions: OrthonormalBasis
    left_functions: OrthonormalBasis
    tol: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.singular_values, dtype=float)
        if np.any(s < 0) or np.any(np.diff(s) > 0):
            raise ValueError("singular values must be nonnegative and nonincreasing")
        object.__setattr__(self, "singular_values", s)

    @property
    def sigma_min(self) -> float:
        return float(self.singular_values[-1])

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0])

    def num_numerically_zero(self) -> int:
        """Count of values at or below tol * sigma_max (retained, not removed)."""
        if self.singular_values.size == 0:
            return 0
        return int(np.sum(self.singular_values <= self.tol * self.sigma_max))


def svd(op: LinearOperator, tol: float = 1e-12) -> SvdDecomposition:
    """Weighted SVD: op(phi_j) = mu_j psi_j with orthonormal phi on the domain
    and psi on the codomain.

    Values at or below ``tol * mu_1`` are reported as numerically zero by the
    decomposition but are retained in the spectrum.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    wd = op.domain.weights
    wc = op.codomain.weights
    b = np.sqrt(wc)[:, None] * op.entries * np.sqrt(wd)[None, :]
    try:
        u, s, vt = np.linalg.svd(b, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        cond = float(np.abs(b).max() / max(np.abs(b).min(), 1e-300))
        raise np.linalg.LinAlgError(
            f"SVD failed to converge (entry magnitude ratio {cond:.2e})"
        ) from exc
    right = [GridFunction(vt[j] / np.sqrt(wd), op.domain) for j in range(s.size)]
    left = [GridFunction(u[:, j] / np.sqrt(wc), op.codomain) for j in range(s.size)]
    return SvdDecomposition(
        s,
        OrthonormalBasis(tuple(right), measure=op.domain, check=False),
        OrthonormalBasis(tuple(left), measure=op.codomain, check=False),
        tol=tol,
    )


def hs_norm(op: LinearOperator) -> float:
    """Hilbert-Schmidt norm sqrt(sum_{s,t} w_s w_t K(s,t)^2)."""
    return float(
        np.sqrt(
            np.einsum(
                "s,t,st->", op.codomain.weights, op.domain.weights, op.entries**2
            )
        )
    )


def compose(outer: LinearOperator, inner_op: LinearOperator) -> LinearOperator:
    """Operator composition outer(inner_op(.))."""
    if not inner_op.codomain.same_as(outer.domain):
        raise GridMismatchError("composition spaces do not chain")
    kernel = outer.action_matrix() @ inner_op.entries
    return LinearOperator(kernel, inner_op.domain, outer.codomain)


def operator_to_csv(op: LinearOperator, basepath: str) -> None:
    """Round-trippable on-disk form: matrix CSV plus a JSON sidecar."""
    np.savetxt(basepath + ".csv", op.entries, delimiter=",")
    op.domain.to_csv(basepath + ".domain.csv")
    op.codomain.to_csv(basepath + ".codomain.csv")
    sidecar = {
        "entries_csv": basepath + ".csv",
        "domain_csv": basepath + ".domain.csv",
        "codomain_csv": basepath + ".codomain.csv",
        "shape": list(op.shape),
    }
    with open(basepath + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)


def operator_from_csv(basepath: str) -> LinearOperator:
    with open(basepath + ".json") as fh:
        sidecar = json.load(fh)
    entries = np.atleast_2d(np.loadtxt(sidecar["entries_csv"], delimiter=","))
    dom = GridMeasure.from_csv(sidecar["domain_csv"])
    cod = GridMeasure.from_csv(sidecar["codomain_csv"])
    return LinearOperator(entries, dom, cod)
