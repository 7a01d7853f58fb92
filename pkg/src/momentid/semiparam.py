"""Partialling out the nonparametric direction of a semiparametric model.

The derivative of a map in (beta, g) splits into p parametric columns and a
linear operator in g.  Projecting the columns onto the closure of the
operator's range leaves a residual Gram matrix; when that matrix is
nonsingular, a computable constant eps bounds ||m'(alpha - alpha0)|| from
below by eps (|beta - beta0| + ||m'_g (g - g0)||), which is what makes beta
locally identifiable without identifying g.  The verification harnesses here
check those claims by direct sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EmptyNeighborhoodError, GridMismatchError
from .fnspace import (
    GridFunction,
    GridMeasure,
    OrthonormalBasis,
    inner,
    norm,
    project,
)
from .identcore import MomentMap
from .linop import LinearOperator, apply, svd


@dataclass(frozen=True)
class SplitDerivative:
    """Parametric derivative columns plus the nonparametric derivative operator."""

    m_beta: tuple
    m_g: LinearOperator

    def __post_init__(self):
        cols = tuple(self.m_beta)
        if not cols:
            raise ValueError("the split needs at least one parametric column")
        for col in cols:
            if not col.measure.same_as(self.m_g.codomain):
                raise GridMismatchError(
                    "parametric columns must live on the codomain of m_g"
                )
        object.__setattr__(self, "m_beta", cols)

    @property
    def p(self) -> int:
        return len(self.m_beta)

    def beta_matrix(self) -> np.ndarray:
        return np.column_stack([c.values for c in self.m_beta])


@dataclass(frozen=True)
class PartialOutReport:
    """Residual Gram matrix of the partialled-out parametric columns.

    eps1 = sqrt(lambda_min / 2) and eps = min(eps1/2, eps1/(2 c_star)) are the
    constants entering the lower bound; c_star is the measured projection
    size inflated ten percent and floored so eps1 / (sqrt(2) c_star) <= 1.
    """

    gram: np.ndarray
    zeta_star: tuple
    lambda_min: float
    eps1: float
    c_star: float
    eps: float
    range_tol: float
    range_basis: OrthonormalBasis
    tail_singular_mass: float
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "gram": self.gram.tolist(),
            "eigenvalues": np.linalg.eigvalsh(self.gram).tolist(),
            "lambda_min": self.lambda_min,
            "eps1": self.eps1,
            "c_star": self.c_star,
            "eps": self.eps,
            "range_tol": self.range_tol,
            "range_dimension": len(self.range_basis),
            "tail_singular_mass": self.tail_singular_mass,
            "degenerate": self.degenerate,
        }


def partial_out(split: SplitDerivative, range_tol: float) -> PartialOutReport:
    """Project the parametric columns off the truncated range of m_g.

    The closure of the range is approximated by the left singular functions
    with singular value above range_tol times the largest; the discarded
    squared singular mass is reported so the truncation error is visible.  A
    fully degenerate m_g yields the zero subspace, projections zero and the
    plain Gram matrix of the columns, flagged but valid.
    """
    if range_tol <= 0:
        raise ValueError("range_tol must be positive")
    dec = svd(split.m_g)
    mu = dec.singular_values
    keep = mu > range_tol * mu[0] if mu[0] > 0 else np.zeros(mu.size, dtype=bool)
    tail_mass = float(np.sum(mu[~keep] ** 2))
    degenerate = not bool(keep.any())
    range_basis = OrthonormalBasis(
        tuple(f for f, k in zip(dec.left_functions, keep) if k),
        measure=split.m_g.codomain,
        check=False,
    )
    zeta = tuple(project(col, range_basis) for col in split.m_beta)
    resid = [col - z for col, z in zip(split.m_beta, zeta)]
    p = split.p
    gram = np.empty((p, p))
    for j in range(p):
        for k in range(j, p):
            gram[j, k] = gram[k, j] = inner(resid[j], resid[k])
    gram = 0.5 * (gram + gram.T)
    lam_min = float(np.linalg.eigvalsh(gram)[0])
    lam_min = max(lam_min, 0.0)
    eps1 = math.sqrt(lam_min / 2.0)
    c_star = 1.1 * math.sqrt(sum(norm(z) ** 2 for z in zeta))
    c_star = max(c_star, eps1 / math.sqrt(2.0))
    eps = eps1 / 2.0 if c_star == 0.0 else min(eps1 / 2.0, eps1 / (2.0 * c_star))
    return PartialOutReport(
        gram=gram,
        zeta_star=zeta,
        lambda_min=lam_min,
        eps1=eps1,
        c_star=c_star,
        eps=eps,
        range_tol=range_tol,
        range_basis=range_basis,
        tail_singular_mass=tail_mass,
        degenerate=degenerate,
    )


def split_lower_bound_check(
    split: SplitDerivative,
    report: PartialOutReport,
    trials: int,
    seed: int,
) -> float:
    """Sample the lower bound ||b^T a + zeta|| >= eps (|a| + ||zeta||).

    Half of the draws build zeta from coefficients on the truncated range
    basis, half push random domain functions through m_g.  Returns the
    minimum observed ratio and raises if it undercuts report.eps beyond
    floating slack.
    """
    rng = np.random.default_rng(seed)
    p = split.p
    bmat = split.beta_matrix()
    w = split.m_g.codomain.weights
    k = len(report.range_basis)
    min_ratio = math.inf

    a_draws = rng.standard_normal((p, trials))
    a_draws[:, : max(trials // 20, 1)] = 0.0  # include pure-zeta cases
    half = trials // 2
    zeta_vals = np.zeros((split.m_g.codomain.size, trials))
    if k:
        coef = rng.standard_normal((k, half))
        zeta_vals[:, :half] = report.range_basis.matrix() @ coef
        zeta_norms_first = np.linalg.norm(coef, axis=0)
    else:
        zeta_norms_first = np.zeros(half)
    dvals = rng.standard_normal((split.m_g.domain.size, trials - half))
    dvals[:, : max((trials - half) // 20, 1)] = 0.0  # include pure-a cases
    zeta_vals[:, half:] = split.m_g.action_matrix() @ dvals
    zeta_norms = np.concatenate(
        [zeta_norms_first,
         np.sqrt(w @ zeta_vals[:, half:] ** 2)]
    )
    denom = np.linalg.norm(a_draws, axis=0) + zeta_norms
    vals = bmat @ a_draws + zeta_vals
    ratios = np.sqrt(w @ vals**2)
    live = denom > 0
    min_ratio = float((ratios[live] / denom[live]).min()) if live.any() else math.inf
    if min_ratio < report.eps - 1e-10:
        raise RuntimeError(
            f"lower bound violated: min ratio {min_ratio:.3e} < eps "
            f"{report.eps:.3e}"
        )
    return min_ratio


@dataclass(frozen=True)
class SemiparametricMap:
    """Moment map over (beta, g) with its split derivative at the truth."""

    beta0: np.ndarray
    g0: GridFunction
    eval_fn: Callable[[np.ndarray, GridFunction], GridFunction]
    split: SplitDerivative
    g_norm: Callable[[GridFunction], float] | None = None
    residual_tol: float = 1e-10

    def __post_init__(self):
        b0 = np.atleast_1d(np.asarray(self.beta0, dtype=float))
        if b0.size != self.split.p:
            raise GridMismatchError("beta0 length must match the split column count")
        object.__setattr__(self, "beta0", b0)
        if not self.g0.measure.same_as(self.split.m_g.domain):
            raise GridMismatchError("g0 must live on the domain of m_g")
        r0 = norm(self.eval(self.beta0, self.g0))
        if r0 > self.residual_tol:
            raise ValueError(f"map violates m(beta0, g0) = 0: residual {r0:.3e}")

    def eval(self, beta: np.ndarray, g: GridFunction) -> GridFunction:
        return self.eval_fn(np.asarray(beta, dtype=float), g)

    def g_norm_of(self, f: GridFunction) -> float:
        return norm(f) if self.g_norm is None else float(self.g_norm(f))

    def to_moment_map(self) -> MomentMap:
        """Stack (beta, g) into one grid function so the generic map tools apply.

        The beta coordinates get unit weights at sentinel support points below
        the g grid; the stacked weighted norm is then the product norm
        sqrt(|beta - beta0|^2 + ||g - g0||^2).
        """
        g_mu = self.g0.measure
        if g_mu.dim != 1:
            raise ValueError("stacking requires a 1-d nonparametric grid")
        p = self.split.p
        lo = float(g_mu.points.min())
        span = max(float(np.ptp(g_mu.points)), 1.0)
        sentinels = lo - span * (np.arange(p, dtype=float) + 1.0)
        pts = np.concatenate([sentinels[::-1], g_mu.coords()])
        wts = np.concatenate([np.ones(p), g_mu.weights])
        stacked_mu = GridMeasure(pts, wts)

        def unstack(alpha: GridFunction) -> tuple[np.ndarray, GridFunction]:
            vals = alpha.values
            return vals[:p], GridFunction(vals[p:], g_mu)

        def eval_fn(alpha: GridFunction) -> GridFunction:
            beta, g = unstack(alpha)
            return self.eval(beta, g)

        kernel = np.hstack(
            [self.split.beta_matrix(), self.split.m_g.entries]
        )
        derivative = LinearOperator(kernel, stacked_mu, self.split.m_g.codomain)
        base = GridFunction(
            np.concatenate([self.beta0, self.g0.values]), stacked_mu
        )
        return MomentMap(
            base_point=base,
            eval_fn=eval_fn,
            derivative=derivative,
            residual_tol=self.residual_tol,
        )


def linearity_in_g_check(
    model: SemiparametricMap, seed: int = 0, trials: int = 4, tol: float = 1e-9
) -> float:
    """Largest relative additivity/homogeneity defect of g -> m(beta0, g)."""
    rng = np.random.default_rng(seed)
    g_mu = model.g0.measure
    m0 = model.eval(model.beta0, model.g0)
    worst = 0.0
    for _ in range(trials):
        d1 = GridFunction(rng.standard_normal(g_mu.size), g_mu)
        d2 = GridFunction(rng.standard_normal(g_mu.size), g_mu)
        a, b = rng.uniform(-2, 2, size=2)
        lhs = model.eval(model.beta0, model.g0 + a * d1 + b * d2) - m0
        r1 = model.eval(model.beta0, model.g0 + d1) - m0
        r2 = model.eval(model.beta0, model.g0 + d2) - m0
        rhs = a * r1 + b * r2
        scale = max(norm(rhs), 1e-12)
        worst = max(worst, norm(lhs - rhs) / scale)
    return worst


@dataclass
class SemiparamIdReport:
    pi_nonsingular: bool
    samples: int
    passes: int
    failures: int
    min_m_norm: float
    full_local_id: bool
    g_rank_holds: bool
    partial: PartialOutReport
    pos_tol: float

    @property
    def all_passed(self) -> bool:
        return self.pi_nonsingular and self.failures == 0

    def to_json(self) -> dict:
        return {
            "pi_nonsingular": self.pi_nonsingular,
            "samples": self.samples,
            "passes": self.passes,
            "failures": self.failures,
            "min_m_norm": self.min_m_norm,
            "full_local_id": self.full_local_id,
            "g_rank_holds": self.g_rank_holds,
            "pos_tol": self.pos_tol,
            "all_passed": self.all_passed,
            "partial": self.partial.to_json(),
        }


def _sample_g_deviation(
    rng: np.random.Generator, dec, g_radius: float, g_norm_of
) -> GridFunction:
    mu = dec.right_functions.measure
    raw = rng.standard_normal(mu.size) * 0.7 ** np.arange(mu.size)
    g = GridFunction(dec.right_functions.matrix() @ raw, mu)
    scale = g_norm_of(g)
    if scale == 0.0:
        return g
    return (rng.uniform(0.05, 1.0) * g_radius / scale) * g

def verify_semiparam_linear(
    model: SemiparametricMap,
    beta_radius: float,
    g_radius: float,
    samples: int,
    seed: int,
    range_tol: float = 1e-12,
    singular_gate: float = 1e-10,
    pos_tol: float | None = None,
    rank_tol: float = 1e-10,
) -> SemiparamIdReport:
    """Sampling harness for parametric identification with g linear.

    Requires linearity of g -> m(beta0, g); checks that every sampled
    (beta, g) with beta != beta0 in the product neighborhood keeps
    ||m(beta, g)|| above numerical zero.  When the rank condition for m_g
    also holds, samples with beta = beta0 and g != g0 are asserted nonzero
    too, upgrading the claim to full local identification.  With a singular
    Gram matrix the precondition gate fails and no claim is made.
    """
    defect = linearity_in_g_check(model, seed=seed)
    if defect > 1e-9:
        raise ValueError(
            f"m(beta0, .) is not linear in g (defect {defect:.2e}); "
            "use verify_semiparam_nonlinear with a curvature bound"
        )
    report = partial_out(model.split, range_tol)
    # gate against the unpartialled column scale: a fully absorbed column
    # leaves only projection dust in the Gram matrix
    scale = sum(norm(c) ** 2 for c in model.split.m_beta)
    if report.lambda_min <= singular_gate * max(scale, 1e-300):
        return SemiparamIdReport(
            pi_nonsingular=False, samples=0, passes=0, failures=0,
            min_m_norm=math.nan, full_local_id=False, g_rank_holds=False,
            partial=report, pos_tol=math.nan,
        )
    rng = np.random.default_rng(seed)
    dec = svd(model.split.m_g)
    if pos_tol is None:
        stacked = model.to_moment_map()
        pos_tol = 1e-10 * (1.0 + svd(stacked.derivative).sigma_max)
    from .identcore import rank_condition

    g_rank = rank_condition(model.split.m_g, rank_tol)
    passes = failures = 0
    min_m = math.inf
    for _ in range(samples):
        direction = rng.standard_normal(model.split.p)
        direction /= np.linalg.norm(direction)
        beta = model.beta0 + rng.uniform(0.05, 1.0) * beta_radius * direction
        g_dev = _sample_g_deviation(rng, dec, g_radius, model.g_norm_of)
        m_n = norm(model.eval(beta, model.g0 + g_dev))
        min_m = min(min_m, m_n)
        if m_n > pos_tol:
            passes += 1
        else:
            failures += 1
    full_ok = bool(g_rank.holds)
    if g_rank.holds:
        for _ in range(samples):
            g_dev = _sample_g_deviation(rng, dec, g_radius, model.g_norm_of)
            if model.g_norm_of(g_dev) == 0.0:
                continue
            m_n = norm(model.eval(model.beta0, model.g0 + g_dev))
            min_m = min(min_m, m_n)
            if m_n > pos_tol:
                passes += 1
            else:
                failures += 1
                full_ok = False
    return SemiparamIdReport(
        pi_nonsingular=True,
        samples=samples * (2 if g_rank.holds else 1),
        passes=passes,
        failures=failures,
        min_m_norm=min_m,
        full_local_id=full_ok,
        g_rank_holds=bool(g_rank.holds),
        partial=report,
        pos_tol=pos_tol,
    )


def verify_semiparam_nonlinear(
    model: SemiparametricMap,
    bound,
    beta_radius: float,
    samples: int,
    seed: int,
    g_radius: float | None = None,
    range_tol: float = 1e-12,
    singular_gate: float = 1e-10,
    pos_tol: float | None = None,
    budget_factor: int = 200,
) -> SemiparamIdReport:
    """Like the linear harness, but g-deviations are restricted by rejection
    to the curvature-adjusted identification set
    ||m_g d|| > (L / eps) ||d||^r with eps from the partialled-out report.

    With L = 0 the restriction is vacuous and the behavior reduces to the
    linear harness.  An exhausted rejection budget raises
    EmptyNeighborhoodError, which usually means the threshold is too strict
    for the sampled decay profile.
    """
    report = partial_out(model.split, range_tol)
    scale = sum(norm(c) ** 2 for c in model.split.m_beta)
    if report.lambda_min <= singular_gate * max(scale, 1e-300):
        return SemiparamIdReport(
            pi_nonsingular=False, samples=0, passes=0, failures=0,
            min_m_norm=math.nan, full_local_id=False, g_rank_holds=False,
            partial=report, pos_tol=math.nan,
        )
    if g_radius is None:
        g_radius = bound.radius if math.isfinite(bound.radius) else 1.0
    rng = np.random.default_rng(seed)
    dec = svd(model.split.m_g)
    if pos_tol is None:
        stacked = model.to_moment_map()
        pos_tol = 1e-10 * (1.0 + svd(stacked.derivative).sigma_max)
    threshold = bound.L / report.eps
    passes = failures = 0
    min_m = math.inf
    accepted = 0
    attempts = 0
    budget = budget_factor * samples
    while accepted < samples:
        if attempts >= budget:
            raise EmptyNeighborhoodError(
                f"accepted {accepted}/{samples} g-deviations in {attempts} "
                f"draws; threshold (L/eps) = {threshold:.3e} may be too strict"
            )
        attempts += 1
        g_dev = _sample_g_deviation(rng, dec, g_radius, model.g_norm_of)
        dn = model.g_norm_of(g_dev)
        if dn == 0.0 or not bound.contains_deviation(g_dev, dn):
            continue
        if not norm(apply(model.split.m_g, g_dev)) > threshold * dn**bound.r:
            continue
        accepted += 1
        direction = rng.standard_normal(model.split.p)
        direction /= np.linalg.norm(direction)
        beta = model.beta0 + rng.uniform(0.05, 1.0) * beta_radius * direction
        m_n = norm(model.eval(beta, model.g0 + g_dev))
        min_m = min(min_m, m_n)
        if m_n > pos_tol:
            passes += 1
        else:
            failures += 1
    return SemiparamIdReport(
        pi_nonsingular=True,
        samples=samples,
        passes=passes,
        failures=failures,
        min_m_norm=min_m,
        full_local_id=False,
        g_rank_holds=False,
        partial=report,
        pos_tol=pos_tol,
    )
