"""Local identification logic for nonlinear moment maps on weighted grids.

The central objects are a moment map m with m(alpha0) = 0, its derivative
operator at alpha0, and a curvature bound ||m(a) - m(a0) - m'(a - a0)|| <=
L ||a - a0||^r.  The functions here check derivative fidelity, estimate the
curvature constant, test rank conditions, classify deviations against the
identification neighborhoods those quantities induce, and stress-test the
tangential-cone set inclusions on random finite-dimensional instances.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyNeighborhoodError, GridMismatchError
from .fnspace import GridFunction, GridMeasure, OrthonormalBasis, norm
from .linop import LinearOperator, SvdDecomposition, apply, svd


@dataclass(frozen=True)
class MomentMap:
    """Nonlinear map alpha -> m(alpha) with a base point and attached derivative.

    ``norm_a`` and ``norm_b`` override the default weighted-L2 norms of the
    domain and codomain grids; the sequence-space counterexample uses a
    quartic domain norm, everything else keeps the defaults.
    """

    base_point: GridFunction
    eval_fn: Callable[[GridFunction], GridFunction]
    derivative: LinearOperator
    norm_a: Callable[[GridFunction], float] | None = None
    norm_b: Callable[[GridFunction], float] | None = None
    residual_tol: float = 1e-10

    def __post_init__(self):
        if not self.base_point.measure.same_as(self.derivative.domain):
            raise GridMismatchError("base point does not live on the derivative domain")
        r0 = self.norm_b_of(self.eval(self.base_point))
        if r0 > self.residual_tol:
            raise ValueError(
                f"moment map violates m(alpha0) = 0: residual {r0:.3e}"
            )

    def eval(self, alpha: GridFunction) -> GridFunction:
        if not alpha.measure.same_as(self.base_point.measure):
            raise GridMismatchError("alpha does not live on the domain grid")
        out = self.eval_fn(alpha)
        if not out.measure.same_as(self.derivative.codomain):
            raise GridMismatchError("eval output does not live on the codomain grid")
        return out

    def norm_a_of(self, f: GridFunction) -> float:
        return norm(f) if self.norm_a is None else float(self.norm_a(f))

    def norm_b_of(self, f: GridFunction) -> float:
        return norm(f) if self.norm_b is None else float(self.norm_b(f))


@dataclass(frozen=True)
class NonlinearityBound:
    """Curvature constant L, exponent r and the neighborhood where they apply.

    The neighborhood is a deviation-norm ball of the given radius unless a
    custom membership predicate replaces it.
    """

    L: float
    r: float
    radius: float = math.inf
    membership: Callable[[GridFunction], bool] | None = None

    def __post_init__(self):
        if self.L < 0:
            raise ValueError("L must be nonnegative")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.radius <= 0:
            raise ValueError("neighborhood radius must be positive")

    def contains_deviation(self, delta: GridFunction, dev_norm: float) -> bool:
        if self.membership is not None:
            return bool(self.membership(delta))
        return dev_norm <= self.radius


def positivity_tol(op: LinearOperator) -> float:
    """Numerical zero scale for codomain norms: 1e-10 (1 + ||m'||)."""
    return 1e-10 * (1.0 + svd(op).sigma_max)


def gateaux_check(
    mmap: MomentMap,
    directions: Sequence[GridFunction],
    steps: Sequence[float],
    richardson: bool = False,
) -> float:
    """Compare central finite differences of m against the attached derivative.

    Steps must be positive and decreasing.  Returns the worst relative error
    over the directions at the smallest step; with ``richardson`` each step t
    combines the t and t/2 central differences to cancel the quadratic error
    term.
    """
    steps = list(steps)
    if not steps or any(s <= 0 for s in steps):
        raise ValueError("steps must be positive")
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValueError("steps must be decreasing")
    a0 = mmap.base_point

    def central(h: GridFunction, t: float) -> np.ndarray:
        up = mmap.eval(a0 + t * h)
        dn = mmap.eval(a0 + (-t) * h)
        return (up.values - dn.values) / (2.0 * t)

    worst = 0.0
    cod = mmap.derivative.codomain
    for h in directions:
        exact = apply(mmap.derivative, h)
        scale = max(mmap.norm_b_of(exact), 1e-300)
        err = math.inf
        for t in steps:
            fd = central(h, t)
            if richardson:
                fd = (4.0 * central(h, t / 2.0) - fd) / 3.0
            err = mmap.norm_b_of(GridFunction(fd - exact.values, cod)) / scale
        worst = max(worst, err)
    return worst


def estimate_nonlinearity(
    mmap: MomentMap, r: float, deviations: Sequence[GridFunction]
) -> float:
    """Empirical curvature constant: max ||m(a0+d) - m(a0) - m'd|| / ||d||^r.

    A lower bound for any valid L on a neighborhood covering the sampled
    deviations.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    a0 = mmap.base_point
    m0 = mmap.eval(a0)
    best = 0.0
    for d in deviations:
        dn = mmap.norm_a_of(d)
        if dn == 0.0:
            raise ValueError("deviations must have nonzero norm")
        rem = mmap.eval(a0 + d) - m0 - apply(mmap.derivative, d)
        best = max(best, mmap.norm_b_of(rem) / dn**r)
    return best


@dataclass(frozen=True)
class RankReport:
    holds: bool
    sigma_min: float
    sigma_max: float
    vacuous: bool = False


def rank_condition(
    op: LinearOperator, tol: float, subspace: OrthonormalBasis | None = None
) -> RankReport:
    """Injectivity proxy: smallest singular value above tol * largest.

    With a subspace the operator is restricted to that span first.  An empty
    subspace makes the condition vacuously true; that case is flagged with a
    warning and not reported as success.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if subspace is not None and len(subspace) == 0:
        warnings.warn(
            "rank condition on an empty subspace is vacuous, not a success",
            stacklevel=2,
        )
        return RankReport(holds=False, sigma_min=math.nan, sigma_max=math.nan,
                          vacuous=True)
    if subspace is None:
        s = svd(op).singular_values
        dom_dim = op.domain.size
    else:
        cols = np.column_stack([apply(op, u).values for u in subspace])
        b = np.sqrt(op.codomain.weights)[:, None] * cols
        s = np.linalg.svd(b, compute_uv=False)
        dom_dim = len(subspace)
    # a domain larger than the codomain always has a null space
    smin = 0.0 if dom_dim > op.codomain.size else float(s[-1])
    smax = float(s[0])
    return RankReport(holds=smin > tol * smax, sigma_min=smin, sigma_max=smax)


def in_identification_set(
    delta: GridFunction,
    op: LinearOperator,
    bound: NonlinearityBound,
    norm_a: Callable[[GridFunction], float] | None = None,
) -> bool:
    """Strict test ||m' d|| > L ||d||^r; the zero deviation is excluded."""
    dev = norm(delta) if norm_a is None else float(norm_a(delta))
    lin = norm(apply(op, delta))
    return lin > bound.L * dev**bound.r


def in_ellipsoid(
    b: Sequence[float], mu: Sequence[float], bound: NonlinearityBound
) -> bool:
    """Source-condition ellipsoid sum_j mu_j^(-2/(r-1)) b_j^2 < L^(-2/(r-1)).

    Membership implies membership of the corresponding deviation in the
    identification set for the same (L, r).  Requires r > 1 and L > 0.
    """
    if bound.r <= 1 or bound.L <= 0:
        raise ValueError("the ellipsoid test requires r > 1 and L > 0")
    b = np.asarray(b, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if b.shape != mu.shape:
        raise GridMismatchError("coefficients and singular values differ in length")
    if not b.any():
        warnings.warn(
            "zero coefficients encode the center point itself, which the "
            "identification claim excludes",
            stacklevel=2,
        )
        return True
    p = 2.0 / (bound.r - 1.0)
    return float(np.sum(mu ** (-p) * b**2)) < bound.L ** (-p)


def sample_ellipsoid_deviations(
    dec: SvdDecomposition,
    bound: NonlinearityBound,
    n: int,
    rng: np.random.Generator,
    decay: float = 0.75,
    scale_range: tuple[float, float] = (0.2, 0.9),
    first_mass: float = 0.3,
) -> list[tuple[GridFunction, np.ndarray]]:
    """Draw deviations strictly inside the source-condition ellipsoid.

    Coefficients follow a geometric decay over the singular basis with a
    guaranteed share on the leading component, so the image norm never falls
    to numerical-zero scale.
    """
    if bound.r <= 1 or bound.L <= 0:
        raise ValueError("ellipsoid sampling requires r > 1 and L > 0")
    mu = dec.singular_values
    k = mu.size
    mat = dec.right_functions.matrix()
    out = []
    power = 1.0 / (bound.r - 1.0)
    for _ in range(n):
        raw = rng.standard_normal(k) * decay ** np.arange(k)
        raw /= np.linalg.norm(raw)
        c = raw * (1.0 - first_mass)
        c[0] += math.copysign(first_mass, raw[0] if raw[0] != 0 else 1.0)
        c /= np.linalg.norm(c)
        s = rng.uniform(*scale_range)
        b = s * bound.L ** (-power) * mu**power * c
        delta = GridFunction(mat @ b, dec.right_functions.measure)
        out.append((delta, b))
    return out


def geometric_deviation_sampler(
    dec: SvdDecomposition,
    bound: NonlinearityBound,
    rng: np.random.Generator,
    decay: float = 0.7,
    scale: float = 1.0,
) -> GridFunction:
    """Random deviation with geometrically decaying singular-basis coefficients.

    The magnitude is drawn below the direction's own identification-set cap,
    which keeps rejection rates low; membership is still verified by the
    caller, never assumed.
    """
    mu = dec.singular_values
    k = mu.size
    mat = dec.right_functions.matrix()
    raw = rng.standard_normal(k) * decay ** np.arange(k)
    nrm = np.linalg.norm(raw)
    if nrm == 0.0:
        raw[0] = 1.0
        nrm = 1.0
    raw /= nrm
    cap = min(scale, bound.radius if math.isfinite(bound.radius) else scale)
    if bound.L > 0 and bound.r > 1:
        mu_dir = float(np.sqrt(np.sum((mu * raw) ** 2)))
        if mu_dir > 0:
            cap = min(cap, 0.95 * (mu_dir / bound.L) ** (1.0 / (bound.r - 1.0)))
    s = rng.uniform(0.05, 1.0) * cap
    return GridFunction(mat @ (s * raw), dec.right_functions.measure)


@dataclass
class LocalIdReport:
    samples: int
    attempts: int
    passes: int
    failures: int
    min_m_norm: float
    min_margin: float
    seed: int
    pos_tol: float
    rows: list = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return self.failures == 0 and self.passes == self.samples

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "attempts": self.attempts,
            "passes": self.passes,
            "failures": self.failures,
            "min_m_norm": self.min_m_norm,
            "min_margin": self.min_margin,
            "seed": self.seed,
            "pos_tol": self.pos_tol,
            "all_passed": self.all_passed,
        }

    def rows_to_csv(self, path: str) -> None:
        """Optional per-sample table: one row per accepted deviation."""
        import csv

        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["deviation_norm", "linear_norm", "remainder_norm",
                         "m_norm", "passed"])
            for row in self.rows:
                wr.writerow(row)


def verify_local_id(
    mmap: MomentMap,
    bound: NonlinearityBound,
    samples: int,
    rng_seed: int,
    sampler: Callable[[np.random.Generator], GridFunction] | None = None,
    enforce_membership: bool = True,
    budget_factor: int = 200,
    pos_tol: float | None = None,
    keep_rows: bool = False,
) -> LocalIdReport:
    """Monte Carlo check of the identification inequality on the target set.

    Draws deviations, rejects those outside the curvature neighborhood or the
    identification set, and for every accepted alpha verifies both
    ||m(alpha) - m'(alpha - alpha0)|| < ||m'(alpha - alpha0)|| and
    ||m(alpha)|| above numerical-zero scale.  Raises EmptyNeighborhoodError
    if the rejection budget runs out.
    """
    if samples <= 0:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(rng_seed)
    dec = svd(mmap.derivative)
    if pos_tol is None:
        pos_tol = 1e-10 * (1.0 + dec.sigma_max)
    if sampler is None:
        def sampler(r):  # noqa: F811 - deliberate default binding
            return geometric_deviation_sampler(dec, bound, r)

    a0 = mmap.base_point
    accepted = 0
    attempts = 0
    passes = 0
    failures = 0
    min_m = math.inf
    min_margin = math.inf
    rows: list = []
    budget = budget_factor * samples
    while accepted < samples:
        if attempts >= budget:
            raise EmptyNeighborhoodError(
                f"accepted only {accepted}/{samples} deviations after "
                f"{attempts} draws; the sampled neighborhood may be empty "
                f"for L={bound.L}, r={bound.r}"
            )
        attempts += 1
        delta = sampler(rng)
        dev_norm = mmap.norm_a_of(delta)
        if dev_norm == 0.0:
            continue
        if enforce_membership:
            if not bound.contains_deviation(delta, dev_norm):
                continue
            if not in_identification_set(
                delta, mmap.derivative, bound, norm_a=mmap.norm_a
            ):
                continue
        accepted += 1
        alpha = a0 + delta
        m_val = mmap.eval(alpha)
        lin = apply(mmap.derivative, delta)
        rem = mmap.norm_b_of(m_val - lin)
        lin_n = mmap.norm_b_of(lin)
        m_n = mmap.norm_b_of(m_val)
        margin = lin_n - rem
        min_m = min(min_m, m_n)
        min_margin = min(min_margin, margin)
        good = rem < lin_n and m_n > pos_tol
        if good:
            passes += 1
        else:
            failures += 1
        if keep_rows:
            rows.append((dev_norm, lin_n, rem, m_n, good))
    return LocalIdReport(
        samples=samples,
        attempts=attempts,
        passes=passes,
        failures=failures,
        min_m_norm=min_m,
        min_margin=min_margin,
        seed=rng_seed,
        pos_tol=pos_tol,
        rows=rows,
    )


# ---------------------------------------------------------------------------
# Sequence-space counterexample: smooth map, identity derivative, yet not
# locally identified on any open ball.
# ---------------------------------------------------------------------------


def default_counterexample_f(x):
    """x (1 - x) exp(-x^2): zeros exactly at 0 and 1, unit slope at 0."""
    x = np.asarray(x, dtype=float)
    return x * (1.0 - x) * np.exp(-(x**2))


def dyadic_weights(n_terms: int) -> np.ndarray:
    """Weights 2^-j for j = 1..n_terms with the tail folded into the last one."""
    p = 0.5 ** np.arange(1, n_terms + 1)
    p[-1] *= 2.0  # fold sum_{j >= n} 2^-j = 2^-(n-1)
    return p


def _validate_counterexample_f(f: Callable, scan: np.ndarray) -> None:
    vals = np.asarray(f(scan), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("f must be finite on the scan range")
    for root in (0.0, 1.0):
        if abs(float(f(root))) > 1e-12:
            raise ValueError(f"f must vanish at {root}")
    h = 1e-6
    slope = (float(f(h)) - float(f(-h))) / (2 * h)
    if abs(slope - 1.0) > 1e-4:
        raise ValueError(f"f must have unit slope at 0, measured {slope:.6f}")
    sign_changes = np.flatnonzero(vals[:-1] * vals[1:] < 0)
    for idx in sign_changes:
        lo, hi = scan[idx], scan[idx + 1]
        if not any(lo - 1e-9 <= root <= hi + 1e-9 for root in (0.0, 1.0)):
            raise ValueError(
                f"f changes sign away from {{0, 1}} in [{lo:.4f}, {hi:.4f}]"
            )


def measure_curvature_constant(
    f: Callable, scan_lo: float = -6.0, scan_hi: float = 6.0, n: int = 24001
) -> float:
    """sup |f''| / 2 by central second differences on a fine scan grid."""
    x = np.linspace(scan_lo, scan_hi, n)
    h = x[1] - x[0]
    v = np.asarray(f(x), dtype=float)
    second = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    return float(np.abs(second).max() / 2.0)


def quartic_norm(delta: GridFunction) -> float:
    """(sum_j p_j d_j^4)^(1/4), the stronger norm of the counterexample domain."""
    return float(np.dot(delta.measure.weights, delta.values**4) ** 0.25)


def sequence_norm_b(p: np.ndarray, values: np.ndarray) -> float:
    return float(np.sqrt(np.dot(p, values**2)))


def in_counterexample_set(p: np.ndarray, alpha: np.ndarray, L: float) -> bool:
    """Strict test (sum p a^2)^(1/2) > L (sum p a^4)^(1/2)."""
    lhs = math.sqrt(float(np.dot(p, alpha**2)))
    rhs = L * math.sqrt(float(np.dot(p, alpha**4)))
    return lhs > rhs


@dataclass(frozen=True)
class CounterexampleCase:
    k: int
    m_norm: float
    dev_norm: float
    in_n: bool
    L: float
    alpha: np.ndarray


def counterexample(
    k: int,
    p: np.ndarray | None = None,
    f: Callable | None = None,
    n_terms: int = 64,
) -> CounterexampleCase:
    """Evaluate the sequence alpha^k = (0,...,0,1,1,...) in the truncated model.

    Returns the residual norm (exactly zero), the quartic deviation norm
    (tail mass to the 1/4 power), membership in the identification set with
    L = sup|f''|/2, and the measured L itself, which must be at least one.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if p is None:
        p = dyadic_weights(n_terms)
    else:
        p = np.asarray(p, dtype=float)
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")
    if f is None:
        f = default_counterexample_f
    _validate_counterexample_f(f, np.linspace(-6.0, 6.0, 24001))
    L = measure_curvature_constant(f)
    if L < 1.0:
        raise ValueError(
            f"measured curvature constant {L:.6f} < 1 contradicts f(1) = 0 "
            "with unit slope at 0; check the supplied f"
        )
    n = p.size
    alpha = np.zeros(n)
    if k < n:
        alpha[k:] = 1.0
    m_norm = sequence_norm_b(p, np.asarray(f(alpha), dtype=float))
    dev_norm = float(np.dot(p, alpha**4) ** 0.25)
    return CounterexampleCase(
        k=k,
        m_norm=m_norm,
        dev_norm=dev_norm,
        in_n=in_counterexample_set(p, alpha, L),
        L=L,
        alpha=alpha,
    )


def counterexample_map(
    p: np.ndarray | None = None,
    f: Callable | None = None,
    n_terms: int = 64,
) -> tuple[MomentMap, NonlinearityBound]:
    """The truncated sequence model as a moment map with quartic domain norm."""
    if p is None:
        p = dyadic_weights(n_terms)
    if f is None:
        f = default_counterexample_f
    mu = GridMeasure(np.arange(1, p.size + 1, dtype=float), p)
    a0 = GridFunction.zero(mu)

    def eval_fn(alpha: GridFunction) -> GridFunction:
        return GridFunction(np.asarray(f(alpha.values), dtype=float), mu)

    mmap = MomentMap(
        base_point=a0,
        eval_fn=eval_fn,
        derivative=LinearOperator.identity(mu),
        norm_a=quartic_norm,
    )
    L = measure_curvature_constant(f)
    return mmap, NonlinearityBound(L=L, r=2.0)


# ---------------------------------------------------------------------------
# Tangential cone sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConeMembership:
    """Membership flags for the four tangential-cone sets at one alpha."""

    in_n: bool
    in_nprime: bool
    in_n_eta: bool
    in_nprime_eta: bool
    eta: float
    m_norm: float
    linear_norm: float
    remainder_norm: float
    deviation_norm: float


def cone_classify(
    mmap: MomentMap, alpha: GridFunction, eta: float, tol: float | None = None
) -> ConeMembership:
    """Evaluate the defining norms of the cone sets and set the four flags.

    The unrestricted sets use numerical positivity (norm above tol); the
    eta-sets are the inequality comparisons of the remainder against eta
    times the map norm and the linearization norm respectively.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if tol is None:
        tol = positivity_tol(mmap.derivative)
    delta = alpha - mmap.base_point
    m_val = mmap.eval(alpha)
    lin = apply(mmap.derivative, delta)
    m_n = mmap.norm_b_of(m_val)
    lin_n = mmap.norm_b_of(lin)
    rem_n = mmap.norm_b_of(m_val - lin)
    return ConeMembership(
        in_n=m_n > tol,
        in_nprime=lin_n > tol,
        in_n_eta=rem_n <= eta * m_n,
        in_nprime_eta=rem_n <= eta * lin_n,
        eta=eta,
        m_norm=m_n,
        linear_norm=lin_n,
        remainder_norm=rem_n,
        deviation_norm=mmap.norm_a_of(delta),
    )


_CONE_CHECKS = (
    "inclusion_eta_rank_in_id",
    "inclusion_etaprime_id_in_rank",
    "inclusion_eta_id_in_rank",
    "inclusion_etaprime_rank_in_id",
    "equality_eta_rank_vs_id",
    "equality_etaprime_rank_vs_id",
    "cone_transfer_eta_to_etaprime",
    "cone_transfer_etaprime_to_eta",
)


@dataclass
class ConeSuiteReport:
    instances: int
    violations: dict = field(default_factory=dict)

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    def to_json(self) -> dict:
        return {
            "instances": self.instances,
            "violations": dict(self.violations),
            "total_violations": self.total_violations,
        }


def cone_inclusion_suite(
    instances: int, dim: int, rng_seed: int, slack: float = 1e-12
) -> ConeSuiteReport:
    """Random finite-dimensional stress test of the cone-set relations.

    Each instance draws a linear part, a quadratic remainder vanishing at the
    base point, a deviation and an eta, then checks every inclusion between
    the four sets (the eta < 1 ones only when eta < 1), the two equalities
    that hold for eta < 1, and the two eta/(1-eta) transfers.  The transfers
    compare norms of the same floating-point vectors, so a roundoff slack
    proportional to the norm scale is allowed.
    """
    if dim > 8:
        raise ValueError("the suite is desk scale: dim must be at most 8")
    if instances <= 0:
        raise ValueError("instances must be positive")
    rng = np.random.default_rng(rng_seed)
    report = ConeSuiteReport(instances=instances, violations={c: 0 for c in _CONE_CHECKS})
    for _ in range(instances):
        da = int(rng.integers(1, dim + 1))
        db = int(rng.integers(1, dim + 1))
        m_lin = rng.standard_normal((db, da))
        if rng.uniform() < 0.15:  # occasionally rank-deficient linear parts
            m_lin[: rng.integers(1, db + 1)] = 0.0
        quad = rng.standard_normal((db, da, da))
        quad = 0.5 * (quad + np.swapaxes(quad, 1, 2))
        alpha = rng.standard_normal(da) * 10.0 ** rng.uniform(-3, 0.5)
        eta = float(rng.uniform(0.05, 1.5))

        lin_val = m_lin @ alpha
        m_val = lin_val + np.einsum("bij,i,j->b", quad, alpha, alpha)
        rem_val = m_val - lin_val
        m_n = float(np.linalg.norm(m_val))
        lin_n = float(np.linalg.norm(lin_val))
        rem_n = float(np.linalg.norm(rem_val))
        eps = slack * (1.0 + max(m_n, lin_n, rem_n))

        in_n = m_n > 0.0
        in_np = lin_n > 0.0
        in_ne = rem_n <= eta * m_n
        in_npe = rem_n <= eta * lin_n

        v = report.violations
        if in_ne and in_np and not in_n:
            v["inclusion_eta_rank_in_id"] += 1
        if in_npe and in_n and not in_np:
            v["inclusion_etaprime_id_in_rank"] += 1
        if eta < 1.0:
            if in_ne and in_n and not in_np:
                v["inclusion_eta_id_in_rank"] += 1
            if in_npe and in_np and not in_n:
                v["inclusion_etaprime_rank_in_id"] += 1
            if in_ne and (in_np != in_n):
                v["equality_eta_rank_vs_id"] += 1
            if in_npe and (in_np != in_n):
                v["equality_etaprime_rank_vs_id"] += 1
            ratio = eta / (1.0 - eta)
            if in_ne and rem_n > ratio * lin_n + eps:
                v["cone_transfer_eta_to_etaprime"] += 1
            if in_npe and rem_n > ratio * m_n + eps:
                v["cone_transfer_etaprime_to_eta"] += 1
    return report
