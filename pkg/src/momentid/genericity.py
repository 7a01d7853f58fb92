"""Randomized generic operators and Monte Carlo injectivity studies.

Operators are drawn as kappa * sum_j lambda_j <phi_j, .> psi_j over supplied
orthonormal families, with lambda_j = u_j sigma_j for uniform u_j on [-1, 1].
Optional variants enforce a compactness decay test on sigma, a nonnegative
kernel, unit kernel row sums (a conditional-density operator), or perfectly
dependent draws sharing a single uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fnspace import OrthonormalBasis
from .linop import LinearOperator, svd


@dataclass(frozen=True)
class GeneratorConfig:
    """Bounds sigma_j for |lambda_j|, global scale kappa, truncation length."""

    sigma: np.ndarray
    kappa: float
    trunc_n: int
    compact: bool = False
    positive: bool = False
    density: bool = False
    dependent_u: bool = False

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if np.any(s <= 0):
            raise ValueError("sigma entries must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.trunc_n < 1:
            raise ValueError("trunc_n must be at least 1")
        if s.size < self.trunc_n:
            raise ValueError("sigma must provide at least trunc_n entries")
        object.__setattr__(self, "sigma", s)

    def tail_mass(self) -> float:
        """Neglected squared mass sum of sigma_j^2 beyond the truncation."""
        return float(np.sum(self.sigma[self.trunc_n:] ** 2))

    def compact_decay_ok(self) -> bool:
        """Decay-rate proxy for square-summability on the truncation.

        Fits log sigma_j^2 against log j and requires a slope below -1, the
        threshold at which the tail sum converges for power-law decay.
        """
        j = np.arange(1, self.trunc_n + 1, dtype=float)
        y = 2.0 * np.log(self.sigma[: self.trunc_n])
        slope = np.polyfit(np.log(j), y, 1)[0]
        return bool(slope < -1.0)


@dataclass(frozen=True)
class OperatorDraw:
    operator: LinearOperator
    lambdas: np.ndarray
    kappa: float
    seed: int
    c_bound: float | None = None


def _sup_bound(basis: OrthonormalBasis, n: int) -> float:
    return float(max(np.abs(f.values).max() for f in list(basis)[:n]))


def draw_operator(
    config: GeneratorConfig,
    bases: tuple[OrthonormalBasis, OrthonormalBasis],
    seed: int,
    c_bound: float | None = None,
) -> OperatorDraw:
    """One realization of the random operator on the supplied bases.

    With the positive flag the zeroth basis elements must be the constant
    function and the leading coefficient is replaced by
    c^2 sum_{j>=1} |lambda_j| + |u_0| sigma_0, which dominates the mixed terms
    and makes the kernel nonnegative at every node pair; c defaults to the
    measured sup bound of the bases plus ten percent.  The density flag
    additionally rescales kappa so the leading coefficient contributes unit
    kernel row sums.
    """
    phi, psi = bases
    n = config.trunc_n
    if len(phi) < n or len(psi) < n:
        raise ValueError("bases must provide at least trunc_n elements")
    if config.compact and not config.compact_decay_ok():
        raise ValueError("sigma decay fails the compactness (square-summable) test")

    rng = np.random.default_rng(seed)
    if config.dependent_u:
        u = np.full(n, rng.uniform(-1.0, 1.0))
    else:
        u = rng.uniform(-1.0, 1.0, size=n)
    lam = u * config.sigma[:n]
    kappa = config.kappa
    c_used = None

    positive = config.positive or config.density
    if positive:
        for name, basis in (("phi", phi), ("psi", psi)):
            lead = basis[0].values
            if np.ptp(lead) > 1e-12 * (1.0 + np.abs(lead).max()):
                raise ValueError(
                    f"positivity needs a constant leading element in the "
                    f"{name} basis"
                )
        c_used = c_bound if c_bound is not None else 1.1 * max(
            _sup_bound(phi, n), _sup_bound(psi, n)
        )
        for name, basis in (("phi", phi), ("psi", psi)):
            for j in range(n):
                peak = float(np.abs(basis[j].values).max())
                if peak > c_used + 1e-12:
                    raise ValueError(
                        f"{name} basis element {j} has sup norm {peak:.6f} "
                        f"exceeding the bound c = {c_used:.6f}"
                    )
        lam[0] = c_used**2 * np.sum(np.abs(lam[1:])) + abs(u[0]) * config.sigma[0]
        if config.density:
            if not (phi.measure.is_probability and psi.measure.is_probability):
                raise ValueError("the density variant needs probability grids")
            kappa = 1.0 / lam[0]

    phi_mat = phi.matrix()[:, :n]
    psi_mat = psi.matrix()[:, :n]
    kernel = kappa * (psi_mat * lam[None, :]) @ phi_mat.T
    op = LinearOperator(kernel, phi.measure, psi.measure)

    if config.density:
        rows = op.entries @ phi.measure.weights
        worst = float(np.abs(rows - 1.0).max())
        if worst > 1e-12:
            raise ValueError(f"density kernel row sums deviate by {worst:.2e}")
    return OperatorDraw(operator=op, lambdas=lam, kappa=kappa, seed=seed,
                        c_bound=c_used)


@dataclass
class InjectivityReport:
    draws: int
    sigma_min: np.ndarray
    fraction_below_tol: float
    max_spectrum_deviation: float
    tail_mass: float

    def to_json(self) -> dict:
        return {
            "draws": self.draws,
            "fraction_below_tol": self.fraction_below_tol,
            "max_spectrum_deviation": self.max_spectrum_deviation,
            "tail_mass": self.tail_mass,
            "sigma_min": self.sigma_min.tolist(),
        }


def mc_injectivity(
    config: GeneratorConfig,
    bases: tuple[OrthonormalBasis, OrthonormalBasis],
    draws: int,
    tol: float,
    seed: int,
) -> InjectivityReport:
    """Monte Carlo distribution of the smallest truncated singular value.

    For each draw the top trunc_n singular values of the realized operator
    are compared against |kappa lambda_j| sorted decreasingly (they agree to
    machine scale on truncations), and sigma_min is the last of them.  The
    report gives the fraction of draws with sigma_min at or below
    tol * sigma_max, predicted to be zero.
    """
    if draws < 1:
        raise ValueError("draws must be at least 1")
    children = np.random.SeedSequence(seed).spawn(draws)
    n = config.trunc_n
    sig_min = np.empty(draws)
    worst_dev = 0.0
    below = 0
    for i, child in enumerate(children):
        sub_seed = int(child.generate_state(1)[0])
        draw = draw_operator(config, bases, sub_seed)
        s = svd(draw.operator).singular_values[:n]
        expected = np.sort(np.abs(draw.kappa * draw.lambdas))[::-1]
        worst_dev = max(worst_dev, float(np.abs(s - expected).max()))
        sig_min[i] = s[-1]
        if s[-1] <= tol * s[0]:
            below += 1
    return InjectivityReport(
        draws=draws,
        sigma_min=sig_min,
        fraction_below_tol=below / draws,
        max_spectrum_deviation=worst_dev,
        tail_mass=config.tail_mass(),
    )
