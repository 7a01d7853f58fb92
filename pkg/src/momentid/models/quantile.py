"""Endogenous quantile model on tabulated conditional densities.

The residual is the indicator 1(Y <= alpha(X)) minus the quantile level, so
the moment map averages the conditional CDF of Y over the conditional law of
X given the instrument.  The CDF is interpolated by a monotone cubic in y,
which keeps the map twice differentiable with a curvature constant read off
the density tables: L1 bounds the density slope in y, L2 bounds the density
ratio of X given W against the marginal of X, and the curvature constant of
the map is their product with exponent two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import GridMismatchError
from ..fnspace import GridFunction, GridMeasure
from ..identcore import MomentMap, NonlinearityBound
from ..linop import conditional_expectation


def _pchip_slopes(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Monotonicity-preserving cubic Hermite slopes along the first axis."""
    n = x.size
    h = np.diff(x)
    hs = h.reshape((-1,) + (1,) * (f.ndim - 1))
    delta = np.diff(f, axis=0) / hs
    d = np.zeros_like(f)
    if n == 2:
        d[0] = d[1] = delta[0]
        return d
    w1 = (2 * h[1:] + h[:-1]).reshape((-1,) + (1,) * (f.ndim - 1))
    w2 = (h[1:] + 2 * h[:-1]).reshape((-1,) + (1,) * (f.ndim - 1))
    d0, d1 = delta[:-1], delta[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        harmonic = (w1 + w2) / (w1 / d0 + w2 / d1)
    d[1:-1] = np.where(d0 * d1 > 0, harmonic, 0.0)

    def edge(h0, h1, del0, del1):
        out = ((2 * h0 + h1) * del0 - h0 * del1) / (h0 + h1)
        out = np.where(np.sign(out) != np.sign(del0), 0.0, out)
        out = np.where(
            (np.sign(del0) != np.sign(del1)) & (np.abs(out) > 3 * np.abs(del0)),
            3 * del0,
            out,
        )
        return out

    d[0] = edge(h[0], h[1], delta[0], delta[1])
    d[-1] = edge(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _hermite(
    x: np.ndarray,
    f: np.ndarray,
    d: np.ndarray,
    xq: np.ndarray,
    idx: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Cubic Hermite value and first derivative at xq inside cells idx.

    ``f`` and ``d`` have the grid on axis 0 followed by one batch axis; xq
    and idx index the batch axis, so entry b is evaluated in column b.
    """
    cols = np.arange(f.shape[1])
    f0, f1 = f[idx, cols, ...], f[idx + 1, cols, ...]
    d0, d1 = d[idx, cols, ...], d[idx + 1, cols, ...]
    h = x[idx + 1] - x[idx]
    t = (xq - x[idx]) / h
    if f0.ndim > 1:
        t = t.reshape((-1,) + (1,) * (f0.ndim - 1))
        h = h.reshape((-1,) + (1,) * (f0.ndim - 1))
    t2, t3 = t * t, t * t * t
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + t
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    val = h00 * f0 + h * h10 * d0 + h01 * f1 + h * h11 * d1
    g00 = 6 * t2 - 6 * t
    g10 = 3 * t2 - 4 * t + 1
    g01 = -6 * t2 + 6 * t
    g11 = 3 * t2 - 2 * t
    der = (g00 * f0 + h * g10 * d0 + g01 * f1 + h * g11 * d1) / h
    return val, der


@dataclass(frozen=True)
class QuantileIvModel:
    """Tabulated design for the endogenous quantile moment map.

    ``f_y`` is the conditional density of the outcome given (x, w) on the y
    grid, smooth in y.  ``x_ratio`` is the conditional-to-marginal mass ratio
    of X given W on the two probability grids, so columns average to one
    under the X measure.  The slope bound L1 and the ratio bound L2 are
    recomputed from these tables, never taken on trust.
    """

    tau: float
    x_measure: GridMeasure
    w_measure: GridMeasure
    y_grid: np.ndarray
    f_y: np.ndarray
    x_ratio: np.ndarray
    alpha0: GridFunction

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie strictly between 0 and 1")
        y = np.asarray(self.y_grid, dtype=float)
        if np.any(np.diff(y) <= 0):
            raise ValueError("y grid must be strictly increasing")
        fy = np.asarray(self.f_y, dtype=float)
        nx, nw = self.x_measure.size, self.w_measure.size
        if fy.shape != (y.size, nx, nw):
            raise GridMismatchError("f_y table must be (n_y, n_x, n_w)")
        if np.any(fy < 0):
            raise ValueError("densities must be nonnegative")
        ratio = np.asarray(self.x_ratio, dtype=float)
        if ratio.shape != (nx, nw):
            raise GridMismatchError("x_ratio table must be (n_x, n_w)")
        if np.any(ratio < 0):
            raise ValueError("density ratios must be nonnegative")
        col = self.x_measure.weights @ ratio
        if np.abs(col - 1.0).max() > 1e-10:
            raise ValueError("x_ratio columns must average to one")
        wy = np.empty_like(y)
        wy[1:-1] = (y[2:] - y[:-2]) / 2
        wy[0] = (y[1] - y[0]) / 2
        wy[-1] = (y[-1] - y[-2]) / 2
        mass = np.einsum("y,yxw->xw", wy, fy)
        if np.abs(mass - 1.0).max() > 1e-10:
            raise ValueError("f_y slices must integrate to one in y")
        object.__setattr__(self, "y_grid", y)
        object.__setattr__(self, "f_y", fy)
        object.__setattr__(self, "x_ratio", ratio)
        # cumulative trapezoid CDF and its monotone cubic slopes
        increments = (y[1:] - y[:-1])[:, None, None] * (fy[1:] + fy[:-1]) / 2.0
        cdf = np.concatenate(
            [np.zeros((1, nx, nw)), np.cumsum(increments, axis=0)]
        )
        object.__setattr__(self, "_cdf", cdf)
        object.__setattr__(self, "_cdf_slopes", _pchip_slopes(y, cdf))

    @property
    def l1(self) -> float:
        """Largest density slope magnitude in y across the table."""
        dy = np.diff(self.y_grid)[:, None, None]
        return float(np.abs(np.diff(self.f_y, axis=0) / dy).max())

    @property
    def l2(self) -> float:
        """Largest conditional-to-marginal mass ratio across the table."""
        return float(self.x_ratio.max())

    def _locate(self, yq: np.ndarray) -> np.ndarray:
        y = self.y_grid
        if np.any(yq < y[0]) or np.any(yq > y[-1]):
            raise ValueError(
                "requested y values leave the tabulated range "
                f"[{y[0]:.4g}, {y[-1]:.4g}]"
            )
        return np.clip(np.searchsorted(y, yq, side="right") - 1, 0, y.size - 2)

    def cdf_at(self, alpha_values: np.ndarray) -> np.ndarray:
        """F(alpha(x) | x, w) for every (x, w), shape (n_x, n_w)."""
        yq = np.asarray(alpha_values, dtype=float)
        idx = self._locate(yq)
        val, _ = _hermite(self.y_grid, self._cdf, self._cdf_slopes, yq, idx)
        return val

    def density_at(self, alpha_values: np.ndarray) -> np.ndarray:
        """f(alpha(x) | x, w), the exact y-derivative of the interpolated CDF."""
        yq = np.asarray(alpha_values, dtype=float)
        idx = self._locate(yq)
        _, der = _hermite(self.y_grid, self._cdf, self._cdf_slopes, yq, idx)
        return der

    def quantile_curve(self, tau: float | None = None) -> np.ndarray:
        """Invert the interpolated CDF at the quantile level, per x.

        Requires the conditional CDF not to depend on w (checked), which the
        synthetic designs guarantee by construction.
        """
        tau = self.tau if tau is None else tau
        spread = np.abs(self._cdf - self._cdf[:, :, :1]).max()
        if spread > 1e-9:
            raise ValueError("conditional CDF varies with w; no common quantile")
        lo = np.full(self.x_measure.size, self.y_grid[0])
        hi = np.full(self.x_measure.size, self.y_grid[-1])
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            val = self.cdf_at(mid)[:, 0]
            lower = val < tau
            lo = np.where(lower, mid, lo)
            hi = np.where(lower, hi, mid)
        return 0.5 * (lo + hi)


def quantile_moment_map(
    model: QuantileIvModel,
) -> tuple[MomentMap, NonlinearityBound]:
    """Moment map, derivative operator and curvature bound of the model.

    eval(alpha)(w) averages F(alpha(x)|x,w) over the conditional mass of X
    given w and subtracts the quantile level; the derivative is the
    conditional expectation weighted by the conditional density at alpha0.
    The curvature bound is L = L1 L2 with exponent 2 on the whole space.
    """
    mx, mw = model.x_measure, model.w_measure
    wx = mx.weights

    def eval_fn(alpha: GridFunction) -> GridFunction:
        cdf = model.cdf_at(alpha.values)
        vals = (wx[:, None] * model.x_ratio * cdf).sum(axis=0) - model.tau
        return GridFunction(vals, mw)

    weight = model.density_at(model.alpha0.values)
    derivative = conditional_expectation(model.x_ratio, mx, mw, weight=weight)
    mmap = MomentMap(
        base_point=model.alpha0, eval_fn=eval_fn, derivative=derivative
    )
    bound = NonlinearityBound(L=model.l1 * model.l2, r=2.0)
    return mmap, bound


def gaussian_quantile_model(
    n_x: int = 101,
    n_w: int = 101,
    n_y: int = 161,
    rho: float = 0.6,
    tau: float = 0.5,
    sigma_u: float = 1.0,
    x_span: float = 3.0,
    y_span: float = 7.5,
) -> QuantileIvModel:
    """Gaussian triangular design: X and W correlated, Y = alpha0(X) + noise.

    The true quantile curve is recovered from the discretized tables by CDF
    inversion, so the model restriction holds on the grid to rounding error,
    not merely asymptotically.
    """
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    xg = np.linspace(-x_span, x_span, n_x)
    wg = np.linspace(-x_span, x_span, n_w)
    yg = np.linspace(-y_span, y_span, n_y)

    def phi(z):
        return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)

    x_measure = GridMeasure.from_density(xg, phi(xg))
    w_measure = GridMeasure.from_density(wg, phi(wg))

    # conditional mass of X given W, normalized per column
    quad = GridMeasure.trapezoid(xg).weights
    s = math.sqrt(1 - rho * rho)
    cond = phi((xg[:, None] - rho * wg[None, :]) / s) / s
    cond_mass = quad[:, None] * cond
    cond_mass /= cond_mass.sum(axis=0, keepdims=True)
    ratio = cond_mass / x_measure.weights[:, None]

    # outcome density: location family around the median curve, w-free
    curve = np.tanh(xg)  # bounded inside the y range with room for deviations
    fy_x = phi((yg[:, None] - curve[None, :]) / sigma_u) / sigma_u
    wy = GridMeasure.trapezoid(yg).weights
    fy_x /= np.einsum("y,yx->x", wy, fy_x)[None, :]
    f_y = np.repeat(fy_x[:, :, None], n_w, axis=2)

    seed_alpha = GridFunction(curve, x_measure)
    model = QuantileIvModel(
        tau=tau,
        x_measure=x_measure,
        w_measure=w_measure,
        y_grid=yg,
        f_y=f_y,
        x_ratio=ratio,
        alpha0=seed_alpha,
    )
    alpha0 = GridFunction(model.quantile_curve(), x_measure)
    return QuantileIvModel(
        tau=tau,
        x_measure=x_measure,
        w_measure=w_measure,
        y_grid=yg,
        f_y=f_y,
        x_ratio=ratio,
        alpha0=alpha0,
    )
