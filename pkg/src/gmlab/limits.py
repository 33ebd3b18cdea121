"""Samplers and exact constants for the three limit-process families.

The tempered process of order q with tempering gamma is simulated through its
time-domain reduction: with U a stationary unit-variance Ornstein-Uhlenbeck
process of mean-reversion gamma,

    W(t) = scale(q, gamma) * integral_0^t H_q(U(s)) ds,
    scale(q, gamma) = q gamma / sqrt(2 q! (e^{-q gamma} - 1 + q gamma)),

which has Var W(1) = 1 and interpolates between Brownian motion
(gamma -> inf) and the degenerate process t H_q(Z)/sqrt(q!) (gamma -> 0).
The only discretization error is the trapezoid rule on the time integral;
the OU transition itself is exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from gmlab import rng


def exp_remainder(x: float) -> float:
    """Stable evaluation of e^{-x} - 1 + x (nonnegative, ~ x^2/2 near 0)."""
    if x < 0:
        raise ValueError(f"argument must be nonnegative, got {x}")
    if x < 1e-4:
        return 0.5 * x * x * (1.0 - x / 3.0 + x * x / 12.0)
    return math.expm1(-x) + x


def tempered_norm_constant(q: int, gamma: float) -> float:
    """Normalizing constant K making Var W(1) = 1.

    Closed form sqrt(2^{q-1} q^2 gamma^{q+2} / (q! (e^{-q gamma} - 1 + q gamma))).
    """
    if q < 1:
        raise ValueError(f"order must be >= 1, got {q}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    num = 2.0 ** (q - 1) * q * q * gamma ** (q + 2)
    return math.sqrt(num / (math.factorial(q) * exp_remainder(q * gamma)))


def ou_integral_scale(q: int, gamma: float) -> float:
    """Prefactor K * (2 gamma)^{-q/2} of the OU time-integral representation."""
    if q < 1:
        raise ValueError(f"order must be >= 1, got {q}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return q * gamma / math.sqrt(2.0 * math.factorial(q) * exp_remainder(q * gamma))


def tempered_hermite_cov(q: int, gamma: float, s: float, t: float) -> float:
    """Covariance of the normalized tempered process at times s and t in [0, 1].

    Cov(W(s), W(t)) = (2 q g min(s,t) + e^{-q g t} + e^{-q g s} - e^{-q g |t-s|} - 1)
                      / (2 (e^{-q g} - 1 + q g)).
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    lo, hi = (s, t) if s <= t else (t, s)
    x = q * gamma
    if x < 1e-4:
        # series through x^3: numerator = x^2 hi lo - x^3 (2 lo^3 + 3 hi^2 lo - 3 hi lo^2)/6
        num = x * x * hi * lo - x**3 * (2 * lo**3 + 3 * hi * hi * lo - 3 * hi * lo * lo) / 6.0
    else:
        num = 2 * x * lo + math.exp(-x * hi) + math.exp(-x * lo) - math.exp(-x * (hi - lo)) - 1.0
    return 0.5 * num / exp_remainder(x)


@dataclass(frozen=True)
class TemperedHermiteLaw:
    q: int
    gamma: float
    K: float

    @classmethod
    def from_params(cls, q: int, gamma: float) -> "TemperedHermiteLaw":
        return cls(q=q, gamma=gamma, K=tempered_norm_constant(q, gamma))

    def cov(self, s: float, t: float) -> float:
        return tempered_hermite_cov(self.q, self.gamma, s, t)


@dataclass(frozen=True)
class LimitSample:
    """Monte Carlo sample of a limit process on a time grid, one replicate per row."""

    kind: str
    grid: np.ndarray
    values: np.ndarray
    discretization: float | None = None
    gamma: float | None = None
    orders: tuple[tuple[int, float], ...] | None = None

    def at_time(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[idx] - t) > 1e-9:
            raise ValueError(f"time {t} not on the sample grid")
        return self.values[:, idx]


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing")
    if g[0] < 0 or g[-1] > 1:
        raise ValueError("grid must lie within [0, 1]")
    return g


def simulate_ou(
    gamma: float,
    grid_step: float,
    steps: int,
    seed: int,
    replicates: int,
    chunk: int = 8192,
) -> np.ndarray:
    """Stationary unit-variance OU sample, exact transition, shape (replicates, steps+1).

    U_0 ~ N(0,1) and U_{k+1} = e^{-gamma dt} U_k + sqrt(1 - e^{-2 gamma dt}) xi_k,
    so Corr(U_j, U_k) = e^{-gamma dt |j-k|} with no Euler bias.
    """
    if gamma <= 0 or grid_step <= 0:
        raise ValueError("gamma and grid_step must be positive")
    a = math.exp(-gamma * grid_step)
    b = math.sqrt(max(1.0 - a * a, 0.0))
    out = np.empty((replicates, steps + 1))
    for start, count in rng.chunk_ranges(replicates, chunk):
        draws = rng.normal_rows(seed, count, steps + 1, row_offset=start)
        block = out[start : start + count]
        block[:, 0] = draws[:, 0]
        for k in range(1, steps + 1):
            block[:, k] = a * block[:, k - 1] + b * draws[:, k]
    return out


def _hermite_combo(u: np.ndarray, scaled_orders: list[tuple[int, float]]) -> np.ndarray:
    """sum_q c_q H_q(u) in one upward pass."""
    top = max(q for q, _ in scaled_orders)
    wanted = dict(scaled_orders)
    total = np.zeros_like(u)
    h_prev = np.ones_like(u)
    if 0 in wanted:
        total += wanted[0]
    h = u
    for k in range(1, top + 1):
        if k > 1:
            h, h_prev = u * h - (k - 1) * h_prev, h
        if k in wanted:
            total = total + wanted[k] * h
    return total


def simulate_tempered_mixture(
    weighted_orders: list[tuple[int, float]],
    gamma: float,
    grid,
    steps_per_unit: int,
    replicates: int,
    seed: int,
    chunk: int = 8192,
) -> LimitSample:
    """Sample sum_q w_q W_q(t) with every component driven by the same OU path.

    The components of different order are uncorrelated, so unit-norm weights
    give Var = 1 at t = 1.  ``steps_per_unit`` must be at least
    100 * max(1, gamma): the integrand decorrelates at rate q*gamma, and the
    trapezoid rule needs several nodes per correlation length.
    """
    if steps_per_unit < 100 * max(1.0, gamma):
        raise ValueError(
            f"resolution too coarse: steps_per_unit={steps_per_unit} "
            f"< 100 * max(1, gamma)={100 * max(1.0, gamma):g}"
        )
    g = _check_grid(grid)
    scaled = [(q, w * ou_integral_scale(q, gamma)) for q, w in weighted_orders]
    dt = 1.0 / steps_per_unit
    step_of_time = [int(round(t * steps_per_unit)) for t in g]
    total_steps = max(step_of_time)
    targets: dict[int, list[int]] = {}
    for col, k in enumerate(step_of_time):
        targets.setdefault(k, []).append(col)

    a = math.exp(-gamma * dt)
    b = math.sqrt(max(1.0 - a * a, 0.0))
    values = np.zeros((replicates, g.size))
    for start, count in rng.chunk_ranges(replicates, chunk):
        draws = rng.normal_rows(seed, count, total_steps + 1, row_offset=start)
        u = draws[:, 0].copy()
        g_prev = _hermite_combo(u, scaled)
        integral = np.zeros(count)
        # columns targeting step 0 keep their zero initialization
        for k in range(1, total_steps + 1):
            u = a * u + b * draws[:, k]
            g_now = _hermite_combo(u, scaled)
            integral += (0.5 * dt) * (g_prev + g_now)
            g_prev = g_now
            if k in targets:
                for col in targets[k]:
                    values[start : start + count, col] = integral
    return LimitSample(
        kind="tempered",
        grid=g,
        values=values,
        discretization=dt,
        gamma=gamma,
        orders=tuple((q, w) for q, w in weighted_orders),
    )


def simulate_tempered_hermite(
    q: int,
    gamma: float,
    grid,
    steps_per_unit: int,
    replicates: int,
    seed: int,
    chunk: int = 8192,
) -> LimitSample:
    """Sample the single tempered process W_q on the grid."""
    return simulate_tempered_mixture([(q, 1.0)], gamma, grid, steps_per_unit, replicates, seed, chunk)


def simulate_degenerate(
    weighted_orders: list[tuple[int, float]],
    grid,
    replicates: int,
    seed: int,
) -> LimitSample:
    """Sample t * sum_q w_q H_q(Z)/sqrt(q!), one standard normal seed per replicate."""
    g = _check_grid(grid)
    norm = sum(w * w for _, w in weighted_orders)
    if abs(norm - 1.0) > 1e-8:
        warnings.warn(f"degenerate-limit weights are not unit norm: sum w^2 = {norm:g}")
    scaled = [(q, w / math.sqrt(math.factorial(q))) for q, w in weighted_orders]
    z = np.empty(replicates)
    for start, count in rng.chunk_ranges(replicates, 65536):
        z[start : start + count] = rng.normal_rows(seed, count, 1, row_offset=start)[:, 0]
    amplitude = _hermite_combo(z, scaled)
    values = np.outer(amplitude, g)
    return LimitSample(
        kind="degenerate",
        grid=g,
        values=values,
        orders=tuple((q, w) for q, w in weighted_orders),
    )


def simulate_brownian(grid, replicates: int, seed: int, chunk: int = 8192) -> LimitSample:
    """Standard Brownian motion on the grid via independent Gaussian increments."""
    g = _check_grid(grid)
    spacings = np.diff(np.concatenate(([0.0], g)))
    scale = np.sqrt(spacings)
    values = np.empty((replicates, g.size))
    for start, count in rng.chunk_ranges(replicates, chunk):
        draws = rng.normal_rows(seed, count, g.size, row_offset=start)
        values[start : start + count] = np.cumsum(draws * scale, axis=1)
    return LimitSample(kind="brownian", grid=g, values=values)
