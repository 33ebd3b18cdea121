"""Stationary AR(1) triangular arrays, exact Gaussian TV distances, mixing times.

The process at array size n is

    X_j = a X_{j-1} + s e_j,   e_j iid N(0,1),   a = 1 - gamma / n^beta,

started from its stationary law N(0, s^2 / (1 - a^2)).  The innovation
variance s^2 selects one of three regimes relative to 1 - a^2: equal up to a
constant factor ("boundary"), asymptotically larger ("super", offset n^eps0)
or asymptotically smaller ("sub", offset n^-eps0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri

from gmlab import rng

# Lower-bound constant of the TV sandwich: standard normal density at 1, quartered.
TV_LOWER_C = math.exp(-0.5) / math.sqrt(2 * math.pi) / 4.0


class Regime(Enum):
    SUPER = "super"
    BOUNDARY = "boundary"
    SUB = "sub"


@dataclass(frozen=True)
class ProcessParams:
    """Parameterization of one row of the triangular array.

    ``sigma2_scale`` multiplies 1 - a^2 in the boundary regime; ``eps0`` is
    the polynomial exponent offset that makes the super/sub regimes concrete
    (innovation variance (1 - a^2) * n^{+-eps0}).
    """

    beta: float
    gamma: float
    n: int
    regime: Regime = Regime.BOUNDARY
    sigma2_scale: float = 1.0
    eps0: float = 0.5

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.sigma2_scale <= 0:
            raise ValueError(f"sigma2_scale must be positive, got {self.sigma2_scale}")
        if self.eps0 <= 0:
            raise ValueError(f"eps0 must be positive, got {self.eps0}")
        if self.gamma / self.n**self.beta >= 1:
            raise ValueError(
                f"nonstationary parameters: gamma/n^beta = "
                f"{self.gamma / self.n ** self.beta:g} >= 1"
            )


def ar_coefficient(params: ProcessParams) -> float:
    """Autoregression coefficient 1 - gamma / n^beta, guaranteed inside (0, 1)."""
    drift = params.gamma / params.n**params.beta
    if drift >= 1:
        raise ValueError(f"nonstationary parameters: gamma/n^beta = {drift:g} >= 1")
    return 1.0 - drift


def innovation_variance(params: ProcessParams) -> float:
    """Innovation variance s^2 of the regime."""
    a = ar_coefficient(params)
    gap = 1.0 - a * a
    if params.regime is Regime.BOUNDARY:
        return params.sigma2_scale * gap
    if params.regime is Regime.SUPER:
        return gap * params.n**params.eps0
    return gap * params.n ** (-params.eps0)


def stationary_variance(params: ProcessParams) -> float:
    """Variance s^2 / (1 - a^2) of the invariant law."""
    a = ar_coefficient(params)
    return innovation_variance(params) / (1.0 - a * a)


@dataclass(frozen=True)
class PathBatch:
    """Simulated stationary paths, one replicate per row, columns j = 0..n.

    ``standardized`` marks whether entries were divided by the stationary
    standard deviation.  The batch is immutable after construction; replicate
    r is always drawn from substream (master_seed, r) so the contents do not
    depend on chunking or scheduling.
    """

    params: ProcessParams
    master_seed: int
    paths: np.ndarray
    standardized: bool

    def __post_init__(self):
        self.paths.setflags(write=False)

    @property
    def replicates(self) -> int:
        return self.paths.shape[0]


def simulate_paths(
    params: ProcessParams,
    replicates: int,
    master_seed: int,
    standardized: bool = False,
    chunk: int = 8192,
) -> PathBatch:
    """Simulate stationary paths X_0..X_n for each replicate.

    X_0 is drawn from the invariant law and the recursion is applied forward
    in double precision.  Replicates are generated in chunks but each row
    consumes exactly the normals of its own substream, so the result is
    bitwise independent of ``chunk``.
    """
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    a = ar_coefficient(params)
    sig = math.sqrt(innovation_variance(params))
    s_inf = math.sqrt(stationary_variance(params))
    n = params.n
    paths = np.empty((replicates, n + 1))
    for start, count in rng.chunk_ranges(replicates, chunk):
        draws = rng.normal_rows(master_seed, count, n + 1, row_offset=start)
        # run the recursion time-major: row j is contiguous, so each step is a
        # streaming pass instead of a strided column walk
        state = np.ascontiguousarray(draws.T)
        state[0] *= s_inf
        for j in range(1, n + 1):
            state[j] = a * state[j - 1] + sig * state[j]
        paths[start : start + count] = state.T
    if standardized:
        paths /= s_inf
    return PathBatch(params=params, master_seed=master_seed, paths=paths, standardized=standardized)


def gaussian_tv(m1: float, s1: float, m2: float, s2: float) -> float:
    """Total variation distance between N(m1, s1^2) and N(m2, s2^2).

    Equal standard deviations admit the closed form 2 Phi(|m1-m2| / (2 s)) - 1.
    Otherwise the two densities cross at exactly two points, the roots of a
    quadratic in x, and the L1 distance is assembled from CDF differences at
    those crossings.  Exact up to rounding; no quadrature.
    """
    if s1 <= 0 or s2 <= 0:
        raise ValueError("standard deviations must be positive")
    if abs(s1 - s2) < 1e-12:
        return 2.0 * ndtr(abs(m1 - m2) / (2.0 * s1)) - 1.0

    # log phi_1(x) = log phi_2(x)  <=>  qa x^2 + qb x + qc = 0
    qa = 0.5 / s2**2 - 0.5 / s1**2
    qb = m1 / s1**2 - m2 / s2**2
    qc = m2**2 / (2 * s2**2) - m1**2 / (2 * s1**2) + math.log(s2 / s1)
    disc = max(qb * qb - 4 * qa * qc, 0.0)
    root = math.sqrt(disc)
    x_lo, x_hi = sorted(((-qb - root) / (2 * qa), (-qb + root) / (2 * qa)))

    def cdf_gap(x: float) -> float:
        return ndtr((x - m1) / s1) - ndtr((x - m2) / s2)

    d_lo, d_hi = cdf_gap(x_lo), cdf_gap(x_hi)
    tv = 0.5 * (abs(d_lo) + abs(d_hi - d_lo) + abs(d_hi))
    return min(max(tv, 0.0), 1.0)


def tv_from_start(params: ProcessParams, x: float, j: int) -> float:
    """TV distance between the time-j law of the chain started at x and its stationary law.

    Both laws are Gaussian: the chain started at x has mean a^j x and variance
    s^2 (1 - a^{2j}) / (1 - a^2).
    """
    if j < 1:
        raise ValueError(f"j must be a positive integer, got {j}")
    a = ar_coefficient(params)
    s_inf2 = stationary_variance(params)
    a_j = math.exp(j * math.log(a))
    mean_j = a_j * x
    var_j = s_inf2 * max(1.0 - a_j * a_j, 1e-300)
    return gaussian_tv(mean_j, math.sqrt(var_j), 0.0, math.sqrt(s_inf2))


def mixing_bounds(params: ProcessParams, x: float, j: int) -> tuple[float, float]:
    """Lower bound and shared shape of the TV sandwich for the chain started at x.

    Returns ``(lower, shape)`` with shape = min(1, |x| a^j / s_inf + a^{2j})
    and lower = TV_LOWER_C * shape.  The matching upper bound holds with some
    finite constant C that is not pinned analytically; callers fit it
    empirically against :func:`tv_from_start`.
    """
    a = ar_coefficient(params)
    s_inf = math.sqrt(stationary_variance(params))
    a_j = math.exp(j * math.log(a)) if j > 0 else 1.0
    shape = min(1.0, abs(x) * a_j / s_inf + a_j * a_j)
    return TV_LOWER_C * shape, shape


def bulk_radius(params: ProcessParams, delta: float) -> float:
    """Radius k with stationary mass 1 - delta on [-k, k]."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(stationary_variance(params)) * ndtri(1.0 - delta / 2.0)


def mixing_time(params: ProcessParams, eps: float, delta: float, max_steps: int | None = None) -> int:
    """Smallest m with sup_{|x| <= k(delta)} TV(law of X_m from x, stationary) <= eps.

    The supremum over the bulk is attained at |x| = k(delta) because the TV is
    monotone in the mean shift (a tested invariant), so only x in
    {-k, 0, k} is evaluated.  At m = 0 the started law is a point mass, at TV
    distance 1 from any Gaussian, so the search starts at m = 1 and uses
    doubling plus bisection, relying on monotonicity of the TV in m.  The
    search gives up beyond ``max_steps`` (default 100 n^beta / gamma, a
    generous multiple of the true scale).
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    k = bulk_radius(params, delta)
    if max_steps is None:
        max_steps = int(math.ceil(100.0 * params.n**params.beta / params.gamma))
    cutoff = max(2, max_steps)

    def tv_at(m: int) -> float:
        return max(tv_from_start(params, k, m), tv_from_start(params, 0.0, m))

    if tv_at(1) <= eps:
        return 1
    hi = 1
    while tv_at(hi) > eps:
        if hi >= cutoff:
            raise ValueError(f"mixing-time search exhausted: no m <= {cutoff} reaches eps={eps}")
        hi = min(2 * hi, cutoff)
    lo = hi // 2  # tv_at(lo) > eps
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tv_at(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi
