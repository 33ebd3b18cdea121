"""Standardized partial sums of Hermite observables and their exact variances.

For an observable f and a stationary path X_1..X_n, the object of interest is
the sequential partial-sum process

    S_t(f) = sum_{k <= floor(n t)} f(X_k),   t in [0, 1],

centered analytically and divided by the exact standard deviation of S_1(f).
Every variance here is computed from the chaos decomposition of f over
Hermite polynomials of the standardized variables: if
f(X) = sum_r a_r H_r(Z) with Z = X / sd(X), then

    Var S_t(f) = sum_{r>=1} a_r^2 r! L_r(floor(n t)),

where L_r is the lag-collapsed double sum of the r-th power of the AR(1)
autocorrelation.  No asymptotic approximation enters the standardization; the
asymptotic forms are exposed separately for rate experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from gmlab import rng
from gmlab.gauss_markov import (
    PathBatch,
    ProcessParams,
    Regime,
    ar_coefficient,
    stationary_variance,
)
from gmlab.hermite import (
    Basis,
    PolySpec,
    hermite_eval,
    multiplication_expand,
    poly_eval,
    small_variance_expansion,
)
from gmlab.limits import exp_remainder


def corr_power_sum(n_eff: int, alpha: float, q: int) -> float:
    """Double sum over i, j <= n_eff of the q-th power of the autocorrelation alpha^|i-j|.

    Collapsed over lags: n_eff + 2 sum_{d=1}^{n_eff-1} (n_eff - d) alpha^{q d},
    evaluated directly in O(n_eff).  All terms are positive, so the direct sum
    is also the numerically safe evaluation near alpha = 1.
    """
    if n_eff < 1:
        raise ValueError(f"n_eff must be >= 1, got {n_eff}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if n_eff == 1:
        return 1.0
    d = np.arange(1, n_eff)
    weights = (n_eff - d) * np.exp(d * (q * math.log(alpha)))
    return float(n_eff + 2.0 * weights.sum())


def corr_power_sum_asymptotic(params: ProcessParams, q: int, t: float) -> float:
    """Leading-order closed form of :func:`corr_power_sum` at floor(n t) terms.

    beta < 1:  2 n^{beta+1} t / (q gamma)
    beta = 1:  2 n^2 (e^{-q gamma t} - 1 + q gamma t) / (q gamma)^2
    beta > 1:  n^2 t^2
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    n, beta, gamma = params.n, params.beta, params.gamma
    if beta < 1:
        return 2.0 * n ** (beta + 1.0) * t / (q * gamma)
    if beta == 1:
        return 2.0 * n**2 * exp_remainder(q * gamma * t) / (q * gamma) ** 2
    return n**2 * t**2


def _feed_variance(params: ProcessParams, spec: PolySpec) -> float:
    """Variance of the variables the observable is applied to.

    FIXED-basis observables in the boundary regime act on standardized
    variables (variance 1); everything else acts on the raw process.
    """
    if spec.basis is Basis.FIXED and params.regime is Regime.BOUNDARY:
        return 1.0
    return stationary_variance(params)


def chaos_coefficients(spec: PolySpec, variable_variance: float) -> dict[int, float]:
    """Exact coefficients a_r of f(X) = sum_r a_r H_r(X / sd) for X ~ N(0, variable_variance).

    FIXED-basis terms are pushed through the multiplication expansion; the
    ADAPTED basis is already diagonal with a_q = c_q v^{q/2}.  Order 0 carries
    the mean E f(X).
    """
    if variable_variance <= 0:
        raise ValueError(f"variance must be positive, got {variable_variance}")
    out: dict[int, float] = {}
    if spec.basis is Basis.ADAPTED:
        for q, c in spec.coeffs.items():
            out[q] = out.get(q, 0.0) + c * variable_variance ** (q / 2.0)
    else:
        for q, c in spec.coeffs.items():
            for r, coeff in multiplication_expand(q, variable_variance):
                out[r] = out.get(r, 0.0) + c * coeff
    return {r: a for r, a in sorted(out.items()) if a != 0.0}


def _floor_nt(n: int, t: float) -> int:
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return int(math.floor(n * t + 1e-12))


def functional_variance(params: ProcessParams, spec: PolySpec, t: float = 1.0) -> float:
    """Exact Var S_t(f) via the chaos decomposition and exact correlation sums."""
    n_eff = _floor_nt(params.n, t)
    if n_eff == 0:
        return 0.0
    alpha = ar_coefficient(params)
    coeffs = chaos_coefficients(spec, _feed_variance(params, spec))
    return sum(
        a * a * math.factorial(r) * corr_power_sum(n_eff, alpha, r)
        for r, a in coeffs.items()
        if r >= 1
    )


def functional_variance_leading(params: ProcessParams, spec: PolySpec, t: float = 1.0) -> float:
    """Leading-term variance: only the asymptotically dominant chaos block.

    In the boundary regime all orders survive and this coincides with
    :func:`functional_variance`.  In the super regime only the top order's
    expansion (with the variance prefactor collapsed to v^p) remains; in the
    sub regime only the leading small-variance power.  Kept separate from the
    exact formula for convergence-rate experiments.
    """
    n_eff = _floor_nt(params.n, t)
    if n_eff == 0:
        return 0.0
    alpha = ar_coefficient(params)
    v = stationary_variance(params)

    def lam(r: int) -> float:
        return corr_power_sum(n_eff, alpha, r)

    if params.regime is Regime.BOUNDARY:
        return functional_variance(params, spec, t)

    if spec.basis is Basis.ADAPTED:
        q = spec.p if params.regime is Regime.SUPER else spec.m
        c = spec.coeffs[q]
        return c * c * v**q * math.factorial(q) * lam(q)

    if params.regime is Regime.SUPER:
        # expansion orders of H_p with the variance prefactor collapsed to v^p
        p = spec.p
        c = spec.coeffs[p]
        total = 0.0
        for ell in range(p // 2 + 1):
            r = p - 2 * ell
            if r < 1:
                continue
            c_pl = math.factorial(p) / (math.factorial(ell) * math.factorial(r) * 2**ell)
            total += c_pl**2 * math.factorial(r) * lam(r)
        return c * c * v**p * total

    expansion = small_variance_expansion(spec)
    w = expansion.leading_power
    return v**w * sum(
        a * a * math.factorial(r) * lam(r) for r, a in expansion.leading_coeffs().items()
    )


@dataclass(frozen=True)
class FunctionalSeries:
    """Standardized partial-sum values on a time grid, one replicate per row."""

    params: ProcessParams
    spec: PolySpec
    grid: np.ndarray
    values: np.ndarray
    variance_used: float
    centering_used: np.ndarray

    def at_time(self, t: float) -> np.ndarray:
        idx = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[idx] - t) > 1e-9:
            raise ValueError(f"time {t} not on the series grid")
        return self.values[:, idx]


def _check_time_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("grid must be a nonempty 1-d sequence")
    if np.any(np.diff(g) <= 0):
        raise ValueError("grid must be strictly increasing")
    if g[0] < 0 or g[-1] > 1:
        raise ValueError("grid must lie within [0, 1]")
    return g


def _require_compatible(batch_standardized: bool, params: ProcessParams, spec: PolySpec) -> None:
    want_standardized = spec.basis is Basis.FIXED and params.regime is Regime.BOUNDARY
    if batch_standardized != want_standardized:
        kind = "standardized" if want_standardized else "raw"
        raise ValueError(
            f"incompatible batch: {spec.basis.value} basis in the {params.regime.value} "
            f"regime requires a {kind} batch"
        )


def _series_from_fvalues(params, spec, grid, fvals, coeffs) -> FunctionalSeries:
    n = params.n
    variance = functional_variance(params, spec, 1.0)
    if variance <= 0:
        raise ValueError("degenerate observable: Var S_1(f) = 0")
    counts = np.array([_floor_nt(n, t) for t in grid])
    mean_step = coeffs.get(0, 0.0)
    centering = counts * mean_step
    csum = np.cumsum(fvals, axis=1)
    cols = [csum[:, k - 1] if k >= 1 else np.zeros(fvals.shape[0]) for k in counts]
    values = (np.column_stack(cols) - centering) / math.sqrt(variance)
    return FunctionalSeries(
        params=params,
        spec=spec,
        grid=grid,
        values=values,
        variance_used=variance,
        centering_used=centering,
    )


def additive_functional(batch: PathBatch, spec: PolySpec, grid) -> FunctionalSeries:
    """Standardized partial sums of f along an existing path batch.

    Centering uses the analytic mean per step (the order-0 chaos coefficient),
    never the sample mean; scaling uses the exact variance at t = 1.
    """
    params = batch.params
    g = _check_time_grid(grid)
    _require_compatible(batch.standardized, params, spec)
    v_feed = 1.0 if batch.standardized else stationary_variance(params)
    coeffs = chaos_coefficients(spec, v_feed)
    fvals = poly_eval(spec, batch.paths[:, 1:], v_feed)
    return _series_from_fvalues(params, spec, g, fvals, coeffs)


def sample_functional(
    params: ProcessParams,
    spec: PolySpec,
    grid,
    replicates: int,
    master_seed: int,
    chunk: int | None = None,
) -> FunctionalSeries:
    """Simulate the standardized partial-sum process without retaining paths.

    Streams replicates in chunks; each replicate consumes the same substream
    as :func:`gmlab.gauss_markov.simulate_paths`, so the output agrees with
    running ``additive_functional`` on a full batch (to summation-order
    rounding) at a fraction of the memory.  Output does not depend on
    ``chunk``.
    """
    from gmlab.gauss_markov import innovation_variance  # local to avoid clutter above

    g = _check_time_grid(grid)
    standardized = spec.basis is Basis.FIXED and params.regime is Regime.BOUNDARY
    v_feed = 1.0 if standardized else stationary_variance(params)
    coeffs = chaos_coefficients(spec, v_feed)

    a = ar_coefficient(params)
    sig = math.sqrt(innovation_variance(params))
    s_inf = math.sqrt(stationary_variance(params))
    n = params.n
    counts = [_floor_nt(n, t) for t in g]

    variance = functional_variance(params, spec, 1.0)
    if variance <= 0:
        raise ValueError("degenerate observable: Var S_1(f) = 0")
    mean_step = coeffs.get(0, 0.0)
    centering = np.array(counts) * mean_step

    if chunk is None:
        chunk = max(256, min(replicates, 2**23 // (n + 1)))
    values = np.empty((replicates, g.size))
    for start, count in rng.chunk_ranges(replicates, chunk):
        draws = rng.normal_rows(master_seed, count, n + 1, row_offset=start)
        # time-major recursion: contiguous row per step
        state = np.ascontiguousarray(draws.T)
        state[0] *= s_inf
        for j in range(1, n + 1):
            state[j] = a * state[j - 1] + sig * state[j]
        if standardized:
            state /= s_inf
        fvals = poly_eval(spec, state[1:], v_feed)
        running = np.zeros(count)
        prev = 0
        for col, k in enumerate(counts):
            if k > prev:
                running = running + fvals[prev:k].sum(axis=0)
                prev = k
            values[start : start + count, col] = running
    values = (values - centering) / math.sqrt(variance)
    return FunctionalSeries(
        params=params,
        spec=spec,
        grid=g,
        values=values,
        variance_used=variance,
        centering_used=centering,
    )


class WeightFamily(Enum):
    """Limit families of the chaos weights, one per cell block of the phase diagram."""

    BROWNIAN_B = "b"  # horizon much longer than the mixing time
    TEMPERED_D = "d"  # critical horizon, boundary innovation variance
    SUPER_E = "e"  # critical horizon, dominant innovation variance
    SUB_G = "g"  # critical horizon, vanishing innovation variance
    DEGENERATE_H = "h"  # horizon much shorter than the mixing time


@dataclass(frozen=True)
class WeightSet:
    """Finite-n chaos weights and their limiting values.

    ``w`` contains w_r = a_r sqrt(r! L_r / Var S_1(f)), the exact share of
    chaos order r in the standardized functional (sum of squares is 1).
    ``limit_values`` normalizes the leading chaos coefficients with the
    per-order factor of the relevant horizon regime; signs follow the
    coefficients.
    """

    w: dict[int, float]
    limit_kind: WeightFamily
    limit_values: dict[int, float]


def _leading_chaos_coefficients(params: ProcessParams, spec: PolySpec) -> dict[int, float]:
    if params.regime is Regime.BOUNDARY:
        v = _feed_variance(params, spec)
        if spec.basis is Basis.ADAPTED:
            return {q: c * v ** (q / 2.0) for q, c in spec.coeffs.items() if q >= 1}
        return {q: c for q, c in spec.coeffs.items() if q >= 1}
    if spec.basis is Basis.ADAPTED:
        q = spec.p if params.regime is Regime.SUPER else spec.m
        return {q: spec.coeffs[q]}
    if params.regime is Regime.SUPER:
        p = spec.p
        c_p = spec.coeffs[p]
        out = {}
        for ell in range(p // 2 + 1):
            r = p - 2 * ell
            if r < 1:
                continue
            out[r] = c_p * math.factorial(p) / (math.factorial(ell) * math.factorial(r) * 2**ell)
        return out
    return small_variance_expansion(spec).leading_coeffs()


def _per_order_limit_factor(beta: float, gamma: float, q: int) -> float:
    if beta < 1:
        return 1.0 / q
    if beta == 1:
        return exp_remainder(q * gamma) / (q * q)
    return 1.0


def chaos_weights(params: ProcessParams, spec: PolySpec) -> WeightSet:
    """Exact finite-n chaos weights of f and the regime-appropriate limit weights."""
    alpha = ar_coefficient(params)
    coeffs = chaos_coefficients(spec, _feed_variance(params, spec))
    var_total = functional_variance(params, spec, 1.0)
    w = {
        r: a * math.sqrt(math.factorial(r) * corr_power_sum(params.n, alpha, r) / var_total)
        for r, a in coeffs.items()
        if r >= 1
    }

    if params.beta < 1:
        kind = WeightFamily.BROWNIAN_B
    elif params.beta == 1:
        kind = {
            Regime.BOUNDARY: WeightFamily.TEMPERED_D,
            Regime.SUPER: WeightFamily.SUPER_E,
            Regime.SUB: WeightFamily.SUB_G,
        }[params.regime]
    else:
        kind = WeightFamily.DEGENERATE_H

    leading = _leading_chaos_coefficients(params, spec)
    raw = {
        q: a * a * math.factorial(q) * _per_order_limit_factor(params.beta, params.gamma, q)
        for q, a in leading.items()
    }
    total = sum(raw.values())
    limit_values = {
        q: math.copysign(math.sqrt(raw[q] / total), leading[q]) for q in sorted(raw)
    }
    return WeightSet(w=w, limit_kind=kind, limit_values=limit_values)


def contraction_diagnostic(n: int, alpha: float, q: int, r: int) -> float:
    """Quadruple sum over i,j,k,l <= n of a^{r|i-j|} a^{r|k-l|} a^{(q-r)|i-k|} a^{(q-r)|j-l|}.

    Evaluated exactly by collapsing two of the four indices into matrix
    products; n is capped because the object itself is quartic-sized.
    """
    if n < 1 or n > 200:
        raise ValueError(f"n must lie in [1, 200], got {n}")
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    if not 1 <= r <= q - 1:
        raise ValueError(f"r must lie in [1, q-1], got {r}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    mat_r = alpha ** (r * lag)
    mat_qr = alpha ** ((q - r) * lag)
    return float(np.sum(mat_qr * (mat_r @ mat_qr @ mat_r)))


def sqrt_decay_sum_bound(n: int, beta: float, gamma: float) -> tuple[float, float]:
    """Exact sum_{k<=n} k^{-1/2} (1 - gamma/n^beta)^k and its closed-form upper bound.

    The bound is 1 + sqrt(pi n^beta / gamma) for beta < 1 and 1 + 2 sqrt(n)
    for beta >= 1.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    base = 1.0 - gamma / n**beta
    if base < 0 or base >= 1:
        raise ValueError(f"gamma/n^beta must lie in (0, 1], got {gamma / n ** beta:g}")
    k = np.arange(1, n + 1, dtype=float)
    lhs = float(np.sum(np.exp(k * math.log(base)) / np.sqrt(k))) if base > 0 else 0.0
    if beta < 1:
        rhs = 1.0 + math.sqrt(n**beta * math.pi / gamma)
    else:
        rhs = 1.0 + 2.0 * math.sqrt(n)
    return lhs, rhs


def initial_state_decomposition(
    z0: float,
    innovations,
    alpha: float,
    q: int,
    i: int,
) -> tuple[float, float]:
    """Split H_q(Z_i) into the persistent initial-state part plus the innovation remainder.

    With Z_i = a^i Z_0 + sqrt(1 - a^{2i}) Y_i and Y_i the normalized
    innovation average, the binomial identity for Hermite polynomials of a
    two-term orthogonal decomposition gives

        H_q(Z_i) = a^{qi} H_q(Z_0)
                 + sum_{r=0}^{q-1} C(q,r) a^{ri} (1-a^{2i})^{(q-r)/2} H_r(Z_0) H_{q-r}(Y_i).

    Both sides are evaluated independently and returned for comparison.
    """
    eps = np.asarray(innovations, dtype=float)
    if not 1 <= i <= eps.size:
        raise ValueError(f"i must lie in [1, {eps.size}], got {i}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")

    b = math.sqrt(1.0 - alpha**2)
    z = z0
    for k in range(1, i + 1):
        z = alpha * z + b * eps[k - 1]
    lhs = hermite_eval(q, z)

    a_i = alpha**i
    y = math.sqrt((1.0 - alpha**2) / (1.0 - a_i**2)) * float(
        np.sum(eps[:i] * alpha ** (i - np.arange(1, i + 1)))
    )
    rhs = a_i**q * hermite_eval(q, z0)
    for r in range(q):
        rhs += (
            math.comb(q, r)
            * a_i**r
            * (1.0 - a_i**2) ** ((q - r) / 2.0)
            * hermite_eval(r, z0)
            * hermite_eval(q - r, y)
        )
    return float(lhs), float(rhs)
