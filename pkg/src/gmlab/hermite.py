"""Probabilists' Hermite polynomials and the coefficient algebra built on them.

All polynomials use the probabilists' normalization: ``H_0 = 1``, ``H_1 = x``
and ``H_{k+1}(x) = x H_k(x) - k H_{k-1}(x)``, so that ``H_q / sqrt(q!)`` is an
orthonormal basis of L2 of the standard normal law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

MAX_ORDER = 64
MAX_SPEC_ORDER = 8


class Basis(Enum):
    """Basis convention of a polynomial observable.

    FIXED evaluates plain Hermite polynomials.  ADAPTED evaluates the
    variance-scaled family ``H_q(x; v) = v^{q/2} H_q(x / sqrt(v))``, which is
    orthogonal under N(0, v) and tracks the running variance of the process
    the observable is applied to.
    """

    FIXED = "fixed"
    ADAPTED = "adapted"


def hermite_eval(q: int, x):
    """Evaluate ``H_q(x)`` by the three-term upward recurrence.

    Parameters
    ----------
    q : int
        Polynomial order, ``0 <= q <= 64``.  Orders beyond 64 would mix
        factorial-sized coefficients into double precision and are rejected.
    x : float or ndarray
        Evaluation point(s).

    Returns
    -------
    float or ndarray, matching the shape of ``x``.
    """
    if q < 0:
        raise ValueError(f"order must be non-negative, got {q}")
    if q > MAX_ORDER:
        raise ValueError(f"order {q} exceeds recurrence guard {MAX_ORDER}")
    arr = np.asarray(x, dtype=float)
    h_prev = np.ones_like(arr)
    if q == 0:
        return float(h_prev) if arr.ndim == 0 else h_prev
    h = arr.copy()
    for k in range(1, q):
        h, h_prev = arr * h - k * h_prev, h
    return float(h) if arr.ndim == 0 else h


def hermite_scaled(q: int, sigma2: float, x):
    """Evaluate the variance-scaled polynomial ``H_q(x; sigma2) = sigma^q H_q(x/sigma)``."""
    if sigma2 <= 0:
        raise ValueError(f"variance must be positive, got {sigma2}")
    sigma = math.sqrt(sigma2)
    return sigma**q * hermite_eval(q, np.asarray(x, dtype=float) / sigma)


@dataclass(frozen=True)
class PolySpec:
    """A finite Hermite-polynomial observable ``f = sum_q c_q H_q``.

    ``coeffs`` maps order q >= 0 to its coefficient; zero coefficients are
    dropped on construction.  ``m`` (the Hermite rank) and ``p`` are the
    lowest and highest retained orders.
    """

    coeffs: dict[int, float]
    basis: Basis = Basis.FIXED

    def __post_init__(self):
        cleaned = {int(q): float(c) for q, c in self.coeffs.items() if c != 0.0}
        if not cleaned:
            raise ValueError("empty spec: all coefficients vanish")
        for q in cleaned:
            if q < 0:
                raise ValueError(f"negative order {q}")
            if q > MAX_SPEC_ORDER:
                raise ValueError(f"order {q} exceeds the supported cap {MAX_SPEC_ORDER}")
        object.__setattr__(self, "coeffs", cleaned)

    @property
    def m(self) -> int:
        return min(self.coeffs)

    @property
    def p(self) -> int:
        return max(self.coeffs)

    def label(self) -> str:
        """Canonical compact name, e.g. ``H2`` or ``1.0*H1+1.0*H2``."""
        terms = sorted(self.coeffs.items())
        if len(terms) == 1 and terms[0][1] == 1.0:
            return f"H{terms[0][0]}"
        body = "+".join(f"{c:g}*H{q}" for q, c in terms)
        return body if self.basis is Basis.FIXED else body + ":adapted"


def poly_eval(spec: PolySpec, x, current_variance: float = 1.0):
    """Evaluate the observable at ``x``.

    For the FIXED basis the variance argument is ignored; for ADAPTED each
    term is evaluated as ``H_q(x; current_variance)``.  Accepts scalars or
    arrays.
    """
    if spec.basis is Basis.ADAPTED:
        if current_variance <= 0:
            raise ValueError(f"variance must be positive, got {current_variance}")
        sigma = math.sqrt(current_variance)
        arg = np.asarray(x, dtype=float) / sigma
        scale = {q: sigma**q for q in spec.coeffs}
    else:
        arg = np.asarray(x, dtype=float)
        scale = {q: 1.0 for q in spec.coeffs}

    # Single upward pass through the recurrence, collecting requested orders.
    total = np.zeros_like(arg)
    h_prev = np.ones_like(arg)
    h = arg
    if 0 in spec.coeffs:
        total = total + spec.coeffs[0] * scale[0]
    for k in range(1, max(spec.coeffs) + 1):
        if k == 1:
            hk = h
        else:
            h, h_prev = arg * h - (k - 1) * h_prev, h
            hk = h
        if k in spec.coeffs:
            total = total + spec.coeffs[k] * scale[k] * hk
    return float(total) if np.ndim(x) == 0 else total


def mehler_cov(q: int, rho: float) -> float:
    """Covariance ``q! rho^q`` of ``H_q`` at jointly standard Gaussians with correlation rho."""
    if q < 1:
        raise ValueError(f"order must be >= 1, got {q}")
    if abs(rho) > 1:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho}")
    return math.factorial(q) * rho**q


def _mult_coeff(q: int, ell: int) -> int:
    # C_{q,l} = q! / (l! (q - 2l)! 2^l)
    return math.factorial(q) // (math.factorial(ell) * math.factorial(q - 2 * ell) * 2**ell)


def multiplication_expand(q: int, v: float) -> list[tuple[int, float]]:
    """Expand ``H_q`` of an N(0, v) variable over Hermite polynomials of its standardization.

    Returns pairs ``(q - 2l, C_{q,l} v^{(q-2l)/2} (v-1)^l)`` such that for
    X ~ N(0, v) with Z = X / sqrt(v),

        H_q(X) = sum_l coeff_l * H_{q-2l}(Z).

    Terms whose coefficient vanishes (e.g. every l >= 1 term at v = 1) are
    dropped.
    """
    if v <= 0:
        raise ValueError(f"variance must be positive, got {v}")
    sqrt_v = math.sqrt(v)
    out = []
    for ell in range(q // 2 + 1):
        coeff = _mult_coeff(q, ell) * sqrt_v ** (q - 2 * ell) * (v - 1.0) ** ell
        if coeff != 0.0:
            out.append((q - 2 * ell, coeff))
    return out


@dataclass(frozen=True)
class SmallVarianceExpansion:
    """Expansion of a centered observable of a small-variance Gaussian.

    For X ~ N(0, v) with v -> 0,

        f(X) - E f(X) = sum_{w>=1} v^{w/2} sum_{r=1}^{w} coeff[r, w] H_r(X / sqrt(v)),

    and ``leading_power`` is the smallest w whose row sum over r is nonzero,
    so the leading term is ``v^{leading_power/2} sum_r coeff[r, leading_power] H_r``.
    """

    coeff: np.ndarray  # indexed [r, w], rows/cols 0..p with index 0 unused
    leading_power: int

    def leading_coeffs(self) -> dict[int, float]:
        """Nonzero coefficients of the leading power, keyed by chaos order r."""
        w = self.leading_power
        return {r: float(self.coeff[r, w]) for r in range(1, self.coeff.shape[0]) if self.coeff[r, w] != 0.0}


def small_variance_expansion(spec: PolySpec) -> SmallVarianceExpansion:
    """Compute the small-variance expansion table of a FIXED-basis observable.

    The coefficient of ``H_r`` at power ``v^{w/2}`` collects, over all
    retained orders q = w + 2u of the spec, the term

        c_{w+2u} * C_{w+2u, s+u} * binom(s+u, s) * (-1)^u,   with s = (w - r)/2,

    which requires w >= r with matching parity.
    """
    if spec.basis is not Basis.FIXED:
        raise ValueError("small-variance expansion is defined for the FIXED basis")
    if spec.m < 1:
        raise ValueError("spec must have Hermite rank >= 1")
    p = spec.p
    coeff = np.zeros((p + 1, p + 1))
    for w in range(1, p + 1):
        for r in range(1, w + 1):
            if (w - r) % 2:
                continue
            s = (w - r) // 2
            total = 0.0
            u = 0
            while w + 2 * u <= p:
                q = w + 2 * u
                c_q = spec.coeffs.get(q, 0.0)
                if c_q != 0.0:
                    total += c_q * _mult_coeff(q, s + u) * math.comb(s + u, s) * (-1) ** u
                u += 1
            coeff[r, w] = total

    row_scale = max(1.0, float(np.max(np.abs(coeff))))
    leading = None
    for w in range(1, p + 1):
        if abs(coeff[1 : w + 1, w].sum()) > 1e-12 * row_scale:
            leading = w
            break
    if leading is None:
        raise ValueError("no leading power found; coefficient rows all cancel")
    return SmallVarianceExpansion(coeff=coeff, leading_power=leading)
