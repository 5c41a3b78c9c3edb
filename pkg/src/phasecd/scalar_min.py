"""Univariate machinery for the coordinate updates.

Restricting the quartic objective to one coordinate gives a quartic
polynomial in the step ``alpha``; its minimiser is found among the real roots
of the derivative, a cubic solved in closed form. The same kernels minimise a
quartic on an interval and the quartic plus ``tau*|beta|`` (FOST).

The ``_``-prefixed functions are numba kernels shared with the solver loops;
the public wrappers add argument checking and Python exceptions.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .core import MeasurementEnsemble, SolverState

__all__ = [
    "QuarticCoeffs",
    "CubicRoots",
    "IdenticallyZeroError",
    "UnboundedError",
    "coordinate_coeffs",
    "quartic_from_quadratics",
    "solve_cubic",
    "minimize_quartic",
    "minimize_quartic_interval",
    "fost",
    "soft_threshold",
]

# leading coefficients below DEGENERATE * max|coeff| are treated as zero
DEGENERATE = 1e-12
_TWO_PI_3 = 2.0 * math.pi / 3.0


class IdenticallyZeroError(ValueError):
    """Every coefficient of the polynomial is zero."""


class UnboundedError(ValueError):
    """The polynomial (plus penalty) is not bounded below."""


class QuarticCoeffs(NamedTuple):
    """``phi(a) = d4 a^4 + d3 a^3 + d2 a^2 + d1 a + d0``."""

    d4: float
    d3: float
    d2: float
    d1: float
    d0: float

    def __call__(self, a):
        return (((self.d4 * a + self.d3) * a + self.d2) * a + self.d1) * a + self.d0

    def derivative(self):
        """Coefficients of ``phi'`` as a cubic ``(a3, a2, a1, a0)``."""
        return 4.0 * self.d4, 3.0 * self.d3, 2.0 * self.d2, self.d1


class CubicRoots(NamedTuple):
    real_roots: tuple


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _polyval3(a3, a2, a1, a0, t):
    return ((a3 * t + a2) * t + a1) * t + a0


@njit(cache=True)
def _polyval4(d4, d3, d2, d1, d0, t):
    return (((d4 * t + d3) * t + d2) * t + d1) * t + d0


@njit(cache=True)
def _magnitude4(d4, d3, d2, d1, d0, t):
    at = abs(t)
    return (((abs(d4) * at + abs(d3)) * at + abs(d2)) * at + abs(d1)) * at + abs(d0)


@njit(cache=True)
def _polish(a3, a2, a1, a0, t):
    """One Newton step, kept only if it reduces the residual."""
    p = _polyval3(a3, a2, a1, a0, t)
    dp = (3.0 * a3 * t + 2.0 * a2) * t + a1
    if dp == 0.0 or p == 0.0:
        return t
    t1 = t - p / dp
    if abs(_polyval3(a3, a2, a1, a0, t1)) < abs(p):
        return t1
    return t


@njit(cache=True)
def _quadratic_roots(a2, a1, a0, out):
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        return 0
    if disc == 0.0:
        out[0] = -a1 / (2.0 * a2)
        return 1
    # stable form, no cancellation between -a1 and sqrt(disc)
    s = -0.5 * (a1 + math.copysign(math.sqrt(disc), a1))
    out[0] = s / a2
    out[1] = a0 / s if s != 0.0 else -out[0]
    return 2


@njit(cache=True)
def _depressed_cubic_roots(a3, a2, a1, a0, out):
    p2 = a2 / a3
    p1 = a1 / a3
    p0 = a0 / a3
    sh = p2 / 3.0
    p = p1 - p2 * sh
    q = (2.0 * sh * sh - p1) * sh + p0
    half_q = 0.5 * q
    disc = half_q * half_q + (p / 3.0) ** 3
    if disc < 0.0:
        # three distinct real roots: trigonometric form (p < 0 here)
        m = 2.0 * math.sqrt(-p / 3.0)
        c = 3.0 * q / (p * m)
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        theta = math.acos(c) / 3.0
        out[0] = m * math.cos(theta) - sh
        out[1] = m * math.cos(theta - _TWO_PI_3) - sh
        out[2] = m * math.cos(theta - 2.0 * _TWO_PI_3) - sh
        return 3
    # one real root (Cardano), or a repeated root when disc == 0
    u = -math.copysign(np.cbrt(abs(half_q) + math.sqrt(disc)), q)
    v = -p / (3.0 * u) if u != 0.0 else 0.0
    out[0] = u + v - sh
    if disc == 0.0 and u != 0.0:
        out[1] = -0.5 * (u + v) - sh
        return 2
    return 1


@njit(cache=True)
def _cubic_roots(a3, a2, a1, a0, out):
    """Real roots of ``a3 t^3 + a2 t^2 + a1 t + a0`` written into ``out``.

    Returns the number of distinct roots (sorted ascending), or -1 when all
    coefficients are zero.
    """
    scale = max(abs(a3), abs(a2), abs(a1), abs(a0))
    if scale == 0.0:
        return -1
    thr = DEGENERATE * scale
    if abs(a3) > thr:
        n = _depressed_cubic_roots(a3, a2, a1, a0, out)
    elif abs(a2) > thr:
        n = _quadratic_roots(a2, a1, a0, out)
    elif abs(a1) > thr:
        out[0] = -a0 / a1
        n = 1
    else:
        return 0
    for k in range(n):
        out[k] = _polish(a3, a2, a1, a0, out[k])
    # sort (n <= 3) and collapse coincident roots
    for i in range(1, n):
        t = out[i]
        j = i - 1
        while j >= 0 and out[j] > t:
            out[j + 1] = out[j]
            j -= 1
        out[j + 1] = t
    k = 0
    for i in range(n):
        if k == 0 or out[i] - out[k - 1] > 1e-12 * max(1.0, abs(out[i])):
            out[k] = out[i]
            k += 1
    return k


@njit(cache=True)
def _better(v, t, best_v, best_t, tie):
    """True if candidate (v, t) beats (best_v, best_t) under the tie-break rule."""
    if v < best_v - tie:
        return True
    if v > best_v + tie:
        return False
    at = abs(t)
    ab = abs(best_t)
    if at < ab:
        return True
    if at > ab:
        return False
    return t < best_t


@njit(cache=True)
def _pick(d4, d3, d2, d1, d0, tau, cands, n):
    """Best candidate of ``d(t) + tau*|t|`` among ``cands[:n]``."""
    best_t = cands[0]
    best_v = _polyval4(d4, d3, d2, d1, d0, best_t) + tau * abs(best_t)
    for k in range(1, n):
        t = cands[k]
        v = _polyval4(d4, d3, d2, d1, d0, t) + tau * abs(t)
        tie = 8e-16 * (max(_magnitude4(d4, d3, d2, d1, d0, t),
                           _magnitude4(d4, d3, d2, d1, d0, best_t)) + tau * max(abs(t), abs(best_t)))
        if _better(v, t, best_v, best_t, tie):
            best_t = t
            best_v = v
    return best_t, best_v


@njit(cache=True)
def _coercivity(d4, d3, d2, d1):
    """0: coercive quartic; 1: coercive quadratic; 2: constant; -1: unbounded."""
    scale = max(abs(d4), abs(d3), abs(d2), abs(d1))
    thr = DEGENERATE * scale
    if d4 > thr:
        return 0
    if d4 < -thr or abs(d3) > thr:
        return -1
    if d2 > thr:
        return 1
    if d2 < -thr or abs(d1) > thr:
        return -1
    return 2


@njit(cache=True)
def _quartic_argmin(d4, d3, d2, d1, d0):
    """Global minimiser of a coercive quartic; raises on unbounded input."""
    kind = _coercivity(d4, d3, d2, d1)
    if kind == -1:
        raise ValueError("quartic is not bounded below")
    if kind == 2:
        return 0.0, d0
    cands = np.empty(3)
    n = _cubic_roots(4.0 * d4, 3.0 * d3, 2.0 * d2, d1, cands)
    if n <= 0:
        return 0.0, d0
    return _pick(d4, d3, d2, d1, d0, 0.0, cands, n)


@njit(cache=True)
def _quartic_argmin_interval(d4, d3, d2, d1, d0, lo, hi):
    cands = np.empty(5)
    roots = np.empty(3)
    n = _cubic_roots(4.0 * d4, 3.0 * d3, 2.0 * d2, d1, roots)
    k = 0
    for r in range(max(n, 0)):
        if lo <= roots[r] <= hi:
            cands[k] = roots[r]
            k += 1
    cands[k] = lo
    cands[k + 1] = hi
    return _pick(d4, d3, d2, d1, d0, 0.0, cands, k + 2)


@njit(cache=True)
def _fost(u4, u3, u2, u1, tau):
    """Minimiser of ``u4 b^4 + u3 b^3 + u2 b^2 + u1 b + tau |b|``."""
    scale = max(abs(u4), abs(u3), abs(u2), abs(u1), tau)
    thr = DEGENERATE * scale
    if u4 < -thr or (u4 <= thr and (abs(u3) > thr or u2 < -thr)):
        raise ValueError("penalised quartic is not bounded below")
    if u4 <= thr and u2 <= thr and abs(u1) > tau + thr:
        raise ValueError("penalised quartic is not bounded below")
    cands = np.zeros(7)
    roots = np.empty(3)
    k = 1  # cands[0] = 0
    n = _cubic_roots(4.0 * u4, 3.0 * u3, 2.0 * u2, u1 + tau, roots)
    for r in range(max(n, 0)):
        if roots[r] > 0.0:
            cands[k] = roots[r]
            k += 1
    n = _cubic_roots(4.0 * u4, 3.0 * u3, 2.0 * u2, u1 - tau, roots)
    for r in range(max(n, 0)):
        if roots[r] < 0.0:
            cands[k] = roots[r]
            k += 1
    best, _ = _pick(u4, u3, u2, u1, 0.0, tau, cands, k)
    return best


@njit(cache=True)
def _coord_coeffs(col, b, z, imag):
    """Quartic coefficients of the objective along one real coordinate.

    ``col[m] = conj(a_m[j])`` and the coordinate moves Re(x_j), or Im(x_j)
    when ``imag``. Per measurement ``|z_m + step|^2 = c2 a^2 + c1 a + c0``.
    """
    d4 = 0.0
    d3 = 0.0
    d2 = 0.0
    d1 = 0.0
    d0 = 0.0
    for m in range(z.shape[0]):
        c = col[m]
        zm = z[m]
        cr = c.real
        ci = c.imag
        c2 = cr * cr + ci * ci
        # z * conj(c)
        wr = zm.real * cr + zm.imag * ci
        wi = zm.imag * cr - zm.real * ci
        c1 = 2.0 * (wi if imag else wr)
        r = zm.real * zm.real + zm.imag * zm.imag - b[m]
        d4 += c2 * c2
        d3 += 2.0 * c2 * c1
        d2 += c1 * c1 + 2.0 * c2 * r
        d1 += 2.0 * c1 * r
        d0 += r * r
    return d4, d3, d2, d1, d0


# ---------------------------------------------------------------- public API


def quartic_from_quadratics(c2, c1, c0, b) -> QuarticCoeffs:
    """Sum over m of ``(c2_m a^2 + c1_m a + c0_m - b_m)^2`` as quartic coefficients."""
    c2, c1, c0, b = (np.asarray(v, dtype=np.float64) for v in (c2, c1, c0, b))
    r = c0 - b
    return QuarticCoeffs(
        float(c2 @ c2),
        float(2.0 * (c2 @ c1)),
        float(c1 @ c1 + 2.0 * (c2 @ r)),
        float(2.0 * (c1 @ r)),
        float(r @ r),
    )


def coordinate_coeffs(ensemble: MeasurementEnsemble, state: SolverState, i: int, check: bool = False) -> QuarticCoeffs:
    """Coefficients of ``phi(a) = f(xr + a e_i)`` from the cached products, O(M)."""
    n = ensemble.N
    if not 0 <= i < 2 * n:
        raise IndexError(f"coordinate {i} out of range [0, {2 * n})")
    if check:
        state.check_cache(ensemble)
    return QuarticCoeffs(*_coord_coeffs(ensemble.cols[i % n], ensemble.intensities, state.z, i >= n))


def solve_cubic(a3: float, a2: float, a1: float, a0: float) -> CubicRoots:
    """Distinct real roots of ``a3 t^3 + a2 t^2 + a1 t + a0``, ascending.

    Leading coefficients smaller than ``1e-12`` times the largest coefficient
    demote the equation to a quadratic, linear or constant one. A nonzero
    constant has no roots; the zero polynomial raises
    :class:`IdenticallyZeroError`.
    """
    out = np.empty(3)
    n = _cubic_roots(float(a3), float(a2), float(a1), float(a0), out)
    if n < 0:
        raise IdenticallyZeroError("polynomial is identically zero")
    return CubicRoots(tuple(float(t) for t in out[:n]))


def minimize_quartic(c) -> tuple[float, float]:
    """Global minimiser ``(alpha, phi(alpha))`` of a coercive quartic.

    Among equally good stationary points the one with smaller ``|alpha|`` wins,
    then the smaller ``alpha``.
    """
    c = QuarticCoeffs(*map(float, c))
    if _coercivity(c.d4, c.d3, c.d2, c.d1) < 0:
        raise UnboundedError(f"quartic {tuple(c)} is not bounded below")
    a, v = _quartic_argmin(*c)
    return float(a), float(v)


def minimize_quartic_interval(c, lo: float, hi: float) -> tuple[float, float]:
    """Minimiser of the quartic over ``[lo, hi]``."""
    if not lo <= hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    c = QuarticCoeffs(*map(float, c))
    a, v = _quartic_argmin_interval(*c, float(lo), float(hi))
    return float(a), float(v)


def fost(u4: float, u3: float, u2: float, u1: float, tau: float) -> float:
    """Fourth-order soft-thresholding.

    Returns the global minimiser of ``u4 b^4 + u3 b^3 + u2 b^2 + u1 b + tau*|b|``,
    chosen among zero and the stationary points of each smooth branch. With
    ``u4 = u3 = 0`` this is the ordinary soft-threshold of ``-u1 / (2 u2)``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if u4 < 0:
        raise UnboundedError("u4 must be non-negative")
    try:
        return float(_fost(float(u4), float(u3), float(u2), float(u1), float(tau)))
    except ValueError as exc:
        raise UnboundedError(str(exc)) from None


def soft_threshold(v, lam):
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)
