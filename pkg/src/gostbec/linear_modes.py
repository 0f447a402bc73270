"""Analytic eigenbasis of the linear (gamma = 0) trap problem.

Phi_{s,k,l}(rho,z) = sqrt(nu k!/(pi (s+k)!)) e^{-nu rho^2/2} nu^{s/2} rho^s
                     L^s_k(nu rho^2) * A_l Ai(beta^{1/3} z - |z_l|)

with eigenvalues eps_{s,k,l} = 2 nu (s+2k+1) + beta^{2/3} |z_l|. The Airy
function is evaluated from its Maclaurin series for |x| <= 7 and the
standard asymptotic expansions beyond (the switch point is where the
optimally truncated asymptotic series first beats 1e-10 absolute); no
external special-function library is used outside the test oracles.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .grid import Field, apply_boundary

AI_ZERO = 0.35502805388781723926   # Ai(0)  = 3^(-2/3)/Gamma(2/3)
AIP_ZERO = -0.25881940379280679840  # Ai'(0) = -3^(-1/3)/Gamma(1/3)
_SWITCH = 7.0
_SERIES_MAX_TERMS = 120


def _ai_series(x):
    # Ai = Ai(0) f + Ai'(0) g, f/g the two Maclaurin solutions of y'' = x y
    x = np.asarray(x, dtype=np.float64)
    x3 = x * x * x
    f = np.ones_like(x)
    tf = np.ones_like(x)
    g = x.copy()
    tg = x.copy()
    for k in range(_SERIES_MAX_TERMS):
        tf = tf * x3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * x3 / ((3 * k + 3) * (3 * k + 4))
        f += tf
        g += tg
        if max(np.max(np.abs(tf)), np.max(np.abs(tg))) < 1e-18:
            break
    return AI_ZERO * f + AIP_ZERO * g


def _aip_series(x):
    x = np.asarray(x, dtype=np.float64)
    x3 = x * x * x
    tf = 0.5 * x * x
    fp = tf.copy()
    tg = np.ones_like(x)
    gp = np.ones_like(x)
    for k in range(1, _SERIES_MAX_TERMS):
        tf = tf * x3 * (k + 1) / (k * (3 * k + 2) * (3 * k + 3))
        tg = tg * x3 / ((3 * k - 2) * (3 * k))
        fp += tf
        gp += tg
        if max(np.max(np.abs(tf)), np.max(np.abs(tg))) < 1e-18:
            break
    return AI_ZERO * fp + AIP_ZERO * gp


def _asym_coeffs(n):
    c = np.empty(n)
    c[0] = 1.0
    for k in range(1, n):
        c[k] = c[k - 1] * (6 * k - 1) * (6 * k - 5) / (72.0 * k)
    return c


_C_ASYM = _asym_coeffs(40)
_D_ASYM = _C_ASYM * np.array(
    [1.0] + [-(6 * k + 1) / (6 * k - 1) for k in range(1, 40)])


def _asym_sum(zeta, coeffs, alternate=True):
    # sum coeffs[k] (-1)^k zeta^{-k}, truncated at the smallest term
    acc = np.ones_like(zeta)
    term = np.ones_like(zeta)
    prev = np.full_like(zeta, np.inf)
    for k in range(1, len(coeffs)):
        term = term / zeta * coeffs[k] / coeffs[k - 1]
        t = -term if (alternate and k % 2) else term
        mag = np.abs(term)
        stop = mag >= prev
        t = np.where(stop, 0.0, t)
        acc = acc + t
        prev = np.where(stop, prev, mag)
        if np.all(stop) or np.max(mag) < 1e-18:
            break
    return acc


def _ai_pos_asym(x):
    zeta = 2.0 / 3.0 * x ** 1.5
    s = _asym_sum(zeta, _C_ASYM)
    return 0.5 / np.sqrt(np.pi) * x ** -0.25 * np.exp(-zeta) * s


def _ai_neg_asym(x):
    z = -np.asarray(x, dtype=np.float64)
    zeta = 2.0 / 3.0 * z ** 1.5
    even = _even_odd_sum(zeta, _C_ASYM, 0)
    odd = _even_odd_sum(zeta, _C_ASYM, 1)
    arg = zeta + 0.25 * np.pi
    return (np.sin(arg) * even - np.cos(arg) * odd) / (np.sqrt(np.pi) * z ** 0.25)


def _aip_pos_asym(x):
    zeta = 2.0 / 3.0 * x ** 1.5
    s = _asym_sum(zeta, _D_ASYM)
    return -0.5 / np.sqrt(np.pi) * x ** 0.25 * np.exp(-zeta) * s


def _aip_neg_asym(x):
    z = -np.asarray(x, dtype=np.float64)
    zeta = 2.0 / 3.0 * z ** 1.5
    even = _even_odd_sum(zeta, _D_ASYM, 0)
    odd = _even_odd_sum(zeta, _D_ASYM, 1)
    arg = zeta + 0.25 * np.pi
    return -(np.cos(arg) * even + np.sin(arg) * odd) / np.sqrt(np.pi) * z ** 0.25


def _even_odd_sum(zeta, coeffs, parity):
    # sum over k of (-1)^k coeffs[2k+parity] zeta^{-(2k+parity)}
    inv2 = 1.0 / (zeta * zeta)
    acc = np.zeros_like(zeta)
    prev = np.full_like(zeta, np.inf)
    term = coeffs[parity] * (1.0 / zeta if parity else np.ones_like(zeta))
    sign = 1.0
    idx = parity
    while idx < len(coeffs):
        mag = np.abs(term)
        stop = mag >= prev
        acc = acc + np.where(stop, 0.0, sign * term)
        prev = np.where(stop, prev, mag)
        if np.all(stop):
            break
        idx += 2
        if idx >= len(coeffs):
            break
        term = term * inv2 * coeffs[idx] / coeffs[idx - 2]
        sign = -sign
    return acc


def _dispatch(x, series, pos, neg):
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    m_neg = x < -_SWITCH
    m_pos = x > _SWITCH
    m_mid = ~(m_neg | m_pos)
    if np.any(m_mid):
        out[m_mid] = series(x[m_mid])
    if np.any(m_pos):
        out[m_pos] = pos(x[m_pos])
    if np.any(m_neg):
        out[m_neg] = neg(x[m_neg])
    return out[0] if scalar else out


def airy_ai(x):
    """Ai(x), accurate to better than 1e-10 absolute on [-20, 10]."""
    return _dispatch(x, _ai_series, _ai_pos_asym, _ai_neg_asym)


def airy_ai_prime(x):
    """Ai'(x); same construction as airy_ai, used for norm cross-checks."""
    return _dispatch(x, _aip_series, _aip_pos_asym, _aip_neg_asym)


# ------------------------------------------------------------------ zeros

_zero_cache = []


def airy_zero(l):
    """(l+1)-th negative zero of Ai by bracketed bisection, |Ai| ~ 1e-13."""
    if l < 0 or int(l) != l:
        raise UsageError("l must be a non-negative integer")
    l = int(l)
    while len(_zero_cache) <= l:
        m = len(_zero_cache)
        t = 3.0 * np.pi * (4 * m + 3) / 8.0
        est = -t ** (2.0 / 3.0)
        gap = np.pi / np.sqrt(-est)
        a, b = est - 0.5 * gap, est + 0.5 * gap
        fa, fb = airy_ai(a), airy_ai(b)
        widen = 0
        while fa * fb > 0 and widen < 8:
            a -= 0.25 * gap
            b += 0.25 * gap
            fa, fb = airy_ai(a), airy_ai(b)
            widen += 1
        if fa * fb > 0:
            raise RuntimeError(f"airy_zero: bracketing failed for l={m}")
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = airy_ai(mid)
            if fa * fm <= 0:
                b, fb = mid, fm
            else:
                a, fa = mid, fm
            if b - a < 1e-14 * abs(mid):
                break
        _zero_cache.append(0.5 * (a + b))
    return _zero_cache[l]


_norm_cache = {}


def airy_norm(l, beta):
    """A_l with integral(0, inf) [A_l Ai(beta^{1/3} z - |z_l|)]^2 dz = 1.

    Computed once per l in the substituted variable u = beta^{1/3} z - |z_l|
    (Simpson on [z_l, z_l + 30]), so A_l(beta) = beta^{1/6} A_l(1) holds
    exactly.
    """
    if beta <= 0:
        raise UsageError("beta must be positive")
    l = int(l)
    if l not in _norm_cache:
        zl = airy_zero(l)
        n = 2 * int((30.0) / 0.004 // 2) + 1
        u = np.linspace(zl, zl + 30.0, n)
        y = airy_ai(u) ** 2
        h = u[1] - u[0]
        w = np.ones(n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        _norm_cache[l] = float(np.sum(w * y) * h / 3.0)
    return float(beta ** (1.0 / 6.0) / np.sqrt(_norm_cache[l]))


# ------------------------------------------------------------------ Laguerre

def laguerre(s, k, x):
    """Generalized Laguerre L^s_k(x) by the three-term recurrence."""
    if s < 0 or k < 0:
        raise UsageError("quantum numbers must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + s - x
    for n in range(1, k):
        prev, cur = cur, ((2 * n + 1 + s - x) * cur - (n + s) * prev) / (n + 1)
    return cur if cur.ndim else float(cur)


# ------------------------------------------------------------------ modes

@dataclass(frozen=True)
class LinearMode:
    s: int
    k: int
    l: int
    energy: float
    airy_zero: float
    airy_norm: float


def linear_mode(s, k, l, params):
    if min(s, k, l) < 0:
        raise UsageError("quantum numbers must be non-negative")
    zl = airy_zero(l)
    return LinearMode(s=int(s), k=int(k), l=int(l),
                      energy=linear_energy_skl(s, k, l, params),
                      airy_zero=zl, airy_norm=airy_norm(l, params.beta))


def linear_energy_skl(s, k, l, params):
    # oscillator part carries the 2D-radial factor 2 nu (s + 2k + 1)
    zl = airy_zero(l)
    return 2.0 * params.nu * (s + 2 * k + 1) \
        + params.beta ** (2.0 / 3.0) * abs(zl)


def linear_energy(mode, params):
    return linear_energy_skl(mode.s, mode.k, mode.l, params)


def radial_profile(s, k, nu, rho):
    """R_{s,k}(rho), normalized against the rho drho measure with 2 pi."""
    lg = 0.5 * (math.lgamma(k + 1) - math.lgamma(s + k + 1))
    pref = math.sqrt(nu / math.pi) * math.exp(lg) * nu ** (0.5 * s)
    return pref * np.exp(-0.5 * nu * rho ** 2) * rho ** s \
        * laguerre(s, k, nu * rho ** 2)


def axial_profile(l, beta, z):
    zl = airy_zero(l)
    return airy_norm(l, beta) * airy_ai(beta ** (1.0 / 3.0) * z - abs(zl))


def eval_mode(mode, grid, params):
    """Sample Phi_{s,k,l} on the grid as a real-valued Field."""
    if mode.s != params.s:
        raise UsageError(f"mode has s={mode.s} but params.s={params.s}")
    r = radial_profile(mode.s, mode.k, params.nu, grid.rho_nodes)
    zpart = axial_profile(mode.l, params.beta, grid.z_nodes)
    values = r[:, None] * zpart[None, :]
    apply_boundary(values, mode.s)
    return Field(grid, values)
