"""Linearization of the GP flow around a real stationary state in the
Laguerre x Airy basis: block assembly, eigenvalues, lifetimes, and spectral
portraits.

Writing the perturbation h = h_r + i h_i and expanding both parts in the
basis of one azimuthal sector s, the linearized flow dh/dt = M h has

    M = [[0, Lm], [-Lp, 0]],   Lm = L- = H0 - mu + gamma psi^2,
                               Lp = L+ = H0 - mu + 3 gamma psi^2,

the off-diagonal pattern because Im psi_L = 0. The essential spectrum
(-i inf, -i mu] u [i mu, i inf) of the continuum operator is a documented
fact, not computed here; the matrices only see the discrete part.

Portrait sampling reduces sigma_min(zI - M) to a triangular problem through
one Schur factorization of M, then estimates the smallest singular value by
Golub-Kahan bidiagonalization of the inverse (a pair of triangular solves
per Lanczos step).
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, UsageError, WindowError
from .linear_modes import (airy_zero, axial_profile, linear_energy_skl,
                           radial_profile)

DEFAULT_BASIS_N = 20
DEFAULT_EPSILON_INV = 1e5
SPP_CLAMP = 1e3
GROWTH_FLOOR = 1e-10


@dataclass
class BdgMatrix:
    """Blocks of M in the (k,l) double index, flattened row-major (k*n+l)."""

    basis_n: int
    s: int
    mu: float
    lm: np.ndarray
    lp: np.ndarray

    def __post_init__(self):
        n2 = self.basis_n ** 2
        if self.lm.shape != (n2, n2) or self.lp.shape != (n2, n2):
            raise UsageError("block shape does not match basis_n")

    def full_matrix(self):
        n2 = self.basis_n ** 2
        m = np.zeros((2 * n2, 2 * n2))
        m[:n2, n2:] = self.lm
        m[n2:, :n2] = -self.lp
        return m


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    growth_rate: float
    tau: float
    tau_norm2: float
    portrait: object = None


@dataclass
class Portrait:
    re_axis: np.ndarray
    im_axis: np.ndarray
    spp: np.ndarray       # shape (len(im_axis), len(re_axis))
    clamped: np.ndarray
    m_norm2: float


def _basis_profiles(grid, params, basis_n):
    r = np.empty((basis_n, grid.n_rho))
    z = np.empty((basis_n, grid.n_z))
    for k in range(basis_n):
        r[k] = radial_profile(params.s, k, params.nu, grid.rho_nodes)
    for l in range(basis_n):
        z[l] = axial_profile(l, params.beta, grid.z_nodes)
    return r, z


def _check_truncation(grid, params, basis_n):
    # classical turning points of the top basis mode against the box
    k = l = basis_n - 1
    rho_turn = np.sqrt(2.0 * (params.s + 2 * k + 1) / params.nu)
    z_turn = abs(airy_zero(l)) / params.beta ** (1.0 / 3.0)
    if rho_turn > grid.rho_max or z_turn > grid.z_max:
        warnings.warn(
            f"basis_n={basis_n}: top mode turning point (rho {rho_turn:.1f}, "
            f"z {z_turn:.1f}) exceeds the grid ({grid.rho_max:g}, "
            f"{grid.z_max:g}); matrix elements are truncated", stacklevel=3)


def assemble_blocks(state, basis_n=DEFAULT_BASIS_N):
    """Quadrature assembly of Lm and Lp around a real stationary state.

    Lm = diag(eps_skl - mu) + gamma G, Lp the same with 3 gamma, where
    G[(k,l),(k',l')] = 2pi int psi^2 Phi_skl Phi_sk'l' rho drho dz on the
    state's grid. The basis factorizes, so G contracts as two einsums.
    """
    if basis_n < 2:
        raise UsageError("basis_n must be at least 2")
    if np.iscomplexobj(state.psi.values) \
            and np.max(np.abs(state.psi.values.imag)) > 0:
        raise UsageError("assemble_blocks expects a real stationary state")
    params = state.params
    g = state.psi.grid
    _check_truncation(g, params, basis_n)
    r, z = _basis_profiles(g, params, basis_n)
    psi2 = np.real(state.psi.values) ** 2
    core = g.w2 * psi2
    # G[a,j,b,l] = sum_{r,z} core[r,z] R_a R_b Z_j Z_l; symmetrized so the
    # blocks are exactly symmetric (einsum leaves ~1e-16 ordering noise)
    abr = np.einsum("ar,br,rz->abz", r, r, core)
    gmat = np.einsum("abz,jz,lz->ajbl", abr, z, z)
    n2 = basis_n ** 2
    gmat = gmat.reshape(n2, n2)
    gmat = 0.5 * (gmat + gmat.T)
    eps = np.array([[linear_energy_skl(params.s, k, l, params)
                     for l in range(basis_n)] for k in range(basis_n)])
    diag = np.diag(eps.ravel() - state.mu)
    lm = diag + params.gamma * gmat
    lp = diag + 3.0 * params.gamma * gmat
    return BdgMatrix(basis_n=basis_n, s=params.s, mu=float(state.mu),
                     lm=lm, lp=lp)


def basis_coefficients(state, basis_n=DEFAULT_BASIS_N):
    """Expansion coefficients <Phi_skl, psi>_W, flattened like the blocks."""
    g = state.psi.grid
    r, z = _basis_profiles(g, state.params, basis_n)
    core = g.w2 * np.real(state.psi.values)
    return np.einsum("ar,rz,jz->aj", r, core, z).ravel()


def linear_residual(m, state):
    """|| Lm c || / || c || for c the basis coefficients of the state.

    L- psi_L = 0 for exact stationary states, so this measures the combined
    grid and basis truncation error.
    """
    c = basis_coefficients(state, m.basis_n)
    nc = np.linalg.norm(c)
    if nc == 0:
        raise UsageError("state has no component in the basis")
    return float(np.linalg.norm(m.lm @ c) / nc)


def _full_matrix_of(m):
    """Accept a BdgMatrix or any square array (handy for calibration)."""
    if hasattr(m, "full_matrix"):
        return m.full_matrix()
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise UsageError("expected a BdgMatrix or a square matrix")
    return a


def spectrum(m, cross_check=True, check_tol=1e-6):
    """Eigenvalues of the full M with the -Lm Lp product cross-check.

    growth_rate is max Re lambda; tau = ln2/growth_rate is the doubling
    time read from the paper formula, tau_norm2 = ln2/(2 growth_rate) the
    doubling time of the squared norm. Both are inf for stable states.
    """
    full = _full_matrix_of(m)
    try:
        lam = sla.eigvals(full)
    except sla.LinAlgError as exc:
        raise NumericalError(
            f"eigendecomposition failed (||M|| = {np.linalg.norm(full):.3e}):"
            f" {exc}") from exc
    if cross_check and hasattr(m, "lm"):
        lam2 = sla.eigvals(-m.lm @ m.lp)
        a = np.sort_complex(lam ** 2)
        # each product eigenvalue appears twice among the lambda^2
        b = np.sort_complex(np.concatenate([lam2, lam2]))
        scale = max(np.max(np.abs(a)), 1.0)
        worst = 0.0
        for av in a:
            worst = max(worst, np.min(np.abs(b - av)) / scale)
        if worst > check_tol:
            raise NumericalError(
                f"product cross-check failed: lambda^2 mismatch {worst:.3e} "
                f"relative (tolerance {check_tol:g})")
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    growth = float(np.max(lam.real))
    if growth > GROWTH_FLOOR:
        tau = float(np.log(2.0) / growth)
        tau2 = float(np.log(2.0) / (2.0 * growth))
    else:
        tau = np.inf
        tau2 = np.inf
    return SpectrumReport(eigenvalues=lam, growth_rate=growth,
                          tau=tau, tau_norm2=tau2)


# ----------------------------------------------------------------- portraits

class _ResolventSampler:
    """sigma_min(zI - M) through one Schur factorization of M."""

    def __init__(self, m_full, lanczos_steps=30, seed=12345):
        t, q = sla.schur(m_full.astype(np.complex128), output="complex")
        self.t = t
        self.n = t.shape[0]
        self.m_norm2 = float(np.linalg.norm(m_full, 2))
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(self.n) + 1j * rng.standard_normal(self.n)
        self.v0 = v0 / np.linalg.norm(v0)
        self.steps = lanczos_steps

    def sigma_min(self, z):
        """Golub-Kahan on (zI - T)^{-1}; returns 0.0 when z is numerically
        an eigenvalue (triangular solve blows up)."""
        a = z * np.eye(self.n) - self.t
        d = np.abs(np.diagonal(a))
        if np.min(d) == 0.0:
            return 0.0
        try:
            return self._gk(a)
        except (sla.LinAlgError, FloatingPointError):
            return 0.0

    def _gk(self, a):
        # bidiagonalize B = a^{-1} acting by triangular solves; the largest
        # singular value of B is 1/sigma_min(a)
        solve = sla.solve_triangular
        v = self.v0.copy()
        alphas = []
        betas = []
        us = []
        vs = [v]
        u = solve(a, v, lower=False)
        alpha = np.linalg.norm(u)
        if not np.isfinite(alpha):
            return 0.0
        if alpha == 0.0:
            return np.inf
        u = u / alpha
        alphas.append(alpha)
        us.append(u)
        for _ in range(self.steps):
            w = solve(a, u, lower=False, trans="C")
            for prev in vs:
                w = w - np.vdot(prev, w) * prev
            beta = np.linalg.norm(w)
            if not np.isfinite(beta):
                return 0.0
            if beta < 1e-14 * alphas[0]:
                break
            v = w / beta
            betas.append(beta)
            vs.append(v)
            w = solve(a, v, lower=False)
            for prev in us:
                w = w - np.vdot(prev, w) * prev
            alpha = np.linalg.norm(w)
            if not np.isfinite(alpha):
                return 0.0
            if alpha == 0.0:
                break
            u = w / alpha
            alphas.append(alpha)
            us.append(u)
        k = len(alphas)
        bid = np.zeros((k, k))
        for i, al in enumerate(alphas):
            bid[i, i] = al
        for i, be in enumerate(betas[:k - 1]):
            bid[i + 1, i] = be
        smax = np.linalg.svd(bid, compute_uv=False)[0]
        if smax == 0.0:
            return np.inf
        return 1.0 / smax

    def spp(self, z):
        s = self.sigma_min(z)
        if s <= 0.0 or not np.isfinite(s):
            return SPP_CLAMP, True
        return min(float(np.log10(self.m_norm2 / s)), SPP_CLAMP), False


def spectral_portrait(m, window, resolution=(200, 100), sampler=None):
    """Sample spp(z) = log10(||M||_2 / sigma_min(zI - M)) over a rectangle.

    window = (re_min, re_max, im_min, im_max); resolution = (n_re, n_im).
    Samples landing on eigenvalues are clamped at spp = log10-of-clamp and
    flagged in the clamped mask.
    """
    re_min, re_max, im_min, im_max = (float(x) for x in window)
    if not all(np.isfinite([re_min, re_max, im_min, im_max])):
        raise UsageError("portrait window must be finite")
    if re_max <= re_min or im_max <= im_min:
        raise UsageError("portrait window is empty")
    n_re, n_im = int(resolution[0]), int(resolution[1])
    if n_re < 2 or n_im < 2:
        raise UsageError("portrait resolution must be at least 2x2")
    if sampler is None:
        sampler = _ResolventSampler(_full_matrix_of(m))
    re_axis = np.linspace(re_min, re_max, n_re)
    im_axis = np.linspace(im_min, im_max, n_im)
    spp = np.empty((n_im, n_re))
    clamped = np.zeros((n_im, n_re), dtype=bool)
    for j, y in enumerate(im_axis):
        for i, x in enumerate(re_axis):
            spp[j, i], clamped[j, i] = sampler.spp(complex(x, y))
    return Portrait(re_axis=re_axis, im_axis=im_axis, spp=spp,
                    clamped=clamped, m_norm2=sampler.m_norm2)


def eigenvalue_error_bars(m, eigenvalue, epsilon_inv=DEFAULT_EPSILON_INV,
                          max_extent=None, sampler=None, rel_tol=1e-3):
    """Real-axis extent of the region spp(z) > log10(epsilon_inv) around an
    eigenvalue, by outward marching then bisection.

    Returns (re_lo, re_hi) in the eigenvalue plane. Raises WindowError when
    the region is still above threshold at max_extent (default ||M||_2).
    """
    if sampler is None:
        sampler = _ResolventSampler(_full_matrix_of(m))
    thr = float(np.log10(epsilon_inv))
    if thr >= SPP_CLAMP:
        raise UsageError("epsilon_inv beyond the spp clamp; nothing to resolve")
    lam = complex(eigenvalue)
    if max_extent is None:
        max_extent = sampler.m_norm2
    if max_extent <= 0:
        raise UsageError("max_extent must be positive")

    def above(x):
        val, hit = sampler.spp(lam + x)
        return hit or val > thr

    if not above(0.0):
        raise UsageError(
            f"spp at the eigenvalue is below the threshold {thr:g}; "
            "not an eigenvalue of this matrix?")

    def edge(sign):
        step = sampler.m_norm2 / epsilon_inv / 8.0
        lo = 0.0
        x = step
        while above(sign * x):
            lo = x
            x *= 2.0
            if x > max_extent:
                raise WindowError(
                    f"spp region not closed within {max_extent:g} of the "
                    "eigenvalue; window too small")
        hi = x
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if above(sign * mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    right = edge(+1.0)
    left = edge(-1.0)
    return (lam.real - left, lam.real + right)
