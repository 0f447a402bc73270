"""Newton solver and natural-parameter continuation for the stationary GP
equation (H0 + gamma psi^2) psi = mu psi, real gauge.

Branch labels follow the usual catalogue: the letter gives the azimuthal
number (A: s=0, B: s=1) and the digit counts the excitation, axial Airy
excitations first (A1, A2 have l=1,2) with the radial excitation closing
each family (A3 has k=1). B-branches mirror this at s=1.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import (ConfigurationError, DegenerateSolutionError, SolverError,
                     UsageError)
from .grid import (Field, apply_boundary, build_stencil, h0_matrix,
                   inner_product, pack_active, particle_number, unpack_active)
from .linear_modes import eval_mode, linear_energy_skl, linear_mode

BRANCHES = {
    "A0": (0, 0, 0),
    "A1": (0, 0, 1),
    "A2": (0, 0, 2),
    "A3": (0, 1, 0),
    "B0": (1, 0, 0),
    "B1": (1, 0, 1),
    "B2": (1, 0, 2),
    "B3": (1, 1, 0),
}

DEFAULT_DMU = 0.25
DEFAULT_TOL = 1e-9


@dataclass
class StationaryState:
    psi: Field
    mu: float
    params: object
    n_particles: float
    branch: str
    mode: tuple
    residual_norm: float

    def __post_init__(self):
        if self.mu <= 0:
            raise UsageError("chemical potential must be positive")


@dataclass
class Branch:
    label: str
    mode: tuple
    points: list


def gp_residual(psi, mu, params, stencil=None):
    """F(psi) = H0 psi + gamma psi^3 - mu psi as a Field."""
    if stencil is None:
        stencil = build_stencil(psi.grid, params)
    out = np.empty_like(psi.values)
    kernels.gp_apply(psi.values, out, stencil.lo, stencil.hi, stencil.diag,
                     stencil.inv_hz2, stencil.i0, params.gamma, mu)
    return Field(psi.grid, out)


def residual_norm_w(psi, mu, params, stencil=None):
    r = gp_residual(psi, mu, params, stencil)
    return float(np.sqrt(max(kernels.wsum_abs2(psi.grid.w2, r.values), 0.0)))


def _gauge_sign(values):
    idx = np.unravel_index(np.argmax(np.abs(values)), values.shape)
    if values[idx] < 0:
        np.negative(values, out=values)
    return values


def newton_solve(guess, mu, params, tol=DEFAULT_TOL, max_iter=25,
                 stencil=None, a_matrix=None, branch="", mode=None):
    """Solve the stationary GP equation near the guess.

    The Jacobian H0 + 3 gamma psi^2 - mu is assembled sparse on the active
    nodes and factorized directly (splu) each iterate. Residual norms are
    measured in the weighted L2 norm of the grid.
    """
    if np.iscomplexobj(guess.values):
        if np.max(np.abs(guess.values.imag)) > 0:
            raise UsageError("newton_solve expects a real guess (fixed gauge)")
        guess = Field(guess.grid, np.ascontiguousarray(guess.values.real))
    g = guess.grid
    if stencil is None:
        stencil = build_stencil(g, params)
    if a_matrix is None:
        a_matrix = h0_matrix(g, params, stencil)
    i0 = stencil.i0
    v = pack_active(guess.values.astype(np.float64, copy=True), g, i0)
    if not np.any(v):
        raise UsageError("newton_solve needs a nonzero guess")
    w = g.w2[i0:g.n_rho - 1, 1:g.n_z - 1].ravel()
    gamma = params.gamma
    rn = np.inf
    for _ in range(max_iter):
        f = a_matrix @ v + gamma * v ** 3 - mu * v
        rn = float(np.sqrt(np.sum(w * f * f)))
        if rn <= tol:
            break
        jac = a_matrix + sp.diags(3.0 * gamma * v * v - mu)
        dv = spla.splu(jac.tocsc()).solve(-f)
        v = v + dv
    else:
        raise SolverError(f"Newton stalled at residual {rn:.3e} "
                          f"(mu={mu:g}, tol={tol:g})", residual_norm=rn)
    values = unpack_active(v, g, i0, dtype=np.float64)
    apply_boundary(values, params.s)
    _gauge_sign(values)
    n = float(np.sum(w * v * v))
    if n < 1e-8:
        raise DegenerateSolutionError(
            f"Newton converged to the zero field at mu={mu:g}",
            residual_norm=rn)
    psi = Field(g, values)
    return StationaryState(psi=psi, mu=float(mu), params=params,
                           n_particles=n, branch=branch,
                           mode=tuple(mode) if mode else (),
                           residual_norm=rn)


def count_nodes(values, i0):
    """(radial, axial) interior sign changes along lines through the peak."""
    a = np.abs(values)
    ipk, jpk = np.unravel_index(np.argmax(a), a.shape)
    cut = 1e-6 * a[ipk, jpk]

    def changes(line):
        sig = line[np.abs(line) > cut]
        if sig.size < 2:
            return 0
        return int(np.sum(np.signbit(sig[1:]) != np.signbit(sig[:-1])))

    nr = changes(values[i0:values.shape[0] - 1, jpk])
    nz = changes(values[ipk, 1:values.shape[1] - 1])
    return nr, nz


def seed_state(mode_skl, params, grid, mu0):
    """Small-amplitude guess c Phi with the weakly nonlinear amplitude."""
    s, k, l = mode_skl
    if params.gamma <= 0:
        raise ConfigurationError("continuation requires gamma > 0")
    mode = linear_mode(s, k, l, params)
    phi = eval_mode(mode, grid, params)
    nrm = np.sqrt(particle_number(phi))
    phi = Field(grid, phi.values / nrm)
    phi4 = kernels.wsum_abs4(grid.w2, phi.values)
    eps = mode.energy
    if mu0 <= eps:
        raise ConfigurationError(f"mu0={mu0:g} below bifurcation eps={eps:g}")
    c = np.sqrt((mu0 - eps) / (params.gamma * phi4))
    return Field(grid, c * phi.values), eps


OVERLAP_MIN = 0.8


def _overlap(grid, u, v):
    num = abs(kernels.wdot(grid.w2, u, v))
    den = np.sqrt(kernels.wdot(grid.w2, u, u).real
                  * kernels.wdot(grid.w2, v, v).real)
    return num / den


def continue_branch(mode, params, mu_end, dmu=DEFAULT_DMU, grid=None,
                    tol=DEFAULT_TOL, label=""):
    """March the branch from its bifurcation point to mu_end.

    Each accepted point must stay aligned with the previous one (weighted
    overlap >= 0.8; node counting is too brittle once the nodal lines
    curve). Natural continuation can slide onto a neighbouring branch when
    the step is too coarse near avoided crossings; on a mismatch the step
    is retried at half size a few times before the branch is truncated.
    """
    s, k, l = mode
    if params.s != s:
        raise UsageError(f"params.s={params.s} but mode s={s}")
    if dmu <= 0:
        raise ConfigurationError("dmu must be positive")
    if grid is None:
        raise UsageError("continue_branch needs a grid")
    eps = linear_energy_skl(s, k, l, params)
    if mu_end <= eps:
        raise ConfigurationError(
            f"mu_end={mu_end:g} is below the bifurcation point {eps:g}")
    stencil = build_stencil(grid, params)
    a_matrix = h0_matrix(grid, params, stencil)
    mu = min(eps + dmu, mu_end)
    guess, _ = seed_state(mode, params, grid, mu)
    points = []
    prev = None
    n_prev = -np.inf
    folds = 0
    while True:
        step = mu - (prev.mu if prev else eps)
        state = None
        attempt_mu = mu
        for _ in range(4):
            try:
                cand = newton_solve(guess if prev is None else prev.psi,
                                    attempt_mu, params, tol=tol,
                                    stencil=stencil, a_matrix=a_matrix,
                                    branch=label, mode=mode)
            except SolverError:
                cand = None
            ref = (guess if prev is None else prev.psi).values
            if cand is not None and _overlap(grid, ref,
                                             cand.psi.values) >= OVERLAP_MIN:
                state = cand
                break
            step *= 0.5
            attempt_mu = (prev.mu if prev else eps) + step
            if prev is None:
                guess, _ = seed_state(mode, params, grid, attempt_mu)
        if state is None:
            warnings.warn(f"branch {label or mode}: continuation truncated at "
                          f"mu={mu:g} (Newton failure or mode mixing)")
            break
        if state.n_particles < n_prev:
            folds += 1
            if folds >= 2:
                warnings.warn(f"branch {label or mode}: fold detected near "
                              f"mu={state.mu:g}, halting")
                break
        n_prev = state.n_particles
        points.append(state)
        prev = state
        if state.mu >= mu_end - 1e-12:
            break
        mu = min(state.mu + dmu, mu_end)
    if not points:
        raise SolverError(f"branch {label or mode}: no point converged")
    return Branch(label=label or "".join(map(str, mode)), mode=tuple(mode),
                  points=points)


def energy(psi, params, stencil=None):
    """E[psi] = <psi, H0 psi> + (gamma/2) sum W |psi|^4.

    Discrete operator form: its directional derivative is exactly
    2 <H0 psi + gamma psi^3, delta>, matching gp_residual.
    """
    if stencil is None:
        stencil = build_stencil(psi.grid, params)
    h0v = np.empty_like(psi.values)
    kernels.apply_h0(psi.values, h0v, stencil.lo, stencil.hi, stencil.diag,
                     stencil.inv_hz2, stencil.i0)
    if np.iscomplexobj(psi.values):
        e_lin = kernels.wdot(psi.grid.w2, psi.values, h0v).real
    else:
        e_lin = float(kernels.wdot(psi.grid.w2, psi.values, h0v).real)
    e_int = 0.5 * params.gamma * kernels.wsum_abs4(psi.grid.w2, psi.values)
    return float(e_lin + e_int)


def branch_mode(label):
    try:
        return BRANCHES[label]
    except KeyError:
        raise ConfigurationError(f"unknown branch label {label!r}; "
                                 f"expected one of {sorted(BRANCHES)}")
