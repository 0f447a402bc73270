"""Real-time propagation of i dPsi/dt = H0 Psi + gamma |Psi|^2 Psi with the
fully implicit midpoint (Crank-Nicolson) rule, plus the run observers
kappa(t), vis(t), N, E and the virial triple (T, V, W).

The nonlinear midpoint system per step is solved by Newton. The Jacobian is
only real-linear (it couples delta and conj(delta) through the |psi|^2 psi
term), so the update is computed matrix-free by GMRES on the equivalent real
system of twice the size, preconditioned with a complex splu factorization of
the complex-linear part. That factorization is frozen across steps and only
rebuilt when GMRES iteration counts degrade, which keeps the per-step cost at
a handful of triangular solves. A converged step conserves the discrete
W-norm exactly, so the norm drift of a run measures accumulated Newton
residuals, not the scheme.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import (ConfigurationError, ConservationError, StepError,
                     UsageError)
from .grid import (Field, apply_boundary, build_stencil, check_boundary,
                   h0_matrix, pack_active, unpack_active)
from .stationary import energy

CSV_HEADER = "t,kappa,vis,N,E,T,V,W,vir"

DEFAULT_DT = 1e-3
NEWTON_CAP = 10


def _wnorm(w2, v):
    return float(np.sqrt(max(kernels.wsum_abs2(w2, v), 0.0)))


# ---------------------------------------------------------------- observers

def _check_same_grid(psi_t, state):
    if psi_t.grid != state.psi.grid:
        raise UsageError("propagated field and stationary state live on "
                         "different grids")


def kappa(psi_t, state, t):
    """kappa = || Psi(t) - psi_L e^{-i mu t} ||^2 (weighted L2, squared)."""
    _check_same_grid(psi_t, state)
    d = psi_t.values - state.psi.values * np.exp(-1j * state.mu * t)
    return float(kernels.wsum_abs2(psi_t.grid.w2, d))


def visibility(psi_t, state):
    """vis = |<Psi, psi_L>| / ||psi_L||^2, insensitive to any global phase."""
    _check_same_grid(psi_t, state)
    w2 = psi_t.grid.w2
    ov = kernels.wdot(w2, psi_t.values, state.psi.values.astype(np.complex128))
    n_ref = kernels.wsum_abs2(w2, state.psi.values)
    return float(abs(ov) / n_ref)


def _virial_potential(grid, params):
    # radial part nu^2 rho^2 - s^2/rho^2 and half the gravity term; the
    # centrifugal entry at rho=0 is stored 0 (the field vanishes there for
    # s >= 1, and the term is absent for s = 0)
    pr = params.nu ** 2 * grid.rho_nodes ** 2
    if params.s >= 1:
        pr[1:] -= params.s ** 2 / grid.rho_nodes[1:] ** 2
    pz = 0.5 * params.beta * grid.z_nodes
    return pr[:, None] + pz[None, :]


def virial_observables(psi_t, params, pot=None):
    """Return (T, V, W, vir) with vir = 2(T - V) + 3W.

    T = 2pi int |grad psi|^2 rho, V = 2pi int (nu^2 rho^2 - s^2/rho^2
    + beta z/2) |psi|^2 rho, W = pi gamma int |psi|^4 rho.
    """
    g = psi_t.grid
    v = psi_t.values
    if pot is None:
        pot = _virial_potential(g, params)
    t_kin = float(kernels.grad_quad(g.w2, v, 1.0 / g.drho, 1.0 / g.dz))
    abs2 = v.real ** 2 + v.imag ** 2
    v_pot = float(np.sum(g.w2 * pot * abs2))
    w_int = 0.5 * params.gamma * float(kernels.wsum_abs4(g.w2, v))
    return t_kin, v_pot, w_int, 2.0 * (t_kin - v_pot) + 3.0 * w_int


# ------------------------------------------------------------- CN workspace

class CnWorkspace:
    """Scratch state for repeated cn_step calls at one (grid, params, dt).

    Holds the stencil, the sparse H0 on the active nodes, and the frozen
    preconditioner. newton_tol is relative to ||psi^n||_W.
    """

    def __init__(self, grid, params, dt, newton_tol=1e-13,
                 max_newton=NEWTON_CAP, gmres_restart=40,
                 refresh_iters=25):
        if dt == 0.0:
            raise ConfigurationError("dt must be nonzero")
        self.grid = grid
        self.params = params
        self.dt = float(dt)
        self.newton_tol = float(newton_tol)
        self.max_newton = int(max_newton)
        self.gmres_restart = int(gmres_restart)
        self.refresh_iters = int(refresh_iters)
        self.stencil = build_stencil(grid, params)
        self.i0 = self.stencil.i0
        self.h0 = h0_matrix(grid, params, self.stencil)
        self.n_active = self.h0.shape[0]
        self._lu = None
        self._last_iters = np.inf
        shape = (grid.n_rho, grid.n_z)
        self._f = np.zeros(shape, dtype=np.complex128)
        self._jv = np.zeros(shape, dtype=np.complex128)

    # preconditioner: i I - (dt/2)(H0 + diag(2 gamma |psi|^2)), complex splu
    def _build_precond(self, a2_full):
        a2 = pack_active(np.ascontiguousarray(a2_full, dtype=np.float64),
                         self.grid, self.i0)
        p = 1j * sp.identity(self.n_active, format="csc") \
            - 0.5 * self.dt * (self.h0 + sp.diags(a2))
        self._lu = spla.splu(p.tocsc())
        self._last_iters = 0

    def _solve_jacobian(self, f, a2, b2, eta):
        """GMRES for J delta = -f over the real form of the active nodes."""
        n = self.n_active
        g, i0, st = self.grid, self.i0, self.stencil
        dt, jv = self.dt, self._jv

        def matvec(r):
            d = unpack_active(r[:n] + 1j * r[n:], g, i0, dtype=np.complex128)
            kernels.cn_jac_matvec(d, jv, st.lo, st.hi, st.diag, st.inv_hz2,
                                  i0, a2, b2, dt)
            out = pack_active(jv, g, i0)
            return np.concatenate((out.real, out.imag))

        def psolve(r):
            c = self._lu.solve(r[:n] + 1j * r[n:])
            return np.concatenate((c.real, c.imag))

        a_op = spla.LinearOperator((2 * n, 2 * n), matvec=matvec,
                                   dtype=np.float64)
        m_op = spla.LinearOperator((2 * n, 2 * n), matvec=psolve,
                                   dtype=np.float64)
        rhs = pack_active(f, g, i0)
        b = np.concatenate((-rhs.real, -rhs.imag))
        iters = [0]

        def count(_):
            iters[0] += 1

        x, info = spla.gmres(a_op, b, rtol=eta, atol=0.0,
                             restart=self.gmres_restart, maxiter=2,
                             M=m_op, callback=count,
                             callback_type="pr_norm")
        delta = unpack_active(x[:n] + 1j * x[n:], g, i0,
                              dtype=np.complex128)
        return delta, iters[0], info == 0

    def step(self, v):
        """Advance one step; v is the full-grid complex array psi^n."""
        st = self.stencil
        gamma = self.params.gamma
        w2 = self.grid.w2
        tol = self.newton_tol * _wnorm(w2, v)
        f = self._f
        kernels.cn_residual(v, v, f, st.lo, st.hi, st.diag, st.inv_hz2,
                            st.i0, gamma, self.dt)
        u = v + 1j * f  # forward Euler predictor
        fn = np.inf
        for _ in range(self.max_newton):
            kernels.cn_residual(u, v, f, st.lo, st.hi, st.diag, st.inv_hz2,
                                st.i0, gamma, self.dt)
            fn = _wnorm(w2, f)
            if fn <= tol:
                return u
            ub = 0.5 * (u + v)
            a2 = 2.0 * gamma * (ub.real ** 2 + ub.imag ** 2)
            b2 = gamma * ub * ub
            if self._lu is None or self._last_iters > self.refresh_iters:
                self._build_precond(a2)
            eta = float(np.clip(0.1 * tol / fn, 1e-6, 1e-3))
            delta, iters, ok = self._solve_jacobian(f, a2, b2, eta)
            if not ok:
                self._build_precond(a2)
                delta, iters, ok = self._solve_jacobian(f, a2, b2, eta)
                if not ok:
                    raise StepError("CN inner GMRES stalled; try a smaller "
                                    f"dt (residual {fn:.2e})")
            self._last_iters = iters
            u = u + delta
        raise StepError(f"CN Newton residual {fn:.2e} above target {tol:.2e} "
                        f"after {self.max_newton} iterations; try a smaller dt")


def cn_step(psi, dt, params, workspace=None, check=True):
    """Single Crank-Nicolson step psi^n -> psi^(n+1) as a new Field.

    Builds a throwaway workspace when none is given; propagate() keeps one
    across steps, which is what makes the frozen preconditioner pay off.
    """
    if check:
        check_boundary(psi, params.s)
    if (workspace is None or workspace.dt != dt
            or workspace.grid != psi.grid):
        workspace = CnWorkspace(psi.grid, params, dt)
    v = np.ascontiguousarray(psi.values, dtype=np.complex128)
    return Field(psi.grid, workspace.step(v))


# ------------------------------------------------------------------- series

@dataclass
class TimeSeries:
    """Observer record of one run; column order matches the CSV header."""

    t: np.ndarray
    kappa: np.ndarray
    vis: np.ndarray
    n: np.ndarray
    e: np.ndarray
    t_kin: np.ndarray
    v_pot: np.ndarray
    w_int: np.ndarray
    vir: np.ndarray

    def __post_init__(self):
        cols = self.columns()
        for i, c in enumerate(cols):
            cols[i] = np.asarray(c, dtype=np.float64)
        (self.t, self.kappa, self.vis, self.n, self.e,
         self.t_kin, self.v_pot, self.w_int, self.vir) = cols
        if any(c.shape != self.t.shape for c in cols):
            raise UsageError("time series columns must share one length")

    def columns(self):
        return [self.t, self.kappa, self.vis, self.n, self.e,
                self.t_kin, self.v_pot, self.w_int, self.vir]

    def __len__(self):
        return self.t.size

    def to_csv(self, path, comments=()):
        with open(path, "w") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            fh.write(CSV_HEADER + "\n")
            for row in zip(*self.columns()):
                fh.write(",".join("%.17g" % x for x in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            lines = [ln.strip() for ln in fh]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines or lines[0] != CSV_HEADER:
            raise ConfigurationError(f"{path}: expected header {CSV_HEADER}")
        data = np.array([[float(x) for x in ln.split(",")]
                         for ln in lines[1:]], dtype=np.float64)
        if data.size == 0:
            data = data.reshape(0, 9)
        if data.shape[1] != 9:
            raise ConfigurationError(f"{path}: expected 9 columns")
        return cls(*data.T)


@dataclass
class PropagationRun:
    """One propagation job: initial state, horizon, and bookkeeping knobs.

    noise_amplitude adds seeded complex noise of that W-norm on top of the
    initial state (sensitivity studies); the default run perturbs the state
    by nothing beyond its own solver residual.
    """

    state: object
    t_end: float
    dt: float = DEFAULT_DT
    observers_every: int = 10
    noise_amplitude: float = 0.0
    noise_seed: int = 0
    snapshot_times: tuple = ()
    conservation_limit: float = 1e-6

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.t_end < self.dt:
            raise ConfigurationError("t_end must be at least one step")
        if int(self.observers_every) < 1:
            raise ConfigurationError("observers_every must be >= 1")
        self.observers_every = int(self.observers_every)
        if self.noise_amplitude < 0:
            raise ConfigurationError("noise amplitude must be nonnegative")

    @property
    def n_steps(self):
        return max(1, int(round(self.t_end / self.dt)))


def _seeded_noise(grid, s, amplitude, seed):
    rng = np.random.default_rng(seed)
    eta = rng.standard_normal((grid.n_rho, grid.n_z)) \
        + 1j * rng.standard_normal((grid.n_rho, grid.n_z))
    apply_boundary(eta, s)
    nrm = _wnorm(grid.w2, eta)
    if nrm == 0.0:
        raise ConfigurationError("noise field degenerated to zero")
    return eta * (amplitude / nrm)


def propagate(run, on_sample=None, on_snapshot=None, stop_when=None,
              workspace=None):
    """March cn_step to t_end, recording observables every observers_every
    steps (plus t=0 and the final step).

    Aborts with ConservationError once N or E drift beyond
    run.conservation_limit relative (signals too coarse a dt or grid).
    on_sample sees each recorded row as a dict; stop_when is evaluated on
    the same dict and ends the run early when it returns True, which is how
    lifetime runs stop once their post-onset fit window is full.
    """
    state = run.state
    g = state.psi.grid
    params = state.params
    if workspace is None:
        workspace = CnWorkspace(g, params, run.dt)
    psi = state.psi.values.astype(np.complex128)
    if run.noise_amplitude > 0.0:
        psi = psi + _seeded_noise(g, params.s, run.noise_amplitude,
                                  run.noise_seed)
    apply_boundary(psi, params.s)

    pot = _virial_potential(g, params)
    ref = state.psi.values
    n_ref = kernels.wsum_abs2(g.w2, ref)
    rows = []

    def observe(t_now, v):
        fld = Field(g, v)
        d = v - ref * np.exp(-1j * state.mu * t_now)
        kap = float(kernels.wsum_abs2(g.w2, d))
        ov = kernels.wdot(g.w2, v, ref.astype(np.complex128))
        vis = float(abs(ov) / n_ref)
        n_now = float(kernels.wsum_abs2(g.w2, v))
        e_now = energy(fld, params, workspace.stencil)
        t_k, v_p, w_i, vir = virial_observables(fld, params, pot)
        return {"t": t_now, "kappa": kap, "vis": vis, "N": n_now,
                "E": e_now, "T": t_k, "V": v_p, "W": w_i, "vir": vir}

    row0 = observe(0.0, psi)
    n0, e0 = row0["N"], row0["E"]
    rows.append(row0)
    if on_sample is not None:
        on_sample(row0)

    snap_steps = {}
    for ts in run.snapshot_times:
        snap_steps[int(round(ts / run.dt))] = float(ts)
    if on_snapshot is not None and 0 in snap_steps:
        on_snapshot(Field(g, psi.copy()), 0.0)

    n_steps = run.n_steps
    for k in range(1, n_steps + 1):
        psi = workspace.step(psi)
        t_now = k * run.dt
        if on_snapshot is not None and k in snap_steps:
            on_snapshot(Field(g, psi.copy()), t_now)
        if k % run.observers_every and k != n_steps:
            continue
        row = observe(t_now, psi)
        dn = abs(row["N"] - n0) / n0 if n0 else 0.0
        de = abs(row["E"] - e0) / abs(e0) if e0 else 0.0
        if max(dn, de) > run.conservation_limit:
            raise ConservationError(
                f"conservation violated at t={t_now:g}: |dN|/N={dn:.3e}, "
                f"|dE|/E={de:.3e} (limit {run.conservation_limit:g}); "
                "grid or dt too coarse for this run")
        rows.append(row)
        if on_sample is not None:
            on_sample(row)
        if stop_when is not None and stop_when(row):
            break

    keys = ("t", "kappa", "vis", "N", "E", "T", "V", "W", "vir")
    arrays = [np.array([r[k] for r in rows]) for k in keys]
    return TimeSeries(*arrays)
