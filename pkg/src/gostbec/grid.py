"""Cylindrical (rho, z) tensor grid, discrete fields, quadrature and the
finite-difference H0 = -d_rr - (1/r) d_r - d_zz + V_eff.

Conventions used throughout the package:

* boundary conditions: psi = 0 at z = 0, z = z_max, rho = rho_max; at the
  axis rho = 0 a regularized Neumann stencil for s = 0 (ghost symmetry
  psi(-rho) = psi(rho), Laplacian limit 2 d_rr) and Dirichlet for s >= 1.
* quadrature: trapezoid with rho weight on the grid nodes. The axis node
  carries the finite-volume weight h^2/8 (the integral of rho over the
  half cell [0, h/2]); this is the unique axis weight under which the
  discrete H0 is exactly self-adjoint in the weighted inner product,
  which in turn is what makes Crank-Nicolson conserve the norm.
* inner product: <a,b> = 2 pi sum_ij W_ij conj(a_ij) b_ij, the 2 pi from
  the azimuthal integral of |e^{i s phi}|^2.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

from . import kernels
from .constants import HBAR, DEFAULT_GRAVITY, DEFAULT_LENGTH_SCALE
from .errors import ConfigurationError, UsageError

_BOUNDARY_RTOL = 1e-10


@dataclass(frozen=True)
class Params:
    """Dimensionless trap parameters plus the physical numbers they came from.

    nu, beta, gamma are the dimensionless trap frequency, gravity and
    interaction strength; s is the azimuthal quantum number carried
    symbolically (the fields store only the (rho, z) profile).
    """

    nu: float
    beta: float
    gamma: float
    s: int
    length_scale_L: float
    scattering_length_aS: float
    mass_m: float
    omega_phys: float
    g_phys: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigurationError("gamma must be >= 0 (repulsive regime)")
        if self.nu <= 0 or self.beta <= 0:
            raise ConfigurationError("nu and beta must be positive")
        if self.s < 0 or int(self.s) != self.s:
            raise ConfigurationError("s must be a non-negative integer")
        nu, beta, gamma = _dimensionless_from_physical(
            self.length_scale_L, self.scattering_length_aS, self.mass_m,
            self.omega_phys, self.g_phys)
        for name, stored, recomputed in (("nu", self.nu, nu),
                                         ("beta", self.beta, beta),
                                         ("gamma", self.gamma, gamma)):
            if abs(stored - recomputed) > 1e-12 * max(abs(stored), 1e-300):
                raise ConfigurationError(
                    f"inconsistent Params: {name} stored {stored!r} but "
                    f"physical fields give {recomputed!r}")

    @classmethod
    def from_dimensionless(cls, nu, beta, gamma, s,
                           length_scale_L=DEFAULT_LENGTH_SCALE,
                           g_phys=DEFAULT_GRAVITY):
        """Construct from (nu, beta, gamma, s), deriving the physical numbers.

        The length scale L and gravity g are taken as given; a_S, m and
        omega follow uniquely from inverting the nondimensionalization.
        """
        a_s = gamma * length_scale_L / (8.0 * np.pi)
        m = HBAR * np.sqrt(beta / (2.0 * g_phys * length_scale_L ** 3))
        omega = nu * HBAR / (m * length_scale_L ** 2)
        return cls(nu=float(nu), beta=float(beta), gamma=float(gamma),
                   s=int(s), length_scale_L=float(length_scale_L),
                   scattering_length_aS=float(a_s), mass_m=float(m),
                   omega_phys=float(omega), g_phys=float(g_phys))

    @classmethod
    def from_physical(cls, s, length_scale_L, scattering_length_aS, mass_m,
                      omega_phys, g_phys=DEFAULT_GRAVITY):
        nu, beta, gamma = _dimensionless_from_physical(
            length_scale_L, scattering_length_aS, mass_m, omega_phys, g_phys)
        return cls(nu=nu, beta=beta, gamma=gamma, s=int(s),
                   length_scale_L=float(length_scale_L),
                   scattering_length_aS=float(scattering_length_aS),
                   mass_m=float(mass_m), omega_phys=float(omega_phys),
                   g_phys=float(g_phys))

    @property
    def time_unit(self):
        """Seconds per dimensionless time unit, T = 2 m L^2 / hbar."""
        return 2.0 * self.mass_m * self.length_scale_L ** 2 / HBAR

    @property
    def i0(self):
        """First active radial row: the axis participates only for s = 0."""
        return 0 if self.s == 0 else 1

    def with_s(self, s):
        return Params(nu=self.nu, beta=self.beta, gamma=self.gamma, s=int(s),
                      length_scale_L=self.length_scale_L,
                      scattering_length_aS=self.scattering_length_aS,
                      mass_m=self.mass_m, omega_phys=self.omega_phys,
                      g_phys=self.g_phys)


def _dimensionless_from_physical(L, a_s, m, omega, g):
    nu = m * omega * L ** 2 / HBAR
    beta = 2.0 * g * m ** 2 * L ** 3 / HBAR ** 2
    gamma = 8.0 * np.pi * a_s / L
    return float(nu), float(beta), float(gamma)


class Grid:
    """Uniform tensor grid on [0, rho_max] x [0, z_max].

    rho_nodes[0] = 0 and z_nodes[0] = 0 are grid lines; weights w2 hold
    the full 2D quadrature table including the 2 pi azimuthal factor.
    """

    def __init__(self, rho_max, z_max, n_rho, n_z):
        if rho_max <= 0 or z_max <= 0:
            raise ConfigurationError("grid extents must be positive")
        if n_rho < 8 or n_z < 8:
            raise ConfigurationError("need at least 8 points per direction")
        self.rho_max = float(rho_max)
        self.z_max = float(z_max)
        self.n_rho = int(n_rho)
        self.n_z = int(n_z)
        self.rho_nodes = np.linspace(0.0, self.rho_max, self.n_rho)
        self.z_nodes = np.linspace(0.0, self.z_max, self.n_z)
        self.drho = self.rho_nodes[1] - self.rho_nodes[0]
        self.dz = self.z_nodes[1] - self.z_nodes[0]
        h, hz = self.drho, self.dz
        wr = h * self.rho_nodes.copy()
        wr[0] = h * h / 8.0
        wr[-1] = 0.5 * h * self.rho_max
        wz = np.full(self.n_z, hz)
        wz[0] = wz[-1] = 0.5 * hz
        self.wrho = wr
        self.wz = wz
        self.w2 = 2.0 * np.pi * wr[:, None] * wz[None, :]

    def __eq__(self, other):
        return (isinstance(other, Grid)
                and self.rho_max == other.rho_max
                and self.z_max == other.z_max
                and self.n_rho == other.n_rho
                and self.n_z == other.n_z)

    def __hash__(self):
        return hash((self.rho_max, self.z_max, self.n_rho, self.n_z))

    def __repr__(self):
        return (f"Grid([0,{self.rho_max}]x[0,{self.z_max}], "
                f"{self.n_rho}x{self.n_z})")


def make_grid(rho_max, z_max, n_rho, n_z):
    return Grid(rho_max, z_max, n_rho, n_z)


@dataclass
class Field:
    """Scalar function sampled on a Grid; values shape (n_rho, n_z)."""

    grid: Grid
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.n_rho, self.grid.n_z):
            raise UsageError("field shape does not match grid")

    def copy(self):
        return Field(self.grid, self.values.copy())


def zero_field(grid, dtype=np.complex128):
    return Field(grid, np.zeros((grid.n_rho, grid.n_z), dtype=dtype))


def check_boundary(field, s):
    """Raise UsageError unless the field satisfies the Dirichlet rows.

    z = 0, z = z_max, rho = rho_max always; rho = 0 additionally for s >= 1.
    """
    v = field.values
    scale = 1.0 + float(np.max(np.abs(v))) if v.size else 1.0
    worst = max(float(np.max(np.abs(v[:, 0]))),
                float(np.max(np.abs(v[:, -1]))),
                float(np.max(np.abs(v[-1, :]))))
    if s >= 1:
        worst = max(worst, float(np.max(np.abs(v[0, :]))))
    if worst > _BOUNDARY_RTOL * scale:
        raise UsageError(f"field violates Dirichlet boundary rows "
                         f"(max boundary value {worst:.3e})")


def apply_boundary(values, s):
    """Zero the Dirichlet rows in place and return the array."""
    values[:, 0] = 0.0
    values[:, -1] = 0.0
    values[-1, :] = 0.0
    if s >= 1:
        values[0, :] = 0.0
    return values


def effective_potential(grid, params):
    """V_eff = nu^2 rho^2 + s^2/rho^2 + beta z as a real Field.

    The axis value for s >= 1 belongs to a Dirichlet row and is stored
    as 0 rather than inf.
    """
    rho = grid.rho_nodes[:, None]
    z = grid.z_nodes[None, :]
    v = params.nu ** 2 * rho ** 2 + params.beta * z
    if params.s >= 1:
        cent = np.zeros_like(grid.rho_nodes)
        cent[1:] = params.s ** 2 / grid.rho_nodes[1:] ** 2
        v = v + cent[:, None]
    return Field(grid, v)


@dataclass(frozen=True)
class StencilCoeffs:
    """Precomputed five-point stencil of H0 for one (grid, params) pair."""

    lo: np.ndarray
    hi: np.ndarray
    diag: np.ndarray
    inv_hz2: float
    i0: int


def build_stencil(grid, params):
    h, hz = grid.drho, grid.dz
    nr, nz = grid.n_rho, grid.n_z
    rho = grid.rho_nodes
    i0 = params.i0
    lo = np.zeros(nr)
    hi = np.zeros(nr)
    lo[1:] = -1.0 / h ** 2 + 1.0 / (2.0 * h * rho[1:])
    hi[1:] = -1.0 / h ** 2 - 1.0 / (2.0 * h * rho[1:])
    veff = effective_potential(grid, params).values
    diag = veff + 2.0 / hz ** 2 + 2.0 / h ** 2
    if params.s == 0:
        hi[0] = -4.0 / h ** 2
        diag[0, :] = veff[0, :] + 2.0 / hz ** 2 + 4.0 / h ** 2
    return StencilCoeffs(lo=lo, hi=hi, diag=diag, inv_hz2=1.0 / hz ** 2, i0=i0)


def apply_h0(psi, params, stencil=None, check=True):
    """H0 psi with the s-dependent axis handling; returns a new Field."""
    if check:
        check_boundary(psi, params.s)
    if stencil is None:
        stencil = build_stencil(psi.grid, params)
    out = np.empty_like(psi.values)
    kernels.apply_h0(psi.values, out, stencil.lo, stencil.hi, stencil.diag,
                     stencil.inv_hz2, stencil.i0)
    return Field(psi.grid, out)


def inner_product(a, b):
    """2 pi integral of conj(a) b rho drho dz by the grid quadrature."""
    if a.grid != b.grid:
        raise UsageError("inner_product requires fields on the same grid")
    if np.iscomplexobj(a.values) or np.iscomplexobj(b.values):
        av = np.ascontiguousarray(a.values, dtype=np.complex128)
        bv = np.ascontiguousarray(b.values, dtype=np.complex128)
        return kernels.wdot(a.grid.w2, av, bv)
    return complex(kernels.wdot(a.grid.w2, a.values, b.values))


def particle_number(psi):
    return kernels.wsum_abs2(psi.grid.w2, psi.values)


def norm_w(psi):
    return np.sqrt(max(particle_number(psi), 0.0))


# ------------------------------------------------------------------ sparse H0

def active_slices(grid, i0):
    return slice(i0, grid.n_rho - 1), slice(1, grid.n_z - 1)


def pack_active(values, grid, i0):
    sr, sz = active_slices(grid, i0)
    return values[sr, sz].ravel()


def unpack_active(vec, grid, i0, dtype=None):
    sr, sz = active_slices(grid, i0)
    nr = sr.stop - sr.start
    nz = sz.stop - sz.start
    out = np.zeros((grid.n_rho, grid.n_z), dtype=dtype or vec.dtype)
    out[sr, sz] = vec.reshape(nr, nz)
    return out


def h0_matrix(grid, params, stencil=None):
    """Sparse CSC matrix of H0 restricted to the active nodes.

    Row/column ordering matches pack_active (rho-major). The matrix is
    not symmetric as stored; it is self-adjoint under the quadrature
    weights (w2-weighted inner product).
    """
    if stencil is None:
        stencil = build_stencil(grid, params)
    i0 = stencil.i0
    nr = grid.n_rho - 1 - i0
    nz = grid.n_z - 2
    n = nr * nz
    lin = np.arange(n).reshape(nr, nz)
    rows = [lin.ravel()]
    cols = [lin.ravel()]
    vals = [stencil.diag[i0:grid.n_rho - 1, 1:grid.n_z - 1].ravel()]
    # z neighbours
    rows.append(lin[:, 1:].ravel())
    cols.append(lin[:, :-1].ravel())
    vals.append(np.full(nr * (nz - 1), -stencil.inv_hz2))
    rows.append(lin[:, :-1].ravel())
    cols.append(lin[:, 1:].ravel())
    vals.append(np.full(nr * (nz - 1), -stencil.inv_hz2))
    # rho neighbours
    hi = stencil.hi[i0:i0 + nr]
    lo = stencil.lo[i0:i0 + nr]
    rows.append(lin[:-1, :].ravel())
    cols.append(lin[1:, :].ravel())
    vals.append(np.repeat(hi[:-1], nz))
    rows.append(lin[1:, :].ravel())
    cols.append(lin[:-1, :].ravel())
    vals.append(np.repeat(lo[1:], nz))
    a = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    return a.tocsc()


def active_weights(grid, i0):
    sr, sz = active_slices(grid, i0)
    return grid.w2[sr, sz].ravel()


# ------------------------------------------------------------------ snapshots

def write_snapshot(path, field, meta=None):
    """Text snapshot: `# n_rho n_z rho_max z_max` then n_z rows of re/im pairs.

    Optional meta lines (`# key=value`) go after the header; readers skip
    them. 17 significant digits, so the round-trip is bit exact.
    """
    g = field.grid
    v = np.asarray(field.values, dtype=np.complex128)
    with open(path, "w") as fh:
        fh.write(f"# {g.n_rho} {g.n_z} {g.rho_max:.17g} {g.z_max:.17g}\n")
        for key, val in (meta or {}).items():
            fh.write(f"# {key}={val}\n")
        for j in range(g.n_z):
            row = v[:, j]
            fh.write(" ".join(f"{c.real:.17g} {c.imag:.17g}" for c in row))
            fh.write("\n")


def read_snapshot(path, grid=None):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "#":
            raise UsageError(f"{path}: malformed snapshot header")
        n_rho, n_z = int(header[1]), int(header[2])
        rho_max, z_max = float(header[3]), float(header[4])
        if grid is None:
            grid = make_grid(rho_max, z_max, n_rho, n_z)
        elif (grid.n_rho, grid.n_z) != (n_rho, n_z) or \
                (grid.rho_max, grid.z_max) != (rho_max, z_max):
            raise UsageError(f"{path}: snapshot grid does not match")
        values = np.empty((n_rho, n_z), dtype=np.complex128)
        j = 0
        for line in fh:
            if line.startswith("#"):
                continue
            nums = np.array(line.split(), dtype=np.float64)
            if nums.size != 2 * n_rho:
                raise UsageError(f"{path}: row {j} has {nums.size} numbers, "
                                 f"expected {2 * n_rho}")
            values[:, j] = nums[0::2] + 1j * nums[1::2]
            j += 1
        if j != n_z:
            raise UsageError(f"{path}: expected {n_z} rows, found {j}")
    return Field(grid, values)
