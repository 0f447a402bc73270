"""Quadrature, operator symmetry, snapshots, parameter round-trips."""

import numpy as np
import pytest

from gostbec import (ConfigurationError, Field, Params, UsageError,
                     inner_product, make_grid, particle_number,
                     read_snapshot, write_snapshot, zero_field)
from gostbec.grid import (active_weights, apply_boundary, apply_h0,
                          build_stencil, check_boundary, effective_potential,
                          h0_matrix, pack_active, unpack_active)
from tests.conftest import rng


def test_radial_weights_close_the_trapezoid(small_grid):
    # sum w_rho = rho_max^2/2 + h^2/8: trapezoid of the linear integrand is
    # exact, plus the finite-volume axis cell
    g = small_grid
    ref = 0.5 * g.rho_max ** 2 + g.drho ** 2 / 8.0
    assert abs(g.wrho.sum() - ref) < 1e-12 * ref
    assert abs(g.wz.sum() - g.z_max) < 1e-12 * g.z_max
    assert g.w2.shape == (g.n_rho, g.n_z)


def test_particle_number_gaussian(small_grid):
    # |psi|^2 = e^{-rho^2} z^2 e^{-2z} integrates to 2 pi * 1/2 * 1/4; the
    # profile respects the Dirichlet rows up to box tails < 1e-12
    g = small_grid
    v = np.exp(-0.5 * g.rho_nodes[:, None] ** 2) \
        * (g.z_nodes * np.exp(-g.z_nodes))[None, :]
    v = v.astype(np.complex128)
    apply_boundary(v, 0)
    n = particle_number(Field(g, v))
    exact = np.pi / 4.0
    assert abs(n - exact) / exact < 5e-3


@pytest.mark.parametrize("s", [0, 1])
def test_h0_hermitian_and_positive(small_grid, params_s0, params_s1, s):
    params = params_s0 if s == 0 else params_s1
    r = rng(11 + s)
    shape = (small_grid.n_rho, small_grid.n_z)
    a = (r.standard_normal(shape) + 1j * r.standard_normal(shape))
    b = (r.standard_normal(shape) + 1j * r.standard_normal(shape))
    apply_boundary(a, s)
    apply_boundary(b, s)
    fa, fb = Field(small_grid, a), Field(small_grid, b)
    lhs = inner_product(fa, apply_h0(fb, params))
    rhs = inner_product(apply_h0(fa, params), fb)
    assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)
    q = inner_product(fa, apply_h0(fa, params))
    assert abs(q.imag) < 1e-10 * abs(q)
    assert q.real > 0


@pytest.mark.parametrize("s", [0, 1])
def test_h0_matrix_matches_operator(small_grid, params_s0, params_s1, s):
    params = params_s0 if s == 0 else params_s1
    st = build_stencil(small_grid, params)
    a = h0_matrix(small_grid, params, st)
    r = rng(20 + s)
    v = (r.standard_normal((small_grid.n_rho, small_grid.n_z))
         + 1j * r.standard_normal((small_grid.n_rho, small_grid.n_z)))
    apply_boundary(v, s)
    ref = apply_h0(Field(small_grid, v), params).values
    got = unpack_active(a @ pack_active(v, small_grid, st.i0),
                        small_grid, st.i0, dtype=np.complex128)
    assert np.max(np.abs(got - ref)) < 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_active_weights_match_w2(small_grid):
    w = active_weights(small_grid, 0)
    ref = pack_active(small_grid.w2, small_grid, 0)
    assert np.array_equal(w, ref)


def test_effective_potential_values(small_grid, params_s1):
    v = effective_potential(small_grid, params_s1).values
    i, j = 7, 9
    rho = small_grid.rho_nodes[i]
    z = small_grid.z_nodes[j]
    assert abs(v[i, j] - (0.25 * rho ** 2 + 1.0 / rho ** 2 + 0.5 * z)) < 1e-13


def test_check_boundary_raises(small_grid):
    v = np.ones((small_grid.n_rho, small_grid.n_z), dtype=np.complex128)
    with pytest.raises(UsageError):
        check_boundary(Field(small_grid, v), 0)
    apply_boundary(v, 0)
    check_boundary(Field(small_grid, v), 0)
    with pytest.raises(UsageError):
        # the axis row is still populated; it is a boundary only for s >= 1
        check_boundary(Field(small_grid, v), 1)
    apply_boundary(v, 1)
    check_boundary(Field(small_grid, v), 1)
    assert v[0, 5] == 0


def test_snapshot_roundtrip(tmp_path, small_grid):
    r = rng(31)
    v = (r.standard_normal((small_grid.n_rho, small_grid.n_z))
         + 1j * r.standard_normal((small_grid.n_rho, small_grid.n_z)))
    f = Field(small_grid, v)
    p = tmp_path / "f.snap"
    write_snapshot(p, f, meta={"branch": "A0", "mu": "6"})
    back = read_snapshot(p)
    assert back.grid == small_grid
    assert np.array_equal(back.values, v)
    wrong = make_grid(10.0, 14.0, 41, 71)
    with pytest.raises(UsageError):
        read_snapshot(p, grid=wrong)


def test_params_roundtrip_and_validation():
    p = Params.from_dimensionless(0.5, 0.5, 0.5, 0)
    q = Params.from_physical(0, p.length_scale_L, p.scattering_length_aS,
                             p.mass_m, p.omega_phys, p.g_phys)
    assert abs(q.nu - 0.5) < 1e-12
    assert abs(q.beta - 0.5) < 1e-12
    assert abs(q.gamma - 0.5) < 1e-12
    # the defaults land on the published regime
    assert abs(p.scattering_length_aS / 5.29177210903e-11 - 90) < 1
    assert abs(p.time_unit - 1.56e-4) < 2e-6
    assert p.with_s(1).i0 == 1 and p.i0 == 0
    with pytest.raises(ConfigurationError):
        Params.from_dimensionless(-0.5, 0.5, 0.5, 0)
    with pytest.raises(ConfigurationError):
        Params(nu=0.6, beta=0.5, gamma=0.5, s=0,
               length_scale_L=p.length_scale_L,
               scattering_length_aS=p.scattering_length_aS,
               mass_m=p.mass_m, omega_phys=p.omega_phys, g_phys=p.g_phys)


def test_zero_field_and_grid_identity(small_grid):
    f = zero_field(small_grid)
    assert f.values.dtype == np.complex128
    assert particle_number(f) == 0.0
    assert small_grid == make_grid(10.0, 14.0, 51, 71)
    assert small_grid != make_grid(10.0, 14.0, 51, 72)
