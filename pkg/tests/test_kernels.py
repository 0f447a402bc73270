"""Backend equivalence and basic kernel identities.

Every kernel has a numba and a pure numpy implementation; they must agree
to rounding on random data, on both axis conventions (s = 0 regularized
row, s >= 1 Dirichlet axis).
"""

import numpy as np
import pytest

from gostbec import kernels
from gostbec.grid import apply_boundary, build_stencil
from tests.conftest import rng


def _random_field(grid, s, seed, dtype=np.complex128):
    r = rng(seed)
    v = (r.standard_normal((grid.n_rho, grid.n_z))
         + 1j * r.standard_normal((grid.n_rho, grid.n_z))).astype(dtype)
    apply_boundary(v, s)
    return v


@pytest.mark.parametrize("s", [0, 1])
def test_backends_agree(small_grid, params_s0, params_s1, s):
    params = params_s0 if s == 0 else params_s1
    st = build_stencil(small_grid, params)
    u = _random_field(small_grid, s, 1)
    v = _random_field(small_grid, s, 2)
    w = small_grid.w2
    args = (st.lo, st.hi, st.diag, st.inv_hz2, st.i0)
    out_a = np.empty_like(v)
    out_b = np.empty_like(v)

    kernels.apply_h0(v, out_a, *args)
    kernels.NUMPY_KERNELS["apply_h0"](v, out_b, *args)
    assert np.allclose(out_a, out_b, rtol=1e-13, atol=1e-13)

    kernels.gp_apply(v, out_a, *args, 0.5, 3.0)
    kernels.NUMPY_KERNELS["gp_apply"](v, out_b, *args, 0.5, 3.0)
    assert np.allclose(out_a, out_b, rtol=1e-13, atol=1e-13)

    kernels.cn_residual(u, v, out_a, *args, 0.5, 1e-3)
    kernels.NUMPY_KERNELS["cn_residual"](u, v, out_b, *args, 0.5, 1e-3)
    assert np.allclose(out_a, out_b, rtol=1e-13, atol=1e-13)

    a2 = np.abs(v) ** 2
    b2 = 0.5 * v * v
    kernels.cn_jac_matvec(u, out_a, *args, a2, b2, 1e-3)
    kernels.NUMPY_KERNELS["cn_jac_matvec"](u, out_b, *args, a2, b2, 1e-3)
    assert np.allclose(out_a, out_b, rtol=1e-13, atol=1e-13)

    for name, call in [("wdot", (w, u, v)), ("wsum_abs2", (w, v)),
                       ("wsum_abs4", (w, v)),
                       ("grad_quad", (w, v, 1.0 / small_grid.drho,
                                      1.0 / small_grid.dz))]:
        got = getattr(kernels, name)(*call)
        ref = kernels.NUMPY_KERNELS[name](*call)
        assert abs(got - ref) <= 1e-12 * max(abs(ref), 1.0), name


def test_backend_name():
    assert kernels.BACKEND in ("numba", "numpy")
    assert set(kernels.NUMPY_KERNELS) == {
        "apply_h0", "gp_apply", "cn_residual", "cn_jac_matvec",
        "wdot", "wsum_abs2", "wsum_abs4", "grad_quad"}


def test_wdot_sesquilinear(small_grid):
    w = small_grid.w2
    a = _random_field(small_grid, 0, 3)
    b = _random_field(small_grid, 0, 4)
    assert abs(kernels.wdot(w, a, b) - np.conj(kernels.wdot(w, b, a))) < 1e-12
    assert abs(kernels.wdot(w, a, a) - kernels.wsum_abs2(w, a)) < 1e-12
    # wsum_abs4 is the quartic moment
    ref = float(np.sum(w * np.abs(b) ** 4))
    assert abs(kernels.wsum_abs4(w, b) - ref) <= 1e-12 * abs(ref)


def test_cn_residual_definition(small_grid, params_s0):
    """F(u) = i(u - v) - dt * (H0 + gamma |m|^2) m  with m = (u+v)/2."""
    st = build_stencil(small_grid, params_s0)
    u = _random_field(small_grid, 0, 5)
    v = _random_field(small_grid, 0, 6)
    dt = 7e-4
    mid = 0.5 * (u + v)
    h0m = np.empty_like(mid)
    kernels.apply_h0(mid, h0m, st.lo, st.hi, st.diag, st.inv_hz2, st.i0)
    ref = 1j * (u - v) - dt * (h0m + 0.5 * np.abs(mid) ** 2 * mid)
    apply_boundary(ref, 0)
    out = np.empty_like(u)
    kernels.cn_residual(u, v, out, st.lo, st.hi, st.diag, st.inv_hz2, st.i0,
                        0.5, dt)
    assert np.max(np.abs(out - ref)) < 1e-12


def test_jacobian_is_derivative_of_residual(small_grid, params_s0):
    """dF(u).d matches cn_jac_matvec with the midpoint a2, b2 tables.

    Differentiating F(u) = i(u-v) - dt G((u+v)/2) in u along d gives
    i d - (dt/2)(H0 d + 2 gamma |m|^2 d + gamma m^2 conj d), the exact
    expression the kernel implements. Finite differences leave an O(|d|^2)
    remainder.
    """
    st = build_stencil(small_grid, params_s0)
    args = (st.lo, st.hi, st.diag, st.inv_hz2, st.i0)
    u = _random_field(small_grid, 0, 7)
    v = _random_field(small_grid, 0, 8)
    d = 1e-6 * _random_field(small_grid, 0, 9)
    dt, gamma = 1e-3, 0.5
    f0 = np.empty_like(u)
    f1 = np.empty_like(u)
    kernels.cn_residual(u, v, f0, *args, gamma, dt)
    kernels.cn_residual(u + d, v, f1, *args, gamma, dt)
    mid = 0.5 * (u + v)
    a2 = 2.0 * gamma * np.abs(mid) ** 2
    b2 = gamma * mid * mid
    ref = np.empty_like(u)
    kernels.cn_jac_matvec(d, ref, *args, a2, b2, dt)
    diff = (f1 - f0) - ref
    assert np.max(np.abs(diff)) < 1e-10 * max(1.0, np.max(np.abs(f0)))


def test_grad_quad_reference(small_grid):
    """grad_quad equals the np.gradient quadrature (same stencils)."""
    g = small_grid
    v = _random_field(g, 0, 10)
    w = g.w2
    dr = np.gradient(v, g.drho, axis=0)
    dz = np.gradient(v, g.dz, axis=1)
    ref = float(np.sum(w * (np.abs(dr) ** 2 + np.abs(dz) ** 2)))
    got = kernels.grad_quad(w, v, 1.0 / g.drho, 1.0 / g.dz)
    assert abs(got - ref) <= 1e-11 * abs(ref)
