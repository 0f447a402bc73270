"""Hot numerical kernels with a numba backend and a pure-numpy fallback.

The numba path is the default; set the environment variable
GOSTBEC_NO_NUMBA=1 before import to force the numpy implementations
(also used automatically when numba is not importable). The active
backend is reported in BACKEND.

All kernels operate on the raw (n_rho, n_z) value arrays. The five-point
stencil coefficients (lo, hi, diag, inv_hz2, i0) come from
grid.build_stencil; rows i < i0 and i = n_rho-1 and columns j = 0,
j = n_z-1 are Dirichlet rows on which every operator returns 0.
"""

import os

import numpy as np


def _stencil_row_range(i0, nr):
    return range(i0, nr - 1)


# ---------------------------------------------------------------- impls

def _apply_h0_impl(v, out, lo, hi, diag, inv_hz2, i0):
    nr, nz = v.shape
    for i in range(nr):
        if i < i0 or i == nr - 1:
            for j in range(nz):
                out[i, j] = 0.0
            continue
        out[i, 0] = 0.0
        out[i, nz - 1] = 0.0
        if i == 0:
            for j in range(1, nz - 1):
                out[0, j] = (diag[0, j] * v[0, j] + hi[0] * v[1, j]
                             - inv_hz2 * (v[0, j - 1] + v[0, j + 1]))
        else:
            for j in range(1, nz - 1):
                out[i, j] = (diag[i, j] * v[i, j]
                             + lo[i] * v[i - 1, j] + hi[i] * v[i + 1, j]
                             - inv_hz2 * (v[i, j - 1] + v[i, j + 1]))
    return out


def _gp_apply_impl(v, out, lo, hi, diag, inv_hz2, i0, gamma, mu):
    nr, nz = v.shape
    for i in range(nr):
        if i < i0 or i == nr - 1:
            for j in range(nz):
                out[i, j] = 0.0
            continue
        out[i, 0] = 0.0
        out[i, nz - 1] = 0.0
        for j in range(1, nz - 1):
            c = v[i, j]
            if i == 0:
                h0 = diag[0, j] * c + hi[0] * v[1, j] \
                    - inv_hz2 * (v[0, j - 1] + v[0, j + 1])
            else:
                h0 = diag[i, j] * c + lo[i] * v[i - 1, j] + hi[i] * v[i + 1, j] \
                    - inv_hz2 * (v[i, j - 1] + v[i, j + 1])
            a2 = c.real * c.real + c.imag * c.imag
            out[i, j] = h0 + (gamma * a2 - mu) * c
    return out


def _cn_residual_impl(u, v, out, lo, hi, diag, inv_hz2, i0, gamma, dt):
    # out = i(u - v) - dt*( H0 ub + gamma |ub|^2 ub ),  ub = (u + v)/2
    nr, nz = u.shape
    for i in range(nr):
        if i < i0 or i == nr - 1:
            for j in range(nz):
                out[i, j] = 0.0
            continue
        out[i, 0] = 0.0
        out[i, nz - 1] = 0.0
        for j in range(1, nz - 1):
            ub = 0.5 * (u[i, j] + v[i, j])
            ubm = 0.5 * (u[i, j - 1] + v[i, j - 1])
            ubp = 0.5 * (u[i, j + 1] + v[i, j + 1])
            if i == 0:
                ubr = 0.5 * (u[1, j] + v[1, j])
                h0 = diag[0, j] * ub + hi[0] * ubr - inv_hz2 * (ubm + ubp)
            else:
                ubl = 0.5 * (u[i - 1, j] + v[i - 1, j])
                ubr = 0.5 * (u[i + 1, j] + v[i + 1, j])
                h0 = diag[i, j] * ub + lo[i] * ubl + hi[i] * ubr \
                    - inv_hz2 * (ubm + ubp)
            a2 = ub.real * ub.real + ub.imag * ub.imag
            out[i, j] = 1j * (u[i, j] - v[i, j]) - dt * (h0 + gamma * a2 * ub)
    return out


def _cn_jac_matvec_impl(d, out, lo, hi, diag, inv_hz2, i0, a2, b2, dt):
    # out = i d - (dt/2)*( H0 d + a2 d + b2 conj(d) )
    nr, nz = d.shape
    for i in range(nr):
        if i < i0 or i == nr - 1:
            for j in range(nz):
                out[i, j] = 0.0
            continue
        out[i, 0] = 0.0
        out[i, nz - 1] = 0.0
        for j in range(1, nz - 1):
            c = d[i, j]
            if i == 0:
                h0 = diag[0, j] * c + hi[0] * d[1, j] \
                    - inv_hz2 * (d[0, j - 1] + d[0, j + 1])
            else:
                h0 = diag[i, j] * c + lo[i] * d[i - 1, j] + hi[i] * d[i + 1, j] \
                    - inv_hz2 * (d[i, j - 1] + d[i, j + 1])
            out[i, j] = 1j * c - 0.5 * dt * (h0 + a2[i, j] * c
                                             + b2[i, j] * c.conjugate())
    return out


def _wdot_impl(w, a, b):
    nr, nz = a.shape
    sr = 0.0
    si = 0.0
    for i in range(nr):
        for j in range(nz):
            x = a[i, j].conjugate() * b[i, j]
            sr += w[i, j] * x.real
            si += w[i, j] * x.imag
    return complex(sr, si)


def _wsum_abs2_impl(w, a):
    nr, nz = a.shape
    s = 0.0
    for i in range(nr):
        for j in range(nz):
            c = a[i, j]
            s += w[i, j] * (c.real * c.real + c.imag * c.imag)
    return s


def _wsum_abs4_impl(w, a):
    nr, nz = a.shape
    s = 0.0
    for i in range(nr):
        for j in range(nz):
            c = a[i, j]
            a2 = c.real * c.real + c.imag * c.imag
            s += w[i, j] * a2 * a2
    return s


def _grad_quad_impl(w, v, inv_h, inv_hz):
    # sum_ij w_ij (|d_rho v|^2 + |d_z v|^2), centered differences inside,
    # one-sided on the boundary rows/columns
    nr, nz = v.shape
    s = 0.0
    for i in range(nr):
        for j in range(nz):
            if i == 0:
                dr = (v[1, j] - v[0, j]) * inv_h
            elif i == nr - 1:
                dr = (v[nr - 1, j] - v[nr - 2, j]) * inv_h
            else:
                dr = (v[i + 1, j] - v[i - 1, j]) * (0.5 * inv_h)
            if j == 0:
                dz = (v[i, 1] - v[i, 0]) * inv_hz
            elif j == nz - 1:
                dz = (v[i, nz - 1] - v[i, nz - 2]) * inv_hz
            else:
                dz = (v[i, j + 1] - v[i, j - 1]) * (0.5 * inv_hz)
            s += w[i, j] * (dr.real * dr.real + dr.imag * dr.imag
                            + dz.real * dz.real + dz.imag * dz.imag)
    return s


# ---------------------------------------------------------------- numpy twins

def _np_apply_h0(v, out, lo, hi, diag, inv_hz2, i0):
    nr, nz = v.shape
    out[...] = 0.0
    res = diag[i0:nr - 1, 1:nz - 1] * v[i0:nr - 1, 1:nz - 1] \
        - inv_hz2 * (v[i0:nr - 1, 0:nz - 2] + v[i0:nr - 1, 2:nz])
    res += hi[i0:nr - 1, None] * v[i0 + 1:nr, 1:nz - 1]
    res[1:, :] += lo[i0 + 1:nr - 1, None] * v[i0:nr - 2, 1:nz - 1]
    if i0 > 0:
        res[0, :] += lo[i0] * v[i0 - 1, 1:nz - 1]
    out[i0:nr - 1, 1:nz - 1] = res
    return out


def _np_gp_apply(v, out, lo, hi, diag, inv_hz2, i0, gamma, mu):
    nr, nz = v.shape
    _np_apply_h0(v, out, lo, hi, diag, inv_hz2, i0)
    c = v[i0:nr - 1, 1:nz - 1]
    a2 = c.real * c.real + c.imag * c.imag
    out[i0:nr - 1, 1:nz - 1] += (gamma * a2 - mu) * c
    return out


def _np_cn_residual(u, v, out, lo, hi, diag, inv_hz2, i0, gamma, dt):
    ub = 0.5 * (u + v)
    _np_apply_h0(ub, out, lo, hi, diag, inv_hz2, i0)
    nr, nz = u.shape
    s = (slice(i0, nr - 1), slice(1, nz - 1))
    c = ub[s]
    a2 = c.real * c.real + c.imag * c.imag
    out[s] = 1j * (u[s] - v[s]) - dt * (out[s] + gamma * a2 * c)
    return out


def _np_cn_jac_matvec(d, out, lo, hi, diag, inv_hz2, i0, a2, b2, dt):
    _np_apply_h0(d, out, lo, hi, diag, inv_hz2, i0)
    nr, nz = d.shape
    s = (slice(i0, nr - 1), slice(1, nz - 1))
    c = d[s]
    out[s] = 1j * c - 0.5 * dt * (out[s] + a2[s] * c + b2[s] * np.conj(c))
    return out


def _np_wdot(w, a, b):
    return complex(np.sum(w * (np.conj(a) * b)))


def _np_wsum_abs2(w, a):
    x = a.real * a.real + a.imag * a.imag if np.iscomplexobj(a) else a * a
    return float(np.sum(w * x))


def _np_wsum_abs4(w, a):
    x = a.real * a.real + a.imag * a.imag if np.iscomplexobj(a) else a * a
    return float(np.sum(w * x * x))


def _np_grad_quad(w, v, inv_h, inv_hz):
    dr = np.empty_like(v)
    dr[1:-1, :] = (v[2:, :] - v[:-2, :]) * (0.5 * inv_h)
    dr[0, :] = (v[1, :] - v[0, :]) * inv_h
    dr[-1, :] = (v[-1, :] - v[-2, :]) * inv_h
    dz = np.empty_like(v)
    dz[:, 1:-1] = (v[:, 2:] - v[:, :-2]) * (0.5 * inv_hz)
    dz[:, 0] = (v[:, 1] - v[:, 0]) * inv_hz
    dz[:, -1] = (v[:, -1] - v[:, -2]) * inv_hz
    g = (dr.real * dr.real + dr.imag * dr.imag
         + dz.real * dz.real + dz.imag * dz.imag)
    return float(np.sum(w * g))


# ---------------------------------------------------------------- dispatch

def _want_numba():
    flag = os.environ.get("GOSTBEC_NO_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes")


BACKEND = "numpy"

if _want_numba():
    try:
        import numba

        _jit = numba.njit(cache=True, fastmath=False)
        apply_h0 = _jit(_apply_h0_impl)
        gp_apply = _jit(_gp_apply_impl)
        cn_residual = _jit(_cn_residual_impl)
        cn_jac_matvec = _jit(_cn_jac_matvec_impl)
        wdot = _jit(_wdot_impl)
        wsum_abs2 = _jit(_wsum_abs2_impl)
        wsum_abs4 = _jit(_wsum_abs4_impl)
        grad_quad = _jit(_grad_quad_impl)
        BACKEND = "numba"
    except ImportError:
        pass

if BACKEND == "numpy":
    apply_h0 = _np_apply_h0
    gp_apply = _np_gp_apply
    cn_residual = _np_cn_residual
    cn_jac_matvec = _np_cn_jac_matvec
    wdot = _np_wdot
    wsum_abs2 = _np_wsum_abs2
    wsum_abs4 = _np_wsum_abs4
    grad_quad = _np_grad_quad

NUMPY_KERNELS = {
    "apply_h0": _np_apply_h0,
    "gp_apply": _np_gp_apply,
    "cn_residual": _np_cn_residual,
    "cn_jac_matvec": _np_cn_jac_matvec,
    "wdot": _np_wdot,
    "wsum_abs2": _np_wsum_abs2,
    "wsum_abs4": _np_wsum_abs4,
    "grad_quad": _np_grad_quad,
}
