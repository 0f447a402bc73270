"""Airy/Laguerre building blocks against frozen high-precision references.

The reference numbers were produced once with mpmath at 40 digits and are
inlined; the library itself never calls an external special-function
package.
"""

import numpy as np
import pytest

from gostbec import (Field, airy_ai, airy_zero, laguerre, linear_energy_skl,
                     linear_mode, make_grid, particle_number)
from gostbec.grid import apply_h0, inner_product, norm_w
from gostbec.linear_modes import (airy_ai_prime, airy_norm, axial_profile,
                                  eval_mode, radial_profile)

AIRY_ZEROS = [
    -2.338107410459767038489197,
    -4.087949444130970616636989,
    -5.520559828095551059129856,
    -6.786708090071758998780246,
    -7.944133587120853123138281,
    -9.022650853340980380158191,
    -10.04017434155808593059456,
    -11.00852430373326289323544,
]

AI_TABLE = {
    -12.5: -0.2762745613811602482251711,
    -10.0: 0.04024123848644319068943031,
    -7.5: 0.3217757163806478752673285,
    -7.0: 0.1842808352505056372799415,
    -6.5: -0.2380203019971158035944441,
    -5.0: 0.3507610090241143197880163,
    -2.5: -0.1123250676929660891874631,
    -1.0: 0.5355608832923521187995166,
    -0.25: 0.4187246142754529242283812,
    0.0: 0.3550280538878172392600632,
    0.5: 0.2316936064808334897691253,
    1.0: 0.1352924163128814155241474,
    3.5: 0.002584098786989634963277145,
    6.5: 2.795882343204913585459996e-6,
    7.0: 7.49212886399716708077104e-7,
    7.5: 1.917256067513430751645003e-7,
    10.0: 1.104753255289868593355021e-10,
    14.0: 9.920205491192377266317333e-17,
}

AIP_TABLE = {
    -8.5: -0.03231334828463913587288274,
    -3.0: 0.3145837692165988136507873,
    -0.5: -0.2040816703395473861448172,
    0.0: -0.2588194037928067984051836,
    1.5: -0.09738201284230131921848422,
    7.25: -1.039046294628025735228307e-6,
    11.0: -1.411144124662851733545119e-11,
}

# beta^(1/6) / |Ai'(z_l)| at beta = 1/2
AXIAL_NORMS = [
    1.270514785672675018682,
    1.109309059493457098781,
    1.029697841754299503346,
    0.978095182780561355682,
]

LAGUERRE_TABLE = [
    (0, 0, 0.7, 1.0),
    (1, 0, 1.3, -0.3),
    (2, 1, 0.4, 1.88),
    (3, 2, 2.2, -1.674666666666666666667),
    (5, 0, 3.7, -0.2053089166666666666667),
    (7, 3, 8.5, 7.610346912202380952381),
    (12, 1, 17.0, 592.82348492572884934),
    (19, 0, 45.0, -220916798.0296175952604),
    (25, 2, 120.0, -2.947325099275256493827e23),
]

EPS_TABLE = {
    (0, 0, 0): 2.472915371676726418696,
    (0, 0, 1): 3.57524677778332782459,
    (0, 0, 2): 4.477734767310803603653,
    (0, 1, 0): 4.472915371676726418696,
    (1, 0, 0): 3.472915371676726418696,
    (1, 0, 1): 4.57524677778332782459,
    (1, 0, 2): 5.477734767310803603653,
    (1, 1, 0): 5.472915371676726418696,
}


def test_airy_values():
    # full relative precision away from the positive tail; inside the tail
    # (values < 3e-6) the Maclaurin cancellation leaves ~1e-6 relative,
    # absolute < 2e-12, which is far below the h^2 discretization floor
    for x, ref in AI_TABLE.items():
        assert abs(airy_ai(x) - ref) < max(1e-11 * abs(ref), 2e-12), x
    for x, ref in AIP_TABLE.items():
        assert abs(airy_ai_prime(x) - ref) < max(1e-11 * abs(ref), 2e-12), x


def test_airy_zeros():
    for l, ref in enumerate(AIRY_ZEROS):
        z = airy_zero(l)
        assert abs(z - ref) < 1e-12, l
        assert abs(airy_ai(z)) < 1e-12


def test_airy_wronskian():
    # Ai''(x) = x Ai(x): check by central differences of Ai'
    for x in (-3.7, -0.9, 0.3, 2.1):
        h = 1e-5
        d2 = (airy_ai_prime(x + h) - airy_ai_prime(x - h)) / (2 * h)
        assert abs(d2 - x * airy_ai(x)) < 1e-8


def test_axial_norm_constants():
    for l, ref in enumerate(AXIAL_NORMS):
        assert abs(airy_norm(l, 0.5) - ref) < 1e-12 * ref


def test_laguerre_table():
    for k, s, x, ref in LAGUERRE_TABLE:
        got = laguerre(s, k, x)
        assert abs(got - ref) <= 1e-10 * abs(ref), (k, s, x)


def test_laguerre_recurrence_consistency():
    # (k+1) L_{k+1} = (2k+1+s-x) L_k - (k+s) L_{k-1}
    x, s = 2.31, 2
    for k in range(1, 12):
        lhs = (k + 1) * laguerre(s, k + 1, x)
        rhs = (2 * k + 1 + s - x) * laguerre(s, k, x) \
            - (k + s) * laguerre(s, k - 1, x)
        assert abs(lhs - rhs) < 1e-11 * max(abs(lhs), 1.0)


def test_linear_energy_table(params_s0, params_s1):
    for (s, k, l), ref in EPS_TABLE.items():
        params = params_s0 if s == 0 else params_s1
        assert abs(linear_energy_skl(s, k, l, params) - ref) < 1e-13


def test_mode_normalization_and_orthogonality(params_s0):
    grid = make_grid(15.0, 30.0, 151, 301)
    modes = [(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)]
    fields = [eval_mode(linear_mode(*m, params=params_s0), grid, params_s0)
              for m in modes]
    for m, f in zip(modes, fields):
        n = particle_number(f)
        assert abs(n - 1.0) < 5e-3, m
    for i in range(len(modes)):
        for j in range(i + 1, len(modes)):
            ov = inner_product(fields[i], fields[j])
            assert abs(ov) < 5e-3, (modes[i], modes[j])


def test_modes_are_discrete_eigenfunctions(params_s0, params_s1):
    # H0 phi = eps phi up to the O(h^2) stencil truncation; the residual
    # must fall by ~4x when h halves
    res = {}
    for n in (76, 151):
        grid = make_grid(15.0, 30.0, n, 2 * n - 1)
        for mode in [(0, 0, 1), (1, 0, 0)]:
            s = mode[0]
            params = params_s0 if s == 0 else params_s1
            f = eval_mode(linear_mode(*mode, params=params), grid, params)
            eps = linear_energy_skl(*mode, params)
            r = apply_h0(f, params).values - eps * f.values
            res[(mode, n)] = float(np.sqrt(np.sum(grid.w2 * np.abs(r) ** 2)))
    for mode in [(0, 0, 1), (1, 0, 0)]:
        coarse, fine = res[(mode, 76)], res[(mode, 151)]
        assert fine < 6e-3, (mode, fine)
        assert 2.5 < coarse / fine < 6.0, (mode, coarse / fine)


def test_radial_axial_factorization(params_s0):
    grid = make_grid(10.0, 14.0, 41, 57)
    mode = linear_mode(0, 1, 1, params=params_s0)
    f = eval_mode(mode, grid, params_s0)
    rp = radial_profile(0, 1, 0.5, grid.rho_nodes)
    zp = axial_profile(1, 0.5, grid.z_nodes)
    ref = rp[:, None] * zp[None, :]
    from gostbec.grid import apply_boundary
    apply_boundary(ref, 0)
    assert np.max(np.abs(f.values - ref)) < 1e-12


def test_laguerre_argument_validation():
    with pytest.raises(Exception):
        laguerre(-1, 0, 1.0)
