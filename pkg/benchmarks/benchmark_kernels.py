"""Time the hot kernels against their pure-numpy fallbacks.

Runs both implementations in one process: the jitted versions are the
module-level functions (when numba is importable and GOSTBEC_NO_NUMBA is
unset), the fallbacks live in kernels.NUMPY_KERNELS. Reports per-call time
and speedup on a default-sized grid.

    python benchmarks/benchmark_kernels.py [--nodes 151 301] [--repeat 200]
"""

import argparse
import time

import numpy as np

from gostbec import Params, make_grid
from gostbec import kernels
from gostbec.grid import build_stencil


def _best_of(f, args, repeat, inner=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            f(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, nargs=2, default=(151, 301),
                    metavar=("NR", "NZ"))
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()

    nr, nz = args.nodes
    grid = make_grid(15.0, 30.0, nr, nz)
    params = Params.from_dimensionless(0.5, 0.5, 0.5, 0)
    stn = build_stencil(grid, params)

    rng = np.random.default_rng(7)
    shape = (grid.n_rho, grid.n_z)
    v = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    v = np.ascontiguousarray(v)
    u = np.ascontiguousarray(v * np.exp(0.3j))
    out = np.zeros_like(v)
    w = grid.w2
    a2 = np.ascontiguousarray(np.abs(v) ** 2)
    b2 = np.ascontiguousarray((v * v).astype(np.complex128))

    calls = {
        "apply_h0": (v, out, stn.lo, stn.hi, stn.diag, stn.inv_hz2, stn.i0),
        "gp_apply": (v, out, stn.lo, stn.hi, stn.diag, stn.inv_hz2, stn.i0,
                     params.gamma, 5.0),
        "cn_residual": (u, v, out, stn.lo, stn.hi, stn.diag, stn.inv_hz2,
                        stn.i0, params.gamma, 1e-3),
        "cn_jac_matvec": (v, out, stn.lo, stn.hi, stn.diag, stn.inv_hz2,
                          stn.i0, a2, b2, 1e-3),
        "wdot": (w, u, v),
        "wsum_abs2": (w, v),
        "wsum_abs4": (w, v),
        "grad_quad": (w, v, 1.0 / grid.drho, 1.0 / grid.dz),
    }

    print(f"grid {nr}x{nz} ({grid.n_rho * grid.n_z} nodes), "
          f"active backend: {kernels.BACKEND}")
    header = f"{'kernel':<14} {'numpy':>10} {'numba':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, a in calls.items():
        ref = kernels.NUMPY_KERNELS[name]
        fast = getattr(kernels, name)
        t_np = _best_of(ref, a, args.repeat)
        if kernels.BACKEND == "numba":
            fast(*a)  # compile outside the timer
            t_nb = _best_of(fast, a, args.repeat)
            print(f"{name:<14} {t_np * 1e6:>8.1f}us {t_nb * 1e6:>8.1f}us "
                  f"{t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<14} {t_np * 1e6:>8.1f}us {'-':>10} {'-':>8}")
    if kernels.BACKEND != "numba":
        print("numba backend inactive (GOSTBEC_NO_NUMBA set or numba "
              "missing); numpy column only")


if __name__ == "__main__":
    main()
