"""Command line front end.

Subcommands:
  branches   continue every requested branch, write the mu-N catalogue
  lifetime   propagate one branch point, detect onset, fit the decay rate
  spectrum   linearization eigenvalues, growth rate, both tau conventions
  portrait   spectral portrait grid plus eigenvalue error bars
  compare    fit rate vs eigenvalue growth for a list of branch points

Exit codes: 0 success, 2 configuration/usage problem, 3 numerical failure.

Outputs are deterministic: same config file and --seed give byte-identical
CSVs (floats printed with %.17g, rows in request order, headers carry the
config hash instead of timestamps).
"""

import argparse
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import ARTIFACT_VERSION, RunConfig
from .errors import (ConfigurationError, GostbecError, NumericalError,
                     UsageError, WindowError)
from .fitting import detect_onset, fit_exponential, fit_window_from_onset
from .grid import build_stencil, write_snapshot
from .propagation import PropagationRun, propagate
from .stability import (assemble_blocks, eigenvalue_error_bars,
                        spectral_portrait, spectrum)
from .stationary import branch_mode, continue_branch, energy

def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _write_table(path, cfg, header, rows, extra_comments=()):
    with open(path, "w") as fh:
        for line in cfg.header_comments():
            fh.write(f"# {line}\n")
        for line in extra_comments:
            fh.write(f"# {line}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_report(path, cfg, pairs):
    with open(path, "w") as fh:
        for line in cfg.header_comments():
            fh.write(f"# {line}\n")
        for key, val in pairs:
            fh.write(f"{key} = {val if isinstance(val, str) else _fmt(val)}\n")


def _snapshot_meta(cfg, state):
    return {"artifact": ARTIFACT_VERSION, "config": cfg.config_hash(),
            "branch": state.branch, "mu": _fmt(state.mu),
            "s": str(state.params.s)}


def _compute_branch(cfg, request, grid):
    label, mu_end, dmu = request
    mode = branch_mode(label)
    params = cfg.make_params(mode[0])
    return continue_branch(mode, params, mu_end, dmu=dmu, grid=grid,
                           tol=cfg.branch_tol, label=label)


def _pick_point(branch, n_target=None, mu_target=None):
    pts = branch.points
    if mu_target is not None:
        idx = int(np.argmin([abs(p.mu - mu_target) for p in pts]))
    elif n_target is not None:
        idx = int(np.argmin([abs(p.n_particles - n_target) for p in pts]))
    else:
        raise UsageError("give --n-target or --mu-target to pick the point")
    return pts[idx]


def _physical_pairs(state):
    p = state.params
    return [
        ("time_unit_s", p.time_unit),
        ("length_scale_m", p.length_scale_L),
        ("scattering_length_m", p.scattering_length_aS),
        ("mass_kg", p.mass_m),
        ("omega_rad_s", p.omega_phys),
        # atom number equals ||psi||^2 under this nondimensionalization
        ("n_atoms", state.n_particles),
    ]


# -- branches ---------------------------------------------------------------


def cmd_branches(cfg, args):
    grid = cfg.make_grid()
    results = {}
    failures = {}

    def work(req):
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return _compute_branch(cfg, req, grid)

    if cfg.workers > 1 and len(cfg.requests) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futs = {req[0]: pool.submit(work, req) for req in cfg.requests}
        for label, fut in futs.items():
            try:
                results[label] = fut.result()
            except GostbecError as exc:
                failures[label] = exc
    else:
        for req in cfg.requests:
            try:
                results[req[0]] = work(req)
            except GostbecError as exc:
                failures[req[0]] = exc

    rows = []
    for label, mu_end, dmu in cfg.requests:
        branch = results.get(label)
        if branch is None:
            continue
        params = branch.points[0].params
        stencil = build_stencil(grid, params)
        for st in branch.points:
            rows.append((label, st.mu, st.n_particles,
                         energy(st.psi, params, stencil), st.residual_norm))
        last = branch.points[-1]
        write_snapshot(os.path.join(cfg.output_dir, f"{label}_final.snap"),
                       last.psi, meta=_snapshot_meta(cfg, last))
        if cfg.snapshot_every_point:
            for st in branch.points[:-1]:
                name = f"{label}_mu{st.mu:.6g}.snap"
                write_snapshot(os.path.join(cfg.output_dir, name), st.psi,
                               meta=_snapshot_meta(cfg, st))
        print(f"branch {label}: {len(branch.points)} points, "
              f"mu {branch.points[0].mu:.6g} -> {last.mu:.6g}, "
              f"N(final) = {last.n_particles:.6g}")

    _write_table(os.path.join(cfg.output_dir, "branches.csv"), cfg,
                 "branch,mu,N,E,residual", rows)
    print(f"wrote {os.path.join(cfg.output_dir, 'branches.csv')} "
          f"({len(rows)} points)")

    if failures:
        for label, exc in failures.items():
            print(f"branch {label} failed: {type(exc).__name__}: {exc}",
                  file=sys.stderr)
        # partial outputs are already on disk; report the first failure
        raise next(iter(failures.values()))
    return 0


# -- lifetime ---------------------------------------------------------------


def _stop_after_window(cfg):
    """Stop rule: once the onset threshold is crossed, keep only as many
    further samples as the fit window needs (plus margin), then halt."""
    budget = cfg.window_points + max(10, cfg.window_points // 10)
    seen = {"n": 0}

    def stop(row):
        if abs(1.0 - row["vis"]) > cfg.threshold:
            seen["n"] += 1
        return seen["n"] > budget

    return stop


def _run_propagation(cfg, state, observers_every=None, stop=None,
                     snapshot_prefix=None):
    run = PropagationRun(
        state=state, t_end=cfg.t_end, dt=cfg.dt,
        observers_every=observers_every or cfg.observers_every,
        noise_amplitude=cfg.noise_amplitude, noise_seed=cfg.seed,
        snapshot_times=cfg.snapshot_times,
        conservation_limit=cfg.conservation_limit)
    on_snapshot = None
    if snapshot_prefix is not None and cfg.snapshot_times:
        def on_snapshot(field, t):
            path = os.path.join(cfg.output_dir,
                                f"{snapshot_prefix}_t{t:g}.snap")
            write_snapshot(path, field, meta=_snapshot_meta(cfg, state))
    return propagate(run, on_snapshot=on_snapshot, stop_when=stop)


def cmd_lifetime(cfg, args):
    grid = cfg.make_grid()
    request = cfg.request_for(args.branch)
    branch = _compute_branch(cfg, request, grid)
    state = _pick_point(branch, args.n_target, args.mu_target)
    print(f"branch {args.branch}: picked mu = {state.mu:.6g}, "
          f"N = {state.n_particles:.6g}")

    series = _run_propagation(cfg, state, stop=_stop_after_window(cfg),
                              snapshot_prefix=args.branch)
    series_path = os.path.join(cfg.output_dir, f"{args.branch}_series.csv")
    series.to_csv(series_path, comments=cfg.header_comments()
                  + (f"branch {args.branch} mu {_fmt(state.mu)} "
                     f"N {_fmt(state.n_particles)}",))
    print(f"wrote {series_path} ({series.t.size} samples, "
          f"t_final = {series.t[-1]:.6g})")

    pairs = [("branch", args.branch), ("mu", state.mu),
             ("N", state.n_particles)] + _physical_pairs(state)
    onset = detect_onset(series, cfg.threshold)
    if onset is None:
        pairs += [("onset_t", "none"),
                  ("verdict", f"stable (|1-vis| <= {cfg.threshold:g} "
                              f"up to t = {series.t[-1]:.6g})")]
        print(f"no onset: |1 - vis| stayed <= {cfg.threshold:g}")
    else:
        window = fit_window_from_onset(series, onset, cfg.window_points)
        fit = fit_exponential(series, window[:2])
        tau = fit.tau_half
        t_unit = state.params.time_unit
        pairs += [
            ("onset_t", onset),
            ("window_t", f"{_fmt(window[0])}..{_fmt(window[1])}"),
            ("short_window", window[2]),
            ("lambda", fit.lambda_),
            ("sigma_lambda", np.sqrt(max(fit.sigma2_lambda, 0.0))),
            ("c", fit.c), ("a", fit.a), ("chi2", fit.chi2),
            ("n_fit_points", fit.n_points),
            # tau_half reads the kappa exponent directly; the amplitude
            # convention divides the rate by two
            ("tau_half", tau),
            ("tau_half_amplitude", 2.0 * tau if np.isfinite(tau) else tau),
            ("tau_half_phys_s", tau * t_unit),
            ("tau_half_amplitude_phys_s", 2.0 * tau * t_unit),
            ("verdict", "unstable" if fit.instability_detected else "stable"),
        ]
        print(f"onset at t = {onset:.6g}, lambda = {fit.lambda_:.6g}, "
              f"tau_half = {tau:.6g} ({tau * t_unit * 1e3:.6g} ms)")
    report_path = os.path.join(cfg.output_dir, f"{args.branch}_lifetime.txt")
    _write_report(report_path, cfg, pairs)
    print(f"wrote {report_path}")
    return 0


# -- spectrum / portrait ----------------------------------------------------


def _assemble_with_truncation(cfg, state):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        m = assemble_blocks(state, basis_n=cfg.basis_n)
    notes = [str(w.message) for w in caught]
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    return m, notes


def _dominant(report):
    lam = report.eigenvalues
    return lam[int(np.argmax(lam.real))]


def _auto_window(report):
    lam = _dominant(report)
    a = max(0.5, 4.0 * report.growth_rate)
    b = max(0.5, 0.25 * abs(lam.imag))
    return (lam.real - a, lam.real + a, lam.imag - b, lam.imag + b)


def _edge_guard(window, lam, bars, truncation_notes):
    """Truncation warnings harden into an error when the eigenvalue sits
    within two error-bar widths of the portrait window edge."""
    if not truncation_notes:
        return
    width = max(bars[1] - bars[0], 0.0)
    dist = min(lam.real - window[0], window[1] - lam.real,
               lam.imag - window[2], window[3] - lam.imag)
    if dist < 2.0 * width:
        raise NumericalError(
            f"basis truncation warning and the eigenvalue {lam:.6g} lies "
            f"within two error-bar widths ({2 * width:.3g}) of the portrait "
            f"window edge; enlarge basis_n or the window")


def _spectrum_for(cfg, args, grid=None):
    grid = grid or cfg.make_grid()
    request = cfg.request_for(args.branch)
    branch = _compute_branch(cfg, request, grid)
    state = _pick_point(branch, args.n_target, args.mu_target)
    print(f"branch {args.branch}: picked mu = {state.mu:.6g}, "
          f"N = {state.n_particles:.6g}")
    m, notes = _assemble_with_truncation(cfg, state)
    report = spectrum(m)
    return state, m, report, notes


def _tau_pairs(report, state):
    g = report.growth_rate
    t_unit = state.params.time_unit
    pairs = [("growth_rate", g), ("tau", report.tau),
             ("tau_norm2", report.tau_norm2)]
    for key, tau in (("tau_phys_s", report.tau),
                     ("tau_norm2_phys_s", report.tau_norm2)):
        pairs.append((key, tau * t_unit if np.isfinite(tau) else tau))
    return pairs


def _portrait_rows(portrait):
    rows = []
    for j, im in enumerate(portrait.im_axis):
        for i, re in enumerate(portrait.re_axis):
            rows.append((re, im, portrait.spp[j, i]))
    return rows


def cmd_spectrum(cfg, args):
    state, m, report, notes = _spectrum_for(cfg, args)
    label = args.branch

    spath = os.path.join(cfg.output_dir, f"{label}_spectrum.csv")
    _write_table(spath, cfg, "re_lambda,im_lambda",
                 [(lam.real, lam.imag) for lam in report.eigenvalues],
                 extra_comments=(f"branch {label} mu {_fmt(state.mu)} "
                                 f"N {_fmt(state.n_particles)}",))
    print(f"wrote {spath} ({report.eigenvalues.size} eigenvalues)")

    lam = _dominant(report)
    bars = eigenvalue_error_bars(m, lam, epsilon_inv=cfg.epsilon_inv)
    pairs = ([("branch", label), ("mu", state.mu), ("N", state.n_particles)]
             + _tau_pairs(report, state)
             + [("dominant_re", lam.real), ("dominant_im", lam.imag),
                ("bar_lo", bars[0]), ("bar_hi", bars[1]),
                ("epsilon_inv", cfg.epsilon_inv)]
             + _physical_pairs(state))
    rpath = os.path.join(cfg.output_dir, f"{label}_tau.txt")
    _write_report(rpath, cfg, pairs)
    print(f"growth = {report.growth_rate:.6g}, tau = {report.tau:.6g}, "
          f"tau_norm2 = {report.tau_norm2:.6g}; wrote {rpath}")

    if args.portrait:
        window = cfg.portrait_window or _auto_window(report)
        _edge_guard(window, lam, bars, notes)
        portrait = spectral_portrait(m, window, cfg.portrait_resolution)
        ppath = os.path.join(cfg.output_dir, f"{label}_portrait.csv")
        _write_table(ppath, cfg, "re,im,spp", _portrait_rows(portrait),
                     extra_comments=(f"m_norm2 {_fmt(portrait.m_norm2)}",))
        peak = float(portrait.spp.max())
        note = ", clamped cells present" if np.any(portrait.clamped) else ""
        print(f"wrote {ppath} (peak spp = {peak:.3g}{note})")
    return 0


def cmd_portrait(cfg, args):
    state, m, report, notes = _spectrum_for(cfg, args)
    label = args.branch
    lam = _dominant(report)
    bars = eigenvalue_error_bars(m, lam, epsilon_inv=cfg.epsilon_inv)
    window = cfg.portrait_window or _auto_window(report)
    _edge_guard(window, lam, bars, notes)
    portrait = spectral_portrait(m, window, cfg.portrait_resolution)

    ppath = os.path.join(cfg.output_dir, f"{label}_portrait.csv")
    _write_table(ppath, cfg, "re,im,spp", _portrait_rows(portrait),
                 extra_comments=(f"branch {label} mu {_fmt(state.mu)}",
                                 f"m_norm2 {_fmt(portrait.m_norm2)}"))
    bpath = os.path.join(cfg.output_dir, f"{label}_errorbars.csv")
    _write_table(bpath, cfg, "re_lambda,im_lambda,bar_lo,bar_hi",
                 [(lam.real, lam.imag, bars[0], bars[1])],
                 extra_comments=(f"epsilon_inv {_fmt(cfg.epsilon_inv)}",))
    peak = float(portrait.spp.max())
    print(f"wrote {ppath} and {bpath}; peak spp = {peak:.3g}, bar half-width "
          f"= {max(bars[1] - lam.real, lam.real - bars[0]):.3g}")
    return 0


# -- compare ----------------------------------------------------------------


def _parse_states(items):
    out = []
    for item in items:
        parts = item.split(":")
        if len(parts) != 2:
            raise UsageError(f"bad --state {item!r}; expected LABEL:N_TARGET")
        label = parts[0].strip()
        try:
            n_target = float(parts[1])
        except ValueError:
            raise UsageError(f"bad N target in --state {item!r}") from None
        out.append((label, n_target))
    if not out:
        raise UsageError("compare needs at least one --state LABEL:N_TARGET")
    return out


def _sampling_for_growth(cfg, growth):
    """Observer cadence for the comparison runs: spread the fit window over
    the predicted exponential phase (about six e-foldings of kappa)."""
    if growth <= 0.0:
        return cfg.observers_every
    lam = 2.0 * growth
    sample_dt = 6.0 / (lam * cfg.window_points)
    every = int(round(sample_dt / cfg.dt))
    return int(np.clip(every, 1, max(1, int(round(0.05 / cfg.dt)))))


def cmd_compare(cfg, args):
    states = _parse_states(args.state)
    grid = cfg.make_grid()
    branches = {}
    for label, _ in states:
        if label not in branches:
            request = cfg.request_for(label)
            branches[label] = _compute_branch(cfg, request, grid)

    def work(job):
        label, n_target = job
        state = _pick_point(branches[label], n_target=n_target)
        m, notes = _assemble_with_truncation(cfg, state)
        report = spectrum(m)
        lam_dom = _dominant(report)
        bars = eigenvalue_error_bars(m, lam_dom, epsilon_inv=cfg.epsilon_inv)
        every = _sampling_for_growth(cfg, report.growth_rate)
        series = _run_propagation(cfg, state, observers_every=every,
                                  stop=_stop_after_window(cfg))
        onset = detect_onset(series, cfg.threshold)
        fit = None
        if onset is not None:
            window = fit_window_from_onset(series, onset, cfg.window_points)
            fit = fit_exponential(series, window[:2])
        return state, report, bars, fit

    if cfg.workers > 1 and len(states) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(work, job) for job in states]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [work(job) for job in states]

    rows = []
    for (label, n_target), (state, report, bars, fit) in zip(states, outcomes):
        g = report.growth_rate
        if fit is None:
            lam_fit = 0.0
            sig = 0.0
            # no onset seen: agreement means the eigenvalue side is stable too
            agree_paper = not np.isfinite(report.tau)
            agree_norm2 = agree_paper
        else:
            lam_fit = fit.lambda_
            sig = float(np.sqrt(max(fit.sigma2_lambda, 0.0)))
            # paper convention matches the kappa exponent against Re lambda,
            # the norm^2 convention against 2 Re lambda
            agree_paper = bars[0] <= lam_fit <= bars[1]
            agree_norm2 = bars[0] <= 0.5 * lam_fit <= bars[1]
        rows.append((label, state.n_particles, state.mu, lam_fit, sig, g,
                     bars[0], bars[1], report.tau, report.tau_norm2,
                     agree_paper, agree_norm2))
        print(f"{label} N = {state.n_particles:.6g}: lambda_fit = "
              f"{lam_fit:.6g}, growth = {g:.6g}, bars = "
              f"[{bars[0]:.6g}, {bars[1]:.6g}], agree(paper/norm2) = "
              f"{agree_paper}/{agree_norm2}")

    cpath = os.path.join(cfg.output_dir, "compare.csv")
    _write_table(cpath, cfg,
                 "branch,N,mu,lambda_fit,sigma_lambda,growth,bar_lo,bar_hi,"
                 "tau_paper,tau_norm2,agree_paper,agree_norm2", rows)
    print(f"wrote {cpath}")
    return 0


# -- entry point ------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", default=None, help="INI config file")
    sub.add_argument("--out", default=None, help="output directory override")
    sub.add_argument("--workers", type=int, default=1,
                     help="independent jobs run concurrently up to this")
    sub.add_argument("--seed", type=int, default=0,
                     help="seed for the optional propagation noise")


def _add_point(sub):
    sub.add_argument("--branch", required=True, help="branch label (A0..B3)")
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--n-target", type=float, default=None,
                       help="pick the branch point with N nearest this")
    group.add_argument("--mu-target", type=float, default=None,
                       help="pick the branch point with mu nearest this")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gostbec",
        description="Stationary modes and lifetimes of a gravito-optical "
                    "surface trap condensate")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("branches", help="continue all requested branches")
    _add_common(p)
    p.set_defaults(func=cmd_branches)

    p = subs.add_parser("lifetime", help="propagate one state and fit kappa")
    _add_common(p)
    _add_point(p)
    p.set_defaults(func=cmd_lifetime)

    p = subs.add_parser("spectrum", help="linearization eigenvalues and tau")
    _add_common(p)
    _add_point(p)
    p.add_argument("--portrait", action="store_true",
                   help="also write the spectral portrait grid")
    p.set_defaults(func=cmd_spectrum)

    p = subs.add_parser("portrait", help="spectral portrait and error bars")
    _add_common(p)
    _add_point(p)
    p.set_defaults(func=cmd_portrait)

    p = subs.add_parser("compare", help="fit rate vs eigenvalue growth")
    _add_common(p)
    p.add_argument("--state", action="append", default=[],
                   metavar="LABEL:N_TARGET",
                   help="branch point to compare (repeatable)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_ini(args.config, seed=args.seed,
                                 workers=args.workers)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
        os.makedirs(cfg.output_dir, exist_ok=True)
        print(f"config {cfg.config_hash()} ({ARTIFACT_VERSION}), "
              f"output -> {cfg.output_dir}")
        return args.func(cfg, args)
    except (ConfigurationError, UsageError, WindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
