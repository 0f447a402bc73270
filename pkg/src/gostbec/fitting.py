"""Onset detection and decay-constant extraction from propagation series.

The lifetime pipeline is: detect the onset time from the visibility rule
|1 - vis| > threshold, then least-squares fit kappa(t) on a fixed window of
samples starting at the onset against a exp(lambda t) + c. The appendix
model has unit amplitude; a is kept free here because desk-scale kappa
magnitudes differ, and is reported alongside.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .errors import FitError, UsageError, WindowError

DEFAULT_THRESHOLD = 1e-4
DEFAULT_WINDOW_POINTS = 500
TABLE_HEADER = "N,lambda,c,sigma2_c,rho_lambda_c,sigma2_lambda,chi2,a"


@dataclass
class FitResult:
    lambda_: float
    c: float
    a: float
    sigma2_lambda: float
    sigma2_c: float
    rho_lambda_c: float
    chi2: float
    window: tuple
    n_points: int
    instability_detected: bool
    short_window: bool = False

    @property
    def tau_half(self):
        if self.lambda_ == 0.0:
            return np.inf
        return np.log(2.0) / self.lambda_


def detect_onset(series, threshold=DEFAULT_THRESHOLD):
    """First sample time with |1 - vis| > threshold; None if never."""
    if len(series) == 0:
        raise UsageError("cannot detect an onset in an empty series")
    t = series.t
    if np.any(np.diff(t) <= 0):
        raise UsageError("series time column must be strictly increasing")
    mask = np.abs(1.0 - series.vis) > threshold
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    return float(t[idx[0]])


def _window_slice(series, window):
    t0, t1 = float(window[0]), float(window[1])
    if t1 <= t0:
        raise WindowError(f"empty fit window ({t0:g}, {t1:g})")
    t = series.t
    if t0 < t[0] - 1e-12 or t1 > t[-1] + 1e-12:
        raise WindowError(f"window ({t0:g}, {t1:g}) outside the series "
                          f"range ({t[0]:g}, {t[-1]:g})")
    sel = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
    return np.flatnonzero(sel)


def fit_window_from_onset(series, t_onset, n_points=DEFAULT_WINDOW_POINTS):
    """Window of n_points samples starting at the onset.

    Returns (t_start, t_end, short) where short flags that fewer than
    n_points samples remained and all of them were used.
    """
    t = series.t
    start = int(np.searchsorted(t, t_onset - 1e-12))
    if start >= t.size:
        raise WindowError(f"onset {t_onset:g} beyond the series end")
    stop = start + int(n_points)
    short = stop > t.size
    stop = min(stop, t.size)
    return float(t[start]), float(t[stop - 1]), short


def _model(theta, tau):
    a, lam, c = theta
    x = lam * tau
    if np.max(x) > 600.0:   # reject steps that would overflow
        return None
    return a * np.exp(x) + c


def fit_exponential(series, window, max_iter=200):
    """Levenberg least squares of kappa(t) against a exp(lambda t) + c.

    chi2 is the plain sum of squared residuals; the parameter covariance
    comes from the Jacobian at the optimum scaled by chi2/(n-3). Times are
    shifted to the window start internally, so a shifted window changes a
    and c but not lambda; the reported a refers to absolute time.
    """
    idx = _window_slice(series, window)
    if idx.size < 10:
        raise WindowError(f"fit window holds {idx.size} samples, need >= 10")
    t = series.t[idx]
    y = series.kappa[idx]
    t0 = t[0]
    tau = t - t0

    # init: offset slightly below the data, then log-linear regression
    span = max(y.max() - y.min(), abs(y.max()), 1e-300)
    c0 = y.min() - 1e-3 * span
    reg = linregress(tau, np.log(y - c0))
    lam = float(reg.slope)
    if not np.isfinite(lam):
        lam = 0.0
    lam = float(np.clip(lam, -500.0 / max(tau[-1], 1e-300),
                        500.0 / max(tau[-1], 1e-300)))
    a = float(np.exp(reg.intercept))
    theta = np.array([a, lam, c0])

    r = _model(theta, tau) - y
    chi2 = float(r @ r)
    lm = 1e-3
    grad_norm = np.inf
    for _ in range(max_iter):
        a, lam, c = theta
        e = np.exp(lam * tau)
        jac = np.column_stack((e, a * tau * e, np.ones_like(tau)))
        grad = jac.T @ r
        grad_norm = float(np.linalg.norm(grad))
        jtj = jac.T @ jac
        accepted = False
        while lm < 1e14:
            try:
                step = np.linalg.solve(jtj + lm * np.diag(np.diag(jtj)),
                                       -grad)
            except np.linalg.LinAlgError:
                lm *= 10.0
                continue
            trial = theta + step
            ym = _model(trial, tau)
            if ym is not None:
                rt = ym - y
                chi2_t = float(rt @ rt)
                if np.isfinite(chi2_t) and chi2_t <= chi2:
                    improved = chi2 - chi2_t
                    theta, r, chi2 = trial, rt, chi2_t
                    lm = max(lm / 3.0, 1e-14)
                    accepted = True
                    break
            lm *= 10.0
        if not accepted:
            break
        if improved <= 1e-15 * max(chi2, 1e-300):
            break
    else:
        raise FitError(f"exponential fit did not converge in {max_iter} "
                       f"iterations (gradient norm {grad_norm:.3e})")
    if not accepted and grad_norm > 1e-6 * max(1.0, chi2):
        raise FitError(f"exponential fit stalled "
                       f"(gradient norm {grad_norm:.3e})")

    a, lam, c = theta
    e = np.exp(lam * tau)
    jac = np.column_stack((e, a * tau * e, np.ones_like(tau)))
    n = idx.size
    s2 = chi2 / max(n - 3, 1)
    try:
        cov = s2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.nan)
    sig2_lam = float(cov[1, 1])
    sig2_c = float(cov[2, 2])
    denom = np.sqrt(sig2_lam * sig2_c)
    rho = float(cov[1, 2] / denom) if denom > 0 else 0.0
    a_abs = float(a * np.exp(-lam * t0))
    return FitResult(lambda_=float(lam), c=float(c), a=a_abs,
                     sigma2_lambda=sig2_lam, sigma2_c=sig2_c,
                     rho_lambda_c=rho, chi2=float(chi2),
                     window=(float(t[0]), float(t[-1])), n_points=int(n),
                     instability_detected=bool(lam > 0.0))


def fit_power(series, window):
    """log-log regression of kappa on the window; returns (amplitude,
    exponent) for kappa ~ amplitude * t^exponent."""
    idx = _window_slice(series, window)
    if idx.size < 2:
        raise WindowError("power-law fit needs at least 2 samples")
    t = series.t[idx]
    y = series.kappa[idx]
    if np.any(y <= 0.0) or np.any(t <= 0.0):
        raise WindowError("power-law window must have positive t and kappa")
    reg = linregress(np.log(t), np.log(y))
    return float(np.exp(reg.intercept)), float(reg.slope)


@dataclass
class HalflifeTable:
    """Appendix-schema rows for one branch; stable points produce no row."""

    branch_label: str
    rows: list
    n_stable: int

    @property
    def all_stable(self):
        return not self.rows

    def to_csv(self, path, comments=()):
        with open(path, "w") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            if self.all_stable:
                fh.write(f"# branch {self.branch_label}: all "
                         f"{self.n_stable} points stable, no rows\n")
            fh.write(TABLE_HEADER + "\n")
            for row in self.rows:
                fh.write(",".join("%.17g" % row[k]
                                  for k in TABLE_HEADER.split(","))
                         + "\n")


def halflife_table(branch, make_run, propagate_fn,
                   threshold=DEFAULT_THRESHOLD,
                   window_points=DEFAULT_WINDOW_POINTS):
    """Propagate each branch point, detect onset, fit, and emit table rows.

    make_run(state) builds the PropagationRun for a point; propagate_fn
    executes it (injected to keep this module import-light). Points whose
    visibility never crosses the threshold contribute no row.
    """
    rows = []
    n_stable = 0
    for state in branch.points:
        try:
            series = propagate_fn(make_run(state))
        except Exception as exc:
            raise type(exc)(f"branch {branch.label} point mu={state.mu:g}: "
                            f"{exc}") from exc
        t_on = detect_onset(series, threshold)
        if t_on is None:
            n_stable += 1
            continue
        t0, t1, short = fit_window_from_onset(series, t_on, window_points)
        fit = fit_exponential(series, (t0, t1))
        fit.short_window = short
        rows.append({"N": state.n_particles, "lambda": fit.lambda_,
                     "c": fit.c, "sigma2_c": fit.sigma2_c,
                     "rho_lambda_c": fit.rho_lambda_c,
                     "sigma2_lambda": fit.sigma2_lambda,
                     "chi2": fit.chi2, "a": fit.a,
                     "tau_half": fit.tau_half, "mu": state.mu,
                     "short_window": short, "fit": fit})
    return HalflifeTable(branch_label=branch.label, rows=rows,
                         n_stable=n_stable)
