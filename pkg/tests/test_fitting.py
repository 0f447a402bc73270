"""Onset detection and exponential fits on synthetic series."""

from types import SimpleNamespace

import numpy as np
import pytest

from gostbec import (FitError, TimeSeries, UsageError, WindowError,
                     detect_onset, fit_exponential, fit_power,
                     fit_window_from_onset, halflife_table)
from gostbec.fitting import TABLE_HEADER, HalflifeTable


def make_series(t, kappa, vis=None):
    t = np.asarray(t, dtype=float)
    one = np.ones_like(t)
    if vis is None:
        vis = one
    return TimeSeries(t=t, kappa=np.asarray(kappa, dtype=float), vis=vis,
                      n=one, e=one, t_kin=one, v_pot=one, w_int=one,
                      vir=np.zeros_like(t))


LAM, AMP, OFF = 1.3, 2.5e-7, 4.0e-6


def exp_series(noise=0.0, rng=None):
    t = np.linspace(0.0, 5.0, 501)
    y = AMP * np.exp(LAM * t) + OFF
    if noise:
        y = y + noise * rng.standard_normal(t.size) * y
    return make_series(t, y)


def test_noiseless_recovery():
    fit = fit_exponential(exp_series(), (1.0, 4.0))
    assert abs(fit.lambda_ - LAM) < 1e-9 * LAM
    assert abs(fit.a - AMP) < 1e-8 * AMP
    assert abs(fit.c - OFF) < 1e-6 * OFF
    assert fit.chi2 < 1e-20
    assert fit.instability_detected
    assert fit.n_points == 301
    assert abs(fit.tau_half - np.log(2.0) / LAM) < 1e-12


def test_window_shift_changes_only_window():
    """a is reported in absolute time, so lambda AND a survive a shift."""
    f1 = fit_exponential(exp_series(), (1.0, 4.0))
    f2 = fit_exponential(exp_series(), (1.5, 4.5))
    assert abs(f1.lambda_ - f2.lambda_) < 1e-7 * LAM
    assert abs(f1.a - f2.a) < 1e-6 * AMP
    assert f1.window == (1.0, 4.0)
    assert f2.window == (1.5, 4.5)


def test_decay_is_not_flagged():
    t = np.linspace(0.0, 5.0, 201)
    fit = fit_exponential(make_series(t, 3.0 * np.exp(-0.7 * t) + 0.1),
                          (0.0, 5.0))
    assert abs(fit.lambda_ + 0.7) < 1e-8
    assert not fit.instability_detected
    assert fit.tau_half < 0


def test_power_law():
    t = np.linspace(0.5, 4.0, 101)
    amp, expo = fit_power(make_series(t, 3.0 * t ** 2), (0.5, 4.0))
    assert abs(amp - 3.0) < 1e-12
    assert abs(expo - 2.0) < 1e-13
    with pytest.raises(WindowError):
        fit_power(make_series(t, -np.ones_like(t)), (0.5, 4.0))


def test_onset_detection():
    t = np.linspace(0.0, 10.0, 201)
    vis = np.where(t < 4.0, 1.0, 1.0 - 1e-3)
    s = make_series(t, np.ones_like(t), vis=vis)
    assert detect_onset(s, threshold=1e-4) == 4.0
    assert detect_onset(s, threshold=1e-2) is None
    flat = make_series(t, np.ones_like(t))
    assert detect_onset(flat) is None
    with pytest.raises(UsageError):
        detect_onset(make_series([], []))
    with pytest.raises(UsageError):
        detect_onset(make_series([0.0, 0.0, 1.0], [1, 1, 1]))


def test_window_from_onset():
    t = np.linspace(0.0, 10.0, 101)
    s = make_series(t, np.ones_like(t))
    t0, t1, short = fit_window_from_onset(s, 2.0, n_points=20)
    assert t0 == 2.0 and t1 == pytest.approx(3.9) and not short
    t0, t1, short = fit_window_from_onset(s, 9.0, n_points=20)
    assert t1 == 10.0 and short
    with pytest.raises(WindowError):
        fit_window_from_onset(s, 11.0)


def test_window_validation():
    s = exp_series()
    with pytest.raises(WindowError):
        fit_exponential(s, (3.0, 2.0))
    with pytest.raises(WindowError):
        fit_exponential(s, (4.0, 9.0))
    with pytest.raises(WindowError):
        fit_exponential(s, (1.0, 1.05))   # < 10 samples


def test_covariance_covers_truth():
    """3 sigma interval from the fit covariance covers lambda >= 95/100."""
    hits = 0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        fit = fit_exponential(exp_series(noise=1e-3, rng=rng), (1.0, 4.0))
        if abs(fit.lambda_ - LAM) <= 3.0 * np.sqrt(fit.sigma2_lambda):
            hits += 1
    assert hits >= 95


def test_correlation_is_bounded():
    fit = fit_exponential(exp_series(noise=1e-3,
                                     rng=np.random.default_rng(5)),
                          (1.0, 4.0))
    assert -1.0 <= fit.rho_lambda_c <= 1.0
    assert fit.sigma2_c > 0


def test_table_header_is_frozen():
    assert TABLE_HEADER == "N,lambda,c,sigma2_c,rho_lambda_c,sigma2_lambda,chi2,a"


def _stub_state(mu, n):
    return SimpleNamespace(mu=mu, n_particles=n)


def test_halflife_table(tmp_path):
    t = np.linspace(0.0, 6.0, 601)
    stable = make_series(t, 1e-12 * np.ones_like(t))
    grow = make_series(t, AMP * np.exp(LAM * t) + OFF,
                       vis=np.where(t < 1.0, 1.0, 1.0 - 1e-3))
    series_for = {10.0: stable, 11.0: grow}
    branch = SimpleNamespace(label="A1",
                             points=[_stub_state(10.0, 100.0),
                                     _stub_state(11.0, 200.0)])
    table = halflife_table(branch, make_run=lambda st: st.mu,
                           propagate_fn=lambda mu: series_for[mu],
                           window_points=400)
    assert table.n_stable == 1
    assert not table.all_stable
    assert len(table.rows) == 1
    row = table.rows[0]
    assert row["N"] == 200.0
    assert abs(row["lambda"] - LAM) < 1e-6
    assert not row["short_window"]
    p = tmp_path / "table.csv"
    table.to_csv(p, comments=("config c0ffee",))
    lines = p.read_text().splitlines()
    assert lines[0] == "# config c0ffee"
    assert lines[1] == TABLE_HEADER
    assert len(lines) == 3

    empty = HalflifeTable(branch_label="A0", rows=[], n_stable=3)
    assert empty.all_stable
    q = tmp_path / "empty.csv"
    empty.to_csv(q)
    text = q.read_text()
    assert "all 3 points stable" in text
    assert text.splitlines()[-1] == TABLE_HEADER


def test_halflife_table_wraps_errors():
    branch = SimpleNamespace(label="B2", points=[_stub_state(9.0, 50.0)])

    def boom(_):
        raise FitError("inner detail")

    with pytest.raises(FitError, match="branch B2 point mu=9"):
        halflife_table(branch, make_run=lambda st: st, propagate_fn=boom)
