import csv

import numpy as np
import pytest

from iwnet.iwn import FitReport, IwnConfig, iwn_fit, iwn_weigh_new
from iwnet.kernel_mmd import weighted_mmd


def small(**kw):
    base = dict(max_iters=60, patience=60, hidden_layers=2, hidden_units=16,
                batch_size=32)
    base.update(kw)
    return IwnConfig(**base)


def _shifted(m=300, seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(0, 1, (m, 2)), rng.normal(1, 1, (m, 2))


def test_config_validation():
    with pytest.raises(ValueError):
        IwnConfig(batch_size=1)
    with pytest.raises(ValueError):
        IwnConfig(max_iters=10, patience=20)
    with pytest.raises(ValueError):
        IwnConfig(sigma_init=0.0)
    with pytest.raises(ValueError):
        IwnConfig(sigma_init=1e7)


def test_output_invariants():
    xs, xt = _shifted()
    w, model, report = iwn_fit(xs, xt, small())
    assert w.shape == (300,)
    assert np.all(w >= 0) and abs(w.mean() - 1) < 1e-8
    assert report.iterations == 60
    assert len(report.sigma_trace) == 60 and np.all(report.sigma_trace > 0)
    assert report.stop_reason == "max_iters"
    assert 0 <= report.best_iter < 60


def test_sigma_trace_starts_at_init():
    xs, xt = _shifted()
    _, _, report = iwn_fit(xs, xt, small())
    assert report.sigma_trace[0] == 0.1


def test_weigh_new_reproduces_fit():
    xs, xt = _shifted()
    w, model, _ = iwn_fit(xs, xt, small())
    assert np.allclose(iwn_weigh_new(model, xs), w, atol=1e-12, rtol=0)


def test_weigh_new_single_and_duplicate_rows():
    xs, xt = _shifted()
    _, model, _ = iwn_fit(xs, xt, small())
    assert iwn_weigh_new(model, xs[:1])[0] == 1.0
    dup = iwn_weigh_new(model, np.vstack([xs[3], xs[3]]))
    assert np.allclose(dup, 1.0, atol=1e-15)


def test_weigh_new_dimension_mismatch():
    xs, xt = _shifted()
    _, model, _ = iwn_fit(xs, xt, small())
    with pytest.raises(ValueError):
        iwn_weigh_new(model, np.zeros((4, 3)))


def test_bad_inputs():
    with pytest.raises(ValueError):
        iwn_fit(np.zeros((0, 2)), np.zeros((3, 2)), small())
    with pytest.raises(ValueError):
        iwn_fit(np.zeros((3, 2)), np.zeros((3, 1)), small())


def test_non_finite_loss_aborts():
    xs, xt = _shifted()
    xs[5, 0] = np.nan
    with pytest.raises(FloatingPointError):
        iwn_fit(xs, xt, small(max_iters=2000, patience=2000))


def test_determinism():
    xs, xt = _shifted()
    a = iwn_fit(xs, xt, small(seed=7))
    b = iwn_fit(xs, xt, small(seed=7))
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[2].batch_mmd_trace, b[2].batch_mmd_trace)
    assert np.array_equal(a[2].sigma_trace, b[2].sigma_trace)
    c = iwn_fit(xs, xt, small(seed=8))
    assert not np.array_equal(a[0], c[0])


def test_early_stop_on_identical_samples():
    x = np.random.default_rng(0).normal(size=(300, 2))
    _, _, report = iwn_fit(x, x, small(max_iters=5000, patience=10))
    assert report.stop_reason == "early_stop"
    assert report.iterations < 500


def test_sigma_clamp_flagged():
    xs, xt = _shifted()
    # at this scale the kernel is nearly flat, so the ascent drives sigma up
    _, _, report = iwn_fit(1e-4 * xs, 1e-4 * xt,
                           small(sigma_init=1e5, lr=1.0))
    assert report.sigma_clamped
    assert np.all(report.sigma_trace <= 1e6 * (1 + 1e-12))
    assert np.all(np.isfinite(report.sigma_trace))


def test_full_mmd_trace_and_callback():
    xs, xt = _shifted()
    calls = []
    _, _, report = iwn_fit(xs, xt, small(trace_full_mmd_every=20),
                           callback=lambda it, model, s: calls.append(it))
    assert sorted(report.full_mmd_trace) == [0, 20, 40, 60]
    assert calls == [20, 40, 60]


def test_trace_csv(tmp_path):
    xs, xt = _shifted()
    _, _, report = iwn_fit(xs, xt, small(trace_full_mmd_every=30))
    report.to_csv(tmp_path / "t.csv")
    with open(tmp_path / "t.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["iteration", "batch_mmd", "sigma", "full_mmd"]
    assert len(rows) == 61
    assert rows[31][3] != "" and rows[2][3] == ""
    assert isinstance(report, FitReport)


def test_fit_lowers_full_mmd_on_shift():
    xs, xt = _shifted(500, seed=3)
    w, _, report = iwn_fit(xs, xt, small(max_iters=400, patience=400,
                                         batch_size=128))
    sigma = report.sigma_trace[report.best_iter]
    assert weighted_mmd(xs, xt, w, sigma).value < \
        weighted_mmd(xs, xt, np.ones(500), sigma).value


@pytest.mark.slow
def test_self_control_near_uniform():
    rng = np.random.default_rng(0)
    xs, xt = rng.normal(size=(2000, 1)), rng.normal(size=(2000, 1))
    w, _, report = iwn_fit(xs, xt, IwnConfig(max_iters=4000, patience=4000))
    assert w.std() / w.mean() < 0.25
    sigma = report.sigma_trace[report.best_iter]
    assert weighted_mmd(xs, xt, w, sigma).value <= \
        1.5 * weighted_mmd(xs, xt, np.ones(2000), sigma).value
