"""Tests for the charge-integration detector signal chain."""

import math

import numpy as np
import pytest
from scipy import stats

from cvsim import cipd


def test_config_defaults_and_validation():
    cfg = cipd.CipdConfig()
    assert cfg.eta == 0.6
    assert cfg.gain == 10.0
    assert cfg.dark_rate == 1.0
    assert cfg.readout_noise == 7.0
    assert cfg.integration_window == pytest.approx(0.05)
    assert cfg.dark_per_window == pytest.approx(0.05)
    assert cipd.CipdConfig(integration_window=0.2).integration_window == 0.2
    for bad in (dict(eta=1.2), dict(eta=-0.1), dict(gain=0.5), dict(dark_rate=-1),
                dict(readout_noise=-1), dict(sample_rate=0), dict(gain_dispersion=-0.1),
                dict(integration_window=0.0)):
        with pytest.raises(ValueError):
            cipd.CipdConfig(**bad)


def test_unit_chain_is_exact():
    # eta=1, gain=1, no dark, no noise, deterministic single photon source
    cfg = cipd.CipdConfig(eta=1.0, gain=1.0, dark_rate=0.0, readout_noise=0.0)
    rec = cipd.simulate_pulses(cfg, [0.0, 1.0], 500, rng=2)
    assert np.all(rec.true_photons == 1)
    assert np.all(rec.photoelectrons == 1)
    assert np.all(rec.dark_electrons == 0)
    assert np.all(rec.output_charge == 1.0)


@pytest.mark.parametrize("mu", [0.5, 2.0])
def test_charge_moments_match_analytics(mu):
    cfg = cipd.CipdConfig()
    n = 100_000
    rec = cipd.simulate_pulses(cfg, mu, n, rng=7)
    mean, var = cipd.analytic_moments(cfg, mu)
    lam = cfg.eta * mu + cfg.dark_per_window
    se_mean = math.sqrt(var / n)
    # Var(s^2) ~ (kappa4 + 2 sigma^4)/n with kappa4 = g^4 lam + 4 g^2 lam r^2
    # contributions folded in through the cumulant of the scaled Poisson
    kappa4 = cfg.gain**4 * lam
    se_var = math.sqrt((kappa4 + 2 * var**2) / n)
    assert rec.output_charge.mean() == pytest.approx(mean, abs=4 * se_mean)
    assert rec.output_charge.var() == pytest.approx(var, abs=4 * se_var)


def test_mean_monotone_in_eta_resolution_monotone_in_noise():
    etas = np.linspace(0.0, 1.0, 11)
    means = [cipd.analytic_moments(cipd.CipdConfig(eta=e), 2.0)[0] for e in etas]
    assert np.all(np.diff(means) >= 0)
    noises = np.linspace(0.5, 20.0, 40)
    res = [cipd.resolution_metric(cipd.CipdConfig(readout_noise=s)) for s in noises]
    assert np.all(np.diff(res) <= 0)
    # and the same ordering shows up in matched-seed simulations
    lo = cipd.simulate_pulses(cipd.CipdConfig(eta=0.3), 2.0, 50_000, rng=11)
    hi = cipd.simulate_pulses(cipd.CipdConfig(eta=0.9), 2.0, 50_000, rng=11)
    assert hi.output_charge.mean() > lo.output_charge.mean()


def test_binomial_thinning_composes_to_poisson():
    # Poisson(mu) photons thinned by eta must be indistinguishable from a
    # direct Poisson(eta*mu) draw: one-sample chi-square against the pmf
    cfg = cipd.CipdConfig(dark_rate=0.0, readout_noise=0.0)
    mu, n = 2.0, 100_000
    rec = cipd.simulate_pulses(cfg, mu, n, rng=12345)
    pe = rec.photoelectrons
    kmax = pe.max()
    observed = np.bincount(pe, minlength=kmax + 1).astype(float)
    expected = stats.poisson.pmf(np.arange(kmax + 1), cfg.eta * mu) * n
    expected[-1] += stats.poisson.sf(kmax, cfg.eta * mu) * n
    # pool the sparse tail so every expected count is at least 5
    while expected[-1] < 5 and len(expected) > 2:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected, observed = expected[:-1], observed[:-1]
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    p = stats.chi2.sf(chi2, df=len(expected) - 1)
    assert p > 0.01


def test_noiseless_integer_gain_grid():
    cfg = cipd.CipdConfig(readout_noise=0.0, dark_rate=0.0)
    rec = cipd.simulate_pulses(cfg, 2.0, 20_000, rng=3)
    assert np.all(rec.output_charge % cfg.gain == 0.0)
    hist = cipd.histogram(rec)
    on_grid = np.isclose(hist.centers % cfg.gain, 0.0) | np.isclose(hist.centers % cfg.gain, cfg.gain)
    assert hist.counts[~on_grid].sum() == 0


def test_histogram_invariants():
    hist = cipd.histogram(np.array([10.0]), bin_width=1.0)
    assert hist.n_events == 1
    assert hist.counts.tolist() == [1]
    # exact multiples of the width land mid-bin, not on an edge
    assert hist.bin_edges[0] == 9.5 and hist.bin_edges[1] == 10.5
    assert hist.centers[0] == 10.0

    charges = np.array([0.0, 0.4, 9.9, 10.1, 20.0])
    hist = cipd.histogram(charges, bin_width=1.0)
    assert hist.counts.sum() == hist.n_events == 5
    assert np.all(np.diff(hist.bin_edges) > 0)
    assert hist.probability.sum() == pytest.approx(1.0)

    scaled = hist.scaled(0.1)
    np.testing.assert_allclose(scaled.bin_edges, hist.bin_edges * 0.1)
    np.testing.assert_array_equal(scaled.counts, hist.counts)

    with pytest.raises(ValueError):
        cipd.histogram(np.array([]))
    with pytest.raises(ValueError):
        cipd.histogram(charges, bin_width=0.0)


def test_peaks_merge_at_current_noise():
    cfg = cipd.CipdConfig()
    rec = cipd.simulate_pulses(cfg, 2.0, 2000, rng=0)
    peaks = cipd.detect_peaks(cipd.histogram(rec), cfg.gain)
    assert len(peaks) <= 1


def test_peaks_resolve_at_one_third_noise():
    cfg = cipd.CipdConfig(readout_noise=7.0 / 3.0)
    rec = cipd.simulate_pulses(cfg, 2.0, 2000, rng=0)
    peaks = cipd.detect_peaks(cipd.histogram(rec), cfg.gain)
    assert len(peaks) >= 3
    # each resolved peak sits on the photon-number charge grid
    offsets = np.abs(peaks / cfg.gain - np.round(peaks / cfg.gain))
    assert np.all(offsets <= 0.25)


def test_resolution_metric_values():
    assert cipd.resolution_metric(cipd.CipdConfig()) == pytest.approx(1.43, abs=0.005)
    snr = cipd.resolution_metric(cipd.CipdConfig(readout_noise=7.0 / 3.0))
    assert snr == pytest.approx(4.29, abs=0.005)
    assert snr > 4.0
    assert cipd.resolution_metric(cipd.CipdConfig(readout_noise=2.5)) == 4.0
    with pytest.warns(RuntimeWarning):
        assert cipd.resolution_metric(cipd.CipdConfig(readout_noise=0.0)) == math.inf


def test_required_noise_values():
    cfg = cipd.CipdConfig()
    assert cipd.required_noise(cfg, 4.0) == 2.5
    assert cipd.required_noise(cfg, 10.0 / 7.0) == pytest.approx(7.0)
    assert cipd.required_noise(cfg, math.inf) == 0.0
    with pytest.raises(ValueError):
        cipd.required_noise(cfg, 0.0)


def test_dark_drift():
    cfg = cipd.CipdConfig()
    assert cipd.dark_drift(cfg, 1.0).expected_electrons == 1.0
    assert cipd.dark_drift(cipd.CipdConfig(dark_rate=0.0), 5.0).expected_electrons == 0.0
    assert cipd.dark_drift(cfg, cfg.integration_window).expected_electrons == pytest.approx(0.05)
    report = cipd.dark_drift(cfg, 2.0, budget=1.0)
    assert report.exceeded is True
    assert cipd.dark_drift(cfg, 0.5, budget=1.0).exceeded is False
    assert cipd.dark_drift(cfg, 2.0).exceeded is None
    with pytest.raises(ValueError):
        cipd.dark_drift(cfg, -1.0)


def test_seed_determinism():
    cfg = cipd.CipdConfig()
    a = cipd.simulate_pulses(cfg, 2.0, 1000, rng=5)
    b = cipd.simulate_pulses(cfg, 2.0, 1000, rng=5)
    c = cipd.simulate_pulses(cfg, 2.0, 1000, rng=6)
    np.testing.assert_array_equal(a.output_charge, b.output_charge)
    np.testing.assert_array_equal(a.true_photons, b.true_photons)
    assert not np.array_equal(a.output_charge, c.output_charge)


def test_records_container():
    cfg = cipd.CipdConfig()
    rec = cipd.simulate_pulses(cfg, 1.0, 100, rng=4)
    assert len(rec) == 100
    one = rec[3]
    assert isinstance(one, cipd.PulseRecord)
    assert one.photoelectrons <= one.true_photons
    assert isinstance(one.output_charge, float)
    sl = rec[10:20]
    assert len(sl) == 10
    assert sum(1 for _ in sl) == 10
    np.testing.assert_array_equal(sl.output_charge, rec.output_charge[10:20])
    with pytest.raises(ValueError):
        cipd.PulseRecords([1], [2], [0], [5.0])  # pe > photons


def test_source_validation():
    cfg = cipd.CipdConfig()
    with pytest.raises(ValueError):
        cipd.simulate_pulses(cfg, -1.0, 10, rng=0)
    with pytest.raises(ValueError):
        cipd.simulate_pulses(cfg, [0.5, 0.2], 10, rng=0)  # pmf sums to 0.7
    with pytest.raises(ValueError):
        cipd.simulate_pulses(cfg, 1.0, 0, rng=0)


def test_gain_dispersion_hook():
    base = cipd.CipdConfig()
    noisy = cipd.CipdConfig(gain_dispersion=0.1)
    m0, v0 = cipd.analytic_moments(base, 2.0)
    m1, v1 = cipd.analytic_moments(noisy, 2.0)
    assert m1 == m0
    assert v1 > v0
    n = 200_000
    rec = cipd.simulate_pulses(noisy, 2.0, n, rng=8)
    se = math.sqrt(2 * v1**2 / n) * 2  # loose: dispersion fattens the tails
    assert rec.output_charge.var() == pytest.approx(v1, abs=4 * se)


def test_writers_deterministic(tmp_path):
    cfg = cipd.CipdConfig()
    rec = cipd.simulate_pulses(cfg, 2.0, 50, rng=9)
    hist = cipd.histogram(rec)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    cipd.write_histogram_csv(hist, p1)
    cipd.write_histogram_csv(hist, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().splitlines()[0] == "bin_left,bin_right,count,probability"

    r1, r2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    cipd.write_records_csv(rec, r1)
    cipd.write_records_csv(rec, r2)
    assert r1.read_bytes() == r2.read_bytes()
    header = r1.read_text().splitlines()[0]
    assert header == "true_photons,photoelectrons,dark_electrons,output_charge"

    j1 = tmp_path / "h.json"
    cipd.write_histogram_json(hist, j1, label="charge")
    body = j1.read_text()
    assert body.endswith("\n")
    import json
    data = json.loads(body)
    assert data["n_events"] == 50
    assert sum(data["counts"]) == 50
