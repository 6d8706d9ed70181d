"""Monte Carlo signal chain for a charge-integration photon detector.

Models the pulse path photon -> photoelectron -> avalanche gain -> integrated
charge -> readout.  Per pulse: photons are drawn from the source (Poisson for
an LED, or an explicit photon-number distribution), thinned binomially by the
quantum efficiency, dark electrons accumulate over the integration window,
the sum is multiplied by the gain and Gaussian readout noise is added.  All
charges are in electrons; the amplifier voltage chain is out of scope.

Defaults follow the detector operating point this models: eta 0.6 (indirectly
determined from a 69% room-temperature catalog figure), gain 10 at 90 V bias,
dark rate 1 e/s at 77 K, readout noise 7 e RMS at 20 Hz sampling.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks

# Peak detection operating constants, tuned once against simulated histograms
# at the default operating point (2000 pulses): the smoothing kernel suppresses
# Poisson bin ripple without merging adjacent photon-number peaks, and the
# shared height and prominence floor keeps noise shoulders out.
PEAK_SMOOTHING_GAIN_FRACTION = 0.225
PEAK_THRESHOLD_FRACTION = 0.05
DEFAULT_BIN_WIDTH_E = 1.0


@dataclass(frozen=True)
class CipdConfig:
    """Detector operating point.  integration_window defaults to one sample
    period (1 / sample_rate).  gain_dispersion is an optional multiplicative
    gain-noise hook (fractional RMS per pulse), off by default."""

    eta: float = 0.6
    gain: float = 10.0
    dark_rate: float = 1.0
    readout_noise: float = 7.0
    sample_rate: float = 20.0
    integration_window: float = None
    gain_dispersion: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must be in [0, 1]")
        if self.gain < 1.0:
            raise ValueError("gain must be >= 1")
        if self.dark_rate < 0.0:
            raise ValueError("dark_rate must be nonnegative")
        if self.readout_noise < 0.0:
            raise ValueError("readout_noise must be nonnegative")
        if self.sample_rate <= 0.0:
            raise ValueError("sample_rate must be positive")
        if self.gain_dispersion < 0.0:
            raise ValueError("gain_dispersion must be nonnegative")
        if self.integration_window is None:
            object.__setattr__(self, "integration_window", 1.0 / self.sample_rate)
        elif self.integration_window <= 0.0:
            raise ValueError("integration_window must be positive")

    @property
    def dark_per_window(self):
        return self.dark_rate * self.integration_window


@dataclass(frozen=True)
class PulseRecord:
    true_photons: int
    photoelectrons: int
    dark_electrons: int
    output_charge: float


class PulseRecords:
    """Column store of simulated pulses; indexes like a list of PulseRecord."""

    def __init__(self, true_photons, photoelectrons, dark_electrons, output_charge):
        self.true_photons = np.asarray(true_photons, dtype=int)
        self.photoelectrons = np.asarray(photoelectrons, dtype=int)
        self.dark_electrons = np.asarray(dark_electrons, dtype=int)
        self.output_charge = np.asarray(output_charge, dtype=float)
        n = len(self.output_charge)
        if not (len(self.true_photons) == len(self.photoelectrons) == len(self.dark_electrons) == n):
            raise ValueError("column lengths differ")
        if np.any(self.photoelectrons > self.true_photons):
            raise ValueError("photoelectrons exceed true photons")
        if not np.all(np.isfinite(self.output_charge)):
            raise ValueError("non-finite output charge")

    def __len__(self):
        return len(self.output_charge)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return PulseRecords(self.true_photons[i], self.photoelectrons[i],
                                self.dark_electrons[i], self.output_charge[i])
        return PulseRecord(int(self.true_photons[i]), int(self.photoelectrons[i]),
                           int(self.dark_electrons[i]), float(self.output_charge[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class Histogram:
    """Charge histogram with edges centered so that multiples of the bin
    width fall mid-bin, never on an edge (clusters at integer charges would
    otherwise straddle two bins)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    n_events: int

    def __post_init__(self):
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("bin edges must increase")
        if int(self.counts.sum()) != self.n_events:
            raise ValueError("counts do not sum to n_events")

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def probability(self):
        return self.counts / self.n_events

    def scaled(self, factor):
        """Same counts on a rescaled axis (e.g. 1/gain for the
        input-referred photoelectron view)."""
        return Histogram(self.bin_edges * factor, self.counts, self.n_events)


@dataclass(frozen=True)
class DarkDriftReport:
    expected_electrons: float
    budget: float = None
    exceeded: bool = None


def _charges(records):
    if isinstance(records, PulseRecords):
        return records.output_charge
    return np.asarray(records, dtype=float)


def simulate_pulses(config, source, n_pulses, rng=None):
    """Run the pulse chain.  source is either a Poisson mean (LED light) or a
    photon-number pmf indexed from 0 (e.g. [0, 1] for a deterministic
    one-photon source)."""
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if np.isscalar(source):
        if source < 0:
            raise ValueError("source mean must be nonnegative")
        photons = gen.poisson(float(source), size=n_pulses)
    else:
        pmf = np.asarray(source, dtype=float)
        if pmf.ndim != 1 or np.any(pmf < 0) or not math.isclose(pmf.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("photon-number distribution must be a pmf")
        photons = gen.choice(len(pmf), size=n_pulses, p=pmf / pmf.sum())
    pe = gen.binomial(photons, config.eta)
    dark = gen.poisson(config.dark_per_window, size=n_pulses)
    gain = config.gain
    if config.gain_dispersion > 0.0:
        gain = config.gain * (1.0 + config.gain_dispersion * gen.standard_normal(n_pulses))
    charge = gain * (pe + dark)
    if config.readout_noise > 0.0:
        charge = charge + config.readout_noise * gen.standard_normal(n_pulses)
    return PulseRecords(photons, pe, dark, np.asarray(charge, dtype=float))


def analytic_moments(config, source_mean):
    """Mean and variance of the output charge for a Poisson source.

    pe + dark is Poisson with rate lam = eta * mu + dark_rate * window, so
    mean = g * lam and var = g^2 * lam + readout^2, plus the gain-dispersion
    term g^2 * d^2 * E[(pe+dark)^2] when the hook is on.
    """
    lam = config.eta * source_mean + config.dark_per_window
    mean = config.gain * lam
    var = config.gain**2 * lam + config.readout_noise**2
    if config.gain_dispersion > 0.0:
        var += config.gain**2 * config.gain_dispersion**2 * (lam + lam**2)
    return mean, var


def histogram(records, bin_width=DEFAULT_BIN_WIDTH_E):
    """Bin output charges with edges offset half a width off the origin."""
    charges = _charges(records)
    if charges.size == 0:
        raise ValueError("no records to histogram")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    lo = math.floor(charges.min() / bin_width + 0.5)
    hi = math.floor(charges.max() / bin_width + 0.5)
    edges = (np.arange(lo, hi + 2) - 0.5) * bin_width
    counts, _ = np.histogram(charges, bins=edges)
    return Histogram(edges, counts, int(charges.size))


def detect_peaks(hist, gain):
    """Charge positions of resolved photon-number peaks.

    The probability histogram is smoothed with a Gaussian kernel of width
    PEAK_SMOOTHING_GAIN_FRACTION * gain, then peaks must clear both a height
    and a prominence floor of PEAK_THRESHOLD_FRACTION of the smoothed mode
    and sit at least half a gain apart.
    """
    width = float(hist.bin_edges[1] - hist.bin_edges[0])
    smooth = gaussian_filter1d(hist.probability, PEAK_SMOOTHING_GAIN_FRACTION * gain / width)
    floor = PEAK_THRESHOLD_FRACTION * smooth.max()
    distance = max(1, int(round(0.5 * gain / width)))
    idx, _ = find_peaks(smooth, height=floor, prominence=floor, distance=distance)
    return hist.centers[idx]


def resolution_metric(config):
    """Charge separation of adjacent photon numbers over RMS readout noise."""
    if config.gain <= 0:
        raise ValueError("gain must be positive")
    if config.readout_noise == 0.0:
        warnings.warn("infinite resolution: readout noise is zero", RuntimeWarning)
        return math.inf
    return config.gain / config.readout_noise


def required_noise(config, target_snr):
    """Readout noise (e RMS) needed to reach a target resolution."""
    if target_snr <= 0:
        raise ValueError("target_snr must be positive")
    return config.gain / target_snr


def dark_drift(config, duration, budget=None):
    """Expected dark electrons accumulated over a duration, with an optional
    budget check."""
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    expected = config.dark_rate * duration
    exceeded = None if budget is None else bool(expected > budget)
    return DarkDriftReport(expected, budget, exceeded)


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["true_photons", "photoelectrons", "dark_electrons", "output_charge"])
        for i in range(len(records)):
            w.writerow([int(records.true_photons[i]), int(records.photoelectrons[i]),
                        int(records.dark_electrons[i]), repr(float(records.output_charge[i]))])


def write_histogram_csv(hist, path):
    prob = hist.probability
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "count", "probability"])
        for i in range(len(hist.counts)):
            w.writerow([repr(float(hist.bin_edges[i])), repr(float(hist.bin_edges[i + 1])),
                        int(hist.counts[i]), repr(float(prob[i]))])


def write_histogram_json(hist, path, label=""):
    prob = hist.probability
    payload = {
        "label": label,
        "n_events": int(hist.n_events),
        "bin_edges": [float(v) for v in hist.bin_edges],
        "counts": [int(v) for v in hist.counts],
        "probability": [float(v) for v in prob],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
