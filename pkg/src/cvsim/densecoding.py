"""Sideband dense coding on an EPR beam pair.

Two OPOs squeezed at the same r (one in x, one in p) interfere on a 50:50
splitter to give the EPR pair.  AM/PM tones at chosen sideband frequencies are
modeled per frequency bin: each bin is an independent mode pair carrying that
bin's displacement.  The Bell receiver recombines the beams on a second 50:50
splitter and homodynes x on the difference port and p on the sum port; both
decoded quadratures sit at the single-OPO squeezed variance (the -2 dB floor
at the default r) while each tone appears only in its own quadrature.

Spectrum-analyzer style powers are reported as 10*log10((Var + mean^2)/0.5),
i.e. noise floor plus coherent tone power relative to shot noise.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import gaussian
from .gaussian import r_for_noise_db

DEFAULT_R = r_for_noise_db(2.0)

# decoded tone ~10 dB above the -2 dB floor: 10*log10((2.5^2/2) / (e^{-2r}/2))
DEFAULT_TONE_AMPLITUDE = 2.5

AM_FREQUENCY_HZ = 1.3e6
PM_FREQUENCY_HZ = 1.1e6


@dataclass(frozen=True)
class SidebandBin:
    """One analysis bin: tone amplitudes in shot-pair units, channel loss eta."""

    frequency_hz: float
    squeezing_r: float
    am_amplitude: float
    pm_amplitude: float
    loss_eta: float

    def __post_init__(self):
        if not 0.0 <= self.loss_eta <= 1.0:
            raise ValueError(f"loss_eta must be in [0, 1], got {self.loss_eta}")
        if self.frequency_hz <= 0:
            raise ValueError("frequency must be positive")


@dataclass(frozen=True)
class SidebandPlan:
    bins: tuple
    resolution_bandwidth_hz: float

    def __post_init__(self):
        bins = tuple(self.bins)
        if not bins:
            raise ValueError("plan needs at least one bin")
        freqs = [b.frequency_hz for b in bins]
        if any(f2 <= f1 for f1, f2 in zip(freqs, freqs[1:])):
            raise ValueError("bin frequencies must be strictly increasing")
        if self.resolution_bandwidth_hz <= 0:
            raise ValueError("resolution bandwidth must be positive")
        object.__setattr__(self, "bins", bins)


@dataclass(frozen=True)
class NoiseSpectrum:
    """Per-bin powers (dB relative to shot noise) for one trace."""

    label: str
    frequency_hz: np.ndarray
    x_power_db: np.ndarray
    p_power_db: np.ndarray


@dataclass(frozen=True)
class PhaseSweepTrace:
    label: str
    lo_phase_rad: np.ndarray
    power_db: np.ndarray


def build_epr(r=DEFAULT_R):
    """EPR pair: x-squeezed and p-squeezed vacua on a 50:50 splitter.

    Var(x1 - x2) = Var(p1 + p2) = e^{-2r}; each beam alone is thermal with
    variance cosh(2r)/2 in every quadrature.
    """
    src = gaussian.tensor(
        gaussian.squeezed_vacuum(r, 0.0),
        gaussian.squeezed_vacuum(r, math.pi / 2),
    )
    return gaussian.beamsplitter(src, 0, 1, 0.5)


def encode(state, am, pm, transmittance=0.01, mode=0):
    """Write AM/PM tone amplitudes onto one beam as a phase-space displacement.

    The physical encoder reflects the beam off a mirror of transmittance T
    with a bright beam injected through the back; the bright amplitude is
    scaled so the mean shift is exactly (am, pm).  transmittance=0 requests
    the ideal displacement limit.
    """
    if transmittance == 0.0:
        return gaussian.displace(state, mode, (am + 1j * pm) / math.sqrt(2.0))
    bright = (am + 1j * pm) / math.sqrt(2.0 * transmittance)
    return gaussian.mirror_displace(state, mode, bright, transmittance)


def bell_measure(state, n_samples=0, rng=None):
    """Joint x/p measurement of a two-mode state.

    Recombines the beams on a 50:50 splitter, then homodynes x on the
    difference port and p on the sum port.  For a tone (am, pm) encoded on
    mode 0 the decoded means are -am/sqrt(2) and +pm/sqrt(2).  Returns
    (x_minus, p_plus) HomodyneResults.
    """
    if state.num_modes != 2:
        raise ValueError("bell_measure expects a two-mode state")
    mixed = gaussian.beamsplitter(state, 0, 1, 0.5)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x_minus = gaussian.homodyne(mixed, 1, 0.0, n_samples=n_samples, rng=gen)
    p_plus = gaussian.homodyne(mixed, 0, math.pi / 2, n_samples=n_samples, rng=gen)
    return x_minus, p_plus


def _power_db(mean, variance):
    return 10.0 * math.log10((variance + mean * mean) / gaussian.VACUUM_VAR)


def _result_power_db(res, use_samples):
    if use_samples:
        m = float(res.samples.mean())
        v = float(res.samples.var(ddof=1))
        return _power_db(m, v)
    return _power_db(res.mean, res.variance)


def run_spectrum(plan, n_samples=0, seed=None, mirror_transmittance=0.0):
    """Shot / single-EPR-beam / Bell-output spectra over the plan's bins.

    Each bin is an independent mode pair at that sideband frequency: build the
    EPR pair, encode the bin's tone amplitudes, apply the channel loss to the
    encoded beam, Bell-measure.  The shot trace is the vacuum reference (0 dB
    by construction) and the EPR trace monitors one beam of the lossless pair.

    With n_samples > 0 every reported power comes from that many homodyne
    samples per bin (per-bin child seeds derived from `seed`), otherwise the
    analytic marginals are used.
    """
    bins = plan.bins
    mc = n_samples > 0
    seeds = np.random.SeedSequence(seed).spawn(3 * len(bins)) if mc else [None] * (3 * len(bins))

    freq = np.array([b.frequency_hz for b in bins])
    out = {}
    shot_x, shot_p, epr_x, epr_p, bell_x, bell_p = (np.empty(len(bins)) for _ in range(6))
    for i, b in enumerate(bins):
        vac = gaussian.vacuum(1)
        if mc:
            gen = np.random.default_rng(seeds[3 * i])
            rx = gaussian.homodyne(vac, 0, 0.0, n_samples=n_samples, rng=gen)
            rp = gaussian.homodyne(vac, 0, math.pi / 2, n_samples=n_samples, rng=gen)
        else:
            rx = gaussian.homodyne(vac, 0, 0.0)
            rp = gaussian.homodyne(vac, 0, math.pi / 2)
        shot_x[i] = _result_power_db(rx, mc)
        shot_p[i] = _result_power_db(rp, mc)

        epr = build_epr(b.squeezing_r)
        if mc:
            gen = np.random.default_rng(seeds[3 * i + 1])
            rx = gaussian.homodyne(epr, 0, 0.0, n_samples=n_samples, rng=gen)
            rp = gaussian.homodyne(epr, 0, math.pi / 2, n_samples=n_samples, rng=gen)
        else:
            rx = gaussian.homodyne(epr, 0, 0.0)
            rp = gaussian.homodyne(epr, 0, math.pi / 2)
        epr_x[i] = _result_power_db(rx, mc)
        epr_p[i] = _result_power_db(rp, mc)

        sent = encode(epr, b.am_amplitude, b.pm_amplitude, mirror_transmittance)
        sent = gaussian.loss(sent, 0, b.loss_eta)
        gen = np.random.default_rng(seeds[3 * i + 2]) if mc else None
        x_minus, p_plus = bell_measure(sent, n_samples=n_samples if mc else 0, rng=gen)
        bell_x[i] = _result_power_db(x_minus, mc)
        bell_p[i] = _result_power_db(p_plus, mc)

    out["shot"] = NoiseSpectrum("shot", freq, shot_x, shot_p)
    out["epr"] = NoiseSpectrum("epr", freq, epr_x, epr_p)
    out["bell"] = NoiseSpectrum("bell", freq, bell_x, bell_p)
    return out


def two_tone_plan(
    n_bins=33,
    f_lo=0.8e6,
    f_hi=1.6e6,
    r=DEFAULT_R,
    am_frequency=AM_FREQUENCY_HZ,
    pm_frequency=PM_FREQUENCY_HZ,
    amplitude=DEFAULT_TONE_AMPLITUDE,
    loss_eta=1.0,
):
    """AM tone at one bin, PM tone at another, quiet bins elsewhere.

    Tone frequencies snap to the nearest bin of the linspace grid.
    """
    freqs = np.linspace(f_lo, f_hi, n_bins)
    i_am = int(np.argmin(np.abs(freqs - am_frequency)))
    i_pm = int(np.argmin(np.abs(freqs - pm_frequency)))
    if i_am == i_pm:
        raise ValueError("AM and PM tones landed on the same bin")
    bins = []
    for i, f in enumerate(freqs):
        bins.append(SidebandBin(
            frequency_hz=float(f),
            squeezing_r=r,
            am_amplitude=amplitude if i == i_am else 0.0,
            pm_amplitude=amplitude if i == i_pm else 0.0,
            loss_eta=loss_eta,
        ))
    rbw = (f_hi - f_lo) / (n_bins - 1) if n_bins > 1 else f_hi - f_lo
    return SidebandPlan(tuple(bins), rbw)


DEFAULT_SWEEP_ANGLES = np.linspace(0.0, math.pi, 64, endpoint=False)


def phase_sweep(state_kind, lo_phases=None, r=DEFAULT_R):
    """Homodyne noise power vs LO angle for 'shot', 'epr' or 'squeezed'.

    shot is flat at 0 dB; a single EPR beam is flat at 10*log10(cosh 2r);
    squeezed vacuum swings between -/+ the squeezing dB.
    """
    if lo_phases is None:
        lo_phases = DEFAULT_SWEEP_ANGLES
    lo_phases = np.asarray(lo_phases, dtype=float)
    if state_kind == "shot":
        state, mode = gaussian.vacuum(1), 0
    elif state_kind == "epr":
        state, mode = build_epr(r), 0
    elif state_kind == "squeezed":
        state, mode = gaussian.squeezed_vacuum(r, 0.0), 0
    else:
        raise ValueError(f"unknown state kind {state_kind!r}")
    power = np.array([
        gaussian.noise_power_db(gaussian.homodyne(state, mode, th).variance)
        for th in lo_phases
    ])
    return PhaseSweepTrace(state_kind, lo_phases, power)


# ---------------------------------------------------------------------------
# file output


def _fmt(v):
    return repr(float(v))


def write_spectra_csv(spectra, path):
    """One row per bin: frequency, then x/p power columns per trace."""
    labels = list(spectra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["frequency_hz"]
        for lab in labels:
            header += [f"{lab}_x_db", f"{lab}_p_db"]
        w.writerow(header)
        n = spectra[labels[0]].frequency_hz.size
        for i in range(n):
            row = [_fmt(spectra[labels[0]].frequency_hz[i])]
            for lab in labels:
                row += [_fmt(spectra[lab].x_power_db[i]), _fmt(spectra[lab].p_power_db[i])]
            w.writerow(row)


def write_spectra_json(spectra, path):
    doc = {"traces": [
        {
            "label": s.label,
            "frequency_hz": [float(v) for v in s.frequency_hz],
            "x_power_db": [float(v) for v in s.x_power_db],
            "p_power_db": [float(v) for v in s.p_power_db],
        }
        for s in spectra.values()
    ]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_phase_sweep_csv(traces, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phase_rad"] + [f"{t.label}_db" for t in traces])
        for i in range(traces[0].lo_phase_rad.size):
            w.writerow([_fmt(traces[0].lo_phase_rad[i])] + [_fmt(t.power_db[i]) for t in traces])


def write_phase_sweep_json(traces, path):
    doc = {"traces": [
        {
            "label": t.label,
            "lo_phase_rad": [float(v) for v in t.lo_phase_rad],
            "power_db": [float(v) for v in t.power_db],
        }
        for t in traces
    ]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
