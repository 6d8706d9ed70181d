"""Gaussian states and Gaussian operations.

Conventions used throughout the package:

    hbar = 1,  x = (a + a^dag)/sqrt(2),  p = (a - a^dag)/(i sqrt(2)),  [x, p] = i

so the vacuum has Var(x) = Var(p) = 1/2.  Quadratures are ordered
(x1, p1, x2, p2, ...) and the symplectic form is Omega = diag of [[0, 1], [-1, 0]]
blocks.  Noise powers in dB are relative to this shot-noise unit:
10*log10(V / 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

VACUUM_VAR = 0.5

# Guard against absurd squeezing inputs (e^{2r} overflows any sensible use well
# before this; a typo like r=23 instead of 0.23 should fail loudly).
MAX_SQUEEZING_R = 10.0

_SYMMETRY_TOL = 1e-10
_UNCERTAINTY_TOL = 1e-9
_SYMPLECTIC_TOL = 1e-10


def omega(num_modes):
    """Symplectic form for the interleaved (x1, p1, x2, p2, ...) ordering."""
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * num_modes, 2 * num_modes))
    for k in range(num_modes):
        out[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = w
    return out


def rotation2(theta):
    """2x2 phase-space rotation: a -> e^{i theta} a."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GaussianState:
    """Gaussian state of M modes: mean vector (2M,) and covariance matrix (2M, 2M).

    Validated on construction: cov must be symmetric and satisfy the
    uncertainty relation V + i*Omega/2 >= 0 (up to numerical tolerance).
    Instances are immutable; operations return new states.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _readonly(self.mean)
        cov = _readonly(self.cov)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"shape mismatch: mean {mean.shape}, cov {cov.shape}")
        if mean.size % 2 != 0 or mean.size == 0:
            raise ValueError("mean length must be 2*num_modes")
        scale = max(1.0, np.abs(cov).max())
        if np.abs(cov - cov.T).max() > _SYMMETRY_TOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        m = cov.astype(complex) + 0.5j * omega(mean.size // 2)
        lam = np.linalg.eigvalsh(m)
        if lam.min() < -_UNCERTAINTY_TOL:
            raise ValueError(
                f"covariance violates the uncertainty relation "
                f"(min eigenvalue of V + i*Omega/2 is {lam.min():.3e})"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def num_modes(self):
        return self.mean.size // 2

    def mode_mean(self, mode):
        """(x, p) mean of one mode."""
        return self.mean[2 * mode : 2 * mode + 2].copy()

    def mode_cov(self, mode):
        """2x2 covariance block of one mode."""
        return self.cov[2 * mode : 2 * mode + 2, 2 * mode : 2 * mode + 2].copy()

    def reduced(self, modes):
        """Partial trace down to the given modes (in the given order)."""
        idx = []
        for m in modes:
            idx += [2 * m, 2 * m + 1]
        idx = np.array(idx)
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def purity(self):
        """Tr rho^2 = 1/sqrt(det(2V)) for Gaussian states."""
        return 1.0 / math.sqrt(np.linalg.det(2.0 * self.cov))


@dataclass(frozen=True)
class SymplecticOp:
    """Affine Gaussian unitary: quadratures map as r -> S r + d.

    S is checked against S^T Omega S = Omega on construction.
    """

    matrix: np.ndarray
    displacement: np.ndarray = field(default=None)

    def __post_init__(self):
        s = _readonly(self.matrix)
        n = s.shape[0]
        if s.shape != (n, n) or n % 2 != 0:
            raise ValueError("symplectic matrix must be 2M x 2M")
        d = self.displacement
        d = np.zeros(n) if d is None else _readonly(d)
        if d.shape != (n,):
            raise ValueError("displacement must have length 2M")
        w = omega(n // 2)
        if np.abs(s.T @ w @ s - w).max() > _SYMPLECTIC_TOL:
            raise ValueError("matrix is not symplectic")
        object.__setattr__(self, "matrix", s)
        object.__setattr__(self, "displacement", d)

    @property
    def num_modes(self):
        return self.matrix.shape[0] // 2

    def apply(self, state):
        s = self.matrix
        if state.mean.size != s.shape[0]:
            raise ValueError("operator and state mode counts differ")
        return GaussianState(s @ state.mean + self.displacement, s @ state.cov @ s.T)

    def compose(self, other):
        """self after other: (S1, d1) * (S2, d2) = (S1 S2, S1 d2 + d1)."""
        return SymplecticOp(
            self.matrix @ other.matrix,
            self.matrix @ other.displacement + self.displacement,
        )

    def inverse(self):
        # symplectic inverse: S^{-1} = Omega^T S^T Omega
        w = omega(self.num_modes)
        sinv = w.T @ self.matrix.T @ w
        return SymplecticOp(sinv, -sinv @ self.displacement)


@dataclass(frozen=True)
class HomodyneResult:
    """Outcome statistics of homodyning one mode at LO angle theta.

    The measured quadrature is x_theta = x cos(theta) + p sin(theta);
    `samples` is None for the analytic branch.
    """

    angle: float
    mean: float
    variance: float
    samples: np.ndarray = None

    def power_db(self):
        return noise_power_db(self.variance)


# ---------------------------------------------------------------------------
# state constructors


def vacuum(num_modes=1):
    n = int(num_modes)
    if n < 1:
        raise ValueError("need at least one mode")
    return GaussianState(np.zeros(2 * n), VACUUM_VAR * np.eye(2 * n))


def squeezed_vacuum(r, theta=0.0):
    """Single-mode squeezed vacuum: variance e^{-2r}/2 along angle theta.

    theta = 0 squeezes x, theta = pi/2 squeezes p.  |r| > MAX_SQUEEZING_R
    is rejected as a parameter error.
    """
    if abs(r) > MAX_SQUEEZING_R:
        raise ValueError(f"|r| > {MAX_SQUEEZING_R} is not supported (got r={r})")
    rot = rotation2(theta)
    v = rot @ np.diag([math.exp(-2.0 * r), math.exp(2.0 * r)]) @ rot.T * VACUUM_VAR
    return GaussianState(np.zeros(2), v)


def tensor(*states):
    """Tensor product of Gaussian states (block-diagonal covariance)."""
    mean = np.concatenate([s.mean for s in states])
    n = mean.size
    cov = np.zeros((n, n))
    at = 0
    for s in states:
        k = s.mean.size
        cov[at : at + k, at : at + k] = s.cov
        at += k
    return GaussianState(mean, cov)


def r_for_noise_db(db):
    """Squeezing parameter giving a noise floor of -db: e^{-2r} = 10^{-db/10}."""
    return db * math.log(10.0) / 20.0


# ---------------------------------------------------------------------------
# Gaussian unitaries


def _embed(num_modes, modes, block):
    """Embed a 2k x 2k single/two-mode symplectic block into 2M x 2M identity."""
    s = np.eye(2 * num_modes)
    idx = []
    for m in modes:
        idx += [2 * m, 2 * m + 1]
    s[np.ix_(idx, idx)] = block
    return s


def beamsplitter_op(num_modes, mode_a, mode_b, transmittance, phase=0.0):
    """Beamsplitter as a SymplecticOp on modes (a, b) of an M-mode system.

    Convention: a -> sqrt(T) a + sqrt(1-T) e^{i phase} b,
                b -> -sqrt(1-T) e^{-i phase} a + sqrt(T) b.
    The inverse is the same splitter with phase + pi.
    """
    t = float(transmittance)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmittance must be in [0, 1], got {t}")
    if mode_a == mode_b:
        raise ValueError("beamsplitter needs two distinct modes")
    ct, st = math.sqrt(t), math.sqrt(1.0 - t)
    block = np.zeros((4, 4))
    block[:2, :2] = ct * np.eye(2)
    block[:2, 2:] = st * rotation2(phase)
    block[2:, :2] = -st * rotation2(-phase)
    block[2:, 2:] = ct * np.eye(2)
    return SymplecticOp(_embed(num_modes, (mode_a, mode_b), block))


def beamsplitter(state, mode_a, mode_b, transmittance, phase=0.0):
    return beamsplitter_op(state.num_modes, mode_a, mode_b, transmittance, phase).apply(state)


def phase_rotation(state, mode, theta):
    """a -> e^{i theta} a on one mode."""
    s = _embed(state.num_modes, (mode,), rotation2(theta))
    return SymplecticOp(s).apply(state)


def displace(state, mode, alpha):
    """Ideal displacement: adds sqrt(2)*(Re alpha, Im alpha) to one mode's mean."""
    d = np.zeros(2 * state.num_modes)
    d[2 * mode] = math.sqrt(2.0) * complex(alpha).real
    d[2 * mode + 1] = math.sqrt(2.0) * complex(alpha).imag
    return GaussianState(state.mean + d, state.cov)


# ---------------------------------------------------------------------------
# Gaussian channels (not symplectic: they mix in vacuum)


def _mix_in_vacuum(state, mode, keep):
    """Common core of loss/mirror channels: mode amplitude scaled by sqrt(keep),
    with (1-keep) of a vacuum unit mixed in."""
    n = state.num_modes
    g = np.eye(2 * n)
    i = slice(2 * mode, 2 * mode + 2)
    g[i, i] = math.sqrt(keep) * np.eye(2)
    cov = g @ state.cov @ g.T
    cov[i, i] += (1.0 - keep) * VACUUM_VAR * np.eye(2)
    return g @ state.mean, cov


def loss(state, mode, eta):
    """Pure loss channel of transmission eta on one mode.

    V_mode -> eta V + (1-eta)/2, cross blocks scale by sqrt(eta),
    mean scales by sqrt(eta).
    """
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {eta}")
    mean, cov = _mix_in_vacuum(state, mode, eta)
    return GaussianState(mean, cov)


def mirror_displace(state, mode, bright_alpha, transmittance):
    """Displacement by reflection off an almost-fully-reflective mirror.

    The signal keeps amplitude sqrt(1-T); a bright coherent beam alpha_b leaks
    through the T port and shifts the mean by sqrt(T)*sqrt(2)*(Re, Im) alpha_b.
    Covariance is contracted toward vacuum: V -> (1-T) V + T/2.  Choosing
    alpha_b = alpha_target / sqrt(T) reproduces displace() up to the sqrt(1-T)
    attenuation of the input (0.5% amplitude at T = 1%).
    """
    t = float(transmittance)
    if not 0.0 < t < 1.0:
        raise ValueError(f"mirror transmittance must be in (0, 1), got {t}")
    mean, cov = _mix_in_vacuum(state, mode, 1.0 - t)
    d = np.zeros(2 * state.num_modes)
    d[2 * mode] = math.sqrt(2.0 * t) * complex(bright_alpha).real
    d[2 * mode + 1] = math.sqrt(2.0 * t) * complex(bright_alpha).imag
    return GaussianState(mean + d, cov)


# ---------------------------------------------------------------------------
# homodyne


def _quad_direction(angle):
    return np.array([math.cos(angle), math.sin(angle)])


def homodyne(state, mode, angle=0.0, n_samples=0, rng=None):
    """Homodyne one mode at LO angle theta (x_theta = x cos + p sin).

    Returns the analytic marginal mean/variance; if n_samples > 0, also draws
    that many samples from the marginal (requires rng or a seed).
    """
    u = _quad_direction(angle)
    mu = float(u @ state.mode_mean(mode))
    var = float(u @ state.mode_cov(mode) @ u)
    samples = None
    if n_samples:
        gen = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        samples = gen.normal(mu, math.sqrt(var), size=int(n_samples))
    return HomodyneResult(angle=float(angle), mean=mu, variance=var, samples=samples)


def condition_on_homodyne(state, mode, angle, outcome):
    """State of the remaining modes after homodyning `mode` with result `outcome`.

    Standard Gaussian conditioning on the measured quadrature u^T r_B:
        mean' = mean_A + C u (m - u^T mean_B) / (u^T B u)
        V'    = A - (C u)(C u)^T / (u^T B u)
    """
    n = state.num_modes
    if n < 2:
        raise ValueError("conditioning needs at least two modes")
    keep = [m for m in range(n) if m != mode]
    ai = []
    for m in keep:
        ai += [2 * m, 2 * m + 1]
    bi = [2 * mode, 2 * mode + 1]
    a = state.cov[np.ix_(ai, ai)]
    b = state.cov[np.ix_(bi, bi)]
    c = state.cov[np.ix_(ai, bi)]
    u = _quad_direction(angle)
    cu = c @ u
    denom = float(u @ b @ u)
    mean = state.mean[ai] + cu * (outcome - u @ state.mean[bi]) / denom
    cov = a - np.outer(cu, cu) / denom
    return GaussianState(mean, cov)


# ---------------------------------------------------------------------------
# units


def noise_power_db(variance):
    """Noise power relative to shot noise: 10*log10(V / 0.5)."""
    return 10.0 * math.log10(variance / VACUUM_VAR)


def db_to_variance(db):
    return VACUUM_VAR * 10.0 ** (db / 10.0)
