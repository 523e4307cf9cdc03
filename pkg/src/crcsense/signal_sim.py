"""Multiband signal synthesis on a uniform Nyquist grid.

The simulated scene is a real passband multiband signal

    y(t) = sum_m z_m * s_m(t) + n(t)

where each occupied subband m in {1..M} carries an independent BPSK
stream through a unit-energy pulse:

    s_m(t) = sqrt(2 E_s / T_s) * sum_n D[n] s(t - n T_s) * cos(2 pi f_m t)

with symbol time T_s = 1/B, carrier f_m = (m - 1/2) B (subband centers),
and per-subband symbol energy E_s drawn uniformly from [es_min, es_max].
Everything is generated directly on the Nyquist grid t = k T with
T = 1 / (2 M B), which is the critical rate for the monitored band
[0, M*B].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

PULSE_SINC = "sinc"
PULSE_RAISED_COSINE = "raised-cosine"
_PULSES = (PULSE_SINC, PULSE_RAISED_COSINE)


@dataclass(frozen=True)
class SignalConfig:
    """Scene parameters for the multiband simulator.

    snr_db is E_s(nominal)/N_0 in dB with E_s(nominal) = 1; math.inf
    disables noise entirely. k_min/k_max bound the number of occupied
    subbands (drawn uniformly on {k_min..k_max}).
    """

    m: int = 40
    b_hz: float = 25e6
    pulse: str = PULSE_SINC
    beta: float = 0.0
    es_min: float = 1.0
    es_max: float = 4.0
    snr_db: float = 5.0
    k_min: int = 1
    k_max: int = 10
    pulse_span: int = 8

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"signal.m: must be >= 1, got {self.m}")
        if not self.b_hz > 0:
            raise ValueError(f"signal.b_hz: must be > 0, got {self.b_hz}")
        if self.pulse not in _PULSES:
            raise ValueError(f"signal.pulse: must be one of {_PULSES}, got {self.pulse!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"signal.beta: roll-off must be in [0, 1], got {self.beta}")
        if not 0 < self.es_min <= self.es_max:
            raise ValueError(
                f"signal.es_min/es_max: need 0 < es_min <= es_max, got ({self.es_min}, {self.es_max})"
            )
        if math.isnan(self.snr_db):
            raise ValueError("signal.snr_db: must be a number or inf")
        if not 0 <= self.k_min <= self.k_max <= self.m:
            raise ValueError(
                f"signal.k_min/k_max: need 0 <= k_min <= k_max <= m, got ({self.k_min}, {self.k_max})"
            )
        if self.pulse_span < 1:
            raise ValueError(f"signal.pulse_span: must be >= 1, got {self.pulse_span}")

    @property
    def nyquist_rate_hz(self) -> float:
        return 2.0 * self.m * self.b_hz

    @property
    def t_sec(self) -> float:
        """Nyquist-grid sample period T = 1/(2 M B)."""
        return 1.0 / self.nyquist_rate_hz

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db) and self.snr_db > 0

    def noise_variance(self) -> float:
        """Per-sample noise variance N_0 * M * B on the Nyquist grid.

        White noise of one-sided PSD N_0 over the monitored band [0, M*B]
        carries total power N_0*M*B, all of which lands in band when
        sampled at 2*M*B. N_0 is anchored to a nominal unit symbol
        energy: N_0 = 1 / 10^(snr_db/10).
        """
        if self.noiseless:
            return 0.0
        n0 = 10.0 ** (-self.snr_db / 10.0)
        return n0 * self.m * self.b_hz


@dataclass(frozen=True)
class NyquistSignal:
    """A real signal observed on the Nyquist grid."""

    samples: np.ndarray
    t_sec: float

    def __post_init__(self) -> None:
        if self.samples.ndim != 1:
            raise ValueError("NyquistSignal.samples: expected a 1-D array")
        if not self.t_sec > 0:
            raise ValueError(f"NyquistSignal.t_sec: must be > 0, got {self.t_sec}")

    def __len__(self) -> int:
        return self.samples.shape[0]


def sample_occupancy(rng: np.random.Generator, cfg: SignalConfig) -> np.ndarray:
    """Draw an occupancy vector: k ~ U{k_min..k_max} bands, positions uniform."""
    k = int(rng.integers(cfg.k_min, cfg.k_max + 1))
    z = np.zeros(cfg.m, dtype=np.int8)
    if k > 0:
        z[rng.choice(cfg.m, size=k, replace=False)] = 1
    return z


@lru_cache(maxsize=64)
def _pulse_kernel(pulse: str, beta: float, span: int, ups: int) -> np.ndarray:
    """Pulse shape sampled on the Nyquist grid over t in [-span*T_s, span*T_s].

    ups = T_s/T = 2M samples per symbol. Returned array has length
    2*span*ups + 1 and is cached read-only.
    """
    x = np.arange(-span * ups, span * ups + 1) / ups  # t / T_s
    if pulse == PULSE_SINC or beta == 0.0:
        ker = np.sinc(x)
    else:
        # Raised-cosine time pulse; the removable singularity at
        # |t/T_s| = 1/(2 beta) is patched with its limit value.
        den = 1.0 - (2.0 * beta * x) ** 2
        near = np.abs(den) < 1e-8
        safe_den = np.where(near, 1.0, den)
        ker = np.sinc(x) * np.cos(np.pi * beta * x) / safe_den
        ker = np.where(near, (np.pi / 4.0) * np.sinc(1.0 / (2.0 * beta)), ker)
    ker.flags.writeable = False
    return ker


@lru_cache(maxsize=256)
def _carrier(sub: int, m: int, length: int) -> np.ndarray:
    """cos(2 pi f_m k T) for subband sub (0-based) = cos(pi (sub+1/2) k / m)."""
    arr = np.cos((np.pi * (sub + 0.5) / m) * np.arange(length))
    arr.flags.writeable = False
    return arr


def synthesize(
    rng: np.random.Generator, cfg: SignalConfig, z: np.ndarray, length: int
) -> NyquistSignal:
    """Generate `length` Nyquist-grid samples of the noise-free scene.

    One sub-stream seed is drawn from `rng` for every subband, occupied
    or not, so the waveform contributed by subband m depends only on
    (rng state, m). Signals synthesized for disjoint occupancies with
    the same starting rng state therefore add up to the union scene.
    Symbol streams start pulse_span symbols before the window and end
    pulse_span symbols after it, so the window sees no ramp-in.
    """
    z = np.asarray(z)
    if z.shape != (cfg.m,):
        raise ValueError(f"synthesize: occupancy length {z.shape} does not match m={cfg.m}")
    if length < 1:
        raise ValueError(f"synthesize: length must be >= 1, got {length}")

    ups = 2 * cfg.m  # Nyquist samples per symbol: T_s / T
    span = cfg.pulse_span
    ker = _pulse_kernel(cfg.pulse, cfg.beta, span, ups)
    half = span * ups
    n_lo = -span
    n_hi = (length - 1) // ups + span
    n_sym = n_hi - n_lo + 1
    # Symbol n occupies ext[(n - n_lo)*ups : ...+len(ker)]; grid sample k
    # sits at ext index k + 2*half.
    ext_len = (n_hi - n_lo) * ups + len(ker)

    sub_seeds = rng.integers(0, 2**63, size=cfg.m)
    out = np.zeros(length)
    for sub in np.nonzero(z)[0]:
        sub_rng = np.random.default_rng(int(sub_seeds[sub]))
        es = sub_rng.uniform(cfg.es_min, cfg.es_max)
        sym = sub_rng.integers(0, 2, size=n_sym) * 2 - 1
        amp = math.sqrt(2.0 * es * cfg.b_hz)  # sqrt(2 E_s / T_s)

        ext = np.zeros(ext_len)
        for i in range(n_sym):
            start = i * ups
            ext[start : start + len(ker)] += sym[i] * ker
        bb = ext[2 * half : 2 * half + length]
        out += (amp * bb) * _carrier(int(sub), cfg.m, length)

    return NyquistSignal(samples=out, t_sec=cfg.t_sec)


def add_noise(rng: np.random.Generator, sig: NyquistSignal, cfg: SignalConfig) -> NyquistSignal:
    """Add white Gaussian noise at the configured SNR; identity when noiseless."""
    if cfg.noiseless:
        return sig
    sigma = math.sqrt(cfg.noise_variance())
    noisy = sig.samples + rng.normal(0.0, sigma, size=len(sig))
    return replace(sig, samples=noisy)
