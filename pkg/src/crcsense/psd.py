"""Spectral-slice recovery and per-subband power features.

The delay-compensated branch spectra V relate to the unknown slice
spectra S through V ~= A S with A from `mcs.measurement_matrix`. Slice
l covers frequencies [l, l+1) / (L T); for a real signal the content of
slice l mirrors into slice L-1-l (DFT bins reversed), so supports come
in mirror pairs. With L = 2M, pair {m-1, L-m} is exactly subband m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mcs import SampleMatrix, measurement_matrix


@dataclass(frozen=True)
class FeatureVector:
    """Per-subband scores: kind 'psd' (powers >= 0) or 'lv' (probabilities)."""

    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        if self.values.ndim != 1:
            raise ValueError("FeatureVector.values: expected a 1-D array")
        if self.kind not in ("psd", "lv"):
            raise ValueError(f"FeatureVector.kind: expected 'psd' or 'lv', got {self.kind!r}")


@dataclass(frozen=True)
class SpectralSliceEstimate:
    """SOMP output: selected slice rows and per-slice mean powers."""

    support: tuple[int, ...]
    powers: np.ndarray

    def __post_init__(self) -> None:
        if self.powers.ndim != 1:
            raise ValueError("SpectralSliceEstimate.powers: expected a 1-D array")
        if any(not 0 <= s < len(self.powers) for s in self.support):
            raise ValueError("SpectralSliceEstimate.support: slice index out of range")


def mirror_slice(l: int, n_slices: int) -> int:
    """Conjugate-mirror row of slice l for a real signal: L-1-l."""
    return n_slices - 1 - l


def coset_spectra(y: SampleMatrix) -> np.ndarray:
    """Per-branch DFT with coset delay compensation.

    V[p][k] = DFT(Y[p])[k] * exp(-j 2 pi c_p k / (L N_s)); the phase
    factor re-aligns branch p to the common time origin so that V = A S
    holds for on-grid content.
    """
    c = np.asarray(y.pattern.c)
    k = np.arange(y.n_s)
    phase = np.exp(-2j * np.pi * np.outer(c, k) / (y.pattern.l * y.n_s))
    return np.fft.fft(y.data, axis=1) * phase


def somp(v: np.ndarray, a: np.ndarray, k_max: int, tol: float = 1e-3) -> SpectralSliceEstimate:
    """Simultaneous OMP over mirror-paired slice columns.

    Each iteration scores every unselected pair {l, L-1-l} by the summed
    magnitude correlation of both columns against the residual and
    admits the best pair, then refits all selected columns by least
    squares. Stops when another full pair would exceed k_max columns or
    the squared relative residual drops to tol. If an admitted column
    makes the selection rank-deficient it is dropped and the search
    stops with the truncated support.
    """
    p, l_total = a.shape
    if v.ndim != 2 or v.shape[0] != p:
        raise ValueError(f"somp: v has shape {v.shape}, expected ({p}, N_s)")
    if not 1 <= k_max <= p:
        raise ValueError(f"somp: need 1 <= k_max <= P={p}, got {k_max}")
    if tol < 0:
        raise ValueError(f"somp: tol must be >= 0, got {tol}")

    powers = np.zeros(l_total)
    v_energy = np.linalg.norm(v) ** 2
    if v_energy == 0.0:
        return SpectralSliceEstimate(support=(), powers=powers)

    pairs = [(l, mirror_slice(l, l_total)) for l in range(l_total // 2)]
    if l_total % 2 == 1:
        pairs.append((l_total // 2, l_total // 2))
    selected: list[int] = []
    taken = [False] * len(pairs)
    residual = v
    coef = np.zeros((0, v.shape[1]), dtype=complex)

    while len(selected) + 2 <= k_max:
        scores = np.abs(a.conj().T @ residual).sum(axis=1)
        best, best_score = -1, -1.0
        for j, (l1, l2) in enumerate(pairs):
            if taken[j]:
                continue
            s = scores[l1] + (scores[l2] if l2 != l1 else 0.0)
            if s > best_score:
                best, best_score = j, s
        if best < 0:
            break
        taken[best] = True
        l1, l2 = pairs[best]
        stop = False
        for col in (l1, l2) if l2 != l1 else (l1,):
            trial = selected + [col]
            sol, _, rank, _ = np.linalg.lstsq(a[:, trial], v, rcond=None)
            if rank < len(trial):
                stop = True  # dependent column: drop it, keep what fits
                break
            selected, coef = trial, sol
        residual = v - a[:, selected] @ coef
        if stop or np.linalg.norm(residual) ** 2 <= tol * v_energy:
            break

    for row, col in enumerate(selected):
        powers[col] = np.mean(np.abs(coef[row]) ** 2)
    return SpectralSliceEstimate(support=tuple(sorted(selected)), powers=powers)


def psd_features(y: SampleMatrix, k_max: int = 0, tol: float = 1e-3) -> FeatureVector:
    """Recovered power per subband; requires L = 2M slice geometry.

    k_max = 0 selects the default budget of P columns. Subband m
    aggregates its mirror pair: f[m] = powers[m-1] + powers[L-m].
    """
    l_total = y.pattern.l
    if l_total % 2 != 0:
        raise ValueError(f"psd_features: pattern l={l_total} is not 2*M")
    if k_max == 0:
        k_max = y.pattern.p
    a = measurement_matrix(y.pattern)
    est = somp(coset_spectra(y), a, k_max=k_max, tol=tol)
    m_total = l_total // 2
    sub = np.arange(m_total)
    values = est.powers[sub] + est.powers[l_total - 1 - sub]
    return FeatureVector(values=values, kind="psd")
