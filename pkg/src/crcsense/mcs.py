"""Multicoset (periodic nonuniform) sub-Nyquist sampling.

A multicoset sampler keeps P out of every L Nyquist-grid samples: branch
p observes y_p[n] = y((n L + c_p) T) at rate 1/(L T), where the coset
offsets satisfy 0 <= c_1 < ... < c_P < L. Stacking the delay-compensated
branch spectra gives a P x L linear system whose mixing matrix is

    A[p][l] = (1/L) * exp(j 2 pi c_p l / L)

so each column of A tags one width-(1/(L T)) spectral slice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signal_sim import NyquistSignal


@dataclass(frozen=True)
class CosetPattern:
    """Sorted distinct coset offsets c (length P) within a period of L."""

    c: tuple[int, ...]
    l: int

    def __post_init__(self) -> None:
        if self.l < 1:
            raise ValueError(f"CosetPattern.l: must be >= 1, got {self.l}")
        if len(self.c) < 1:
            raise ValueError("CosetPattern.c: need at least one coset")
        arr = np.asarray(self.c)
        if not (np.all(np.diff(arr) > 0) and 0 <= arr[0] and arr[-1] < self.l):
            raise ValueError(
                f"CosetPattern.c: offsets must be strictly increasing in [0, {self.l}), got {self.c}"
            )

    @property
    def p(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class SampleMatrix:
    """P x N_s real matrix of coset branch samples plus its pattern."""

    data: np.ndarray
    pattern: CosetPattern

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[0] != self.pattern.p:
            raise ValueError(
                f"SampleMatrix.data: expected shape (P={self.pattern.p}, N_s), got {self.data.shape}"
            )

    @property
    def n_s(self) -> int:
        return self.data.shape[1]


def choose_cosets(seed: int, p: int, l: int) -> CosetPattern:
    """Draw P distinct offsets uniformly from {0..L-1}, sorted ascending."""
    if not 1 <= p <= l:
        raise ValueError(f"choose_cosets: need 1 <= p <= l, got p={p}, l={l}")
    rng = np.random.default_rng(seed)
    c = np.sort(rng.choice(l, size=p, replace=False))
    return CosetPattern(c=tuple(int(x) for x in c), l=l)


def sample(sig: NyquistSignal, pattern: CosetPattern, n_s: int) -> SampleMatrix:
    """Take n_s samples per branch: data[p][n] = sig[n*L + c_p]."""
    if n_s < 1:
        raise ValueError(f"sample: n_s must be >= 1, got {n_s}")
    needed = (n_s - 1) * pattern.l + pattern.c[-1] + 1
    if len(sig) < needed:
        raise ValueError(
            f"sample: signal has {len(sig)} samples but the pattern needs at least {needed}"
        )
    rows = [sig.samples[cp :: pattern.l][:n_s] for cp in pattern.c]
    return SampleMatrix(data=np.stack(rows), pattern=pattern)


def measurement_matrix(pattern: CosetPattern) -> np.ndarray:
    """Spectral mixing matrix A: shape (P, L), A[p][l] = exp(j2pi c_p l/L)/L."""
    c = np.asarray(pattern.c)
    l_idx = np.arange(pattern.l)
    return np.exp(2j * np.pi * np.outer(c, l_idx) / pattern.l) / pattern.l
