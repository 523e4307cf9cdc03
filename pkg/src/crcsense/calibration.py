"""Threshold calibration for per-subband occupancy decisions.

A subband is declared occupied when its feature reaches the threshold:
zhat_m = 1(f_m >= gamma_m); ties count as occupied, -inf forces
occupied, +inf forces idle. Three calibrators are provided, all aimed
at a false-negative-rate target alpha:

* parametric: per subband, fit a Gaussian to the occupied calibration
  features and take its alpha-quantile, gamma = sigma*Qinv(1-alpha)+mu
  (population sigma, Q the Gaussian tail function).
* nonparametric: per subband, the floor(alpha*n)-th smallest occupied
  feature (1-based); floor of 0 or an empty set gives -inf.
* crc: one common threshold chosen as the largest value whose
  sample-corrected average FNR over whole calibration entries stays
  within alpha:

      gamma = sup { g : (n/(n+1)) * FNRbar(g) + 1/(n+1) <= alpha }.

  For i.i.d. calibration and test draws this controls the expected test
  FNR at level alpha for any calibration size n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .psd import FeatureVector

METHOD_PARAMETRIC = "parametric"
METHOD_NONPARAMETRIC = "nonparametric"
METHOD_CRC = "crc"
METHODS = (METHOD_PARAMETRIC, METHOD_NONPARAMETRIC, METHOD_CRC)


@dataclass(frozen=True)
class RiskTarget:
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha: must be in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class CalibrationSet:
    """n feature/occupancy rows of width M (one row per calibration draw)."""

    features: np.ndarray
    occupancy: np.ndarray

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.features.shape != self.occupancy.shape:
            raise ValueError(
                f"CalibrationSet: features {self.features.shape} and "
                f"occupancy {self.occupancy.shape} must be equal 2-D shapes"
            )
        if not np.all((self.occupancy == 0) | (self.occupancy == 1)):
            raise ValueError("CalibrationSet: occupancy entries must be 0/1")

    @classmethod
    def from_pairs(cls, pairs: list[tuple[np.ndarray, np.ndarray]]) -> "CalibrationSet":
        feats = np.stack([np.asarray(f.values if isinstance(f, FeatureVector) else f) for f, _ in pairs])
        occ = np.stack([np.asarray(z) for _, z in pairs])
        return cls(features=feats, occupancy=occ)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ThresholdVector:
    gammas: np.ndarray
    method: str

    def __post_init__(self) -> None:
        if self.gammas.ndim != 1:
            raise ValueError("ThresholdVector.gammas: expected a 1-D array")
        if self.method not in METHODS:
            raise ValueError(f"ThresholdVector.method: unknown method {self.method!r}")
        if np.any(np.isnan(self.gammas)):
            raise ValueError("ThresholdVector.gammas: NaN threshold")


def _alpha_value(alpha: float | RiskTarget) -> float:
    if isinstance(alpha, RiskTarget):
        return alpha.alpha
    return RiskTarget(float(alpha)).alpha


def occupied_features(cal: CalibrationSet, subband: int) -> np.ndarray:
    """Features of calibration entries where subband (1-based) is occupied."""
    if not 1 <= subband <= cal.m:
        raise ValueError(f"occupied_features: subband must be in [1, {cal.m}], got {subband}")
    col = subband - 1
    return cal.features[cal.occupancy[:, col] == 1, col]


def parametric_thresholds(cal: CalibrationSet, alpha: float | RiskTarget) -> ThresholdVector:
    """Gaussian-quantile thresholds; -inf where fewer than 2 occupied samples."""
    a = _alpha_value(alpha)
    gammas = np.full(cal.m, -np.inf)
    for col in range(cal.m):
        feats = cal.features[cal.occupancy[:, col] == 1, col]
        if feats.size < 2:
            continue
        mu = float(np.mean(feats))
        sigma = float(np.std(feats))
        if sigma == 0.0:
            gammas[col] = mu
        else:
            # Qinv(1 - alpha) is the standard normal alpha-quantile
            gammas[col] = sigma * ndtri(a) + mu
    return ThresholdVector(gammas=gammas, method=METHOD_PARAMETRIC)


def nonparametric_thresholds(cal: CalibrationSet, alpha: float | RiskTarget) -> ThresholdVector:
    """Order-statistic thresholds: the floor(alpha*n)-th smallest occupied feature."""
    a = _alpha_value(alpha)
    gammas = np.full(cal.m, -np.inf)
    for col in range(cal.m):
        feats = cal.features[cal.occupancy[:, col] == 1, col]
        k = int(np.floor(a * feats.size))
        if feats.size == 0 or k == 0:
            continue
        gammas[col] = np.sort(feats)[k - 1]
    return ThresholdVector(gammas=gammas, method=METHOD_NONPARAMETRIC)


def fnr_of_threshold(features: np.ndarray | FeatureVector, occupancy: np.ndarray, gamma: float) -> float:
    """Fraction of occupied subbands missed at threshold gamma (0 if none occupied)."""
    f = np.asarray(features.values if isinstance(features, FeatureVector) else features)
    z = np.asarray(occupancy)
    if f.shape != z.shape:
        raise ValueError(f"fnr_of_threshold: shapes {f.shape} vs {z.shape} differ")
    occ = f[z == 1]
    if occ.size == 0:
        return 0.0
    return float(np.count_nonzero(occ < gamma)) / occ.size


def crc_threshold(cal: CalibrationSet, alpha: float | RiskTarget) -> float:
    """Common threshold with sample-corrected FNR control (see module docstring).

    The supremum is attained either at an occupied calibration feature
    value, at -inf (nothing admissible), or at +inf (the corrected bound
    holds even when every occupied subband is missed).
    """
    a = _alpha_value(alpha)
    n = cal.n
    if n == 0:
        raise ValueError("crc_threshold: empty calibration set")
    occ_mask = cal.occupancy == 1
    per_entry = [np.sort(cal.features[i][occ_mask[i]]) for i in range(n)]
    counts = np.array([feats.size for feats in per_entry])
    correction = 1.0 / (n + 1)
    scale = n / (n + 1)

    # FNRbar at a threshold above every feature value: entries with any
    # occupied subband miss everything.
    fnr_all_missed = np.mean((counts > 0).astype(float))
    if scale * fnr_all_missed + correction <= a:
        return np.inf

    candidates = np.unique(np.concatenate([f for f in per_entry if f.size > 0] or [np.array([])]))
    if candidates.size == 0:
        return -np.inf
    # per-entry FNR at each candidate, averaged exactly as a mean of
    # entry-level fractions (strict '<': a feature equal to the
    # threshold is still detected)
    rows = np.zeros((n, candidates.size))
    for i, feats in enumerate(per_entry):
        if feats.size:
            rows[i] = np.searchsorted(feats, candidates, side="left") / feats.size
    fnr_bar = np.mean(rows, axis=0)
    admissible = scale * fnr_bar + correction <= a
    if not np.any(admissible):
        return -np.inf
    return float(candidates[np.nonzero(admissible)[0][-1]])


def compute_thresholds(
    cal: CalibrationSet, alpha: float | RiskTarget, method: str
) -> ThresholdVector:
    if method == METHOD_PARAMETRIC:
        return parametric_thresholds(cal, alpha)
    if method == METHOD_NONPARAMETRIC:
        return nonparametric_thresholds(cal, alpha)
    if method == METHOD_CRC:
        gamma = crc_threshold(cal, alpha)
        return ThresholdVector(gammas=np.full(cal.m, gamma), method=METHOD_CRC)
    raise ValueError(f"compute_thresholds: unknown method {method!r}")


def decide(features: np.ndarray | FeatureVector, thresholds: ThresholdVector) -> np.ndarray:
    """Elementwise occupancy decisions zhat_m = 1(f_m >= gamma_m)."""
    f = np.asarray(features.values if isinstance(features, FeatureVector) else features)
    if f.shape != thresholds.gammas.shape:
        raise ValueError(
            f"decide: feature shape {f.shape} does not match thresholds {thresholds.gammas.shape}"
        )
    return (f >= thresholds.gammas).astype(np.int8)
