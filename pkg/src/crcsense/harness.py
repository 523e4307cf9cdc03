"""Seeded Monte Carlo harness: trials, sweeps, summaries, CSV output.

Every trial draws a fresh calibration pool and one test scene, so trial
results are i.i.d. across seeds. Seeds derive from the experiment base
seed as trial_seed = derive_seed(base_seed, value_index, trial); within
a trial, calibration draw i uses derive_seed(trial_seed, ROLE_CAL, i)
and the test draw uses derive_seed(trial_seed, ROLE_TEST, 0). Any CSV
row can therefore be regenerated from the printed seed material alone,
no matter how trials were scheduled across workers.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import lv as lv_mod
from .calibration import CalibrationSet, compute_thresholds, decide
from .config import RunConfig
from .mcs import CosetPattern, choose_cosets, sample
from .psd import psd_features
from .seeds import ROLE_CAL, ROLE_TEST, ROLE_TRAIN, derive_seed
from .signal_sim import add_noise, sample_occupancy, synthesize

TRIALS_HEADER = "sweep_param,sweep_value,feature,method,trial,fnr,tnr"
SUMMARY_HEADER = (
    "sweep_param,sweep_value,feature,method,mean_fnr,fnr_lo,fnr_hi,mean_tnr,tnr_lo,tnr_hi"
)
# sweeps over these parameters change the input distribution the learned
# feature sees, so the model is retrained per value
_LV_RETRAIN_PARAMS = frozenset({"snr_db", "n_samples", "n_cosets", "beta"})


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    feature: str
    method: str
    fnr: float
    tnr: float


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple[float, ...]
    trials: int
    base_seed: int


@dataclass(frozen=True)
class SweepRecord:
    sweep_param: str
    sweep_value: float
    feature: str
    method: str
    trial: int
    seed: int
    fnr: float
    tnr: float


@dataclass(frozen=True)
class SummaryRow:
    sweep_param: str
    sweep_value: float
    feature: str
    method: str
    mean_fnr: float
    fnr_lo: float
    fnr_hi: float
    mean_tnr: float
    tnr_lo: float
    tnr_hi: float


def fnr(z: np.ndarray, zhat: np.ndarray) -> float:
    """Missed fraction of occupied subbands; 0 when none are occupied."""
    z = np.asarray(z)
    zhat = np.asarray(zhat)
    occ = int(z.sum())
    if occ == 0:
        return 0.0
    return float(((1 - zhat) * z).sum()) / occ


def tnr(z: np.ndarray, zhat: np.ndarray) -> float:
    """Correctly-idle fraction of idle subbands; 1 when none are idle."""
    z = np.asarray(z)
    zhat = np.asarray(zhat)
    idle = int((1 - z).sum())
    if idle == 0:
        return 1.0
    return float(((1 - zhat) * (1 - z)).sum()) / idle


def _draw_pair(pair_seed: int, cfg: RunConfig, pattern: CosetPattern):
    rng = np.random.default_rng(pair_seed)
    z = sample_occupancy(rng, cfg.signal)
    length = cfg.sampling.n_s * pattern.l
    sig = add_noise(rng, synthesize(rng, cfg.signal, z, length), cfg.signal)
    return sample(sig, pattern, cfg.sampling.n_s), z


def run_trial(
    seed: int, cfg: RunConfig, lv_model: lv_mod.LvModel | None = None, trial: int = 0
) -> list[TrialResult]:
    """One trial: fresh calibration pool + one test draw, all methods/features."""
    if cfg.features.lv and lv_model is None:
        raise ValueError("run_trial: lv features enabled but no model given")
    pattern = choose_cosets(cfg.sampling.coset_seed, cfg.sampling.p, cfg.sampling.l)
    n_cal = cfg.calibration.n_cal
    pair_seeds = [derive_seed(seed, ROLE_CAL, i) for i in range(n_cal)]
    pair_seeds.append(derive_seed(seed, ROLE_TEST, 0))
    pairs = [_draw_pair(s, cfg, pattern) for s in pair_seeds]
    occupancy = np.stack([z for _, z in pairs])

    feature_sets: dict[str, np.ndarray] = {}
    if cfg.features.psd:
        k_max = cfg.features.somp_k_max or pattern.p
        feature_sets["psd"] = np.stack(
            [psd_features(y, k_max=k_max, tol=cfg.features.somp_tol).values for y, _ in pairs]
        )
    if cfg.features.lv:
        xs = np.stack([lv_mod.lv_input(y.data) for y, _ in pairs])
        feature_sets["lv"] = lv_mod.score_batch(lv_model, xs)

    results = []
    z_test = occupancy[-1]
    for kind, feats in feature_sets.items():
        cal = CalibrationSet(features=feats[:-1], occupancy=occupancy[:-1])
        for method in cfg.calibration.methods:
            tv = compute_thresholds(cal, cfg.calibration.alpha, method)
            zhat = decide(feats[-1], tv)
            results.append(
                TrialResult(
                    trial=trial, seed=seed, feature=kind, method=method,
                    fnr=fnr(z_test, zhat), tnr=tnr(z_test, zhat),
                )
            )
    return results


def resolve_workers(trials: int) -> int:
    """Worker count from env CRC_SENSE_THREADS (0 or unset = auto)."""
    raw = os.environ.get("CRC_SENSE_THREADS", "0").strip()
    try:
        cap = int(raw) if raw else 0
    except ValueError as exc:
        raise ValueError(f"CRC_SENSE_THREADS: expected an integer, got {raw!r}") from exc
    if cap < 0:
        raise ValueError(f"CRC_SENSE_THREADS: must be >= 0, got {cap}")
    if cap == 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, trials))


def _trial_task(args) -> list[TrialResult]:
    trial, seed, cfg, model = args
    return run_trial(seed, cfg, model, trial=trial)


def train_lv_for(cfg: RunConfig, seed: int) -> lv_mod.LvModel:
    """Train the learned feature for cfg's signal/sampling point."""
    pattern = choose_cosets(cfg.sampling.coset_seed, cfg.sampling.p, cfg.sampling.l)
    tc = replace(cfg.train, seed=seed)
    model, _ = lv_mod.train(cfg.signal, pattern, cfg.sampling.n_s, tc)
    return model


def run_sweep(
    cfg: RunConfig,
    sweep: SweepSpec | None = None,
    log=None,
    lv_model: lv_mod.LvModel | None = None,
) -> tuple[list[SweepRecord], list[str]]:
    """Run trials across sweep values; returns (records, failure diagnostics).

    When lv features are enabled the model is trained per value point
    (seeded from the base seed) unless a preloaded lv_model is given.
    A failure aborts only its value point and is reported, never
    silently dropped. Records arrive sorted by (value index, trial,
    feature, method) regardless of worker scheduling.
    """
    if sweep is None:
        e = cfg.experiment
        sweep = SweepSpec(param=e.sweep_param, values=e.sweep_values, trials=e.trials,
                          base_seed=e.base_seed)
    emit = log if log is not None else (lambda s: None)
    records: list[SweepRecord] = []
    failures: list[str] = []
    workers = resolve_workers(sweep.trials)
    retrain = lv_model is None
    for vi, value in enumerate(sweep.values):
        try:
            cfg_v = cfg.apply_sweep_value(sweep.param, value)
            if cfg_v.features.lv and retrain and (
                lv_model is None or sweep.param in _LV_RETRAIN_PARAMS
            ):
                train_seed = derive_seed(sweep.base_seed, ROLE_TRAIN, vi)
                emit(f"training lv model for {sweep.param}={value} (seed={train_seed})")
                lv_model = train_lv_for(cfg_v, train_seed)
            trial_seeds = [derive_seed(sweep.base_seed, vi, t) for t in range(sweep.trials)]
            emit(
                f"seeds value_index={vi} sweep_value={value!r} "
                f"trial_seeds={','.join(str(s) for s in trial_seeds)}"
            )
            tasks = [(t, s, cfg_v, lv_model) for t, s in enumerate(trial_seeds)]
            if workers > 1:
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    per_trial = list(pool.map(_trial_task, tasks))
            else:
                per_trial = [_trial_task(task) for task in tasks]
        except Exception as exc:  # noqa: BLE001 - diagnostic, then continue
            failures.append(f"sweep value {sweep.param}={value}: {type(exc).__name__}: {exc}")
            continue
        for results in per_trial:
            for r in results:
                records.append(
                    SweepRecord(
                        sweep_param=sweep.param, sweep_value=float(value),
                        feature=r.feature, method=r.method, trial=r.trial, seed=r.seed,
                        fnr=r.fnr, tnr=r.tnr,
                    )
                )
    return records, failures


def _band(values: np.ndarray) -> tuple[float, float]:
    """Empirical 95% band: 2.5/97.5 percentiles, linear interpolation
    between order statistics (h = (n-1)q)."""
    return (
        float(np.percentile(values, 2.5, method="linear")),
        float(np.percentile(values, 97.5, method="linear")),
    )


def summarize(records: list[SweepRecord]) -> list[SummaryRow]:
    """Aggregate per (value, feature, method) in first-seen order."""
    groups: dict[tuple, list[SweepRecord]] = {}
    for r in records:
        groups.setdefault((r.sweep_param, r.sweep_value, r.feature, r.method), []).append(r)
    rows = []
    for (param, value, feature, method), recs in groups.items():
        fnrs = np.array([r.fnr for r in recs])
        tnrs = np.array([r.tnr for r in recs])
        fnr_lo, fnr_hi = _band(fnrs)
        tnr_lo, tnr_hi = _band(tnrs)
        rows.append(
            SummaryRow(
                sweep_param=param, sweep_value=value, feature=feature, method=method,
                mean_fnr=float(np.mean(fnrs)), fnr_lo=fnr_lo, fnr_hi=fnr_hi,
                mean_tnr=float(np.mean(tnrs)), tnr_lo=tnr_lo, tnr_hi=tnr_hi,
            )
        )
    return rows


def write_trials_csv(records: list[SweepRecord], path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(TRIALS_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.sweep_param},{r.sweep_value!r},{r.feature},{r.method},"
                f"{r.trial},{r.fnr!r},{r.tnr!r}\n"
            )


def write_summary_csv(rows: list[SummaryRow], path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for r in rows:
            fh.write(
                f"{r.sweep_param},{r.sweep_value!r},{r.feature},{r.method},"
                f"{r.mean_fnr!r},{r.fnr_lo!r},{r.fnr_hi!r},"
                f"{r.mean_tnr!r},{r.tnr_lo!r},{r.tnr_hi!r}\n"
            )
