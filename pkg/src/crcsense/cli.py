"""Command line interface.

Subcommands: gen-config, train-lv, run, sweep, selfcheck. Exit codes:
0 success, 1 usage/config error, 2 runtime failure. run/sweep print the
resolved seed material (base seed, per-trial seeds, coset pattern) so
any CSV row can be regenerated exactly.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .calibration import CalibrationSet, crc_threshold, fnr_of_threshold
from .config import ConfigError, PRESETS, emit_config, parse_config, preset_config
from .harness import (
    SweepSpec, resolve_workers, run_sweep, summarize, write_summary_csv, write_trials_csv,
)
from .lv import LvArch, LvModel, _loss_and_grads, load_model, save_model, train
from .mcs import CosetPattern, SampleMatrix, choose_cosets
from .psd import coset_spectra
from .seeds import ROLE_CAL, ROLE_TEST, derive_seed


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit(self._usage_exit(message))

    def _usage_exit(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        return 1


def _build_parser() -> _Parser:
    parser = _Parser(prog="crcsense", description=__doc__)
    parser.add_argument("--version", action="version", version=f"crcsense {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-config", help="write a starting config file")
    p.add_argument("path")
    p.add_argument("--preset", default="paper", choices=PRESETS)

    p = sub.add_parser("train-lv", help="train and serialize the learned feature model")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run one operating point, write per-trial CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="sweep a parameter, write trials + summary CSVs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--param", default=None)
    p.add_argument("--values", default=None, help="comma-separated sweep values")

    sub.add_parser("selfcheck", help="run built-in oracle checks")
    return parser


def _print_preamble(cfg, sweep: SweepSpec) -> None:
    pattern = choose_cosets(cfg.sampling.coset_seed, cfg.sampling.p, cfg.sampling.l)
    print(f"resolved N = P*N_s = {cfg.n_total} (P={cfg.sampling.p}, N_s={cfg.sampling.n_s})")
    print(f"cosets seed={cfg.sampling.coset_seed} c={','.join(str(c) for c in pattern.c)}")
    print(
        "seed-derivation: trial_seed = derive_seed(base_seed, value_index, trial); "
        f"calibration draw i = derive_seed(trial_seed, {ROLE_CAL:#x}, i); "
        f"test draw = derive_seed(trial_seed, {ROLE_TEST:#x}, 0)"
    )
    print(f"base_seed={sweep.base_seed} trials={sweep.trials} workers={resolve_workers(sweep.trials)}")


def _cmd_gen_config(args) -> int:
    cfg = preset_config(args.preset)
    with open(args.path, "w", newline="\n") as fh:
        fh.write(emit_config(cfg))
    print(f"wrote {args.preset} preset to {args.path}")
    return 0


def _cmd_train_lv(args) -> int:
    cfg = parse_config(args.config)
    pattern = choose_cosets(cfg.sampling.coset_seed, cfg.sampling.p, cfg.sampling.l)
    print(f"training: n_train={cfg.train.n_train} epochs={cfg.train.epochs} seed={cfg.train.seed}")
    model, history = train(cfg.signal, pattern, cfg.sampling.n_s, cfg.train)
    for i, loss in enumerate(history):
        print(f"epoch {i}: loss {loss:.6f}")
    save_model(model, args.out)
    print(f"wrote model to {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    lv_model = None
    if cfg.features.lv:
        if not os.path.exists(cfg.features.lv_model):
            raise RuntimeError(
                f"lv features enabled but model file {cfg.features.lv_model!r} does not exist; "
                "run train-lv first or disable lv"
            )
        lv_model = load_model(cfg.features.lv_model)
    sweep = SweepSpec(
        param="snr_db", values=(cfg.signal.snr_db,),
        trials=cfg.experiment.trials, base_seed=cfg.experiment.base_seed,
    )
    _print_preamble(cfg, sweep)
    records, failures = run_sweep(cfg, sweep, log=print, lv_model=lv_model)
    write_trials_csv(records, args.out)
    print(f"wrote {len(records)} rows to {args.out}")
    return _finish(failures)


def _cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    param = args.param or cfg.experiment.sweep_param
    if args.values is not None:
        try:
            values = tuple(float(tok) for tok in args.values.split(",") if tok.strip())
        except ValueError as exc:
            raise ConfigError(f"--values: {exc}") from exc
        if not values:
            raise ConfigError("--values: need at least one value")
    else:
        values = cfg.experiment.sweep_values
    sweep = SweepSpec(
        param=param, values=values,
        trials=cfg.experiment.trials, base_seed=cfg.experiment.base_seed,
    )
    _print_preamble(cfg, sweep)
    records, failures = run_sweep(cfg, sweep, log=print)
    os.makedirs(args.out, exist_ok=True)
    trials_path = os.path.join(args.out, "trials.csv")
    summary_path = os.path.join(args.out, "summary.csv")
    write_trials_csv(records, trials_path)
    write_summary_csv(summarize(records), summary_path)
    print(f"wrote {trials_path} and {summary_path}")
    return _finish(failures)


def _finish(failures: list[str]) -> int:
    for msg in failures:
        print(f"FAILED: {msg}", file=sys.stderr)
    return 2 if failures else 0


def _check_crc_grid() -> bool:
    """crc_threshold against a brute-force sup over a dense candidate grid."""
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(1, 13))
        m = int(rng.integers(1, 7))
        feats = rng.uniform(0, 1, size=(n, m))
        occ = (rng.uniform(size=(n, m)) < 0.5).astype(np.int8)
        alpha = float(rng.uniform(0, 1))
        cal = CalibrationSet(features=feats, occupancy=occ)
        got = crc_threshold(cal, alpha)
        vals = feats[occ == 1]
        if vals.size == 0:
            want = np.inf if 1 / (n + 1) <= alpha else -np.inf
        else:
            grid = np.sort(np.concatenate([[-np.inf], vals, vals + 1e-9, vals - 1e-9,
                                           [vals.max() + 1.0]]))
            ok = [
                g for g in grid
                if (n / (n + 1)) * np.mean([fnr_of_threshold(feats[i], occ[i], g) for i in range(n)])
                + 1 / (n + 1) <= alpha
            ]
            want = ok[-1] if ok else -np.inf
            if want == vals.max() + 1.0:
                want = np.inf
        if got != want:
            print(f"selfcheck crc: got {got}, brute force {want}")
            return False
    return True


def _check_spectra_oracle() -> bool:
    """coset_spectra against a direct quadratic-time DFT with compensation."""
    rng = np.random.default_rng(7)
    pattern = CosetPattern(c=(0, 2, 5, 7, 8), l=12)
    data = rng.normal(size=(5, 9))
    y = SampleMatrix(data=data, pattern=pattern)
    got = coset_spectra(y)
    n_s = y.n_s
    want = np.zeros_like(got)
    for p_i, cp in enumerate(pattern.c):
        for k in range(n_s):
            acc = 0.0 + 0.0j
            for t in range(n_s):
                acc += data[p_i, t] * np.exp(-2j * np.pi * k * t / n_s)
            want[p_i, k] = acc * np.exp(-2j * np.pi * cp * k / (pattern.l * n_s))
    if not np.allclose(got, want, atol=1e-9):
        print("selfcheck spectra: mismatch vs direct DFT")
        return False
    return True


def _check_lv_gradients() -> bool:
    """Analytic gradients against central finite differences (tiny net)."""
    rng = np.random.default_rng(11)
    arch = LvArch(p=2, n_s=8, m=3, c1=4, c2=4)
    model = LvModel.init(arch, rng)
    x = rng.normal(size=(3, 4, 8))
    z = (rng.uniform(size=(3, 3)) < 0.5).astype(float)
    _, grads, _ = _loss_and_grads(model, x, z, training=True)
    h = 1e-6
    for name, g in grads.items():
        w = model.params[name]
        flat = w.reshape(-1)
        idx = rng.choice(flat.size, size=min(4, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            lp, _, _ = _loss_and_grads(model, x, z, training=True)
            flat[i] = orig - h
            lm, _, _ = _loss_and_grads(model, x, z, training=True)
            flat[i] = orig
            fd = (lp - lm) / (2 * h)
            ref = g.reshape(-1)[i]
            if abs(fd - ref) > 1e-4 * max(1e-8, abs(fd) + abs(ref)):
                print(f"selfcheck gradients: {name}[{i}] analytic {ref} vs fd {fd}")
                return False
    return True


def _cmd_selfcheck(_args) -> int:
    checks = [
        ("crc threshold vs brute force", _check_crc_grid),
        ("coset spectra vs direct DFT", _check_spectra_oracle),
        ("lv gradients vs finite differences", _check_lv_gradients),
    ]
    failed = 0
    for name, fn in checks:
        ok = fn()
        print(f"selfcheck: {name}: {'ok' if ok else 'FAILED'}")
        failed += 0 if ok else 1
    return 2 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "gen-config":
            return _cmd_gen_config(args)
        if args.command == "train-lv":
            return _cmd_train_lv(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_selfcheck(args)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
