"""Run configuration: a small sectioned key=value text format.

Grammar: `[section]` headers, `key = value` lines, `#` comments, blank
lines ignored. Unknown sections or keys are errors, as are malformed
lines (reported with their line number). Keys omitted from a file keep
the documented defaults, which form the paper-scale preset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .calibration import METHODS
from .lv import TrainConfig
from .signal_sim import PULSE_RAISED_COSINE, SignalConfig

SWEEP_PARAMS = ("snr_db", "n_cal", "n_samples", "n_cosets", "beta")
PRESETS = ("paper", "fig5")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingConfig:
    p: int = 20
    l: int = 80
    n_s: int = 48
    coset_seed: int = 12345

    def __post_init__(self) -> None:
        if self.l < 2:
            raise ConfigError(f"sampling.l: must be >= 2, got {self.l}")
        if not 1 <= self.p <= self.l:
            raise ConfigError(f"sampling.p: need 1 <= p <= l={self.l}, got {self.p}")
        if self.n_s < 1:
            raise ConfigError(f"sampling.n_s: must be >= 1, got {self.n_s}")


@dataclass(frozen=True)
class FeatureConfig:
    psd: bool = True
    lv: bool = True
    somp_k_max: int = 0  # 0 = full budget of P columns
    somp_tol: float = 1e-3
    lv_model: str = "lv_model.txt"

    def __post_init__(self) -> None:
        if not (self.psd or self.lv):
            raise ConfigError("features.psd/lv: at least one feature kind must be enabled")
        if self.somp_k_max < 0:
            raise ConfigError(f"features.somp_k_max: must be >= 0, got {self.somp_k_max}")
        if self.somp_tol < 0:
            raise ConfigError(f"features.somp_tol: must be >= 0, got {self.somp_tol}")
        if self.lv and not self.lv_model:
            raise ConfigError("features.lv_model: required when lv features are enabled")


@dataclass(frozen=True)
class CalibrationConfig:
    alpha: float = 0.1
    n_cal: int = 150
    methods: tuple[str, ...] = METHODS

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"calibration.alpha: must be in [0, 1], got {self.alpha}")
        if self.n_cal < 1:
            raise ConfigError(f"calibration.n_cal: must be >= 1, got {self.n_cal}")
        if not self.methods:
            raise ConfigError("calibration.methods: need at least one method")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"calibration.methods: unknown method {m!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 50
    base_seed: int = 42
    sweep_param: str = "snr_db"
    sweep_values: tuple[float, ...] = (0.0, 5.0, 10.0)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"experiment.trials: must be >= 1, got {self.trials}")
        if self.sweep_param not in SWEEP_PARAMS:
            raise ConfigError(
                f"experiment.sweep_param: must be one of {SWEEP_PARAMS}, got {self.sweep_param!r}"
            )
        if not self.sweep_values:
            raise ConfigError("experiment.sweep_values: need at least one value")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"


@dataclass(frozen=True)
class RunConfig:
    signal: SignalConfig = SignalConfig()
    sampling: SamplingConfig = SamplingConfig()
    features: FeatureConfig = FeatureConfig()
    train: TrainConfig = TrainConfig()
    calibration: CalibrationConfig = CalibrationConfig()
    experiment: ExperimentConfig = ExperimentConfig()
    output: OutputConfig = OutputConfig()

    def __post_init__(self) -> None:
        if self.sampling.l != 2 * self.signal.m:
            raise ConfigError(
                f"sampling.l: must equal 2*signal.m = {2 * self.signal.m}, got {self.sampling.l}"
            )

    @property
    def n_total(self) -> int:
        """Total sub-Nyquist sample budget N = P * N_s."""
        return self.sampling.p * self.sampling.n_s

    def apply_sweep_value(self, param: str, value: float) -> "RunConfig":
        """Return a copy with one swept parameter replaced."""
        if param == "snr_db":
            return replace(self, signal=replace(self.signal, snr_db=float(value)))
        if param == "beta":
            return replace(
                self, signal=replace(self.signal, pulse=PULSE_RAISED_COSINE, beta=float(value))
            )
        if param == "n_cal":
            return replace(self, calibration=replace(self.calibration, n_cal=_as_int(param, value)))
        if param == "n_cosets":
            return replace(self, sampling=replace(self.sampling, p=_as_int(param, value)))
        if param == "n_samples":
            n = _as_int(param, value)
            p = self.sampling.p
            if n % p != 0:
                raise ConfigError(f"sweep n_samples: {n} is not divisible by p={p}")
            return replace(self, sampling=replace(self.sampling, n_s=n // p))
        raise ConfigError(f"sweep param: must be one of {SWEEP_PARAMS}, got {param!r}")


def _as_int(param: str, value: float) -> int:
    if float(value) != int(value):
        raise ConfigError(f"sweep {param}: expected an integer value, got {value}")
    return int(value)


_BOOLS = {"true": True, "false": False}

_SCHEMA: dict[str, dict[str, str]] = {
    "signal": {
        "m": "int", "b_hz": "float", "pulse": "str", "beta": "float",
        "es_min": "float", "es_max": "float", "snr_db": "float",
        "k_min": "int", "k_max": "int", "pulse_span": "int",
    },
    "sampling": {"p": "int", "l": "int", "n_s": "int", "coset_seed": "int"},
    "features": {
        "psd": "bool", "lv": "bool", "somp_k_max": "int",
        "somp_tol": "float", "lv_model": "str",
    },
    "train": {
        "n_train": "int", "epochs": "int", "batch_size": "int",
        "learning_rate": "float", "seed": "int",
    },
    "calibration": {"alpha": "float", "n_cal": "int", "methods": "strlist"},
    "experiment": {
        "trials": "int", "base_seed": "int", "sweep_param": "str", "sweep_values": "floatlist",
    },
    "output": {"dir": "str"},
}


def _coerce(section: str, key: str, raw: str, lineno: int):
    kind = _SCHEMA[section][key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if math.isnan(v):
                raise ValueError("nan is not allowed")
            return v
        if kind == "bool":
            if raw.lower() not in _BOOLS:
                raise ValueError("expected true or false")
            return _BOOLS[raw.lower()]
        if kind == "floatlist":
            return tuple(float(tok) for tok in raw.split(",") if tok.strip() != "")
        if kind == "strlist":
            return tuple(tok.strip() for tok in raw.split(",") if tok.strip() != "")
        return raw
    except ValueError as exc:
        raise ConfigError(f"config line {lineno}: {section}.{key}: {exc}") from exc


def parse_config_text(text: str) -> RunConfig:
    values: dict[str, dict[str, object]] = {sec: {} for sec in _SCHEMA}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError(f"config line {lineno}: unterminated section header {line!r}")
            section = body[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"config line {lineno}: unknown section [{section}]")
            continue
        if "=" not in body:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {line!r}")
        if section is None:
            raise ConfigError(f"config line {lineno}: key outside of any [section]")
        key, raw = (tok.strip() for tok in body.split("=", 1))
        if key not in _SCHEMA[section]:
            raise ConfigError(f"config line {lineno}: unknown key {section}.{key}")
        values[section][key] = _coerce(section, key, raw, lineno)

    try:
        return RunConfig(
            signal=SignalConfig(**values["signal"]),
            sampling=SamplingConfig(**values["sampling"]),
            features=FeatureConfig(**values["features"]),
            train=TrainConfig(**values["train"]),
            calibration=CalibrationConfig(**values["calibration"]),
            experiment=ExperimentConfig(**values["experiment"]),
            output=OutputConfig(**values["output"]),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: RunConfig) -> str:
    """Canonical text for cfg; parse_config_text(emit_config(cfg)) == cfg."""
    sections = {
        "signal": cfg.signal, "sampling": cfg.sampling, "features": cfg.features,
        "train": cfg.train, "calibration": cfg.calibration,
        "experiment": cfg.experiment, "output": cfg.output,
    }
    lines = ["# crcsense run configuration"]
    for name, obj in sections.items():
        lines.append("")
        lines.append(f"[{name}]")
        for key in _SCHEMA[name]:
            lines.append(f"{key} = {_fmt(getattr(obj, key))}")
    return "\n".join(lines) + "\n"


def preset_config(name: str = "paper") -> RunConfig:
    """Named starting points: 'paper' (defaults) or 'fig5' (rate sweep)."""
    if name == "paper":
        return RunConfig()
    if name == "fig5":
        base = RunConfig()
        return replace(
            base,
            signal=replace(base.signal, es_min=1.0, es_max=1.0, snr_db=0.0, k_min=6, k_max=20),
            sampling=replace(base.sampling, n_s=32),
            experiment=replace(
                base.experiment, sweep_param="n_cosets",
                sweep_values=(2.0, 5.0, 10.0, 20.0, 40.0, 80.0),
            ),
        )
    raise ConfigError(f"preset: must be one of {PRESETS}, got {name!r}")
