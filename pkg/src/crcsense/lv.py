"""Learned per-subband occupancy scores from raw coset spectra.

A small 1-D convolutional network maps the stacked real/imag branch
spectra (2P channels x N_s bins) to M per-subband probabilities:

    conv(3) -> relu -> conv(3) -> batch-norm -> relu -> dense -> sigmoid

The network is implemented directly in numpy with explicit backprop so
gradients can be checked against finite differences and training is
bit-reproducible from its seeds. Optimization is mini-batch Adam on the
mean binary cross-entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .mcs import CosetPattern, sample
from .psd import FeatureVector
from .seeds import ROLE_LV_DATA, ROLE_LV_INIT, ROLE_LV_SHUFFLE, derive_seed
from .signal_sim import NyquistSignal, SignalConfig, add_noise, sample_occupancy, synthesize

_BN_EPS = 1e-5
_BN_MOMENTUM = 0.1
_PARAM_ORDER = ("conv1_w", "conv1_b", "conv2_w", "conv2_b", "bn_gamma", "bn_beta", "fc_w", "fc_b")
_HEADER = "crcsense-lv v1"


@dataclass(frozen=True)
class LvArch:
    p: int
    n_s: int
    m: int
    c1: int = 32
    c2: int = 32

    def __post_init__(self) -> None:
        if min(self.p, self.n_s, self.m, self.c1, self.c2) < 1:
            raise ValueError(f"LvArch: all dimensions must be >= 1, got {self}")

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "conv1_w": (self.c1, 2 * self.p, 3),
            "conv1_b": (self.c1,),
            "conv2_w": (self.c2, self.c1, 3),
            "conv2_b": (self.c2,),
            "bn_gamma": (self.c2,),
            "bn_beta": (self.c2,),
            "fc_w": (self.m, self.c2 * self.n_s),
            "fc_b": (self.m,),
        }


@dataclass
class LvModel:
    """Network parameters plus frozen batch-norm statistics.

    input_scale is a fixed preprocessing constant (reciprocal RMS of the
    training inputs) applied before conv1; it is fitted once by train()
    and serialized with the model.
    """

    arch: LvArch
    params: dict[str, np.ndarray]
    bn_mean: np.ndarray
    bn_var: np.ndarray
    input_scale: float = 1.0

    def validate(self) -> None:
        shapes = self.arch.shapes()
        for name in _PARAM_ORDER:
            if name not in self.params:
                raise ValueError(f"LvModel: missing parameter {name}")
            if self.params[name].shape != shapes[name]:
                raise ValueError(
                    f"LvModel: {name} has shape {self.params[name].shape}, expected {shapes[name]}"
                )
            if not np.all(np.isfinite(self.params[name])):
                raise ValueError(f"LvModel: non-finite values in {name}")
        if self.bn_mean.shape != (self.arch.c2,) or self.bn_var.shape != (self.arch.c2,):
            raise ValueError("LvModel: batch-norm statistics shape mismatch")
        if not (np.all(np.isfinite(self.bn_mean)) and np.all(np.isfinite(self.bn_var))):
            raise ValueError("LvModel: non-finite batch-norm statistics")
        if not (math.isfinite(self.input_scale) and self.input_scale > 0):
            raise ValueError(f"LvModel: input_scale must be finite and > 0, got {self.input_scale}")

    @classmethod
    def zeros(cls, arch: LvArch) -> "LvModel":
        params = {name: np.zeros(shape) for name, shape in arch.shapes().items()}
        return cls(arch=arch, params=params, bn_mean=np.zeros(arch.c2), bn_var=np.ones(arch.c2))

    @classmethod
    def init(cls, arch: LvArch, rng: np.random.Generator) -> "LvModel":
        model = cls.zeros(arch)
        for name in ("conv1_w", "conv2_w", "fc_w"):
            w = model.params[name]
            fan_in = int(np.prod(w.shape[1:]))
            model.params[name] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=w.shape)
        model.params["bn_gamma"] = np.ones(arch.c2)
        return model


@dataclass(frozen=True)
class TrainConfig:
    n_train: int = 4000
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 777

    def __post_init__(self) -> None:
        if self.n_train < 1:
            raise ValueError(f"train.n_train: must be >= 1, got {self.n_train}")
        if self.epochs < 1:
            raise ValueError(f"train.epochs: must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"train.batch_size: must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValueError(f"train.learning_rate: must be > 0, got {self.learning_rate}")


def lv_input(y_data: np.ndarray) -> np.ndarray:
    """Stack real and imaginary parts of the plain per-branch DFT.

    No delay compensation is applied; the network sees the raw branch
    spectra. Output shape (2P, N_s) for input (P, N_s).
    """
    if y_data.ndim != 2:
        raise ValueError("lv_input: expected a (P, N_s) matrix")
    spec = np.fft.fft(y_data, axis=1)
    return np.concatenate([spec.real, spec.imag], axis=0)


def _conv3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Same-padded kernel-3 conv over the last axis; returns (out, cols)."""
    n = x.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1)))
    cols = np.stack([xp[:, :, 0:n], xp[:, :, 1 : n + 1], xp[:, :, 2 : n + 2]], axis=2)
    out = np.tensordot(w, cols, axes=([1, 2], [1, 2])).transpose(1, 0, 2) + b[None, :, None]
    return out, cols


def _conv3_backward(
    dy: np.ndarray, cols: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = dy.shape[2]
    dw = np.tensordot(dy, cols, axes=([0, 2], [0, 3]))
    db = dy.sum(axis=(0, 2))
    dxp = np.zeros((dy.shape[0], w.shape[1], n + 2))
    for d in range(3):
        dxp[:, :, d : d + n] += np.einsum("bon,oc->bcn", dy, w[:, :, d])
    return dxp[:, :, 1 : n + 1], dw, db


def _forward(model: LvModel, x: np.ndarray, training: bool) -> tuple[np.ndarray, dict]:
    """Batched forward pass on (B, 2P, N_s); returns (probs, cache)."""
    p = model.params
    xs = x * model.input_scale
    z1, cols1 = _conv3(xs, p["conv1_w"], p["conv1_b"])
    a1 = np.maximum(z1, 0.0)
    z2, cols2 = _conv3(a1, p["conv2_w"], p["conv2_b"])
    if training:
        mu = z2.mean(axis=(0, 2))
        var = z2.var(axis=(0, 2))
    else:
        mu, var = model.bn_mean, model.bn_var
    inv_std = 1.0 / np.sqrt(var + _BN_EPS)
    xhat = (z2 - mu[None, :, None]) * inv_std[None, :, None]
    bn = p["bn_gamma"][None, :, None] * xhat + p["bn_beta"][None, :, None]
    a2 = np.maximum(bn, 0.0)
    flat = a2.reshape(x.shape[0], -1)
    logits = flat @ p["fc_w"].T + p["fc_b"]
    probs = expit(logits)
    cache = {
        "cols1": cols1, "z1": z1, "a1": a1, "cols2": cols2,
        "xhat": xhat, "inv_std": inv_std, "bn": bn, "flat": flat,
        "logits": logits, "probs": probs, "batch_mu": mu, "batch_var": var,
    }
    return probs, cache


def _loss_and_grads(model: LvModel, x: np.ndarray, z: np.ndarray, training: bool = True):
    """Mean BCE over all outputs plus gradients for every trainable tensor."""
    p = model.params
    probs, cache = _forward(model, x, training)
    logits = cache["logits"]
    loss = float(np.mean(np.logaddexp(0.0, logits) - z * logits))

    dlogits = (probs - z) / z.size
    grads = {
        "fc_w": dlogits.T @ cache["flat"],
        "fc_b": dlogits.sum(axis=0),
    }
    dflat = dlogits @ p["fc_w"]
    da2 = dflat.reshape(cache["bn"].shape)
    dbn = da2 * (cache["bn"] > 0.0)
    xhat = cache["xhat"]
    grads["bn_gamma"] = (dbn * xhat).sum(axis=(0, 2))
    grads["bn_beta"] = dbn.sum(axis=(0, 2))
    dxhat = dbn * p["bn_gamma"][None, :, None]
    if training:
        # gradient through the batch statistics
        mean_dxhat = dxhat.mean(axis=(0, 2), keepdims=True)
        mean_dxhat_xhat = (dxhat * xhat).mean(axis=(0, 2), keepdims=True)
        dz2 = cache["inv_std"][None, :, None] * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    else:
        dz2 = dxhat * cache["inv_std"][None, :, None]
    da1, grads["conv2_w"], grads["conv2_b"] = _conv3_backward(dz2, cache["cols2"], p["conv2_w"])
    dz1 = da1 * (cache["z1"] > 0.0)
    _, grads["conv1_w"], grads["conv1_b"] = _conv3_backward(dz1, cache["cols1"], p["conv1_w"])
    return loss, grads, cache


def forward(model: LvModel, x: np.ndarray, training: bool = False) -> FeatureVector:
    """Score one (2P, N_s) input; inference mode uses frozen statistics."""
    expected = (2 * model.arch.p, model.arch.n_s)
    if x.shape != expected:
        raise ValueError(f"forward: input shape {x.shape}, expected {expected}")
    probs, _ = _forward(model, x[None], training)
    return FeatureVector(values=probs[0], kind="lv")


def score_batch(model: LvModel, xs: np.ndarray) -> np.ndarray:
    """Inference scores for a (B, 2P, N_s) stack; returns (B, M)."""
    expected = (2 * model.arch.p, model.arch.n_s)
    if xs.ndim != 3 or xs.shape[1:] != expected:
        raise ValueError(f"score_batch: input shape {xs.shape}, expected (B,) + {expected}")
    probs, _ = _forward(model, xs, training=False)
    return probs


def generate_training_set(
    signal_cfg: SignalConfig, pattern: CosetPattern, n_s: int, n_train: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw n_train i.i.d. (lv_input(Y), z) pairs from the simulator."""
    length = n_s * pattern.l
    xs = np.empty((n_train, 2 * pattern.p, n_s))
    zs = np.empty((n_train, signal_cfg.m))
    for i in range(n_train):
        rng = np.random.default_rng(derive_seed(seed, ROLE_LV_DATA, i))
        z = sample_occupancy(rng, signal_cfg)
        sig = add_noise(rng, synthesize(rng, signal_cfg, z, length), signal_cfg)
        xs[i] = lv_input(sample(sig, pattern, n_s).data)
        zs[i] = z
    return xs, zs


def train(
    signal_cfg: SignalConfig, pattern: CosetPattern, n_s: int, tc: TrainConfig
) -> tuple[LvModel, list[float]]:
    """Train a fresh model; returns it with the per-epoch mean loss history.

    Fully deterministic given tc.seed: data, initialization and batch
    order all derive from it.
    """
    if signal_cfg.m * 2 != pattern.l:
        raise ValueError(f"train: pattern l={pattern.l} is not 2*m={2 * signal_cfg.m}")
    arch = LvArch(p=pattern.p, n_s=n_s, m=signal_cfg.m)
    model = LvModel.init(arch, np.random.default_rng(derive_seed(tc.seed, ROLE_LV_INIT)))
    xs, zs = generate_training_set(signal_cfg, pattern, n_s, tc.n_train, tc.seed)
    rms = float(np.sqrt(np.mean(xs**2)))
    model.input_scale = 1.0 / rms if rms > 0 else 1.0

    adam_m = {k: np.zeros_like(v) for k, v in model.params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in model.params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    shuffle_rng = np.random.default_rng(derive_seed(tc.seed, ROLE_LV_SHUFFLE))
    history: list[float] = []
    for epoch in range(tc.epochs):
        order = shuffle_rng.permutation(tc.n_train)
        batch_losses = []
        for lo in range(0, tc.n_train, tc.batch_size):
            idx = order[lo : lo + tc.batch_size]
            loss, grads, cache = _loss_and_grads(model, xs[idx], zs[idx], training=True)
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"lv train: non-finite loss at epoch {epoch} "
                    f"(learning_rate={tc.learning_rate}); reduce the learning rate"
                )
            batch_losses.append(loss)
            step += 1
            for name, g in grads.items():
                adam_m[name] = beta1 * adam_m[name] + (1 - beta1) * g
                adam_v[name] = beta2 * adam_v[name] + (1 - beta2) * g * g
                mhat = adam_m[name] / (1 - beta1**step)
                vhat = adam_v[name] / (1 - beta2**step)
                model.params[name] -= tc.learning_rate * mhat / (np.sqrt(vhat) + eps)
            model.bn_mean = (1 - _BN_MOMENTUM) * model.bn_mean + _BN_MOMENTUM * cache["batch_mu"]
            model.bn_var = (1 - _BN_MOMENTUM) * model.bn_var + _BN_MOMENTUM * cache["batch_var"]
        history.append(float(np.mean(batch_losses)))
    model.validate()
    return model, history


def save_model(model: LvModel, path: str) -> None:
    """Plain-text serialization; values at 17 significant digits."""
    model.validate()
    a = model.arch
    tensors: list[tuple[str, np.ndarray]] = [("input_scale", np.asarray(model.input_scale))]
    tensors += [(name, model.params[name]) for name in _PARAM_ORDER]
    tensors += [("bn_mean", model.bn_mean), ("bn_var", model.bn_var)]
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{_HEADER} p={a.p} n_s={a.n_s} m={a.m} c1={a.c1} c2={a.c2}\n")
        for name, arr in tensors:
            toks = [name, str(arr.ndim)]
            toks += [str(d) for d in arr.shape]
            toks += [format(v, ".17g") for v in arr.reshape(-1)]
            fh.write(" ".join(toks) + "\n")


def load_model(path: str) -> LvModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith(_HEADER):
        raise ValueError(f"model file {path}: unrecognized header")
    fields = dict(tok.split("=") for tok in lines[0].split()[2:])
    arch = LvArch(
        p=int(fields["p"]), n_s=int(fields["n_s"]), m=int(fields["m"]),
        c1=int(fields["c1"]), c2=int(fields["c2"]),
    )
    tensors: dict[str, np.ndarray] = {}
    for ln in lines[1:]:
        toks = ln.split()
        name, ndim = toks[0], int(toks[1])
        shape = tuple(int(t) for t in toks[2 : 2 + ndim])
        count = int(np.prod(shape)) if shape else 1
        vals = np.array([float(t) for t in toks[2 + ndim : 2 + ndim + count]])
        if vals.size != count:
            raise ValueError(f"model file {path}: tensor {name} has {vals.size}/{count} values")
        tensors[name] = vals.reshape(shape)
    try:
        model = LvModel(
            arch=arch,
            params={name: tensors[name] for name in _PARAM_ORDER},
            bn_mean=tensors["bn_mean"],
            bn_var=tensors["bn_var"],
            input_scale=float(tensors["input_scale"]),
        )
    except KeyError as exc:
        raise ValueError(f"model file {path}: missing tensor {exc}") from exc
    model.validate()
    return model
