"""Recurrent mixture-density network in plain numpy.

Per time step the first LSTM layer sees the embedded order type and side, the
standardized inter-arrival time, size and price, the previous step's
autoregressive move with its mask flag, and (in ``repeat`` mode) the embedded
hour and pair repeated along the sequence.  The last hidden state passes
through ``n_dense`` dense layers whose output feeds a mixture head.

All gradients are hand-derived; ``backward`` returns gradients of the *sum*
of per-sample losses.
"""

from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from . import __version__
from ._binio import read_container, write_container
from .features import NormalizationStats, SampleSet, apply_normalization, fit_normalization
from .mixtures import (Family, MixtureForecast, head_forecast, head_shapes, inverse_softplus,
                       nll_score_gradient, head_scores)

logger = logging.getLogger(__name__)

CATEGORICALS = (("type", 3, 1), ("side", 2, 1), ("hour", 24, 0), ("pair", 2, 1))  # name, size, offset
_ACT = {"tanh": (np.tanh, lambda y: 1.0 - y * y),
        "relu": (lambda x: np.maximum(x, 0.0), lambda y: (y > 0).astype(y.dtype))}


class ConfigError(ValueError):
    pass


class TrainingDivergence(FloatingPointError):
    pass


@dataclass(frozen=True)
class NetConfig:
    n_layers: int = 1
    state_size: int = 32
    n_dense: int = 1
    dense_width: int = 32
    embed_dim: int = 4
    keep_prob: float = 1.0
    embed_activation: str = "tanh"
    dense_activation: str = "relu"
    static_mode: str = "repeat"  # or "dense"
    static_dim: int = 4  # width of the static projection in dense mode
    seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1 or self.n_dense < 1:
            raise ConfigError("need at least one recurrent and one dense layer")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigError("keep_prob must lie in (0, 1]")
        if self.embed_activation not in _ACT or self.dense_activation not in _ACT:
            raise ConfigError("activations must be 'tanh' or 'relu'")
        if self.static_mode not in ("repeat", "dense"):
            raise ConfigError("static_mode must be 'repeat' or 'dense'")
        if min(self.state_size, self.dense_width, self.embed_dim, self.static_dim) < 1:
            raise ConfigError("layer sizes must be positive")

    @property
    def input_dim(self) -> int:
        n_emb = 4 if self.static_mode == "repeat" else 2
        return n_emb * self.embed_dim + 5


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 20
    patience: int = 3
    clip_norm: float | None = 10.0
    seed: int = 0


# --------------------------------------------------------------------------
# primitive ops


def embed(category: int, W: np.ndarray, b: np.ndarray, activation: str = "tanh", offset: int = 1):
    """Activated row lookup ``g(W^T onehot(category) + b)``."""
    idx = int(category) - offset
    if not 0 <= idx < W.shape[0]:
        raise IndexError(f"category {category} outside table of {W.shape[0]}")
    return _ACT[activation][0](W[idx] + b)


def lstm_step(x, h, c, W, b):
    """One LSTM step; ``W`` stacks input and recurrent weights, gates ordered i, f, o, g."""
    x, h, c = np.asarray(x, float), np.asarray(h, float), np.asarray(c, float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise FloatingPointError("non-finite LSTM input")
    H = h.shape[-1]
    a = np.concatenate([x, h], axis=-1) @ W + b
    i = expit(a[..., :H])
    f = expit(a[..., H:2 * H])
    o = expit(a[..., 2 * H:3 * H])
    g = np.tanh(a[..., 3 * H:])
    c_new = f * c + i * g
    return o * np.tanh(c_new), c_new


def adam_step(params: dict, grads: dict, state: "AdamState") -> None:
    """Bias-corrected Adam update, in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, g in grads.items():
        m = state.m.setdefault(k, np.zeros_like(params[k]))
        v = state.v.setdefault(k, np.zeros_like(params[k]))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        params[k] -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# parameters


def _uniform(rng, fan_in, shape):
    lim = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-lim, lim, size=shape)


def _ztp_rate_for_mean(mean: float) -> float:
    if mean <= 1.0 + 1e-6:
        return 1e-3
    return brentq(lambda lam: lam / -math.expm1(-lam) - mean, 1e-6, mean + 10.0)


def init_params(config: NetConfig, family: Family | str, targets: np.ndarray | None = None) -> dict:
    """Fan-in uniform weights, forget bias +1, head biases matched to ``targets``."""
    family = Family(family)
    rng = np.random.default_rng(config.seed)
    p: dict[str, np.ndarray] = {}
    e = config.embed_dim
    for name, card, _ in CATEGORICALS:
        p[f"emb_{name}_W"] = _uniform(rng, 1, (card, e))
        p[f"emb_{name}_b"] = np.zeros(e)
    if config.static_mode == "dense":
        for name in ("hour", "pair"):
            del p[f"emb_{name}_W"], p[f"emb_{name}_b"]
        p["static_W"] = _uniform(rng, 2, (2, config.static_dim))
        p["static_b"] = np.zeros(config.static_dim)
    H = config.state_size
    in_dim = config.input_dim
    for l in range(config.n_layers):
        fan = in_dim + H
        p[f"lstm{l}_W"] = _uniform(rng, fan, (fan, 4 * H))
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        p[f"lstm{l}_b"] = b
        in_dim = H
    width_in = H + (config.static_dim if config.static_mode == "dense" else 0)
    for d in range(config.n_dense):
        p[f"dense{d}_W"] = _uniform(rng, width_in, (width_in, config.dense_width))
        p[f"dense{d}_b"] = np.zeros(config.dense_width)
        width_in = config.dense_width
    for k, shape in head_shapes(family, config.dense_width).items():
        p[f"head.{k}"] = _uniform(rng, config.dense_width, shape) if k.endswith("_W") else np.zeros(shape)
    if targets is not None and len(targets):
        _init_head_bias(p, family, np.asarray(targets))
    return p


def _init_head_bias(p: dict, family: Family, y: np.ndarray) -> None:
    counts = np.array([(y < 0).sum(), (y > 0).sum()] + ([(y == 0).sum()] if family is Family.ZTP else []),
                      dtype=float) + 1.0
    p["head.pi_b"] = np.log(counts / counts.sum())
    for k, sel in enumerate((y < 0, y > 0)):
        mags = np.abs(y[sel]).astype(float)
        mean = float(mags.mean()) if mags.size else 1.0
        if family is Family.ZTP:
            level = _ztp_rate_for_mean(max(mean, 1.0))
        else:
            level = max(mean, 1e-2)
        name = "mu" if family is Family.NEGBIN else "lam"
        p[f"head.{name}_b"][k] = inverse_softplus(level)
        if family is Family.NEGBIN:
            var = float(mags.var()) if mags.size > 1 else mean
            alpha = min(max((var - mean) / max(mean, 1e-2) ** 2, 0.05), 5.0)
            p["head.alpha_b"][k] = inverse_softplus(alpha)


def head_weights(params: dict) -> dict:
    return {k[5:]: v for k, v in params.items() if k.startswith("head.")}


# --------------------------------------------------------------------------
# forward / backward


def _dropout(shape, keep, rng):
    if rng is None or keep >= 1.0:
        return None
    return (rng.random(shape) < keep) / keep


def _step_inputs(batch: SampleSet, params: dict, config: NetConfig):
    """Build the first-layer input sequence and the embedding caches."""
    B, m = len(batch), batch.m
    act = _ACT[config.embed_activation][0]
    cats = {
        "type": batch.temporal[:, :, 2].astype(np.int64) - 1,
        "side": batch.temporal[:, :, 3].astype(np.int64) - 1,
    }
    if config.static_mode == "repeat":
        cats["hour"] = np.repeat(np.asarray(batch.hour, np.int64)[:, None], m, axis=1)
        cats["pair"] = np.repeat(np.asarray(batch.pair, np.int64)[:, None] - 1, m, axis=1)
    embs = {}
    for name, idx in cats.items():
        W = params[f"emb_{name}_W"]
        if idx.min(initial=0) < 0 or idx.max(initial=0) >= W.shape[0]:
            raise IndexError(f"{name} category outside embedding table")
        embs[name] = act(W[idx] + params[f"emb_{name}_b"])
    ar_in = np.zeros((B, m))
    ar_flag = np.ones((B, m))
    ar_in[:, 1:] = batch.autoregressive
    ar_flag[:, 1:] = batch.ar_masked
    cont = batch.temporal[:, :, [0, 1, 4]]
    parts = [embs["type"], embs["side"], cont, ar_in[..., None], ar_flag[..., None]]
    if config.static_mode == "repeat":
        parts += [embs["hour"], embs["pair"]]
    return np.concatenate(parts, axis=-1), cats, embs


def forward(batch: SampleSet, params: dict, config: NetConfig, train_mode: bool = False,
            rng: np.random.Generator | None = None):
    """Return the dense output ``z`` (B, width) and a cache for :func:`backward`.

    Dropout masks are drawn from ``rng`` only when ``train_mode`` is set.
    """
    if not batch.normalized:
        raise ConfigError("forward expects normalized samples")
    keep = config.keep_prob
    rng = rng if train_mode else None
    X, cats, embs = _step_inputs(batch, params, config)
    if X.shape[-1] != config.input_dim:
        raise ConfigError(f"input width {X.shape[-1]} != {config.input_dim}")
    B, m, _ = X.shape
    H = config.state_size
    cache = {"cats": cats, "embs": embs, "layers": [], "dense": [], "B": B, "m": m}

    inp = X
    for l in range(config.n_layers):
        mask = _dropout(inp.shape, keep, rng)
        x_in = inp * mask if mask is not None else inp
        W, b = params[f"lstm{l}_W"], params[f"lstm{l}_b"]
        Wx, Wh = W[:-H], W[-H:]
        pre_x = x_in @ Wx + b
        hs = np.zeros((B, m + 1, H))
        cs = np.zeros((B, m + 1, H))
        gates = np.empty((B, m, 4 * H))
        for t in range(m):
            a = pre_x[:, t] + hs[:, t] @ Wh
            g = gates[:, t]
            g[:, :3 * H] = expit(a[:, :3 * H])
            g[:, 3 * H:] = np.tanh(a[:, 3 * H:])
            cs[:, t + 1] = g[:, H:2 * H] * cs[:, t] + g[:, :H] * g[:, 3 * H:]
            hs[:, t + 1] = g[:, 2 * H:3 * H] * np.tanh(cs[:, t + 1])
        cache["layers"].append({"x": x_in, "mask": mask, "hs": hs, "cs": cs, "gates": gates})
        inp = hs[:, 1:]

    top = inp[:, -1]
    if config.static_mode == "dense":
        s_raw = np.stack([np.asarray(batch.hour, float) / 23.0, np.asarray(batch.pair, float) - 1.0], -1)
        s_emb = _ACT[config.embed_activation][0](s_raw @ params["static_W"] + params["static_b"])
        cache["static"] = (s_raw, s_emb)
        top = np.concatenate([top, s_emb], axis=-1)
    act = _ACT[config.dense_activation][0]
    z = top
    for d in range(config.n_dense):
        mask = _dropout(z.shape, keep, rng)
        z_in = z * mask if mask is not None else z
        z = act(z_in @ params[f"dense{d}_W"] + params[f"dense{d}_b"])
        cache["dense"].append({"x": z_in, "mask": mask, "y": z})
    mask = _dropout(z.shape, keep, rng)
    cache["out_mask"] = mask
    if mask is not None:
        z = z * mask
    return z, cache


def backward(cache: dict, dz: np.ndarray, params: dict, config: NetConfig) -> dict:
    """Gradients of ``sum(dz * z)`` w.r.t. every non-head parameter."""
    grads = {k: np.zeros_like(v) for k, v in params.items() if not k.startswith("head.")}
    H = config.state_size
    dact = _ACT[config.dense_activation][1]
    if cache["out_mask"] is not None:
        dz = dz * cache["out_mask"]
    for d in reversed(range(config.n_dense)):
        c = cache["dense"][d]
        da = dz * dact(c["y"])
        grads[f"dense{d}_W"] += c["x"].T @ da
        grads[f"dense{d}_b"] += da.sum(0)
        dz = da @ params[f"dense{d}_W"].T
        if c["mask"] is not None:
            dz = dz * c["mask"]
    if config.static_mode == "dense":
        s_raw, s_emb = cache["static"]
        ds = dz[:, H:] * _ACT[config.embed_activation][1](s_emb)
        grads["static_W"] += s_raw.T @ ds
        grads["static_b"] += ds.sum(0)
        dz = dz[:, :H]

    B, m = cache["B"], cache["m"]
    d_out = np.zeros((B, m, H))
    d_out[:, -1] = dz
    for l in reversed(range(config.n_layers)):
        c = cache["layers"][l]
        W = params[f"lstm{l}_W"]
        Wx, Wh = W[:-H], W[-H:]
        hs, cs, gates = c["hs"], c["cs"], c["gates"]
        da_all = np.empty((B, m, 4 * H))
        dWh = np.zeros_like(Wh)
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in reversed(range(m)):
            g = gates[:, t]
            i, f, o, gg = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
            dh = d_out[:, t] + dh_next
            tc = np.tanh(cs[:, t + 1])
            dc = dh * o * (1.0 - tc * tc) + dc_next
            da = da_all[:, t]
            da[:, :H] = dc * gg * i * (1.0 - i)
            da[:, H:2 * H] = dc * cs[:, t] * f * (1.0 - f)
            da[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
            da[:, 3 * H:] = dc * i * (1.0 - gg * gg)
            dc_next = dc * f
            dWh += hs[:, t].T @ da
            dh_next = da @ Wh.T
        x = c["x"]
        flat_da = da_all.reshape(-1, 4 * H)
        grads[f"lstm{l}_W"][:-H] += x.reshape(-1, x.shape[-1]).T @ flat_da
        grads[f"lstm{l}_W"][-H:] += dWh
        grads[f"lstm{l}_b"] += flat_da.sum(0)
        dx = da_all @ Wx.T
        if c["mask"] is not None:
            dx = dx * c["mask"]
        d_out = dx

    e = config.embed_dim
    dembact = _ACT[config.embed_activation][1]
    slots = {"type": slice(0, e), "side": slice(e, 2 * e)}
    if config.static_mode == "repeat":
        slots["hour"] = slice(2 * e + 5, 3 * e + 5)
        slots["pair"] = slice(3 * e + 5, 4 * e + 5)
    for name, sl in slots.items():
        dpre = d_out[:, :, sl] * dembact(cache["embs"][name])
        flat = dpre.reshape(-1, e)
        np.add.at(grads[f"emb_{name}_W"], cache["cats"][name].reshape(-1), flat)
        grads[f"emb_{name}_b"] += flat.sum(0)
    return grads


def loss_and_grads(batch: SampleSet, params: dict, config: NetConfig, family: Family | str,
                   train_mode: bool = False, rng: np.random.Generator | None = None):
    """Per-sample NLL and gradients of their sum for every parameter."""
    family = Family(family)
    z, cache = forward(batch, params, config, train_mode, rng)
    hw = head_weights(params)
    s, raw = head_scores(z, hw, family)
    nll, ds, draw = nll_score_gradient(np.asarray(batch.target), family, s, raw)
    grads_head = {"pi_W": z.T @ ds, "pi_b": ds.sum(0)}
    dz = ds @ hw["pi_W"].T
    for name, d in draw.items():
        grads_head[f"{name}_W"] = z.T @ d
        grads_head[f"{name}_b"] = d.sum(0)
        dz = dz + d @ hw[f"{name}_W"].T
    grads = backward(cache, dz, params, config)
    for k, v in grads_head.items():
        grads[f"head.{k}"] = v
    return nll, grads


# --------------------------------------------------------------------------
# model + training


@dataclass
class DeepMixtureModel:
    config: NetConfig
    family: Family
    params: dict
    stats: NormalizationStats

    def _prep(self, samples: SampleSet) -> SampleSet:
        return samples if samples.normalized else apply_normalization(samples, self.stats)

    def forecast(self, samples: SampleSet, batch_size: int = 512) -> MixtureForecast:
        samples = self._prep(samples)
        hw = head_weights(self.params)
        pis, prm = [], {n: [] for n in self.family.param_names}
        for start in range(0, len(samples), batch_size):
            part = samples.take(np.arange(start, min(start + batch_size, len(samples))))
            z, _ = forward(part, self.params, self.config, train_mode=False)
            f = head_forecast(z, hw, self.family)
            pis.append(f.pi)
            for n in prm:
                prm[n].append(f.params[n])
        K = self.family.n_components
        pi = np.concatenate(pis) if pis else np.zeros((0, K))
        return MixtureForecast(self.family, pi,
                               {n: (np.concatenate(v) if v else np.zeros((0, 2))) for n, v in prm.items()})

    def nll(self, samples: SampleSet, batch_size: int = 512) -> np.ndarray:
        return -self.forecast(samples, batch_size).log_likelihood(np.asarray(samples.target))


@dataclass
class TrainState:
    """Everything needed to resume training bit-exactly."""

    params: dict
    best_params: dict
    adam: AdamState
    rng_state: dict
    epoch: int = 0
    best_val: float = math.inf
    bad_evals: int = 0
    history: list = field(default_factory=list)
    stopped: bool = False


def _clip(grads: dict, max_norm: float | None) -> None:
    if max_norm is None:
        return
    norm = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if norm > max_norm:
        s = max_norm / norm
        for g in grads.values():
            g *= s


def train(train_set: SampleSet, val_set: SampleSet, net_config: NetConfig, family: Family | str,
          train_config: TrainConfig = TrainConfig(), stats: NormalizationStats | None = None,
          state: TrainState | None = None, max_epochs: int | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> tuple[DeepMixtureModel, TrainState]:
    """Mini-batch Adam on mean NLL with early stopping on validation NLL.

    Stops once validation NLL has failed to improve for ``patience``
    consecutive evaluations and returns the best-validation parameters.
    Passing a previous ``state`` resumes exactly where it left off.
    """
    family = Family(family)
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if stats is None:
        stats = fit_normalization(train_set)
    tr = train_set if train_set.normalized else apply_normalization(train_set, stats)
    va = val_set if val_set.normalized else apply_normalization(val_set, stats)
    tc = train_config
    if state is None:
        params = init_params(net_config, family, np.asarray(train_set.target))
        rng = np.random.default_rng(tc.seed)
        state = TrainState(params=params, best_params=copy.deepcopy(params),
                           adam=AdamState(tc.lr, tc.beta1, tc.beta2, tc.eps),
                           rng_state=rng.bit_generator.state)
    rng = np.random.default_rng()
    rng.bit_generator.state = state.rng_state
    params = state.params
    limit = tc.max_epochs if max_epochs is None else min(tc.max_epochs, state.epoch + max_epochs)
    n = len(tr)
    while not state.stopped and state.epoch < limit:
        t0 = time.perf_counter()
        perm = rng.permutation(n)
        total, count = 0.0, 0
        for bi, start in enumerate(range(0, n, tc.batch_size)):
            idx = np.sort(perm[start:start + tc.batch_size])
            batch = tr.take(idx)
            nll, grads = loss_and_grads(batch, params, net_config, family, True, rng)
            loss = float(nll.mean())
            if not math.isfinite(loss):
                raise TrainingDivergence(f"non-finite NLL in epoch {state.epoch + 1}, batch {bi}")
            for g in grads.values():
                g /= len(idx)
            _clip(grads, tc.clip_norm)
            adam_step(params, grads, state.adam)
            total += float(nll.sum())
            count += len(idx)
        state.epoch += 1
        model = DeepMixtureModel(net_config, family, params, stats)
        val = float(model.nll(va).mean())
        if not math.isfinite(val):
            raise TrainingDivergence(f"non-finite validation NLL after epoch {state.epoch}")
        rec = {"epoch": state.epoch, "train_nll": total / count, "val_nll": val,
               "wall_time": time.perf_counter() - t0}
        state.history.append(rec)
        if val < state.best_val:
            state.best_val = val
            state.best_params = copy.deepcopy(params)
            state.bad_evals = 0
        else:
            state.bad_evals += 1
        if state.bad_evals >= tc.patience:
            state.stopped = True
        logger.info("epoch %d train %.5f val %.5f", state.epoch, rec["train_nll"], val)
        if on_epoch is not None:
            on_epoch(rec)
    state.rng_state = rng.bit_generator.state
    return DeepMixtureModel(net_config, family, copy.deepcopy(state.best_params), stats), state


# --------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, model: DeepMixtureModel, state: TrainState | None = None,
                    train_config: TrainConfig | None = None, meta: dict | None = None) -> None:
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    header = {
        "kind": "checkpoint",
        "version": CHECKPOINT_VERSION,
        "tool_version": __version__,
        "net_config": asdict(model.config),
        "family": model.family.value,
        "normalization": model.stats.to_dict(),
        "train_config": asdict(train_config) if train_config else None,
        "meta": meta or {},
    }
    if state is not None:
        arrays.update({f"current/{k}": v for k, v in state.params.items()})
        arrays.update({f"adam_m/{k}": v for k, v in state.adam.m.items()})
        arrays.update({f"adam_v/{k}": v for k, v in state.adam.v.items()})
        header["train_state"] = {
            "epoch": state.epoch, "best_val": state.best_val, "bad_evals": state.bad_evals,
            "stopped": state.stopped, "history": [{k: v for k, v in h.items() if k != "wall_time"}
                                                  for h in state.history],
            "rng_state": state.rng_state,
            "adam": {"lr": state.adam.lr, "beta1": state.adam.beta1, "beta2": state.adam.beta2,
                     "eps": state.adam.eps, "t": state.adam.t},
        }
    write_container(path, header, arrays)


def load_checkpoint(path: str | Path) -> tuple[DeepMixtureModel, TrainState | None, dict]:
    header, arrays = read_container(path)
    if header.get("kind") != "checkpoint":
        raise ValueError(f"{path} is not a checkpoint")
    group = lambda prefix: {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}
    cfg = NetConfig(**header["net_config"])
    model = DeepMixtureModel(cfg, Family(header["family"]), group("param/"),
                             NormalizationStats.from_dict(header["normalization"]))
    state = None
    ts = header.get("train_state")
    if ts is not None:
        a = ts["adam"]
        adam = AdamState(a["lr"], a["beta1"], a["beta2"], a["eps"], a["t"],
                         group("adam_m/"), group("adam_v/"))
        state = TrainState(params=group("current/"), best_params=copy.deepcopy(model.params),
                           adam=adam, rng_state=ts["rng_state"], epoch=ts["epoch"],
                           best_val=ts["best_val"], bad_evals=ts["bad_evals"],
                           history=list(ts["history"]), stopped=ts["stopped"])
    return model, state, header


def train_config_from_header(header: dict) -> TrainConfig | None:
    tc = header.get("train_config")
    return TrainConfig(**tc) if tc else None


__all__ = ["NetConfig", "TrainConfig", "AdamState", "DeepMixtureModel", "TrainState", "embed",
           "lstm_step", "adam_step", "init_params", "forward", "backward", "loss_and_grads",
           "train", "save_checkpoint", "load_checkpoint"]
