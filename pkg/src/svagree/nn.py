"""Minimal dense recurrent-network core with exact analytic gradients.

Everything is 64-bit numpy: embeddings, one LSTM or SRN layer, an affine
output layer with softmax, backpropagation through time, Adam, and a
central-finite-difference gradient checker. One example is processed at a
time at its own length; batching happens by gradient accumulation.

Checkpoint files are a single JSON document:

    {"format": "svagree.checkpoint", "version": 1,
     "config": {"cell", "mode", "vocab_size", "dim", "hidden", "n_classes"},
     "objective": ..., "vocab": {...}, "vocab_digest": ...,
     "params": {name: {"shape": [...], "data": [row-major floats]}},
     "train_state": {...}}   # optional, written by the training driver

Floats are serialized with full repr precision, so load/save round-trips
are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import DataError, NumericError

INIT_SCALE = 0.05
FORGET_BIAS = 1.0

LSTM_GATE_WEIGHTS = ("W_i", "W_f", "W_o", "W_g")
LSTM_GATE_BIASES = ("b_i", "b_f", "b_o", "b_g")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax along the last axis with max-subtraction."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


@dataclass(frozen=True)
class ModelConfig:
    cell: str  # "lstm" | "srn"
    mode: str  # "classifier" | "lm"
    vocab_size: int
    dim: int = 50
    hidden: int = 50
    n_classes: int = 2

    def __post_init__(self) -> None:
        if self.cell not in ("lstm", "srn"):
            raise ValueError(f"unknown cell type: {self.cell!r}")
        if self.mode not in ("classifier", "lm"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if min(self.vocab_size, self.dim, self.hidden, self.n_classes) <= 0:
            raise ValueError("model dimensions must be positive")

    @property
    def out_size(self) -> int:
        return self.vocab_size if self.mode == "lm" else self.n_classes


class ParamStore:
    """Named parameter tensors, each paired with a same-shaped gradient slot."""

    def __init__(self, params: dict[str, np.ndarray]):
        self.params = params
        self.grads = {name: np.zeros_like(p) for name, p in params.items()}

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def grad_global_norm(self) -> float:
        total = 0.0
        for g in self.grads.values():
            total += float(np.sum(g * g))
        return float(np.sqrt(total))

    def clip_grads(self, max_norm: float) -> float:
        """Scale all gradients so the global norm is at most max_norm."""
        norm = self.grad_global_norm()
        if norm > max_norm and norm > 0.0:
            scale = max_norm / norm
            for g in self.grads.values():
                g *= scale
        return norm

    def scale_grads(self, factor: float) -> None:
        for g in self.grads.values():
            g *= factor

    def copy_params(self) -> dict[str, np.ndarray]:
        return {name: p.copy() for name, p in self.params.items()}

    def load_params(self, params: Mapping[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            np.copyto(p, params[name])


def init_params(config: ModelConfig, rng: np.random.Generator) -> ParamStore:
    """Uniform(-0.05, 0.05) weights, zero biases, forget-gate bias +1."""
    d, h = config.dim, config.hidden

    def uniform(*shape: int) -> np.ndarray:
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)

    params: dict[str, np.ndarray] = {"E": uniform(config.vocab_size, d)}
    if config.cell == "lstm":
        for name in LSTM_GATE_WEIGHTS:
            params[name] = uniform(d + h, h)
        for name in LSTM_GATE_BIASES:
            params[name] = np.zeros(h)
        params["b_f"] += FORGET_BIAS
    else:
        params["W"] = uniform(d + h, h)
        params["b"] = np.zeros(h)
    params["w_out"] = uniform(h, config.out_size)
    params["b_out"] = np.zeros(config.out_size)
    return ParamStore(params)


# --- Cell equations -----------------------------------------------------


def _stacked_lstm_weights(ps: ParamStore) -> tuple[np.ndarray, np.ndarray]:
    W = np.concatenate([ps.params[n] for n in LSTM_GATE_WEIGHTS], axis=1)
    b = np.concatenate([ps.params[n] for n in LSTM_GATE_BIASES])
    return W, b


def _lstm_step_stacked(
    W: np.ndarray, b: np.ndarray, h_size: int, z: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One LSTM step on the stacked gate matrix.

    z is [x_t; h_prev]. Returns (h_t, c_t, tanh(c_t), gates) where gates
    holds the activated i, f, o, g blocks.
    """
    a = z @ W + b
    gates = np.empty_like(a)
    gates[: 3 * h_size] = sigmoid(a[: 3 * h_size])
    gates[3 * h_size :] = np.tanh(a[3 * h_size :])
    i = gates[:h_size]
    f = gates[h_size : 2 * h_size]
    o = gates[2 * h_size : 3 * h_size]
    g = gates[3 * h_size :]
    c_t = f * c_prev + i * g
    tanh_c = np.tanh(c_t)
    h_t = o * tanh_c
    return h_t, c_t, tanh_c, gates


def lstm_step(
    ps: ParamStore, x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Standard LSTM update: sigmoid gates, tanh candidate,
    c_t = f*c_prev + i*g, h_t = o*tanh(c_t)."""
    h_size = h_prev.shape[0]
    W, b = _stacked_lstm_weights(ps)
    if x_t.shape[0] + h_size != W.shape[0]:
        raise ValueError(
            f"lstm_step shape mismatch: input {x_t.shape[0]} + hidden {h_size} "
            f"!= weight rows {W.shape[0]}"
        )
    z = np.concatenate([x_t, h_prev])
    h_t, c_t, _, _ = _lstm_step_stacked(W, b, h_size, z, c_prev)
    return h_t, c_t


def srn_step(ps: ParamStore, x_t: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """Elman update: h_t = tanh(W [x_t; h_prev] + b)."""
    W, b = ps.params["W"], ps.params["b"]
    if x_t.shape[0] + h_prev.shape[0] != W.shape[0]:
        raise ValueError(
            f"srn_step shape mismatch: input {x_t.shape[0]} + hidden "
            f"{h_prev.shape[0]} != weight rows {W.shape[0]}"
        )
    z = np.concatenate([x_t, h_prev])
    return np.tanh(z @ W + b)


# --- Whole-sequence model -----------------------------------------------


@dataclass
class TraceRecord:
    """Per-timestep states of one forward pass, for the activation probes."""

    hidden: np.ndarray  # (T, h)
    cell: np.ndarray | None  # (T, h) for LSTM, None for SRN
    probs: np.ndarray  # (T, k): output distribution from each timestep's state


@dataclass
class ForwardResult:
    probs: np.ndarray  # classifier: (k,); lm: (T, vocab)
    logits: np.ndarray
    trace: TraceRecord | None = None


@dataclass
class _Cache:
    token_ids: np.ndarray
    Z: np.ndarray  # (T, d+h) cell inputs [x_t; h_{t-1}]
    H: np.ndarray  # (T, h)
    C: np.ndarray | None  # (T, h), LSTM only
    tanh_C: np.ndarray | None
    gates: np.ndarray | None  # (T, 4h), LSTM only


class RecurrentModel:
    """Embedding -> one recurrent layer -> affine softmax output.

    classifier mode applies the output layer to the final hidden state; lm
    mode applies it at every position. forward caches activations; backward
    consumes them and accumulates gradients in the ParamStore.
    """

    def __init__(self, config: ModelConfig, ps: ParamStore | None = None, seed: int = 0):
        self.config = config
        if ps is None:
            ps = init_params(config, np.random.default_rng(seed))
        expected = self._expected_shapes(config)
        for name, shape in expected.items():
            if name not in ps.params or ps.params[name].shape != shape:
                raise ValueError(
                    f"parameter {name}: expected shape {shape}, "
                    f"got {ps.params.get(name, np.empty(0)).shape}"
                )
        self.ps = ps
        self._cache: _Cache | None = None

    @staticmethod
    def _expected_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
        d, h = config.dim, config.hidden
        shapes: dict[str, tuple[int, ...]] = {"E": (config.vocab_size, d)}
        if config.cell == "lstm":
            for name in LSTM_GATE_WEIGHTS:
                shapes[name] = (d + h, h)
            for name in LSTM_GATE_BIASES:
                shapes[name] = (h,)
        else:
            shapes["W"] = (d + h, h)
            shapes["b"] = (h,)
        shapes["w_out"] = (h, config.out_size)
        shapes["b_out"] = (config.out_size,)
        return shapes

    def forward(self, token_ids, want_trace: bool = False) -> ForwardResult:
        ids = np.asarray(token_ids, dtype=np.intp)
        if ids.ndim != 1 or ids.shape[0] == 0:
            raise ValueError("forward needs a non-empty 1-D token id sequence")
        if ids.min() < 0 or ids.max() >= self.config.vocab_size:
            raise ValueError("token id out of vocabulary range")
        cfg = self.config
        d, h = cfg.dim, cfg.hidden
        T = ids.shape[0]
        E = self.ps.params["E"]

        Z = np.empty((T, d + h))
        H = np.empty((T, h))
        if cfg.cell == "lstm":
            W_all, b_all = _stacked_lstm_weights(self.ps)
            C = np.empty((T, h))
            tanh_C = np.empty((T, h))
            gates = np.empty((T, 4 * h))
            h_prev = np.zeros(h)
            c_prev = np.zeros(h)
            for t in range(T):
                Z[t, :d] = E[ids[t]]
                Z[t, d:] = h_prev
                h_t, c_t, tanh_c, gate = _lstm_step_stacked(
                    W_all, b_all, h, Z[t], c_prev
                )
                H[t] = h_t
                C[t] = c_t
                tanh_C[t] = tanh_c
                gates[t] = gate
                h_prev, c_prev = h_t, c_t
            self._cache = _Cache(ids, Z, H, C, tanh_C, gates)
        else:
            W, b = self.ps.params["W"], self.ps.params["b"]
            h_prev = np.zeros(h)
            for t in range(T):
                Z[t, :d] = E[ids[t]]
                Z[t, d:] = h_prev
                h_prev = np.tanh(Z[t] @ W + b)
                H[t] = h_prev
            self._cache = _Cache(ids, Z, H, None, None, None)

        w_out, b_out = self.ps.params["w_out"], self.ps.params["b_out"]
        if cfg.mode == "lm":
            logits = H @ w_out + b_out  # (T, vocab)
        else:
            logits = H[-1] @ w_out + b_out  # (k,)
        probs = softmax(logits)

        trace = None
        if want_trace:
            step_logits = H @ w_out + b_out
            cell = self._cache.C.copy() if self._cache.C is not None else None
            trace = TraceRecord(hidden=H.copy(), cell=cell, probs=softmax(step_logits))
        return ForwardResult(probs=probs, logits=logits, trace=trace)

    def backward(self, dlogits: np.ndarray) -> None:
        """Accumulate parameter gradients for the cached forward pass.

        dlogits is the loss gradient at the output logits: shape (k,) in
        classifier mode, (T, vocab) in lm mode.
        """
        cache = self._cache
        if cache is None:
            raise RuntimeError("backward called before forward")
        cfg = self.config
        d, h = cfg.dim, cfg.hidden
        T = cache.H.shape[0]
        grads = self.ps.grads
        w_out = self.ps.params["w_out"]

        dH = np.zeros((T, h))
        dlogits = np.asarray(dlogits, dtype=np.float64)
        if cfg.mode == "lm":
            if dlogits.shape != (T, cfg.out_size):
                raise ValueError(f"dlogits shape {dlogits.shape} != {(T, cfg.out_size)}")
            grads["w_out"] += cache.H.T @ dlogits
            grads["b_out"] += dlogits.sum(axis=0)
            dH += dlogits @ w_out.T
        else:
            if dlogits.shape != (cfg.out_size,):
                raise ValueError(f"dlogits shape {dlogits.shape} != {(cfg.out_size,)}")
            grads["w_out"] += np.outer(cache.H[-1], dlogits)
            grads["b_out"] += dlogits
            dH[-1] += w_out @ dlogits

        dZ = np.empty((T, d + h))
        if cfg.cell == "lstm":
            W_all, _ = _stacked_lstm_weights(self.ps)
            dA = np.empty((T, 4 * h))
            dc_next = np.zeros(h)
            dh_carry = np.zeros(h)
            for t in range(T - 1, -1, -1):
                gate = cache.gates[t]
                i, f = gate[:h], gate[h : 2 * h]
                o, g = gate[2 * h : 3 * h], gate[3 * h :]
                tanh_c = cache.tanh_C[t]
                c_prev = cache.C[t - 1] if t > 0 else np.zeros(h)
                dh = dH[t] + dh_carry
                dc = dc_next + dh * o * (1.0 - tanh_c * tanh_c)
                da = dA[t]
                da[:h] = (dc * g) * i * (1.0 - i)
                da[h : 2 * h] = (dc * c_prev) * f * (1.0 - f)
                da[2 * h : 3 * h] = (dh * tanh_c) * o * (1.0 - o)
                da[3 * h :] = (dc * i) * (1.0 - g * g)
                dz = W_all @ da
                dZ[t] = dz
                dh_carry = dz[d:]
                dc_next = dc * f
            dW_all = cache.Z.T @ dA
            for k, name in enumerate(LSTM_GATE_WEIGHTS):
                grads[name] += dW_all[:, k * h : (k + 1) * h]
            db_all = dA.sum(axis=0)
            for k, name in enumerate(LSTM_GATE_BIASES):
                grads[name] += db_all[k * h : (k + 1) * h]
        else:
            W = self.ps.params["W"]
            dA = np.empty((T, h))
            dh_carry = np.zeros(h)
            for t in range(T - 1, -1, -1):
                dh = dH[t] + dh_carry
                da = dh * (1.0 - cache.H[t] * cache.H[t])
                dA[t] = da
                dz = W @ da
                dZ[t] = dz
                dh_carry = dz[d:]
            grads["W"] += cache.Z.T @ dA
            grads["b"] += dA.sum(axis=0)

        np.add.at(grads["E"], cache.token_ids, dZ[:, :d])


# --- Losses --------------------------------------------------------------


def classifier_loss(result: ForwardResult, target: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of the target class; returns (loss, dloss/dlogits)."""
    logp = log_softmax(result.logits)
    loss = -float(logp[target])
    dlogits = result.probs.copy()
    dlogits[target] -= 1.0
    return loss, dlogits


def lm_loss(result: ForwardResult, targets) -> tuple[float, np.ndarray]:
    """Mean per-position cross-entropy for next-token prediction."""
    targets = np.asarray(targets, dtype=np.intp)
    T = result.logits.shape[0]
    if targets.shape != (T,):
        raise ValueError(f"lm targets shape {targets.shape} != ({T},)")
    logp = log_softmax(result.logits)
    loss = -float(np.mean(logp[np.arange(T), targets]))
    dlogits = result.probs.copy()
    dlogits[np.arange(T), targets] -= 1.0
    dlogits /= T
    return loss, dlogits


def example_loss(model: RecurrentModel, input_ids, target) -> tuple[float, ForwardResult, np.ndarray]:
    """Forward + loss for one example under the model's mode."""
    result = model.forward(input_ids)
    if model.config.mode == "lm":
        loss, dlogits = lm_loss(result, target)
    else:
        loss, dlogits = classifier_loss(result, int(target))
    return loss, result, dlogits


# --- Adam -----------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment estimates per parameter plus the step counter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(
        cls,
        ps: ParamStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> "AdamState":
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
            m={n: np.zeros_like(p) for n, p in ps.params.items()},
            v={n: np.zeros_like(p) for n, p in ps.params.items()},
        )


def adam_update(ps: ParamStore, state: AdamState) -> None:
    """One Adam step with bias-corrected moments (Kingma & Ba defaults)."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for name, p in ps.params.items():
        g = ps.grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)


# --- Gradient checking ----------------------------------------------------


@dataclass
class GradCheckReport:
    label: str
    tolerance: float
    max_rel_error: dict[str, float]
    passed: bool

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values())


def _relative_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return np.abs(analytic - numeric) / denom


def finite_difference_grads(
    loss_fn: Callable[[], float], ps: ParamStore, epsilon: float = 1e-4
) -> dict[str, np.ndarray]:
    """Central-difference gradient of loss_fn for every parameter entry."""
    numeric = {}
    for name, p in ps.params.items():
        out = np.zeros_like(p)
        flat = p.reshape(-1)
        flat_out = out.reshape(-1)
        for idx in range(flat.shape[0]):
            original = flat[idx]
            flat[idx] = original + epsilon
            up = loss_fn()
            flat[idx] = original - epsilon
            down = loss_fn()
            flat[idx] = original
            flat_out[idx] = (up - down) / (2.0 * epsilon)
        numeric[name] = out
    return numeric


def grad_check(
    config: ModelConfig,
    seed: int,
    tolerance: float = 1e-4,
    seq_len: int = 6,
    epsilon: float = 1e-4,
    label: str | None = None,
) -> GradCheckReport:
    """Compare BPTT gradients against central finite differences.

    Keep dimensions small (<= 8): runtime is quadratic in parameter count.
    """
    rng = np.random.default_rng(seed)
    model = RecurrentModel(config, init_params(config, rng))
    ids = rng.integers(0, config.vocab_size, size=seq_len)
    if config.mode == "lm":
        target = rng.integers(0, config.vocab_size, size=seq_len)
    else:
        target = int(rng.integers(0, config.n_classes))

    model.ps.zero_grads()
    loss, _, dlogits = example_loss(model, ids, target)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss} in gradient check")
    model.backward(dlogits)
    analytic = {name: g.copy() for name, g in model.ps.grads.items()}

    numeric = finite_difference_grads(
        lambda: example_loss(model, ids, target)[0], model.ps, epsilon
    )
    max_rel = {
        name: float(np.max(_relative_errors(analytic[name], numeric[name])))
        for name in analytic
    }
    passed = all(err < tolerance for err in max_rel.values())
    return GradCheckReport(
        label=label or f"{config.cell}-{config.mode}-seed{seed}",
        tolerance=tolerance,
        max_rel_error=max_rel,
        passed=passed,
    )


# --- Checkpoints -----------------------------------------------------------

CHECKPOINT_FORMAT = "svagree.checkpoint"


def checkpoint_dict(
    model: RecurrentModel,
    vocab_data: dict | None = None,
    vocab_digest: str | None = None,
    objective: str | None = None,
    train_state: dict | None = None,
) -> dict:
    cfg = model.config
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "config": {
            "cell": cfg.cell,
            "mode": cfg.mode,
            "vocab_size": cfg.vocab_size,
            "dim": cfg.dim,
            "hidden": cfg.hidden,
            "n_classes": cfg.n_classes,
        },
        "objective": objective,
        "vocab": vocab_data,
        "vocab_digest": vocab_digest,
        "params": {
            name: {"shape": list(p.shape), "data": p.reshape(-1).tolist()}
            for name, p in model.ps.params.items()
        },
    }
    if train_state is not None:
        doc["train_state"] = train_state
    return doc


def save_checkpoint(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path} is not a checkpoint file")
    return doc


def model_from_checkpoint(doc: dict) -> RecurrentModel:
    cfg = ModelConfig(**doc["config"])
    params = {}
    for name, payload in doc["params"].items():
        arr = np.array(payload["data"], dtype=np.float64).reshape(payload["shape"])
        params[name] = arr
    return RecurrentModel(cfg, ParamStore(params))
