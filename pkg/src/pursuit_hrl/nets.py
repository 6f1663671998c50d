"""Minimal MLP kit: forward/backward with analytic gradients, Adam, Polyak
averaging, replay buffers, and exact checkpoint round-trips.

Everything operates on float64 numpy arrays with batch-first shapes. The
Gaussian head predicts (mean, log-variance); the log-variance is softly
bounded inside [LOGVAR_MIN, LOGVAR_MAX] so exponentiation stays finite while
the mapping remains differentiable everywhere.
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

LOGVAR_MIN = -10.0
LOGVAR_MAX = 4.0

HEADS = ("linear", "tanh", "gauss")


class DivergenceError(RuntimeError):
    """Raised when gradients or losses become non-finite."""


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


class Mlp:
    """Fully connected ReLU network with a configurable output head.

    For head="gauss" the raw output width must be even: the first half is the
    mean, the second half the bounded log-variance.
    """

    def __init__(self, widths, head="linear", rng=None, init_scale=None):
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        if head == "gauss" and widths[-1] % 2 != 0:
            raise ValueError("gauss head needs an even output width")
        self.widths = list(widths)
        self.head = head
        rng = rng or np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            scale = init_scale if init_scale is not None else np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(scale=scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._cache = None

    @property
    def in_width(self):
        return self.widths[0]

    @property
    def out_width(self):
        return self.widths[-1]

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_parameters(self, params):
        flat = list(params)
        for k in range(len(self.weights)):
            self.weights[k] = flat[2 * k]
            self.biases[k] = flat[2 * k + 1]

    def copy(self):
        dup = Mlp.__new__(Mlp)
        dup.widths = list(self.widths)
        dup.head = self.head
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        dup._cache = None
        return dup

    def forward(self, x, cache=True):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.in_width:
            raise ValueError(f"input width {x.shape[1]} != {self.in_width}")
        acts = [x]
        pre = []
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if k < last else z
            acts.append(h)
        raw = pre[-1]
        if self.head == "linear":
            out = raw
        elif self.head == "tanh":
            out = np.tanh(raw)
        else:
            k = self.out_width // 2
            mu, lv_raw = raw[:, :k], raw[:, k:]
            lv = LOGVAR_MIN + (LOGVAR_MAX - LOGVAR_MIN) * _sigmoid(lv_raw)
            out = np.concatenate([mu, lv], axis=1)
        if cache:
            self._cache = (acts, pre, raw, out)
        return out

    def backward(self, grad_out):
        """Reverse-mode gradients from dL/d(output).

        Returns (param_grads, grad_input); param_grads aligns with
        parameters(). Requires a cached forward pass.
        """
        if self._cache is None:
            raise RuntimeError("forward(cache=True) must run before backward")
        acts, pre, raw, out = self._cache
        g = np.atleast_2d(np.asarray(grad_out, dtype=float))
        if self.head == "linear":
            gz = g
        elif self.head == "tanh":
            gz = g * (1.0 - out ** 2)
        else:
            k = self.out_width // 2
            s = _sigmoid(raw[:, k:])
            dlv = (LOGVAR_MAX - LOGVAR_MIN) * s * (1.0 - s)
            gz = np.concatenate([g[:, :k], g[:, k:] * dlv], axis=1)

        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            a_prev = acts[k]
            grads[2 * k] = a_prev.T @ gz
            grads[2 * k + 1] = gz.sum(axis=0)
            gz = gz @ self.weights[k].T
            if k > 0:
                gz = gz * (pre[k - 1] > 0)
        return grads, gz


class Adam:
    """Bias-corrected Adam over a flat list of parameter arrays."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise DivergenceError("non-finite gradient in Adam step")
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for k, (p, g) in enumerate(zip(params, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g ** 2
            p -= self.lr * (self.m[k] / b1c) / (np.sqrt(self.v[k] / b2c) + self.eps)
        return params

    def state_tensors(self, prefix):
        out = {f"{prefix}.step": np.array([self.step_count], dtype=np.int64)}
        for k, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"{prefix}.m{k}"] = m
            out[f"{prefix}.v{k}"] = v
        return out

    def load_state_tensors(self, prefix, tensors):
        self.step_count = int(tensors[f"{prefix}.step"][0])
        self.m = [tensors[f"{prefix}.m{k}"] for k in range(len(self.m))]
        self.v = [tensors[f"{prefix}.v{k}"] for k in range(len(self.v))]


def soft_update(target_params, online_params, zeta):
    """Polyak move of the targets toward the online values, in place."""
    if not (0.0 <= zeta < 1.0):
        raise ValueError("zeta must lie in [0, 1)")
    for tp, op in zip(target_params, online_params):
        tp *= (1.0 - zeta)
        tp += zeta * op
    return target_params


class ReplayBuffer:
    """Fixed-capacity ring buffer with without-replacement batch sampling."""

    def __init__(self, capacity, seed=0):
        self.capacity = int(capacity)
        self.items = []
        self.head = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self):
        return len(self.items)

    def add(self, item):
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self.head] = item
            self.head = (self.head + 1) % self.capacity

    def sample(self, batch_size):
        n = len(self.items)
        if n == 0:
            return []
        k = min(batch_size, n)
        idx = self.rng.choice(n, size=k, replace=False)
        return [self.items[i] for i in idx]


def mlp_tensors(net: Mlp, prefix: str) -> dict:
    out = {}
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        out[f"{prefix}.w{k}"] = w
        out[f"{prefix}.b{k}"] = b
    return out


def load_mlp_tensors(net: Mlp, prefix: str, tensors: dict) -> None:
    for k in range(len(net.weights)):
        net.weights[k] = np.array(tensors[f"{prefix}.w{k}"], dtype=float)
        net.biases[k] = np.array(tensors[f"{prefix}.b{k}"], dtype=float)


CHECKPOINT_VERSION = 1


def save_checkpoint(path, tensors: dict, meta: dict) -> None:
    """Write named tensors plus JSON metadata into one .npz container."""
    payload = dict(tensors)
    header = {"version": CHECKPOINT_VERSION, "meta": meta}
    payload["__meta__"] = np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **payload)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path) -> tuple[dict, dict]:
    with np.load(path) as data:
        tensors = {k: data[k] for k in data.files if k != "__meta__"}
        header = json.loads(bytes(data["__meta__"]).decode())
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')}")
    return tensors, header["meta"]
