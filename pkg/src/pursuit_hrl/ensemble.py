"""Probabilistic ensemble model over pooled arena summaries.

Each member maps a fixed-width summary of (state, allocation) to a Gaussian
over (next summary, upper reward). The ensemble's mixture variance is the
uncertainty scalar that drives the layer-interaction schedule. Inputs and
targets are standardized against the training buffer so the variance scale is
comparable across scenarios.
"""
from __future__ import annotations

import math

import numpy as np

from . import allocation
from .nets import LOGVAR_MAX, LOGVAR_MIN, Adam, Mlp, ReplayBuffer
from .sim import WorldState

SUMMARY_WIDTH = 10
TARGET_WIDTH = SUMMARY_WIDTH + 1  # next summary + reward


def global_summary(world: WorldState) -> np.ndarray:
    """Fixed-width pooled features of the current state and allocation."""
    cfg = world.config
    act_p = world.active_pursuers()
    act_e = world.active_evaders()
    pe, po = [], []
    for i in act_p:
        p = world.pursuers[i].p
        pe += [float(np.linalg.norm(p - world.evaders[j].p)) for j in act_e]
        po += [float(np.linalg.norm(p - o.p)) for o in world.obstacles]
    qbars = [allocation.column_capture_prob(world.allocation, world, j)
             for j in act_e]
    speeds = [float(np.linalg.norm(world.evaders[j].v)) for j in act_e]
    eff = allocation.effectiveness(world.allocation, world)
    d1 = cfg.d1
    return np.array([
        np.mean(pe) / d1 if pe else 0.0,
        np.min(pe) / d1 if pe else 0.0,
        np.mean(po) / d1 if po else 0.0,
        np.min(po) / d1 if po else 0.0,
        len(act_p) / cfg.n_pursuers,
        len(act_e) / cfg.n_evaders,
        np.mean(speeds) if speeds else 0.0,
        np.mean(qbars) if qbars else 0.0,
        eff,
        world.t / cfg.episode_len,
    ])


def mixture_moments(mus: np.ndarray, variances: np.ndarray):
    """Moments of the uniform mixture of B Gaussians.

    mus, variances: shape (B, D). Returns (mean, variance) of shape (D,).
    """
    mu = mus.mean(axis=0)
    var = (variances + mus ** 2).mean(axis=0) - mu ** 2
    return mu, np.maximum(var, 0.0)


def gaussian_nll(mu: np.ndarray, lv: np.ndarray, d: np.ndarray):
    """Mean Gaussian negative log-likelihood (up to a constant) of data d
    under per-element (mean, log-variance), with its gradients w.r.t. mu
    and lv. Targets exactly at the mean give a zero mean-gradient."""
    inv = np.exp(-lv)
    diff = d - mu
    loss = float(np.mean(0.5 * lv + 0.5 * diff ** 2 * inv))
    scale = 1.0 / diff.size
    g_mu = -diff * inv * scale
    g_lv = (0.5 - 0.5 * diff ** 2 * inv) * scale
    return loss, g_mu, g_lv


class _Normalizer:
    def __init__(self, width):
        self.mean = np.zeros(width)
        self.std = np.ones(width)

    def fit(self, data: np.ndarray):
        if len(data) >= 2:
            self.mean = data.mean(axis=0)
            self.std = np.maximum(data.std(axis=0), 1e-6)

    def encode(self, x):
        return (x - self.mean) / self.std

    def decode_mean(self, x):
        return x * self.std + self.mean


class EnsembleModel:
    """B Gaussian MLPs trained by negative log-likelihood on bootstrap
    resamples of a shared buffer."""

    def __init__(self, n_members=5, lr=1e-3, hidden=(128, 128),
                 buffer_capacity=50_000, seed=0):
        if n_members < 2:
            raise ValueError("ensemble needs at least two members")
        self.members = []
        self.adams = []
        self.boot_rngs = []
        for b in range(n_members):
            rng = np.random.default_rng((seed, b))
            net = Mlp([SUMMARY_WIDTH, *hidden, 2 * TARGET_WIDTH],
                      head="gauss", rng=rng)
            # start near (mu=0, variance=1) in normalized target space; a wide
            # output layer puts the log-variance in its saturated tails and
            # the huge exp(-lv) factors destabilize early NLL steps
            net.weights[-1] *= 0.05
            frac = (0.0 - LOGVAR_MIN) / (LOGVAR_MAX - LOGVAR_MIN)
            net.biases[-1][TARGET_WIDTH:] = math.log(frac / (1.0 - frac))
            self.members.append(net)
            self.adams.append(Adam(net.parameters(), lr=lr))
            self.boot_rngs.append(np.random.default_rng((seed, 1000 + b)))
        self.buffer = ReplayBuffer(buffer_capacity, seed=seed)
        self.in_norm = _Normalizer(SUMMARY_WIDTH)
        self.out_norm = _Normalizer(TARGET_WIDTH)

    @property
    def n_members(self):
        return len(self.members)

    def member_outputs(self, summary: np.ndarray):
        """Per-member (mean, variance) in normalized target space."""
        x = self.in_norm.encode(np.asarray(summary, dtype=float))[None, :]
        mus = np.empty((self.n_members, TARGET_WIDTH))
        variances = np.empty((self.n_members, TARGET_WIDTH))
        for b, net in enumerate(self.members):
            out = net.forward(x, cache=False)[0]
            mus[b] = out[:TARGET_WIDTH]
            variances[b] = np.exp(out[TARGET_WIDTH:])
        return mus, variances

    def predict_moments(self, summary: np.ndarray):
        """Mixture (mean, variance) in normalized target space."""
        mus, variances = self.member_outputs(summary)
        return mixture_moments(mus, variances)

    def uncertainty(self, summary: np.ndarray) -> float:
        """Scalar uncertainty: mixture variance averaged over output dims."""
        _, var = self.predict_moments(summary)
        return float(np.mean(var))

    def predict(self, summary: np.ndarray):
        """(next summary, reward) point prediction in raw units."""
        mu, _ = self.predict_moments(summary)
        raw = self.out_norm.decode_mean(mu)
        return raw[:SUMMARY_WIDTH], float(raw[SUMMARY_WIDTH])

    def add_sample(self, summary, next_summary, reward):
        target = np.concatenate([next_summary, [reward]])
        self.buffer.add((np.asarray(summary, dtype=float), target))

    def update(self, n_steps=1, batch_size=256) -> float | None:
        """Refit normalizers to the buffer, then take NLL steps, each member
        on its own bootstrap resample. Returns the last mean NLL."""
        if len(self.buffer) < 2:
            return None
        xs = np.stack([s for s, _ in self.buffer.items])
        ts = np.stack([t for _, t in self.buffer.items])
        self.in_norm.fit(xs)
        self.out_norm.fit(ts)
        xn = self.in_norm.encode(xs)
        tn = self.out_norm.encode(ts)
        loss = None
        for _ in range(n_steps):
            losses = []
            for b, net in enumerate(self.members):
                k = min(batch_size, len(xn))
                idx = self.boot_rngs[b].integers(len(xn), size=k)  # with replacement
                losses.append(self._nll_step(net, self.adams[b], xn[idx], tn[idx]))
            loss = float(np.mean(losses))
            if not np.isfinite(loss):
                raise RuntimeError("ensemble training diverged (non-finite loss)")
        return loss

    @staticmethod
    def _nll_step(net: Mlp, adam: Adam, x: np.ndarray, d: np.ndarray) -> float:
        out = net.forward(x)
        mu = out[:, :TARGET_WIDTH]
        lv = out[:, TARGET_WIDTH:]
        loss, g_mu, g_lv = gaussian_nll(mu, lv, d)
        grads, _ = net.backward(np.concatenate([g_mu, g_lv], axis=1))
        adam.step(net.parameters(), grads)
        return loss
