"""Synthetic spike signals, accelerometer-style preprocessing and metrics.

All randomness goes through :class:`numpy.random.Generator` built from
``numpy.random.PCG64`` seeded with an integer, so a seed pins every draw.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .model import Signal, SparsityPriors

NONZERO_TOL = 1e-3
CHOL_JITTER = 1e-12
# below this acceptance rate rejection sampling gives way to the inverse CDF
MIN_ACCEPTANCE = 0.01


def rng_from_seed(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SyntheticConfig:
    n: int
    s: int
    h: int
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.s < 0 or self.h < 1:
            raise ValueError("need n >= 1, s >= 0 and h >= 1")
        if self.h * self.s > self.n:
            raise ValueError(f"h*s = {self.h * self.s} exceeds n = {self.n}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")


@dataclass(frozen=True)
class SyntheticInstance:
    """Observed signal ``y`` and the true signal, both on the scale of ``y``."""

    y: Signal
    y_true: Signal
    scale: float
    config: SyntheticConfig


def brownian_bridge_cov(h: int) -> np.ndarray:
    """Covariance of a bridge pinned at 0 and h+1, sampled at 1..h."""
    i = np.arange(1, h + 1, dtype=float)
    lo, hi = np.minimum.outer(i, i), np.maximum.outer(i, i)
    return lo * (h + 1 - hi) / (h + 1)


def gen_true_signal(cfg: SyntheticConfig, rng=None) -> Signal:
    """Sum of ``cfg.s`` nonnegative spikes of length ``cfg.h``; spikes may overlap."""
    rng = rng_from_seed(cfg.seed if rng is None else rng)
    out = np.zeros(cfg.n)
    if cfg.s == 0:
        return Signal(out)
    cov = brownian_bridge_cov(cfg.h)
    L = np.linalg.cholesky(cov + CHOL_JITTER * np.eye(cfg.h))
    for _ in range(cfg.s):
        start = int(rng.integers(0, cfg.n - cfg.h + 1))
        v = L @ rng.standard_normal(cfg.h)
        out[start:start + cfg.h] += np.abs(v)
    return Signal(out)


def truncated_normal(lower, sigma: float, rng) -> np.ndarray:
    """Draws of ``N(0, sigma^2)`` conditioned on being at least ``lower``."""
    lower = np.asarray(lower, dtype=float)
    if sigma == 0:
        return np.maximum(np.zeros_like(lower), lower)
    a = lower / sigma
    out = np.empty_like(lower)
    todo = ndtr(-a) >= MIN_ACCEPTANCE
    idx = np.flatnonzero(todo)
    while idx.size:
        draw = rng.standard_normal(idx.size)
        ok = draw >= a[idx]
        out[idx[ok]] = draw[ok]
        idx = idx[~ok]
    rest = np.flatnonzero(~todo)
    if rest.size:
        # invert through the upper tail, which stays representable far out
        # where the cdf itself rounds to 1
        tail = ndtr(-a[rest])
        u = 1.0 - rng.uniform(size=rest.size)
        out[rest] = np.maximum(-ndtri(u * tail), a[rest])
    return sigma * out


def add_noise(y_hat, sigma: float, rng) -> np.ndarray:
    y_hat = np.asarray(getattr(y_hat, "values", y_hat), dtype=float)
    return y_hat + truncated_normal(-y_hat, sigma, rng)


def add_noise_and_scale(y_hat, sigma: float, seed=None) -> Signal:
    """Noisy nonnegative observation rescaled to unit infinity norm."""
    y, _ = _noisy_scaled(y_hat, sigma, rng_from_seed(seed))
    return Signal(y)


def _noisy_scaled(y_hat, sigma, rng):
    y = add_noise(y_hat, sigma, rng)
    top = float(np.max(np.abs(y)))
    scale = 1.0 / top if top > 0 else 1.0
    return y * scale, scale


def make_synthetic(cfg: SyntheticConfig) -> SyntheticInstance:
    """True signal plus noise, with both rescaled by the observation's peak."""
    rng = rng_from_seed(cfg.seed)
    truth = gen_true_signal(cfg, rng)
    y, scale = _noisy_scaled(truth.values, cfg.sigma, rng)
    return SyntheticInstance(Signal(y), Signal(truth.values * scale), scale, cfg)


def windowed_mad(series, window: int = 10) -> Signal:
    """Mean absolute successive difference per window, scaled to unit peak.

    Differences are taken inside each window, so a window of ``w`` samples
    contributes ``w - 1`` differences. A trailing partial window is dropped.
    """
    if window < 2:
        raise ValueError("window must be at least 2")
    x = np.asarray(series, dtype=float)
    count = x.size // window
    if count == 0:
        raise ValueError("series shorter than one window")
    blocks = x[:count * window].reshape(count, window)
    mad = np.abs(np.diff(blocks, axis=1)).mean(axis=1)
    top = mad.max()
    return Signal(mad / top if top > 0 else mad)


def snr(y_true, y) -> float:
    y_true, y = np.asarray(y_true, dtype=float), np.asarray(y, dtype=float)
    noise = float(np.sum((y_true - y) ** 2))
    return float(np.sum(y_true**2)) / noise if noise > 0 else float("inf")


def support(x, tol: float = NONZERO_TOL) -> np.ndarray:
    return np.abs(np.asarray(x, dtype=float)) > tol


def metrics(x_star, y_true, y=None) -> dict:
    """Estimation error and support agreement of ``x_star`` against ``y_true``.

    ``error`` is None when the true signal is identically zero. ``snr`` is
    reported only when the observation ``y`` is given.
    """
    x_star = np.asarray(x_star, dtype=float)
    y_true = np.asarray(y_true, dtype=float)
    if x_star.shape != y_true.shape:
        raise ValueError("x_star and y_true must have equal lengths")
    norm = float(y_true @ y_true)
    err = float(np.sum((y_true - x_star) ** 2)) / norm if norm > 0 else None
    st, sx = support(y_true), support(x_star)
    fp, fn = int(np.sum(sx & ~st)), int(np.sum(st & ~sx))
    out = {"error": err, "false_pos": fp, "false_neg": fn, "sparsity_mismatch": fp + fn,
           "nnz": int(sx.sum())}
    out["snr"] = snr(y_true, y) if y is not None else None
    return out


def instance_bundle(y, lam: float, priors: SparsityPriors, y_true=None, seed=None) -> dict:
    """The JSON object ``{n, lambda, priors, y, y_true?, seed}``."""
    y = np.asarray(getattr(y, "values", y), dtype=float)
    out = {"n": int(y.size), "lambda": float(lam), "priors": priors.to_dict(),
           "y": y.tolist(), "seed": seed}
    if y_true is not None:
        out["y_true"] = np.asarray(getattr(y_true, "values", y_true), dtype=float).tolist()
    return out


def write_bundle(path, bundle: dict) -> None:
    Path(path).write_text(json.dumps(bundle, indent=1, sort_keys=True) + "\n")


BUNDLE_SCHEMA = {
    "type": "object",
    "required": ["n", "lambda", "priors", "y"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number", "minimum": 0},
        "priors": {"type": "object", "properties": {
            "kind": {"enum": ["none", "cardinality", "regularized", "spikes"]}}},
        "y": {"type": "array", "items": {"type": "number"}},
        "y_true": {"type": "array", "items": {"type": "number"}},
        "seed": {"type": ["integer", "null"]},
    },
}
