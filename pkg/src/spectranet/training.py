"""Loss, AdamW, the mini-batch loop, and staged fine-tuning.

Determinism contract: given (seed, data, thread count) the whole
trajectory is bit-reproducible. Shuffling draws from one stream tagged
"shuffle", dropout from one tagged "dropout"; both are consumed in a
fixed order across epochs, so no other RNG use may be interleaved.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .errors import ConfigError, ShapeError
from .model import LAYOUT, ModelParams, forward_batch, is_bias, load_checkpoint, save_checkpoint
from .rng import stream


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.01
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        # lr = 0 is allowed: it expresses a no-op pass (params must come
        # back bit-identical), which the epoch-loop contract relies on
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        b1, b2 = self.betas
        if not 0 < b1 < b2 < 1:
            raise ConfigError(f"betas must satisfy 0 < b1 < b2 < 1, got {self.betas}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")

    @classmethod
    def finetune(cls, **overrides) -> "TrainConfig":
        """Per-stage fine-tuning defaults: lr 1e-5, batch 16, 50 epochs."""
        base = dict(lr=1e-5, batch_size=16, epochs=50)
        base.update(overrides)
        return cls(**base)


def bce_with_logits(z: ad.Tensor, y: np.ndarray) -> ad.Tensor:
    """Mean binary cross-entropy on logits, stable for any |z|.

    Uses max(z,0) - z*y + log1p(exp(-|z|)) per element, averaged over the
    batch in float64. Gradient is (sigmoid(z) - y) / B.
    """
    if z.data.ndim == 2 and z.data.shape[1] == 1:
        z = ad.reshape(z, (z.data.shape[0],))
    if z.data.ndim != 1:
        raise ShapeError(f"logits must be [B] or [B,1], got {z.data.shape}")
    y = np.asarray(y)
    if y.shape != z.data.shape:
        raise ShapeError(f"labels shape {y.shape} != logits shape {z.data.shape}")
    if y.size == 0:
        raise ShapeError("empty batch")
    if not np.all((y == 0) | (y == 1)):
        raise ConfigError("labels must be binary 0/1")
    y64 = y.astype(np.float64)
    z64 = z.data.astype(np.float64)
    per = np.maximum(z64, 0.0) - z64 * y64 + np.log1p(np.exp(-np.abs(z64)))
    out = np.float32(per.mean())
    inv_b = 1.0 / z.data.size

    def _backward(g: np.ndarray) -> None:
        dz = (expit(z64) - y64) * inv_b
        z._accum((float(g) * dz).astype(np.float32))

    return ad.Tensor._node(np.asarray(out), (z,), _backward)


class AdamW:
    """Decoupled weight decay Adam; decay skips bias parameters."""

    def __init__(self, params: ModelParams, cfg: TrainConfig):
        self.params = params
        self.cfg = cfg
        self.eps = 1e-8
        self.t = 0
        self.m: Dict[str, np.ndarray] = {n: np.zeros(s, np.float32) for n, s in LAYOUT}
        self.v: Dict[str, np.ndarray] = {n: np.zeros(s, np.float32) for n, s in LAYOUT}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.cfg.betas
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        lr = np.float32(self.cfg.lr)
        wd = np.float32(self.cfg.weight_decay)
        for name, _ in LAYOUT:
            tensor = self.params.t[name]
            g = tensor.grad
            if g is None:
                g = np.zeros_like(tensor.data)
            m = self.m[name]
            v = self.v[name]
            m *= np.float32(b1)
            m += np.float32(1.0 - b1) * g
            v *= np.float32(b2)
            v += np.float32(1.0 - b2) * (g * g)
            mhat = m / np.float32(c1)
            vhat = v / np.float32(c2)
            update = mhat / (np.sqrt(vhat) + np.float32(self.eps))
            if wd != 0 and not is_bias(name):
                update = update + wd * tensor.data
            tensor.data -= lr * update

    def state(self) -> dict:
        return {"t": self.t, "m": self.m, "v": self.v}

    @classmethod
    def from_state(cls, params: ModelParams, cfg: TrainConfig, state: dict) -> "AdamW":
        opt = cls(params, cfg)
        opt.t = int(state["t"])
        for name, shape in LAYOUT:
            m = np.ascontiguousarray(state["m"][name], np.float32)
            v = np.ascontiguousarray(state["v"][name], np.float32)
            if m.shape != shape or v.shape != shape:
                raise ShapeError(f"optimizer state shape mismatch for {name}")
            opt.m[name] = m
            opt.v[name] = v
        return opt


class InMemoryViews:
    """Training data as flat arrays; the simplest view source."""

    def __init__(self, semantic, fft, stat, patches, labels):
        self.semantic = np.ascontiguousarray(semantic, np.float32)
        self.fft = np.ascontiguousarray(fft, np.float32)
        self.stat = np.ascontiguousarray(stat, np.float32)
        self.patches = np.ascontiguousarray(patches, np.float32)
        self.labels = np.ascontiguousarray(labels, np.int64)
        n = len(self.labels)
        shapes = (self.semantic.shape, self.fft.shape, self.stat.shape, self.patches.shape)
        if shapes != ((n, 768), (n, 9), (n, 8), (n, 2401, 243)):
            raise ShapeError(f"inconsistent view shapes {shapes} for {n} labels")

    def __len__(self) -> int:
        return len(self.labels)

    def views(self, idx: np.ndarray):
        return (self.semantic[idx], self.fft[idx], self.stat[idx], self.patches[idx])


def train_epoch(source, params: ModelParams, opt: AdamW, cfg: TrainConfig,
                shuffle_rng: np.random.Generator,
                dropout_rng: np.random.Generator) -> float:
    """One pass over the data; returns the dataset-mean loss.

    The last partial batch is kept; the reported loss is weighted by
    actual batch sizes so it equals the mean per-sample loss.
    """
    n = len(source)
    if n == 0:
        raise ShapeError("empty dataset")
    perm = shuffle_rng.permutation(n)
    total = 0.0
    for start in range(0, n, cfg.batch_size):
        idx = perm[start:start + cfg.batch_size]
        sem, fft, stat, patches = source.views(idx)
        y = source.labels[idx]
        z, _ = forward_batch(sem, fft, stat, patches, params,
                             training=True, rng=dropout_rng)
        loss = bce_with_logits(z, y)
        params.zero_grad()
        loss.backward()
        opt.step()
        total += loss.item() * len(idx)
    return total / n


def fit(source, params: ModelParams, cfg: TrainConfig,
        log_path: Optional[Union[str, Path]] = None,
        opt: Optional[AdamW] = None) -> Tuple[AdamW, List[Tuple[int, float, float]]]:
    """Run cfg.epochs of training; optionally append a CSV metrics log."""
    if opt is None:
        opt = AdamW(params, cfg)
    shuffle_rng = stream(cfg.seed, "shuffle")
    dropout_rng = stream(cfg.seed, "dropout")
    history: List[Tuple[int, float, float]] = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        loss = train_epoch(source, params, opt, cfg, shuffle_rng, dropout_rng)
        history.append((epoch, loss, time.perf_counter() - t0))
    if log_path is not None:
        with open(log_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "loss", "seconds"])
            for epoch, loss, secs in history:
                w.writerow([epoch, f"{loss:.8f}", f"{secs:.3f}"])
    return opt, history


@dataclass(frozen=True)
class StageResult:
    level_index: int
    checkpoint: Path
    init_digest: str
    final_digest: str
    losses: List[float] = field(default_factory=list)


def progressive_finetune(base_checkpoint: Union[str, Path],
                         stage_sources: Sequence[Callable[[], object]],
                         cfg: TrainConfig,
                         out_dir: Union[str, Path]) -> List[StageResult]:
    """Chained fine-tuning: stage k starts from stage k-1's final weights.

    ``stage_sources`` holds one zero-arg factory per stage (each builds
    the view source for that stage's degradation level). Each stage gets
    a fresh optimizer and writes stage<k>.spck into out_dir.
    """
    base_checkpoint = Path(base_checkpoint)
    if not base_checkpoint.exists():
        raise ConfigError(f"base checkpoint not found: {base_checkpoint}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results: List[StageResult] = []
    prev = base_checkpoint
    for k, make_source in enumerate(stage_sources):
        params, _ = load_checkpoint(prev)
        init_digest = params.digest()
        stage_cfg = replace(cfg, seed=cfg.seed + k)  # distinct shuffle/dropout streams per stage
        _, history = fit(make_source(), params, stage_cfg)
        ckpt = out_dir / f"stage{k + 1}.spck"
        save_checkpoint(ckpt, params)
        results.append(StageResult(
            level_index=k,
            checkpoint=ckpt,
            init_digest=init_digest,
            final_digest=params.digest(),
            losses=[loss for _, loss, _ in history],
        ))
        prev = ckpt
    return results
