"""Detector network: four encoders, patch scorer, spatial block, fusion head.

Architecture (all linears follow W2 @ gelu(W1 x + b1) + b2, no activation
on encoder outputs):

    semantic 768 -> 512 -> 256   dropout 0.3 on the hidden layer
    fft        9 ->  32 ->  16
    stat       8 ->  16 ->   8
    patches  243 ->  64 ->   1   shared weights per patch, dropout 0.2
    spatial   49x49 score map -> depthwise conv k in {3,5,7} -> GELU
              -> (mean, max) each -> 6 -> 32
    head     314 -> 256 -> 128 -> 1, GELU between, sigmoid on the logit

The fused vector is [f_sem; f_fft; f_stat; f_spatial; p_mean; p_max] with
p_mean/p_max scalar statistics of the 2401 patch scores, giving
256+16+8+32+1+1 = 314 inputs to the head.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .errors import FormatError, ShapeError
from .rng import stream

GRID = 49
N_PATCHES = GRID * GRID
D_FUSED = 256 + 16 + 8 + 32 + 1 + 1

# Checkpoint section layout; order is part of the file contract.
LAYOUT: Tuple[Tuple[str, Tuple[int, ...]], ...] = (
    ("semantic.w1", (768, 512)), ("semantic.b1", (512,)),
    ("semantic.w2", (512, 256)), ("semantic.b2", (256,)),
    ("fft.w1", (9, 32)), ("fft.b1", (32,)),
    ("fft.w2", (32, 16)), ("fft.b2", (16,)),
    ("stat.w1", (8, 16)), ("stat.b1", (16,)),
    ("stat.w2", (16, 8)), ("stat.b2", (8,)),
    ("patch.w1", (243, 64)), ("patch.b1", (64,)),
    ("patch.w2", (64, 1)), ("patch.b2", (1,)),
    ("spatial.k3", (3, 3)), ("spatial.k5", (5, 5)), ("spatial.k7", (7, 7)),
    ("spatial.w", (6, 32)), ("spatial.b", (32,)),
    ("head.w1", (D_FUSED, 256)), ("head.b1", (256,)),
    ("head.w2", (256, 128)), ("head.b2", (128,)),
    ("head.w3", (128, 1)), ("head.b3", (1,)),
)

DROPOUT_SEMANTIC = 0.3
DROPOUT_PATCH = 0.2


def is_bias(name: str) -> bool:
    return name.rsplit(".", 1)[-1].startswith("b")


class ModelParams:
    """Named float32 parameter tensors in a fixed order."""

    def __init__(self, arrays: Dict[str, np.ndarray]):
        expected = dict(LAYOUT)
        if set(arrays) != set(expected):
            missing = sorted(set(expected) - set(arrays))
            extra = sorted(set(arrays) - set(expected))
            raise ShapeError(f"parameter set mismatch: missing {missing}, extra {extra}")
        self.t: Dict[str, ad.Tensor] = {}
        for name, shape in LAYOUT:
            arr = np.ascontiguousarray(arrays[name], dtype=np.float32)
            if arr.shape != shape:
                raise ShapeError(f"{name}: shape {arr.shape} != {shape}")
            self.t[name] = ad.Tensor(arr, requires_grad=True)

    @classmethod
    def init(cls, seed: int) -> "ModelParams":
        """Glorot-uniform weights, zero biases, from one seeded stream."""
        g = stream(seed, "param-init")
        arrays = {}
        for name, shape in LAYOUT:
            if is_bias(name):
                arrays[name] = np.zeros(shape, dtype=np.float32)
            elif name.startswith("spatial.k"):
                k = shape[0] * shape[1]  # depthwise kernel: fan_in = fan_out = k*k
                arrays[name] = ad.glorot_uniform(shape, k, k, g)
            else:
                arrays[name] = ad.glorot_uniform(shape, shape[0], shape[1], g)
        return cls(arrays)

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: self.t[name].data for name, _ in LAYOUT}

    def copy(self) -> "ModelParams":
        return ModelParams({name: self.t[name].data.copy() for name, _ in LAYOUT})

    def n_params(self) -> int:
        return sum(self.t[name].data.size for name, _ in LAYOUT)

    def zero_grad(self) -> None:
        for tensor in self.t.values():
            tensor.grad = None

    def digest(self) -> str:
        """SHA-256 over names, shapes and raw bytes in layout order."""
        h = hashlib.sha256()
        for name, _ in LAYOUT:
            arr = self.t[name].data
            h.update(name.encode())
            h.update(struct.pack("<B", arr.ndim))
            h.update(struct.pack(f"<{arr.ndim}I", *arr.shape))
            h.update(arr.tobytes())
        return h.hexdigest()


# -- checkpoint file ---------------------------------------------------------

CKPT_MAGIC = b"SPCK"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sII")


def _write_section(f, name: str, arr: np.ndarray) -> None:
    nb = name.encode("utf-8")
    f.write(struct.pack("<H", len(nb)))
    f.write(nb)
    f.write(struct.pack("<B", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def save_checkpoint(path: Union[str, Path], params: ModelParams,
                    opt_state: Optional[dict] = None) -> None:
    """Write params (and optionally optimizer moments) as named sections.

    Sections appear in layout order; optimizer sections, when present, are
    appended as opt.t, then opt.m.<name>/opt.v.<name> per parameter.
    """
    sections = [(name, params.t[name].data) for name, _ in LAYOUT]
    if opt_state is not None:
        sections.append(("opt.t", np.array([opt_state["t"]], dtype=np.float32)))
        for name, _ in LAYOUT:
            sections.append((f"opt.m.{name}", opt_state["m"][name]))
            sections.append((f"opt.v.{name}", opt_state["v"][name]))
    with open(path, "wb") as f:
        f.write(_CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, len(sections)))
        for name, arr in sections:
            _write_section(f, name, arr)


def load_checkpoint(path: Union[str, Path]) -> Tuple[ModelParams, Optional[dict]]:
    """Read a checkpoint; returns (params, optimizer-state-or-None)."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _CKPT_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, n_sections = _CKPT_HEADER.unpack_from(raw, 0)
    if magic != CKPT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    off = _CKPT_HEADER.size
    sections: Dict[str, np.ndarray] = {}
    for _ in range(n_sections):
        try:
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + name_len].decode("utf-8")
            off += name_len
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}I", raw, off)
            off += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(shape)
            off += 4 * count
        except (struct.error, ValueError) as e:
            raise FormatError(f"{path}: corrupt section table: {e}") from None
        if name in sections:
            raise FormatError(f"{path}: duplicate section {name!r}")
        sections[name] = data.copy()
    if off != len(raw):
        raise FormatError(f"{path}: {len(raw) - off} trailing bytes")

    param_arrays = {k: v for k, v in sections.items() if not k.startswith("opt.")}
    params = ModelParams(param_arrays)
    opt_state = None
    if "opt.t" in sections:
        opt_state = {
            "t": int(sections["opt.t"][0]),
            "m": {name: sections[f"opt.m.{name}"] for name, _ in LAYOUT},
            "v": {name: sections[f"opt.v.{name}"] for name, _ in LAYOUT},
        }
    return params, opt_state


# -- forward pass ------------------------------------------------------------

def _mlp2(x: ad.Tensor, p: ModelParams, prefix: str, drop: float,
          training: bool, rng) -> ad.Tensor:
    h = ad.gelu(x @ p.t[f"{prefix}.w1"] + p.t[f"{prefix}.b1"])
    if drop > 0.0:
        h = ad.dropout(h, drop, training, rng)
    return h @ p.t[f"{prefix}.w2"] + p.t[f"{prefix}.b2"]


def _as_batch(x, dim: int, name: str) -> ad.Tensor:
    if isinstance(x, ad.Tensor):
        t = x
    else:
        t = ad.Tensor(np.asarray(x, dtype=np.float32))
    if t.data.ndim == 1:
        t = ad.reshape(t, (1, t.data.shape[0]))
    if t.data.ndim != 2 or t.data.shape[1] != dim:
        raise ShapeError(f"{name}: expected [B,{dim}], got {t.data.shape}")
    return t


def encode_semantic(f, params: ModelParams, training: bool = False, rng=None) -> ad.Tensor:
    return _mlp2(_as_batch(f, 768, "semantic"), params, "semantic",
                 DROPOUT_SEMANTIC, training, rng)


def encode_spectral(f, params: ModelParams) -> ad.Tensor:
    return _mlp2(_as_batch(f, 9, "fft"), params, "fft", 0.0, False, None)


def encode_stat(f, params: ModelParams) -> ad.Tensor:
    return _mlp2(_as_batch(f, 8, "stat"), params, "stat", 0.0, False, None)


def score_patches(patches, params: ModelParams, training: bool = False, rng=None) -> ad.Tensor:
    """Shared-weight scorer over patch rows; returns [B, 2401] logits."""
    if isinstance(patches, ad.Tensor):
        t = patches
    else:
        t = ad.Tensor(np.asarray(patches, dtype=np.float32))
    if t.data.ndim == 2:
        t = ad.reshape(t, (1,) + t.data.shape)
    if t.data.ndim != 3 or t.data.shape[1:] != (N_PATCHES, 243):
        raise ShapeError(f"patches: expected [B,{N_PATCHES},243], got {t.data.shape}")
    b = t.data.shape[0]
    flat = ad.reshape(t, (b * N_PATCHES, 243))
    s = _mlp2(flat, params, "patch", DROPOUT_PATCH, training, rng)
    return ad.reshape(s, (b, N_PATCHES))


def spatial_block(scores, params: ModelParams) -> ad.Tensor:
    """Multi-scale pooling of the 49x49 score map; returns [B, 32]."""
    if isinstance(scores, ad.Tensor):
        t = scores
    else:
        t = ad.Tensor(np.asarray(scores, dtype=np.float32))
    if t.data.ndim == 1:
        t = ad.reshape(t, (1, t.data.shape[0]))
    if t.data.ndim != 2 or t.data.shape[1] != N_PATCHES:
        raise ShapeError(f"scores: expected [B,{N_PATCHES}], got {t.data.shape}")
    b = t.data.shape[0]
    grid = ad.reshape(t, (b, GRID, GRID))
    pooled = []
    for k in (3, 5, 7):
        resp = ad.gelu(ad.depthwise_conv2d(grid, params.t[f"spatial.k{k}"]))
        pooled.append(ad.reshape(resp.mean(axes=(1, 2)), (b, 1)))
        pooled.append(ad.reshape(resp.max(axes=(1, 2)), (b, 1)))
    six = ad.concat(pooled, axis=1)
    return six @ params.t["spatial.w"] + params.t["spatial.b"]


def forward_batch(semantic, fft, stat, patches, params: ModelParams,
                  training: bool = False, rng=None) -> Tuple[ad.Tensor, ad.Tensor]:
    """Full fused forward over a batch; returns (logits [B,1], scores [B,2401]).

    Dropout draws, when training, happen in a fixed order (semantic
    encoder first, then patch scorer) so a given rng stream state fully
    determines the graph.
    """
    f_sem = encode_semantic(semantic, params, training, rng)
    f_fft = encode_spectral(fft, params)
    f_stat = encode_stat(stat, params)
    scores = score_patches(patches, params, training, rng)
    f_spatial = spatial_block(scores, params)
    b = scores.data.shape[0]
    p_mean = ad.reshape(scores.mean(axes=1), (b, 1))
    p_max = ad.reshape(scores.max(axes=1), (b, 1))
    fused = ad.concat([f_sem, f_fft, f_stat, f_spatial, p_mean, p_max], axis=1)
    if fused.data.shape[1] != D_FUSED:
        raise ShapeError(f"fused width {fused.data.shape[1]} != {D_FUSED}")
    h = ad.gelu(fused @ params.t["head.w1"] + params.t["head.b1"])
    h = ad.gelu(h @ params.t["head.w2"] + params.t["head.b2"])
    z = h @ params.t["head.w3"] + params.t["head.b3"]
    return z, scores


@dataclass(frozen=True)
class Prediction:
    logit: float
    probability: float
    heatmap: np.ndarray  # [49,49] raw patch logits, heatmap[r,c] = s[r*49+c]


def forward(record, params: ModelParams) -> Prediction:
    """Inference on one record (no dropout, pure function of inputs)."""
    z, scores = forward_batch(record.semantic, record.fft, record.stat,
                              record.patches, params, training=False, rng=None)
    logit = float(z.data[0, 0])
    return Prediction(
        logit=logit,
        probability=float(expit(logit)),
        heatmap=scores.data[0].reshape(GRID, GRID).copy(),
    )
