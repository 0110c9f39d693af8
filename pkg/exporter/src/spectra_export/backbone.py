"""Embedding backbones.

The default "fixture" backbone is a deterministic stand-in: it hashes the
normalized pixel tensor and expands the digest into a unit-norm 768-d
vector. It carries no semantics, but it is fast, dependency-free, and
stable across machines, which is what integration tests and pipeline
plumbing need. Real semantic embeddings come from the optional
torchvision path, which activates only when torch is installed.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ConfigError

DIM = 768


class FixtureBackbone:
    """Deterministic pixel-hash embeddings, one per distinct input tensor."""

    name = "fixture"
    dim = DIM

    def embed(self, batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float32)
        if batch.ndim == 3:
            batch = batch[None]
        if batch.ndim != 4 or batch.shape[1] != 3:
            raise ConfigError(f"expected [B,3,H,W] input, got {batch.shape}")
        out = np.empty((batch.shape[0], DIM), np.float32)
        for i in range(batch.shape[0]):
            digest = hashlib.sha256(np.ascontiguousarray(batch[i]).tobytes()).digest()
            h = hashlib.blake2b(digest, digest_size=16, key=b"export-fixture")
            g = np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))
            v = g.standard_normal(DIM)
            out[i] = (v / np.linalg.norm(v)).astype(np.float32)
        return out


class TorchvisionBackbone:
    """ViT-B/32 CLS features via torchvision; needs torch installed."""

    name = "torchvision:vit_b_32"
    dim = DIM

    def __init__(self, pretrained: bool = True):
        try:
            import torch
            import torchvision
        except ImportError as e:
            raise ConfigError(
                "the torchvision backbone needs the optional torch stack "
                "(pip install torch torchvision); for deterministic tests "
                "or plumbing without GPU weights use --backbone fixture"
            ) from e
        self._torch = torch
        weights = torchvision.models.ViT_B_32_Weights.DEFAULT if pretrained else None
        self._model = torchvision.models.vit_b_32(weights=weights).eval()

    def embed(self, batch: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = torch.from_numpy(np.asarray(batch, np.float32))
            # ViT expects 224; average-pool the 448 tensor down 2x
            x = torch.nn.functional.avg_pool2d(x, kernel_size=2)
            m = self._model
            feats = m._process_input(x)
            cls = m.class_token.expand(feats.shape[0], -1, -1)
            feats = torch.cat([cls, feats], dim=1)
            feats = m.encoder(feats)[:, 0]
            return feats.numpy().astype(np.float32)


def load_backbone(spec: str):
    if spec == "fixture":
        return FixtureBackbone()
    if spec == "torchvision":
        return TorchvisionBackbone()
    raise ConfigError(
        f"unknown backbone {spec!r}; available: fixture, torchvision"
    )
