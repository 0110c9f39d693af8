"""Minimal dense-tensor reverse-mode autodiff.

Just enough machinery for the detector: 2-D matmul, bias add, GELU,
dropout, depthwise convolution, reductions, reshape and concat. Values are
float32 end to end; reductions accumulate in float64 before casting back,
which (together with numpy's fixed pairwise summation tree) makes results
reproducible and independent of data order for sanely bounded inputs.

Ops are pure functions over immutable inputs; graphs are built per call and
never reused, so inference is thread-safe on shared parameters.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import erf

from . import kernels
from .errors import ConfigError, NumericError, ShapeError

_INV_SQRT2 = np.float32(0.7071067811865476)
_INV_SQRT_2PI = np.float32(0.3989422804014327)


def _ensure_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by {op}")
    return arr


def _as_f32(data) -> np.ndarray:
    return np.ascontiguousarray(data, dtype=np.float32)


class Tensor:
    """A float32 array plus the graph edges needed for backprop."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn", "_needs_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _ensure_finite(_as_f32(data), "tensor creation")
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Optional[Callable[[np.ndarray], None]] = None
        self._needs_grad = requires_grad

    @classmethod
    def _node(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward_fn) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = False
        out._needs_grad = any(p._needs_grad for p in parents)
        if out._needs_grad:
            out._parents = parents
            out._backward_fn = backward_fn
        else:
            out._parents = ()
            out._backward_fn = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def _accum(self, g: np.ndarray) -> None:
        if not self._needs_grad:
            return
        if g.shape != self.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != value shape {self.data.shape}")
        if self.grad is None:
            self.grad = g.astype(np.float32, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output."""
        if self.data.size != 1:
            raise ShapeError("backward() is only defined for scalar outputs")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- operators ---------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, neg(other))

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other) -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def mean(self, axes=None, keepdims: bool = False) -> "Tensor":
        return reduce(self, "mean", axes, keepdims)

    def sum(self, axes=None, keepdims: bool = False) -> "Tensor":
        return reduce(self, "sum", axes, keepdims)

    def max(self, axes=None, keepdims: bool = False) -> "Tensor":
        return reduce(self, "max", axes, keepdims)

    def std(self, axes=None, keepdims: bool = False) -> "Tensor":
        return reduce(self, "std", axes, keepdims)

    def reshape(self, *shape) -> "Tensor":
        return reshape(self, shape if len(shape) != 1 or isinstance(shape[0], int) else shape[0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; also covers the row-broadcast bias case [m,n]+[n]."""
    bias = a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]
    if not bias and a.data.shape != b.data.shape:
        raise ShapeError(f"add shapes {a.data.shape} and {b.data.shape} do not match")
    out_data = _ensure_finite(a.data + b.data, "add")

    def _backward(g: np.ndarray) -> None:
        a._accum(g)
        if bias:
            b._accum(g.sum(axis=0, dtype=np.float64).astype(np.float32))
        else:
            b._accum(g)

    return Tensor._node(out_data, (a, b), _backward)


def neg(x: Tensor) -> Tensor:
    def _backward(g: np.ndarray) -> None:
        x._accum(-g)

    return Tensor._node(-x.data, (x,), _backward)


def mul(a: Tensor, b) -> Tensor:
    """Elementwise product with another tensor of the same shape or a scalar."""
    if isinstance(b, Tensor):
        if a.data.shape != b.data.shape:
            raise ShapeError(f"mul shapes {a.data.shape} and {b.data.shape} do not match")
        out_data = _ensure_finite(a.data * b.data, "mul")

        def _backward(g: np.ndarray) -> None:
            a._accum(g * b.data)
            b._accum(g * a.data)

        return Tensor._node(out_data, (a, b), _backward)

    s = np.float32(b)
    out_data = _ensure_finite(a.data * s, "mul")

    def _backward_scalar(g: np.ndarray) -> None:
        a._accum(g * s)

    return Tensor._node(out_data, (a,), _backward_scalar)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}")
    with np.errstate(over="ignore"):
        out_data = _ensure_finite(a.data @ b.data, "matmul")

    def _backward(g: np.ndarray) -> None:
        if a._needs_grad:
            a._accum(g @ b.data.T)
        if b._needs_grad:
            b._accum(a.data.T @ g)

    return Tensor._node(out_data, (a, b), _backward)


def gelu(x: Tensor) -> Tensor:
    """Exact GELU x*Phi(x) via erf (no tanh approximation)."""
    xd = x.data
    cdf = np.float32(0.5) * (np.float32(1.0) + erf(xd * _INV_SQRT2))
    out_data = xd * cdf

    def _backward(g: np.ndarray) -> None:
        pdf = np.exp(np.float32(-0.5) * xd * xd) * _INV_SQRT_2PI
        x._accum(g * (cdf + xd * pdf))

    return Tensor._node(out_data, (x,), _backward)


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale survivors."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode requires an rng stream")
    keep = (rng.random(x.data.shape) >= rate).astype(np.float32)
    keep *= np.float32(1.0 / (1.0 - rate))
    out_data = x.data * keep

    def _backward(g: np.ndarray) -> None:
        x._accum(g * keep)

    return Tensor._node(out_data, (x,), _backward)


def depthwise_conv2d(x: Tensor, k: Tensor) -> Tensor:
    """Same-size single-channel convolution of a [B,H,W] batch with one kernel."""
    out_data = _ensure_finite(kernels.depthwise_conv2d(x.data, k.data), "depthwise_conv2d")

    def _backward(g: np.ndarray) -> None:
        dx, dk = kernels.depthwise_conv2d_backward(x.data, k.data, g)
        x._accum(dx)
        k._accum(dk)

    return Tensor._node(out_data, (x, k), _backward)


def _norm_axes(axes, ndim: int) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    norm = []
    for a in axes:
        a = int(a)
        if a < 0:
            a += ndim
        if not 0 <= a < ndim:
            raise ShapeError(f"reduction axis {a} out of range for ndim {ndim}")
        norm.append(a)
    if len(set(norm)) != len(norm):
        raise ShapeError(f"duplicate reduction axes {axes}")
    return tuple(sorted(norm))


def reduce(x: Tensor, kind: str, axes=None, keepdims: bool = False) -> Tensor:
    """Reduction over the given axes: mean, sum, max or population std."""
    axes = _norm_axes(axes, x.data.ndim)
    count = 1
    for a in axes:
        count *= x.data.shape[a]
    if count == 0 or x.data.size == 0:
        raise ShapeError(f"empty reduction over axes {axes} of shape {x.data.shape}")

    def _expand(g: np.ndarray) -> np.ndarray:
        if keepdims:
            return g
        return np.expand_dims(g, axes)

    if kind == "sum" or kind == "mean":
        out64 = np.sum(x.data, axis=axes, keepdims=keepdims, dtype=np.float64)
        if kind == "mean":
            out64 = out64 / count
        out_data = _ensure_finite(out64.astype(np.float32), kind)
        scale = np.float32(1.0 / count) if kind == "mean" else np.float32(1.0)

        def _backward(g: np.ndarray) -> None:
            x._accum(np.broadcast_to(_expand(g) * scale, x.data.shape).astype(np.float32))

        return Tensor._node(out_data, (x,), _backward)

    if kind == "max":
        out_data = np.max(x.data, axis=axes, keepdims=keepdims)
        # Move reduced axes last so argmax picks the first maximum in
        # row-major order; ties route their gradient to that element only.
        kept = tuple(a for a in range(x.data.ndim) if a not in axes)
        perm = kept + axes
        flat = x.data.transpose(perm).reshape(-1, count)
        am = np.argmax(flat, axis=1)

        def _backward_max(g: np.ndarray) -> None:
            gflat = np.zeros_like(flat)
            gflat[np.arange(flat.shape[0]), am] = _expand(g).reshape(-1)
            kept_shape = tuple(x.data.shape[a] for a in kept)
            red_shape = tuple(x.data.shape[a] for a in axes)
            inv = np.argsort(perm)
            x._accum(gflat.reshape(kept_shape + red_shape).transpose(inv))

        return Tensor._node(out_data, (x,), _backward_max)

    if kind == "std":
        x64 = x.data.astype(np.float64)
        m = np.mean(x64, axis=axes, keepdims=True)
        var = np.mean((x64 - m) ** 2, axis=axes, keepdims=True)
        s = np.sqrt(var)
        kept_shape = tuple(d for a, d in enumerate(x.data.shape) if a not in axes)
        out64 = s if keepdims else s.reshape(kept_shape)
        out_data = _ensure_finite(out64.astype(np.float32), "std")

        def _backward_std(g: np.ndarray) -> None:
            safe = np.where(s > 0, s, 1.0)
            dx = (x64 - m) / (count * safe)
            dx = np.where(s > 0, dx, 0.0)
            x._accum((_expand(g).astype(np.float64) * dx).astype(np.float32))

        return Tensor._node(out_data, (x,), _backward_std)

    raise ConfigError(f"unknown reduction kind {kind!r}")


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape) if isinstance(shape, (tuple, list)) else (shape,)
    out_data = x.data.reshape(shape)

    def _backward(g: np.ndarray) -> None:
        x._accum(g.reshape(x.data.shape))

    return Tensor._node(out_data, (x,), _backward)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ShapeError("concat of zero tensors")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def _backward(g: np.ndarray) -> None:
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t._accum(np.ascontiguousarray(piece))

    return Tensor._node(out_data, tuple(tensors), _backward)


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform init in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]."""
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32)
