"""Feed-forward ReLU networks with sparse layers.

A network is a list of affine layers ``(W, b)``; every layer but the last is
followed by the ReLU ``max(t, 0)``. Weight matrices are stored as sorted
coordinate triplets and never contain explicit zeros, so the size ``W(net)``
is simply the number of stored weights plus the number of nonzero biases.

Evaluation uses CSR products whose per-row accumulation runs in column order.
Builders rely on that: two rows with the same weights over the same ordered
inputs produce bit-identical values, and ``a - a`` cancels exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Layer",
    "ReluNetwork",
    "SpecialNetwork",
    "NetworkStats",
    "relu",
    "parallelize",
    "parallelize_size_bound",
    "special_to_standard",
    "bound_output",
    "interval_bounds",
    "architecture_key",
    "has_architecture",
]

EXACT_RTOL = 1e-9
_CHUNK_BUDGET = 4_000_000


def relu(t):
    return np.maximum(t, 0.0)


@dataclass(frozen=True, eq=False)
class Layer:
    """One affine map ``z -> W z + b`` with ``W`` of shape ``(n_out, n_in)``."""

    n_out: int
    n_in: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        vals = np.asarray(self.vals, dtype=float).ravel()
        bias = np.zeros(self.n_out) if self.bias is None else np.asarray(self.bias, dtype=float).ravel()
        if not (len(rows) == len(cols) == len(vals)):
            raise ValueError("rows, cols and vals must have equal length")
        if bias.shape != (self.n_out,):
            raise ValueError(f"bias must have length {self.n_out}")
        if len(rows) and (rows.min() < 0 or rows.max() >= self.n_out
                          or cols.min() < 0 or cols.max() >= self.n_in):
            raise ValueError("weight entry index out of range")
        if np.any(vals == 0):
            raise ValueError("explicit zero weights are not allowed")
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(bias))):
            raise ValueError("non-finite weight or bias")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows) > 1:
            same = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if np.any(same):
                raise ValueError("duplicate weight entries")
        for name, arr in (("rows", rows), ("cols", cols), ("vals", vals), ("bias", bias)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_dense(cls, W, b=None) -> "Layer":
        W = np.atleast_2d(np.asarray(W, dtype=float))
        r, c = np.nonzero(W)
        return cls(W.shape[0], W.shape[1], r, c, W[r, c], None if b is None else b)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    @property
    def bias_nnz(self) -> int:
        return int(np.count_nonzero(self.bias))

    @property
    def matrix(self) -> sp.csr_matrix:
        cached = self.__dict__.get("_csr")
        if cached is None:
            indptr = np.zeros(self.n_out + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.rows, minlength=self.n_out), out=indptr[1:])
            cached = sp.csr_matrix((self.vals, self.cols, indptr), shape=(self.n_out, self.n_in))
            cached.has_sorted_indices = True
            object.__setattr__(self, "_csr", cached)
        return cached

    @property
    def matrix_t(self) -> sp.csr_matrix:
        cached = self.__dict__.get("_csr_t")
        if cached is None:
            cached = self.matrix.T.tocsr()
            object.__setattr__(self, "_csr_t", cached)
        return cached

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, Z: np.ndarray) -> np.ndarray:
        """``W @ Z + b`` for a column batch ``Z`` of shape ``(n_in, n)``."""
        out = self.matrix @ Z
        if self.bias_nnz:
            out += self.bias[:, None]
        return out

    def pattern(self) -> tuple:
        return (self.n_out, self.n_in, self.rows.tobytes(), self.cols.tobytes(),
                np.flatnonzero(self.bias).tobytes())

    def shifted(self, row_offset: int, col_offset: int, n_out: int, n_in: int) -> "Layer":
        bias = np.zeros(n_out)
        bias[row_offset:row_offset + self.n_out] = self.bias
        return Layer(n_out, n_in, self.rows + row_offset, self.cols + col_offset, self.vals, bias)


@dataclass(frozen=True)
class NetworkStats:
    L: int
    W: int
    N_w: int
    dims: tuple[int, ...]

    def as_dict(self) -> dict:
        return {"W": self.W, "L": self.L, "N_w": self.N_w}


def _check_chain(layers: Sequence[Layer]) -> None:
    if len(layers) < 2:
        raise ValueError("a network needs at least two layers")
    for a, b in zip(layers[:-1], layers[1:]):
        if b.n_in != a.n_out:
            raise ValueError(f"layer dimensions do not chain: {a.n_out} -> {b.n_in}")
    if layers[-1].n_out != 1:
        raise ValueError("output dimension must be 1")


def _chunks(n: int, width: int):
    step = max(64, _CHUNK_BUDGET // max(width, 1))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


def _points(x, d: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = x.reshape(1, -1) if single else x
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}")
    return x, single


class _Evaluable:
    """Shared forward/backward pass; ``_linear_masks`` marks activation-free rows."""

    layers: tuple[Layer, ...]
    _linear_masks: tuple

    @property
    def d(self) -> int:
        return self.layers[0].n_in

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.layers[0].n_in, *(layer.n_out for layer in self.layers))

    def _act(self, i: int, pre: np.ndarray) -> np.ndarray:
        lin = self._linear_masks[i] if self._linear_masks else None
        if lin is None:
            return np.maximum(pre, 0.0)
        out = np.maximum(pre, 0.0)
        out[lin] = pre[lin]
        return out

    def _forward(self, X: np.ndarray, keep_masks: bool):
        Z = np.ascontiguousarray(X.T)
        masks = []
        for i, layer in enumerate(self.layers[:-1]):
            pre = layer.apply(Z)
            if keep_masks:
                m = pre > 0
                if self._linear_masks and self._linear_masks[i] is not None:
                    m[self._linear_masks[i]] = True
                masks.append(m)
            Z = self._act(i, pre)
        return self.layers[-1].apply(Z)[0], masks

    def value(self, x) -> np.ndarray:
        X, single = _points(x, self.d)
        width = max(self.dims)
        out = np.empty(X.shape[0])
        for sl in _chunks(X.shape[0], width):
            out[sl] = self._forward(X[sl], False)[0]
        return float(out[0]) if single else out

    def grad(self, x) -> np.ndarray:
        """Almost-everywhere gradient with ``relu'(0) = 0``."""
        X, single = _points(x, self.d)
        width = sum(self.dims)
        out = np.empty_like(X)
        for sl in _chunks(X.shape[0], width):
            _, masks = self._forward(X[sl], True)
            n = sl.stop - sl.start
            G = np.repeat(self.layers[-1].matrix_t.toarray(), n, axis=1)
            for i in range(len(self.layers) - 2, -1, -1):
                G = G * masks[i]
                G = self.layers[i].matrix_t @ G
            out[sl] = G.T
        return out[0] if single else out

    def value_and_grad(self, x):
        return self.value(x), self.grad(x)

    def __call__(self, x):
        return self.value(x)

    def stats(self) -> NetworkStats:
        W = sum(layer.nnz + layer.bias_nnz for layer in self.layers)
        return NetworkStats(L=len(self.layers), W=int(W), N_w=max(self.dims), dims=self.dims)


@dataclass(frozen=True, eq=False)
class ReluNetwork(_Evaluable):
    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        _check_chain(self.layers)

    @property
    def _linear_masks(self):
        return ()

    @classmethod
    def from_dense(cls, weights, biases) -> "ReluNetwork":
        return cls(tuple(Layer.from_dense(W, b) for W, b in zip(weights, biases)))

    @classmethod
    def zero(cls, d: int) -> "ReluNetwork":
        """Constant-zero network: one empty hidden unit, no stored weights."""
        return cls((Layer(1, d, [], [], [], None), Layer(1, 1, [], [], [], None)))

    # --- file format -----------------------------------------------------
    def to_text(self) -> str:
        st = self.stats()
        parts = ['{\n  "dims": [', ", ".join(map(str, self.dims)), '],\n  "layers": [\n']
        for li, layer in enumerate(self.layers):
            entries = ", ".join(f"[{r}, {c}, {v:.17g}]" for r, c, v in
                                zip(layer.rows.tolist(), layer.cols.tolist(), layer.vals.tolist()))
            nz = np.flatnonzero(layer.bias)
            bias = ", ".join(f"[{i}, {layer.bias[i]:.17g}]" for i in nz.tolist())
            sep = "," if li < len(self.layers) - 1 else ""
            parts.append(f'    {{"entries": [{entries}],\n     "bias": [{bias}]}}{sep}\n')
        parts.append(f'  ],\n  "stats": {{"W": {st.W}, "L": {st.L}, "N_w": {st.N_w}}}\n}}\n')
        return "".join(parts)

    @classmethod
    def from_text(cls, text: str) -> "ReluNetwork":
        doc = json.loads(text)
        if not isinstance(doc, dict) or "dims" not in doc or "layers" not in doc:
            raise ValueError("network text needs 'dims' and 'layers'")
        dims = doc["dims"]
        if len(doc["layers"]) != len(dims) - 1:
            raise ValueError("layer count does not match dims")
        layers = []
        for i, spec in enumerate(doc["layers"]):
            ent = np.array(spec["entries"], dtype=float).reshape(-1, 3)
            bias = np.zeros(dims[i + 1])
            for r, v in spec["bias"]:
                bias[int(r)] = float(v)
            layers.append(Layer(dims[i + 1], dims[i], ent[:, 0].astype(np.int64),
                                ent[:, 1].astype(np.int64), ent[:, 2], bias))
        net = cls(tuple(layers))
        if "stats" in doc:
            st = net.stats()
            if (st.W, st.L, st.N_w) != (doc["stats"]["W"], doc["stats"]["L"], doc["stats"]["N_w"]):
                raise ValueError("stats block does not match the network")
        return net


@dataclass(frozen=True, eq=False)
class SpecialNetwork(_Evaluable):
    """Network whose hidden layers reserve activation-free rows.

    In every hidden layer the first ``d`` rows are source channels (copies of
    the input) and the last row is the collation channel, which only sums
    earlier partial results and never feeds a non-collation row.
    """

    layers: tuple[Layer, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        _check_chain(self.layers)
        d = self.d
        for i, layer in enumerate(self.layers[:-1]):
            if layer.n_out < d + 1:
                raise ValueError(f"hidden layer {i} too narrow for source and collation rows")
        for i, layer in enumerate(self.layers[1:-1], start=1):
            prev_col = self.layers[i - 1].n_out - 1
            bad = (layer.cols == prev_col) & (layer.rows != layer.n_out - 1)
            if np.any(bad):
                raise ValueError(f"collation channel feeds a non-collation row in layer {i}")

    @property
    def _linear_masks(self):
        cached = self.__dict__.get("_masks")
        if cached is None:
            d = self.d
            cached = []
            for layer in self.layers[:-1]:
                m = np.zeros(layer.n_out, dtype=bool)
                m[:d] = True
                m[-1] = True
                cached.append(m[:, None])
            cached = tuple(cached)
            object.__setattr__(self, "_masks", cached)
        return cached

    def _act(self, i, pre):
        out = np.maximum(pre, 0.0)
        d = self.d
        out[:d] = pre[:d]
        out[-1] = pre[-1]
        return out


# ---------------------------------------------------------------------------
# interval bounds


def interval_bounds(net: _Evaluable, lo=None, hi=None):
    """Layerwise pre-activation intervals over the box ``[lo, hi]`` (default ``[0, 1]^d``)."""
    d = net.d
    lo = np.zeros(d) if lo is None else np.asarray(lo, dtype=float)
    hi = np.ones(d) if hi is None else np.asarray(hi, dtype=float)
    out = []
    linear = net._linear_masks
    for i, layer in enumerate(net.layers):
        pos = np.where(layer.vals > 0, layer.vals, 0.0)
        neg = np.where(layer.vals < 0, layer.vals, 0.0)
        new_lo = (np.bincount(layer.rows, pos * lo[layer.cols], layer.n_out)
                  + np.bincount(layer.rows, neg * hi[layer.cols], layer.n_out) + layer.bias)
        new_hi = (np.bincount(layer.rows, pos * hi[layer.cols], layer.n_out)
                  + np.bincount(layer.rows, neg * lo[layer.cols], layer.n_out) + layer.bias)
        out.append((new_lo, new_hi))
        if i < len(net.layers) - 1:
            lo, hi = np.maximum(new_lo, 0.0), np.maximum(new_hi, 0.0)
            if linear and linear[i] is not None:
                mask = linear[i][:, 0]
                lo[mask], hi[mask] = new_lo[mask], new_hi[mask]
    return out


def bound_output(net: _Evaluable) -> float:
    """Guaranteed bound on ``sup |net(x)|`` over ``[0, 1]^d`` by interval propagation."""
    lo, hi = interval_bounds(net)[-1]
    bound = float(max(abs(lo[0]), abs(hi[0])))
    if not np.isfinite(bound):
        raise ValueError("output bound is not finite")
    return bound


# ---------------------------------------------------------------------------
# combinators


def _padded(net: ReluNetwork, depth: int, M: float) -> tuple[Layer, ...]:
    """Extend ``net`` to ``depth`` layers via ``out + M >= 0`` carried through ReLUs."""
    L = net.depth
    if L == depth:
        return net.layers
    last = net.layers[-1]
    layers = list(net.layers[:-1])
    layers.append(Layer(1, last.n_in, last.rows, last.cols, last.vals, last.bias + M))
    for _ in range(depth - L - 1):
        layers.append(Layer(1, 1, [0], [0], [1.0], None))
    layers.append(Layer(1, 1, [0], [0], [1.0], [-M]))
    return tuple(layers)


def parallelize(nets: Sequence[ReluNetwork], lambdas: Sequence[float],
                bounds: Sequence[float] | None = None, check_samples: int = 256,
                seed: int = 0) -> ReluNetwork:
    """Network computing ``sum_j lambdas[j] * nets[j](x)`` on ``[0, 1]^d``.

    Sub-networks are stacked block-diagonally. Shallower ones are extended to
    the common depth using a certified output bound ``M_j``: either supplied in
    ``bounds`` (checked against samples) or computed by :func:`bound_output`.
    Output weights that vanish after scaling are dropped.
    """
    nets = list(nets)
    lambdas = [float(v) for v in lambdas]
    if not nets or len(nets) != len(lambdas):
        raise ValueError("need one coefficient per network")
    d = nets[0].d
    if any(net.d != d for net in nets):
        raise ValueError("all networks must share the input dimension")
    depth = max(net.depth for net in nets)
    if bounds is not None:
        if len(bounds) != len(nets):
            raise ValueError("need one bound per network")
        rng = np.random.default_rng(seed)
        X = rng.random((check_samples, d))
        for j, (net, M) in enumerate(zip(nets, bounds)):
            if net.depth < depth and np.max(np.abs(net.value(X))) > M:
                raise ValueError(f"bound for network {j} is smaller than a sampled output")
    stacks = []
    for j, net in enumerate(nets):
        if net.depth < depth:
            M = float(bounds[j]) if bounds is not None else bound_output(net)
            stacks.append(_padded(net, depth, M))
        else:
            stacks.append(net.layers)

    layers = []
    col_offsets = np.zeros(len(nets), dtype=np.int64)
    for ell in range(depth):
        widths = np.array([s[ell].n_out for s in stacks], dtype=np.int64)
        row_offsets = np.concatenate([[0], np.cumsum(widths)[:-1]])
        last = ell == depth - 1
        rows, cols, vals = [], [], []
        bias_out = 0.0
        biases = []
        for j, s in enumerate(stacks):
            layer = s[ell]
            if last:
                v = lambdas[j] * layer.vals
                keep = v != 0
                rows.append(np.zeros(int(keep.sum()), dtype=np.int64))
                cols.append(layer.cols[keep] + col_offsets[j])
                vals.append(v[keep])
                bias_out += lambdas[j] * float(layer.bias[0])
            else:
                rows.append(layer.rows + row_offsets[j])
                cols.append(layer.cols + (col_offsets[j] if ell > 0 else 0))
                vals.append(layer.vals)
                biases.append(layer.bias)
        n_in = layers[-1].n_out if layers else d
        if last:
            layers.append(Layer(1, n_in, np.concatenate(rows), np.concatenate(cols),
                                np.concatenate(vals), [bias_out]))
        else:
            layers.append(Layer(int(widths.sum()), n_in, np.concatenate(rows), np.concatenate(cols),
                                np.concatenate(vals), np.concatenate(biases)))
            col_offsets = row_offsets
    return ReluNetwork(tuple(layers))


def parallelize_size_bound(nets: Sequence[ReluNetwork]) -> int:
    """Size accounting for a parallelization: ``sum W_j + sum_{L_j < L} (L - L_j + 2)``."""
    depth = max(net.depth for net in nets)
    return int(sum(net.stats().W for net in nets)
               + sum(depth - net.depth + 2 for net in nets if net.depth < depth))


def special_to_standard(net: SpecialNetwork) -> ReluNetwork:
    """Standard ReLU network with the same graph, depth, width and output on ``[0, 1]^d``.

    Each activation-free row with a possibly negative value is shifted by a
    certified constant ``c`` so the ReLU acts as the identity; consumers
    subtract ``W c`` through their bias. Shifts are kept non-decreasing along
    the collation channel so plain carry layers get an exactly zero correction.
    """
    bounds = interval_bounds(net)
    d = net.d
    shifts = []
    prev_coll = 0.0
    for i, layer in enumerate(net.layers[:-1]):
        lo = bounds[i][0]
        c = np.zeros(layer.n_out)
        src_lo = lo[:d]
        if np.any(src_lo < 0):
            c[:d] = np.maximum(0.0, -src_lo)
        need = max(0.0, -float(lo[-1]))
        if not np.isfinite(need):
            raise ValueError(f"cannot certify a collation shift in layer {i}")
        prev_coll = max(prev_coll, need)
        c[-1] = prev_coll
        shifts.append(c)
    layers = []
    for i, layer in enumerate(net.layers):
        bias = layer.bias.copy()
        if i > 0:
            cin = shifts[i - 1]
            bias -= np.bincount(layer.rows, layer.vals * cin[layer.cols], layer.n_out)
        if i < len(net.layers) - 1:
            bias += shifts[i]
        bias[np.abs(bias) < 1e-300] = 0.0
        layers.append(Layer(layer.n_out, layer.n_in, layer.rows, layer.cols, layer.vals, bias))
    return ReluNetwork(tuple(layers))


# ---------------------------------------------------------------------------
# architectures


def architecture_key(net: _Evaluable) -> tuple:
    """Hashable sparsity pattern (dims plus nonzero positions of weights and biases)."""
    return tuple(layer.pattern() for layer in net.layers)


def has_architecture(net: _Evaluable, arch: _Evaluable) -> bool:
    """True when ``net`` has the dims of ``arch`` and no nonzero outside its pattern."""
    if net.dims != arch.dims:
        return False
    for a, b in zip(net.layers, arch.layers):
        allowed = set(zip(b.rows.tolist(), b.cols.tolist()))
        if not set(zip(a.rows.tolist(), a.cols.tolist())) <= allowed:
            return False
        if np.any((a.bias != 0) & (b.bias == 0)):
            return False
    return True
