"""Minimal reverse-mode automatic differentiation on real float64 arrays.

Complex signals ride through the graph as (re, im) channel pairs, so all
adjoints stay real and the loss is an ordinary real scalar.  The two
quantization-aware nodes the training graphs need are here as well:
`stop_gradient` (forward identity, zero adjoint to ancestors) and
`saturation` (clip forward, adjoint passed only strictly inside the range).

A Tape owns one forward/backward pass; independent tapes may run
concurrently.  Backward visits records exactly once in reverse order and
accumulates leaf adjoints into Parameter.grad.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Parameter:
    """Trainable array with its gradient and Adam state."""

    def __init__(self, value):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.t = 0

    def zero_grad(self):
        self.grad[...] = 0.0


class Node:
    __slots__ = ("value", "needs_grad", "_idx", "_tape")

    def __init__(self, value, needs_grad, idx, tape):
        self.value = value
        self.needs_grad = needs_grad
        self._idx = idx
        self._tape = tape


class Tape:
    def __init__(self):
        self._values = []
        self._records = []  # (out_idxs, in_idxs, in_needs, backward_fn)
        self._param_nodes = []  # (node_idx, Parameter)

    def _new_node(self, value, needs_grad) -> Node:
        idx = len(self._values)
        self._values.append(value)
        return Node(value, needs_grad, idx, self)

    def leaf(self, param: Parameter) -> Node:
        node = self._new_node(param.value, True)
        self._param_nodes.append((node._idx, param))
        return node

    def constant(self, value) -> Node:
        return self._new_node(np.ascontiguousarray(value, dtype=np.float64), False)

    def emit(self, value, inputs, backward) -> Node:
        nodes = [self.as_node(x) for x in inputs]
        needs = tuple(n.needs_grad for n in nodes)
        out = self._new_node(value, any(needs))
        self._records.append(((out._idx,), tuple(n._idx for n in nodes), needs, backward))
        return out

    def emit_multi(self, values, inputs, backward):
        nodes = [self.as_node(x) for x in inputs]
        needs = tuple(n.needs_grad for n in nodes)
        outs = tuple(self._new_node(v, any(needs)) for v in values)
        self._records.append(
            (tuple(o._idx for o in outs), tuple(n._idx for n in nodes), needs, backward)
        )
        return outs

    def as_node(self, x) -> Node:
        if isinstance(x, Node):
            if x._tape is not self:
                raise ValueError("node belongs to a different tape")
            return x
        return self.constant(x)

    def backward(self, node: Node, seed=None):
        """Reverse sweep from `node`; leaf adjoints accumulate into .grad.

        With the default seed the node must be scalar; an explicit seed array
        turns this into a vector-Jacobian product from that node.
        """
        if seed is None:
            if np.ndim(node.value) != 0:
                raise ValueError("backward: loss node must be scalar")
            seed = 1.0
        adjoints = [None] * len(self._values)
        adjoints[node._idx] = np.asarray(seed, dtype=np.float64)
        for out_idxs, in_idxs, in_needs, backward_fn in reversed(self._records):
            if not any(adjoints[o] is not None for o in out_idxs):
                continue
            out_adjs = [
                adjoints[o]
                if adjoints[o] is not None
                else np.zeros_like(self._values[o])
                for o in out_idxs
            ]
            grads = backward_fn(*out_adjs)
            for idx, grad, need in zip(in_idxs, grads, in_needs):
                if grad is None or not need:
                    continue
                if adjoints[idx] is None:
                    # copy: backward functions may hand back a shared array
                    adjoints[idx] = np.array(grad, dtype=np.float64)
                else:
                    adjoints[idx] += grad
        for idx, param in self._param_nodes:
            if adjoints[idx] is not None:
                param.grad += adjoints[idx]


def _tape_of(*args) -> Tape:
    for a in args:
        if isinstance(a, Node):
            return a._tape
    raise TypeError("at least one argument must be a tape Node")


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def add(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = tape.as_node(a), tape.as_node(b)
    return tape.emit(a.value + b.value, (a, b), lambda adj: (adj, adj))


def sub(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = tape.as_node(a), tape.as_node(b)
    return tape.emit(a.value - b.value, (a, b), lambda adj: (adj, -adj))


def mul(a, b) -> Node:
    tape = _tape_of(a, b)
    a, b = tape.as_node(a), tape.as_node(b)
    av, bv = a.value, b.value
    return tape.emit(av * bv, (a, b), lambda adj: (adj * bv, adj * av))


def smul(a: Node, c) -> Node:
    """Multiply by a constant scalar or array (no gradient through c)."""
    tape = _tape_of(a)
    c = np.float64(c) if np.isscalar(c) else np.asarray(c, dtype=np.float64)
    return tape.emit(a.value * c, (a,), lambda adj: (adj * c,))


def sdiv(a: Node, c) -> Node:
    """Divide by a constant scalar or array (true division, kept exact so a
    gain-compensated value equals value/gain bit for bit)."""
    tape = _tape_of(a)
    c = np.float64(c) if np.isscalar(c) else np.asarray(c, dtype=np.float64)
    return tape.emit(a.value / c, (a,), lambda adj: (adj / c,))


def tanh(a: Node) -> Node:
    tape = _tape_of(a)
    y = kernels.tanh_fwd(np.ascontiguousarray(a.value))
    return tape.emit(y, (a,), lambda adj: (kernels.tanh_bwd(np.ascontiguousarray(adj), y),))


def affine(x, w, b) -> Node:
    """x @ w + b with x of shape (n, k), w (k, m), b (m,)."""
    tape = _tape_of(x, w, b)
    x, w, b = tape.as_node(x), tape.as_node(w), tape.as_node(b)
    xv, wv = x.value, w.value

    def backward(adj):
        gx = adj @ wv.T if x.needs_grad else None
        gw = xv.T @ adj if w.needs_grad else None
        gb = adj.sum(axis=0) if b.needs_grad else None
        return gx, gw, gb

    return tape.emit(xv @ wv + b.value, (x, w, b), backward)


def column(x: Node, j: int) -> Node:
    tape = _tape_of(x)
    shape = x.value.shape

    def backward(adj):
        g = np.zeros(shape)
        g[:, j] = adj
        return (g,)

    return tape.emit(np.ascontiguousarray(x.value[:, j]), (x,), backward)


def cmul(ar, ai, br, bi):
    """Elementwise complex multiply in 2x2 real form: (ar+j ai)(br+j bi)."""
    tape = _tape_of(ar, ai, br, bi)
    ar, ai = tape.as_node(ar), tape.as_node(ai)
    br, bi = tape.as_node(br), tape.as_node(bi)
    arv, aiv, brv, biv = ar.value, ai.value, br.value, bi.value

    def backward(adj_r, adj_i):
        return (
            adj_r * brv + adj_i * biv,
            -adj_r * biv + adj_i * brv,
            adj_r * arv + adj_i * aiv,
            -adj_r * aiv + adj_i * arv,
        )

    return tape.emit_multi(
        (arv * brv - aiv * biv, arv * biv + aiv * brv), (ar, ai, br, bi), backward
    )


def fir_conv(xr, xi, wr, wi):
    """Causal complex FIR convolution truncated to the input length.

    Tap adjoints are the correlation of the input with the output adjoint;
    input adjoints correlate the output adjoint with the conjugate taps.
    """
    tape = _tape_of(xr, xi, wr, wi)
    xr, xi = tape.as_node(xr), tape.as_node(xi)
    wr, wi = tape.as_node(wr), tape.as_node(wi)
    xrv, xiv = np.ascontiguousarray(xr.value), np.ascontiguousarray(xi.value)
    wrv, wiv = np.ascontiguousarray(wr.value), np.ascontiguousarray(wi.value)
    yr, yi = kernels.conv_fwd(xrv, xiv, wrv, wiv)

    def backward(adj_r, adj_i):
        adj_r = np.ascontiguousarray(adj_r)
        adj_i = np.ascontiguousarray(adj_i)
        g_xr = g_xi = g_wr = g_wi = None
        if xr.needs_grad or xi.needs_grad:
            g_xr, g_xi = kernels.conv_grad_input(adj_r, adj_i, wrv, wiv)
        if wr.needs_grad or wi.needs_grad:
            g_wr, g_wi = kernels.conv_grad_taps(adj_r, adj_i, xrv, xiv, wrv.size)
        return g_xr, g_xi, g_wr, g_wi

    return tape.emit_multi((yr, yi), (xr, xi, wr, wi), backward)


def mse_loss(rr: Node, ri: Node | None = None) -> Node:
    """Mean over samples of re^2 + im^2 (the linear-scale residual power)."""
    tape = _tape_of(rr)
    rrv = rr.value
    if rrv.size == 0:
        raise ValueError("mse_loss: empty input")
    n = rrv.size
    if ri is None:
        value = float(np.dot(rrv, rrv) / n)
        return tape.emit(value, (rr,), lambda adj: ((2.0 * adj / n) * rrv,))
    riv = ri.value
    value = float((np.dot(rrv, rrv) + np.dot(riv, riv)) / n)

    def backward(adj):
        s = 2.0 * adj / n
        return s * rrv, s * riv

    return tape.emit(value, (rr, ri), backward)


def stop_gradient(a: Node) -> Node:
    """Forward identity; contributes exactly zero adjoint to all ancestors."""
    tape = _tape_of(a)
    node = tape.emit(a.value, (a,), lambda adj: (None,))
    node.needs_grad = False
    return node


def saturation(a: Node, lam: float) -> Node:
    """Clip to [-lam, lam]; adjoint passes only where |output| < lam."""
    tape = _tape_of(a)
    y = np.clip(a.value, -lam, lam)
    mask = np.abs(y) < lam
    return tape.emit(y, (a,), lambda adj: (adj * mask,))


def quantize_ste(a: Node, lam: float, n_levels: int) -> Node:
    """Mid-rise ADC in the forward pass, identity in the backward pass.

    The forward value is the quantizer output itself (not an additive
    reconstruction), so the digital residual matches a plain application of
    the converter bit for bit while the quantization error stays invisible
    to backpropagation.
    """
    tape = _tape_of(a)
    y = kernels.quantize_midrise(np.ascontiguousarray(a.value), lam, n_levels)
    return tape.emit(y, (a,), lambda adj: (adj,))


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


def zero_grads(params):
    for p in params:
        p.zero_grad()


def adam_step(params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Standard Adam update with bias correction, applied in place."""
    for p in params:
        p.t += 1
        kernels.adam_update(
            p.value.reshape(-1),
            p.grad.reshape(-1),
            p.m.reshape(-1),
            p.v.reshape(-1),
            p.t,
            lr,
            beta1,
            beta2,
            eps,
        )
