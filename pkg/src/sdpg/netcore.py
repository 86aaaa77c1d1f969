"""Dense feedforward networks with hand-written reverse-mode gradients.

Networks are plain value objects holding lists of numpy arrays. Every
operation here is deterministic given the parameters and inputs.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("identity", "relu", "tanh")


class ShapeError(ValueError):
    """Input or parameter shapes do not match the network."""


class NumericError(ArithmeticError):
    """A non-finite value entered a computation that requires finite input."""


@dataclass
class DenseNet:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        dims = [int(d) for d in self.layer_dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ShapeError(f"bad layer_dims {self.layer_dims}")
        if self.hidden_activation != "relu":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("identity", "tanh"):
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("need one weight matrix and one bias per layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k + 1], dims[k]) or b.shape != (dims[k + 1],):
                raise ShapeError(
                    f"layer {k}: expected W{(dims[k + 1], dims[k])}, b{(dims[k + 1],)}, "
                    f"got W{w.shape}, b{b.shape}"
                )
        self.layer_dims = dims

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )


def init_net(layer_dims, rng: np.random.Generator, output_activation="identity",
             output_scale=None, dtype=np.float64) -> DenseNet:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.

    ``output_scale`` overrides the bound of the last layer (small final
    layers are common for actor heads).
    """
    dims = [int(d) for d in layer_dims]
    weights, biases = [], []
    for k in range(len(dims) - 1):
        bound = 1.0 / np.sqrt(dims[k])
        if output_scale is not None and k == len(dims) - 2:
            bound = output_scale
        weights.append(rng.uniform(-bound, bound, size=(dims[k + 1], dims[k])).astype(dtype))
        biases.append(rng.uniform(-bound, bound, size=dims[k + 1]).astype(dtype))
    return DenseNet(dims, weights, biases, "relu", output_activation)


def zeros_like_net(net: DenseNet) -> DenseNet:
    return DenseNet(
        list(net.layer_dims),
        [np.zeros_like(w) for w in net.weights],
        [np.zeros_like(b) for b in net.biases],
        net.hidden_activation,
        net.output_activation,
    )


def _affine(X, W, b, fast):
    # einsum keeps a per-row reduction order, so a row gives the same bits
    # whether it is evaluated alone or inside a batch. BLAS does not.
    out = X @ W.T if fast else np.einsum("ij,kj->ik", X, W)
    out += b
    return out


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _as_batch(net: DenseNet, X) -> np.ndarray:
    try:
        X = np.asarray(X, dtype=net.dtype)
    except ValueError as exc:  # ragged nested lists
        raise ShapeError(f"ragged batch: {exc}") from None
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise ShapeError(f"expected batch of shape (M, {net.in_dim}), got {X.shape}")
    return X


def forward_batch(net: DenseNet, X, fast: bool = False) -> np.ndarray:
    """Evaluate the network on each row of ``X``.

    With ``fast=False`` the result is bit-identical to calling :func:`forward`
    on each row. ``fast=True`` uses BLAS and may differ in the last ulp.
    """
    h = _as_batch(net, X)
    last = net.n_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = _affine(h, w, b, fast)
        h = _activate(h, net.output_activation if k == last else net.hidden_activation)
    return h


def forward(net: DenseNet, x) -> np.ndarray:
    x = np.asarray(x, dtype=net.dtype)
    if x.ndim != 1 or x.shape[0] != net.in_dim:
        raise ShapeError(f"expected input of length {net.in_dim}, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]


@dataclass
class Tape:
    """Activations recorded by :func:`forward_tape` for a later backward pass."""
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each layer
    pre: list[np.ndarray] = field(default_factory=list)     # pre-activations
    output: np.ndarray | None = None


def forward_tape(net: DenseNet, X, fast: bool = True) -> Tape:
    h = _as_batch(net, X)
    tape = Tape()
    last = net.n_layers - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        tape.inputs.append(h)
        z = _affine(h, w, b, fast)
        tape.pre.append(z)
        h = _activate(z, net.output_activation if k == last else net.hidden_activation)
    tape.output = h
    return tape


@dataclass
class GradBundle:
    """Gradients of ``upstream . output`` with respect to parameters and inputs."""
    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray | None

    def param_grads(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            out += [w, b]
        return out

    def scale(self, c: float) -> "GradBundle":
        return GradBundle(
            [c * g for g in self.weight_grads],
            [c * g for g in self.bias_grads],
            None if self.input_grad is None else c * self.input_grad,
        )


def backward_tape(net: DenseNet, tape: Tape, upstream, params=True, inputs=True) -> GradBundle:
    """Reverse pass over a recorded batch.

    ``upstream`` has shape (M, out_dim). Parameter gradients are summed over
    the batch; the input gradient keeps one row per batch element. Either half
    can be skipped to save work.
    """
    g = np.asarray(upstream, dtype=net.dtype)
    if g.shape != tape.output.shape:
        raise ShapeError(f"upstream shape {g.shape} != output shape {tape.output.shape}")
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite upstream gradient")
    L = net.n_layers
    wg: list = [None] * L
    bg: list = [None] * L
    for k in range(L - 1, -1, -1):
        kind = net.output_activation if k == L - 1 else net.hidden_activation
        if kind == "relu":
            g = g * (tape.pre[k] > 0.0)
        elif kind == "tanh":
            t = np.tanh(tape.pre[k])
            g = g * (1.0 - t * t)
        if params:
            wg[k] = g.T @ tape.inputs[k]
            bg[k] = g.sum(axis=0)
        if k > 0 or inputs:
            w = net.weights[k]
            # single-output layers: an outer product, far cheaper than a k=1 GEMM
            g = g * w if w.shape[0] == 1 else g @ w
    return GradBundle(wg if params else [], bg if params else [], g if inputs else None)


def backward(net: DenseNet, x, upstream_grad) -> GradBundle:
    """Gradients of ``upstream_grad . forward(net, x)`` for a single input."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.in_dim:
        raise ShapeError(f"expected input of length {net.in_dim}, got shape {x.shape}")
    up = np.asarray(upstream_grad, dtype=float)
    if up.shape != (net.out_dim,):
        raise ShapeError(f"upstream gradient must have length {net.out_dim}")
    tape = forward_tape(net, x[None, :], fast=False)
    grads = backward_tape(net, tape, up[None, :])
    grads.input_grad = grads.input_grad[0]
    return grads


class Optimizer:
    """SGD or Adam over the parameters of one network.

    ``apply_step`` descends for ``direction="minimize"`` and ascends for
    ``"maximize"``.
    """

    def __init__(self, kind="sgd", learning_rate=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        if kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {kind!r}")
        if not learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        self.kind = kind
        self.learning_rate = float(learning_rate)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self._m = None
        self._v = None

    def apply_step(self, net: DenseNet, grads: GradBundle, direction="minimize") -> DenseNet:
        if direction not in ("minimize", "maximize"):
            raise ValueError(f"direction must be minimize or maximize, got {direction!r}")
        params = net.params()
        gs = grads.param_grads()
        if len(gs) != len(params) or any(p.shape != g.shape for p, g in zip(params, gs)):
            raise ShapeError("gradient shapes do not match network parameters")
        sign = -1.0 if direction == "minimize" else 1.0
        self.step_count += 1
        lr = self.learning_rate
        if self.kind == "sgd":
            for p, g in zip(params, gs):
                p += sign * lr * g
            return net
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        b1, b2, t = self.beta1, self.beta2, self.step_count
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for p, g, m, v in zip(params, gs, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p += sign * lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return net

    def state(self) -> dict:
        return {"kind": self.kind, "learning_rate": self.learning_rate, "step_count": self.step_count}


def apply_step(optimizer: Optimizer, net: DenseNet, grads: GradBundle, direction="minimize"):
    return optimizer.apply_step(net, grads, direction)


def _check_same_shape(src: DenseNet, dst: DenseNet):
    if src.layer_dims != dst.layer_dims:
        raise ShapeError(f"network shapes differ: {src.layer_dims} vs {dst.layer_dims}")


def copy_params(src: DenseNet, dst: DenseNet) -> None:
    _check_same_shape(src, dst)
    for s, d in zip(src.params(), dst.params()):
        d[...] = s


def soft_update(src: DenseNet, dst: DenseNet, tau: float) -> None:
    """dst <- tau * src + (1 - tau) * dst, in place."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    _check_same_shape(src, dst)
    if tau == 1.0:
        copy_params(src, dst)
        return
    for s, d in zip(src.params(), dst.params()):
        d *= 1.0 - tau
        d += tau * s


# Parameter record, little-endian throughout:
#   8 bytes   magic b"SDPGNET\0"
#   uint32    format version (1)
#   uint32    number of entries in layer_dims (L + 1)
#   uint32 x (L + 1)   layer_dims
#   uint8     hidden activation code, uint8 output activation code
#             (index into ACTIVATIONS)
#   per layer k: float64 weights row-major (dims[k+1] x dims[k]), then
#                float64 bias (dims[k+1])
NET_MAGIC = b"SDPGNET\0"
NET_VERSION = 1


def net_to_bytes(net: DenseNet) -> bytes:
    buf = io.BytesIO()
    buf.write(NET_MAGIC)
    buf.write(struct.pack("<II", NET_VERSION, len(net.layer_dims)))
    buf.write(struct.pack(f"<{len(net.layer_dims)}I", *net.layer_dims))
    buf.write(struct.pack("<BB", ACTIVATIONS.index(net.hidden_activation),
                          ACTIVATIONS.index(net.output_activation)))
    for w, b in zip(net.weights, net.biases):
        buf.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return buf.getvalue()


def net_from_bytes(data: bytes) -> DenseNet:
    if data[:8] != NET_MAGIC:
        raise ValueError("not a network record (bad magic)")
    version, n = struct.unpack_from("<II", data, 8)
    if version != NET_VERSION:
        raise ValueError(f"unsupported network record version {version}")
    off = 16
    dims = list(struct.unpack_from(f"<{n}I", data, off))
    off += 4 * n
    hidden, out = struct.unpack_from("<BB", data, off)
    off += 2
    weights, biases = [], []
    for k in range(n - 1):
        size = dims[k + 1] * dims[k]
        weights.append(np.frombuffer(data, "<f8", size, off).reshape(dims[k + 1], dims[k]).astype(float))
        off += 8 * size
        biases.append(np.frombuffer(data, "<f8", dims[k + 1], off).astype(float))
        off += 8 * dims[k + 1]
    if off != len(data):
        raise ValueError("trailing bytes after network record")
    return DenseNet(dims, weights, biases, ACTIVATIONS[hidden], ACTIVATIONS[out])
