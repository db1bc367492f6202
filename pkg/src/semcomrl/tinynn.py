"""Minimal neural substrate: affine nets, masked categorical heads, autograd.

Networks are small (two tanh hidden layers by default) and operate on
batches of state encodings.  Training code builds a scalar objective from
the op set below; `backward` then fills exact analytic gradients for every
parameter via reverse-mode accumulation over the recorded graph.  Only the
handful of ops the training objectives need are provided; everything runs
on plain numpy arrays in float64, so forward and backward are bit-stable
for identical inputs.

Masking: a boolean action mask zeroes the probability of forbidden actions
by excluding their logits from the softmax normalization.  Masked entries
of a log-softmax output are sentinel 0.0 and must never be read; the
Categorical wrapper enforces this at the sampling/log-prob level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


# ---------------------------------------------------------------------------
# reverse-mode tape

class Tensor:
    """Node in the computation graph wrapping a float64 ndarray."""

    __slots__ = ("value", "parents", "grad_fn", "grad")

    def __init__(self, value, parents=(), grad_fn=None):
        self.value = np.asarray(value, dtype=float)
        self.parents = parents
        self.grad_fn = grad_fn    # upstream grad -> tuple of parent grads
        self.grad = None

    @property
    def shape(self):
        return self.value.shape


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(node) into .grad for every node under root."""
    if root.value.shape != ():
        raise ValueError("backward requires a scalar root")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    for node in order:
        node.grad = np.zeros_like(node.value)
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad_fn is None:
            continue
        for parent, g in zip(node.parents, node.grad_fn(node.grad)):
            parent.grad = parent.grad + g


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ W.T + b for x of shape (B, in), W of shape (out, in)."""
    if x.value.ndim != 2 or x.value.shape[1] != weight.value.shape[1]:
        raise ValueError(
            f"affine input {x.value.shape} incompatible with weight {weight.value.shape}"
        )
    out = x.value @ weight.value.T + bias.value

    def grad_fn(g):
        return g @ weight.value, g.T @ x.value, g.sum(axis=0)

    return Tensor(out, (x, weight, bias), grad_fn)


def tanh_op(x: Tensor) -> Tensor:
    y = np.tanh(x.value)
    return Tensor(y, (x,), lambda g: (g * (1.0 - y * y),))


def masked_log_softmax(logits: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise log-softmax restricted to unmasked entries.

    Masked positions carry sentinel value 0.0 and zero gradient; consumers
    must only read unmasked entries.  Max-subtraction keeps the result
    finite for logit magnitudes up to ~1e300.
    """
    m = np.asarray(mask, dtype=bool)
    if m.shape != logits.value.shape:
        raise ValueError(f"mask shape {m.shape} != logits shape {logits.value.shape}")
    if not m.any(axis=1).all():
        raise ValueError("every row needs at least one unmasked action")
    z = np.where(m, logits.value, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)                                  # masked entries exp(-inf) = 0
    total = e.sum(axis=1, keepdims=True)
    probs = e / total
    logp = np.where(m, z - np.log(total), 0.0)

    def grad_fn(g):
        gsum = g.sum(axis=1, keepdims=True)
        return (np.where(m, g - probs * gsum, 0.0),)

    return Tensor(logp, (logits,), grad_fn)


def gather_rows(x: Tensor, indices: np.ndarray) -> Tensor:
    """x[i, indices[i]] for every row i; shape (B,)."""
    idx = np.asarray(indices, dtype=int)
    rows = np.arange(x.value.shape[0])
    out = x.value[rows, idx]

    def grad_fn(g):
        gx = np.zeros_like(x.value)
        gx[rows, idx] = g
        return (gx,)

    return Tensor(out, (x,), grad_fn)


def reshape(x: Tensor, shape) -> Tensor:
    orig = x.value.shape
    return Tensor(x.value.reshape(shape), (x,), lambda g: (g.reshape(orig),))


def sum_axis(x: Tensor, axis: int) -> Tensor:
    out = x.value.sum(axis=axis)

    def grad_fn(g):
        return (np.expand_dims(g, axis) * np.ones_like(x.value),)

    return Tensor(out, (x,), grad_fn)


def sum_all(x: Tensor) -> Tensor:
    return Tensor(x.value.sum(), (x,), lambda g: (g * np.ones_like(x.value),))


def mean_all(x: Tensor) -> Tensor:
    n = x.value.size
    return Tensor(x.value.mean(), (x,), lambda g: (g * np.ones_like(x.value) / n,))


def exp_op(x: Tensor) -> Tensor:
    y = np.exp(x.value)
    return Tensor(y, (x,), lambda g: (g * y,))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ValueError("add requires equal shapes")
    return Tensor(a.value + b.value, (a, b), lambda g: (g, g))


def add_const(x: Tensor, c) -> Tensor:
    return Tensor(x.value + np.asarray(c, dtype=float), (x,), lambda g: (g,))


def mul_const(x: Tensor, c) -> Tensor:
    cc = np.asarray(c, dtype=float)
    return Tensor(x.value * cc, (x,), lambda g: (g * cc,))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, mul_const(b, -1.0))


def square(x: Tensor) -> Tensor:
    return Tensor(x.value**2, (x,), lambda g: (g * 2.0 * x.value,))


def minimum_op(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; ties route the gradient to the first argument."""
    take_a = a.value <= b.value
    out = np.where(take_a, a.value, b.value)
    return Tensor(out, (a, b), lambda g: (g * take_a, g * ~take_a))


def clip_op(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes inside the closed interval."""
    inside = (x.value >= lo) & (x.value <= hi)
    return Tensor(np.clip(x.value, lo, hi), (x,), lambda g: (g * inside,))


# ---------------------------------------------------------------------------
# parameter containers

@dataclass
class AffineLayer:
    weight: np.ndarray       # (out, in)
    bias: np.ndarray         # (out,)
    activation: str          # "tanh" or "linear"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("weight must be (out, in) with matching bias length")
        if self.activation not in ("tanh", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.weight).all() and np.isfinite(self.bias).all()):
            raise ValueError("parameters must be finite")


class NetworkParameters:
    """Ordered affine layers; consecutive shapes must chain."""

    def __init__(self, layers: list[AffineLayer]):
        if not layers:
            raise ValueError("need at least one layer")
        for a, b in zip(layers, layers[1:]):
            if b.weight.shape[1] != a.weight.shape[0]:
                raise ValueError("layer shapes do not chain")
        self.layers = list(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def copy(self) -> "NetworkParameters":
        return NetworkParameters(
            [AffineLayer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def flatten(self) -> np.ndarray:
        """All values as one vector, (weight rows, then bias) per layer."""
        return np.concatenate(
            [np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers]
        )

    def with_flat(self, flat: np.ndarray) -> "NetworkParameters":
        """New parameters with values taken from a flat vector (same shapes)."""
        flat = np.asarray(flat, dtype=float)
        layers, pos = [], 0
        for l in self.layers:
            nw, nb = l.weight.size, l.bias.size
            w = flat[pos : pos + nw].reshape(l.weight.shape)
            pos += nw
            b = flat[pos : pos + nb]
            pos += nb
            layers.append(AffineLayer(w.copy(), b.copy(), l.activation))
        if pos != flat.size:
            raise ValueError("flat vector length does not match parameter count")
        return NetworkParameters(layers)

    @property
    def num_parameters(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)


def _orthogonal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))    # unique orientation
    if rows < cols:
        q = q.T
    return q[:rows, :cols]


def init_network(dims, rng: np.random.Generator) -> NetworkParameters:
    """Tanh net with orthogonal weights scaled by 1/sqrt(fan-in), zero biases.

    dims = (input, hidden..., output); the output layer is linear.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2:
        raise ValueError("need at least input and output dimensions")
    layers = []
    for j, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
        w = _orthogonal(fan_out, fan_in, rng) / np.sqrt(fan_in)
        act = "linear" if j == len(dims) - 2 else "tanh"
        layers.append(AffineLayer(w, np.zeros(fan_out), act))
    return NetworkParameters(layers)


def graph_forward(params: NetworkParameters, states: np.ndarray) -> tuple[Tensor, list[Tensor]]:
    """Taped forward pass over a (B, input_dim) batch.

    Returns the output logits Tensor and the leaf parameter Tensors in
    flatten() order (weight, bias per layer) for gradient readout.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    if x.shape[1] != params.input_dim:
        raise ValueError(f"state dim {x.shape[1]} != network input {params.input_dim}")
    node = Tensor(x)
    leaves: list[Tensor] = []
    for layer in params.layers:
        w, b = Tensor(layer.weight), Tensor(layer.bias)
        leaves += [w, b]
        node = affine(node, w, b)
        if layer.activation == "tanh":
            node = tanh_op(node)
    return node, leaves


def forward_values(params: NetworkParameters, states: np.ndarray) -> np.ndarray:
    """Raw network outputs (no tape, no softmax); (B, out) or (out,)."""
    x = np.asarray(states, dtype=float)
    single = x.ndim == 1
    out = np.atleast_2d(x)
    if out.shape[1] != params.input_dim:
        raise ValueError(f"state dim {out.shape[1]} != network input {params.input_dim}")
    for layer in params.layers:
        out = out @ layer.weight.T + layer.bias
        if layer.activation == "tanh":
            out = np.tanh(out)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# categorical action head

@dataclass(frozen=True)
class Categorical:
    """Probability vector over flat action ids; masked entries exactly 0."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1:
            raise ValueError("probs must be a vector")
        if np.any(p < 0) or not np.isfinite(p).all():
            raise ValueError("probabilities must be finite and >= 0")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")

    def log_prob(self, action: int) -> float:
        p = self.probs[action]
        if p == 0.0:
            raise ValueError(f"action {action} is masked (probability 0)")
        return float(np.log(p))

    def sample(self, rng: np.random.Generator) -> int:
        cdf = np.cumsum(self.probs)
        cdf /= cdf[-1]
        # side="right" skips zero-width (masked) slots entirely.
        return int(np.searchsorted(cdf, rng.random(), side="right"))


def policy_forward(
    params: NetworkParameters, state: np.ndarray, mask: np.ndarray | None = None
) -> Categorical:
    """Masked softmax policy head over the network logits for one state."""
    logits = forward_values(params, np.asarray(state, dtype=float))
    if logits.ndim != 1:
        raise ValueError("policy_forward takes a single state vector")
    if mask is None:
        mask = np.ones(logits.shape, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    if m.shape != logits.shape:
        raise ValueError(f"mask shape {m.shape} != logits shape {logits.shape}")
    if not m.any():
        raise ValueError("all actions masked")
    z = np.where(m, logits, -np.inf)
    z = z - z[m].max()
    e = np.exp(z)
    return Categorical(e / e.sum())


def kl_divergence(p: Categorical, q: Categorical) -> float:
    """KL(p || q) = sum p log(p/q); requires q > 0 wherever p > 0."""
    if p.probs.shape != q.probs.shape:
        raise ValueError("distributions must share an action space")
    sup = p.probs > 0
    if np.any(q.probs[sup] == 0):
        raise ValueError("support mismatch: q is zero where p is positive")
    return float(np.sum(p.probs[sup] * (np.log(p.probs[sup]) - np.log(q.probs[sup]))))


# ---------------------------------------------------------------------------
# updates

def ascend(params: NetworkParameters, grads: list[np.ndarray], delta: float) -> NetworkParameters:
    """Plain gradient ascent: theta + delta * grad, as a new snapshot."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    expect = 2 * len(params.layers)
    if len(grads) != expect:
        raise ValueError(f"expected {expect} gradient arrays, got {len(grads)}")
    layers = []
    for j, layer in enumerate(params.layers):
        gw, gb = grads[2 * j], grads[2 * j + 1]
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise FloatingPointError("non-finite gradient: training diverged")
        layers.append(
            AffineLayer(layer.weight + delta * gw, layer.bias + delta * gb, layer.activation)
        )
    return NetworkParameters(layers)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0


def adam_init(params: NetworkParameters) -> AdamState:
    zeros = []
    for layer in params.layers:
        zeros += [np.zeros_like(layer.weight), np.zeros_like(layer.bias)]
    return AdamState(m=[z.copy() for z in zeros], v=zeros)


def adam_ascend(
    params: NetworkParameters,
    grads: list[np.ndarray],
    state: AdamState,
    delta: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> NetworkParameters:
    """Adaptive-moment ascent step; mutates the moment state in place."""
    state.step += 1
    scaled = []
    for j, g in enumerate(grads):
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient: training diverged")
        state.m[j] = beta1 * state.m[j] + (1 - beta1) * g
        state.v[j] = beta2 * state.v[j] + (1 - beta2) * g * g
        mhat = state.m[j] / (1 - beta1**state.step)
        vhat = state.v[j] / (1 - beta2**state.step)
        scaled.append(mhat / (np.sqrt(vhat) + eps))
    return ascend(params, scaled, delta)


# ---------------------------------------------------------------------------
# checkpoints

_CKPT_MAGIC = "semcomrl-net-v1"


def save_network(params: NetworkParameters, path) -> None:
    """Flat text checkpoint: shapes plus row-major %.17e values (lossless)."""
    lines = [_CKPT_MAGIC, f"layers {len(params.layers)}"]
    for layer in params.layers:
        out, inp = layer.weight.shape
        lines.append(f"layer {out} {inp} {layer.activation}")
        for row in layer.weight:
            lines.append(" ".join(f"{v:.17e}" for v in row))
        lines.append(" ".join(f"{v:.17e}" for v in layer.bias))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path) -> NetworkParameters:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _CKPT_MAGIC:
        raise ValueError(f"not a {_CKPT_MAGIC} checkpoint")
    if not lines[1].startswith("layers "):
        raise ValueError("missing layer count")
    n = int(lines[1].split()[1])
    pos, layers = 2, []
    for _ in range(n):
        tag, out, inp, act = lines[pos].split()
        if tag != "layer":
            raise ValueError(f"expected layer header at line {pos + 1}")
        out, inp = int(out), int(inp)
        pos += 1
        w = np.array([[float(v) for v in lines[pos + r].split()] for r in range(out)])
        pos += out
        b = np.array([float(v) for v in lines[pos].split()])
        pos += 1
        layers.append(AffineLayer(w.reshape(out, inp), b, act))
    return NetworkParameters(layers)
