"""MLP parameters, basis-function architectures, and the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import FencError, ShapeError

ACTIVATIONS = ("relu", "tanh")


@dataclass
class MlpParams:
    """Fully-connected network: hidden activations, linear final layer."""

    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def named_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}.w{i}"] = w
            out[f"{prefix}.b{i}"] = b
        return out


def init_params(sizes, activation: str = "relu", seed=0) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights and biases.

    Biases share the weight scale rather than starting at zero: with zero
    biases every hidden kink of a scalar-input ReLU net sits at the origin,
    so all basis heads start inside span{relu(x), relu(-x)} and stay nearly
    collinear for a long time. Deterministic for a fixed seed (an int or a
    sequence of ints).
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise FencError(f"layer sizes must be >= 2 positive ints, got {sizes}")
    if activation not in ACTIVATIONS:
        raise FencError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpParams(sizes, weights, biases, activation)


def mlp_forward(params: MlpParams, x, tape: ad.Tape | None = None,
                prefix: str = "mlp"):
    """Forward pass. Returns an ndarray, or a Var when a tape is supplied.

    On a tape, the parameters are registered as leaves named
    ``{prefix}.w{i}`` / ``{prefix}.b{i}`` so gradients can be mapped back.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.sizes[0]:
        raise ShapeError("mlp_forward input",
                         f"(batch, {params.sizes[0]})", x.shape)
    act = ad.relu if params.activation == "relu" else ad.tanh
    n_layers = len(params.weights)
    if tape is None:
        h = x
        for i, (w, b) in enumerate(zip(params.weights, params.biases)):
            h = h @ w + b
            if i < n_layers - 1:
                h = np.maximum(h, 0.0) if params.activation == "relu" else np.tanh(h)
        return h
    h = tape.constant(x)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        wv = tape.leaf(w, f"{prefix}.w{i}")
        bv = tape.leaf(b, f"{prefix}.b{i}")
        h = h @ wv + bv
        if i < n_layers - 1:
            h = act(h)
    return h


@dataclass
class BasisArchitecture:
    """k basis functions, either one multi-head trunk or k parallel nets.

    Both modes evaluate to [batch, k, out_dim].
    """

    mode: str  # "multihead" | "parallel"
    k: int
    out_dim: int
    trunk: MlpParams | None = None
    nets: list[MlpParams] = field(default_factory=list)

    def parameter_count(self) -> int:
        if self.mode == "multihead":
            return self.trunk.parameter_count()
        return sum(n.parameter_count() for n in self.nets)

    def named_arrays(self, prefix: str = "basis") -> dict[str, np.ndarray]:
        if self.mode == "multihead":
            return self.trunk.named_arrays(prefix)
        out = {}
        for i, net in enumerate(self.nets):
            out.update(net.named_arrays(f"{prefix}{i}"))
        return out


def init_basis(mode: str, k: int, in_dim: int, out_dim: int, hidden,
               activation: str = "relu", seed: int = 0,
               head_seeds=None) -> BasisArchitecture:
    """Build a basis architecture.

    ``head_seeds`` (parallel mode only) overrides the per-net seeds; by
    default each net gets a distinct seed derived from ``seed``.
    """
    if mode not in ("multihead", "parallel"):
        raise FencError(f"unknown architecture mode {mode!r}")
    if k < 1:
        raise FencError(f"basis count must be >= 1, got {k}")
    hidden = tuple(int(h) for h in hidden)
    if mode == "multihead":
        trunk = init_params((in_dim, *hidden, k * out_dim), activation, seed)
        return BasisArchitecture("multihead", k, out_dim, trunk=trunk)
    if head_seeds is None:
        base = list(seed) if isinstance(seed, (list, tuple)) else [seed]
        head_seeds = [base + [i] for i in range(k)]
    nets = [init_params((in_dim, *hidden, out_dim), activation, hs)
            for hs in head_seeds]
    return BasisArchitecture("parallel", k, out_dim, nets=nets)


def evaluate_basis(arch: BasisArchitecture, x, tape: ad.Tape | None = None,
                   prefix: str = "basis"):
    """Evaluate all k basis functions: [batch, k, out_dim]."""
    x = np.asarray(x, dtype=np.float64)
    if arch.mode == "multihead":
        flat = mlp_forward(arch.trunk, x, tape, prefix)
        return flat.reshape(x.shape[0], arch.k, arch.out_dim)
    parts = [mlp_forward(net, x, tape, f"{prefix}{i}")
             for i, net in enumerate(arch.nets)]
    if tape is None:
        return np.stack(parts, axis=1)
    return ad.stack_heads(parts)


@dataclass
class AdamState:
    """Adaptive-moment optimizer state keyed by parameter name."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """One Adam update. Parameters without a gradient get a zero gradient.

    Returns the updated parameter dict; moment buffers and the step count
    are updated in place.
    """
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    out = {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name}", p.shape, g.shape)
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1**t)
        v_hat = state.v[name] / (1.0 - b2**t)
        out[name] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return out
