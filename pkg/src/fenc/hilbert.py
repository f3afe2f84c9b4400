"""Inner products, norms, and the simplex/logit algebra.

Two spaces are supported. The Euclidean space treats sampled outputs as
vectors in R^d and approximates the integral inner product by the sample
mean of pointwise dot products (domain volume taken as 1, so the estimate
is a per-sample mean; under non-uniform sampling this is the corresponding
weighted inner product, by design). The logit space treats each output row
as a D-class logit vector, i.e. R^D modulo constant shifts; its inner
product centers each row by its mean first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FencError, ShapeError

EUCLIDEAN_KIND = "euclidean"
LOGIT_KIND = "logit"


def as_rows(vals) -> np.ndarray:
    """Coerce sampled values to [m, d] float64; 1-d input becomes a column."""
    vals = np.asarray(vals, dtype=np.float64)
    if vals.ndim == 1:
        return vals[:, None]
    return vals


@dataclass(frozen=True)
class HilbertSpace:
    kind: str = EUCLIDEAN_KIND
    classes: int | None = None  # D, logit space only

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN_KIND, LOGIT_KIND):
            raise FencError(f"unknown space kind {self.kind!r}")
        if self.kind == LOGIT_KIND and (self.classes is None or self.classes < 2):
            raise FencError("logit space needs classes >= 2")


EUCLIDEAN = HilbertSpace(EUCLIDEAN_KIND)


def logit_space(classes: int) -> HilbertSpace:
    return HilbertSpace(LOGIT_KIND, classes)


@dataclass(frozen=True)
class FunctionDataset:
    """Sampled evaluations {(x_i, y_i)} of one function, with its space."""

    inputs: np.ndarray   # [m, in_dim]
    outputs: np.ndarray  # [m, out_dim]
    space: HilbertSpace = EUCLIDEAN

    def __post_init__(self):
        inputs = as_rows(self.inputs)
        outputs = as_rows(self.outputs)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        if inputs.shape[0] != outputs.shape[0] or inputs.shape[0] < 1:
            raise ShapeError("dataset rows",
                             f"({inputs.shape[0]}, *) in both arrays",
                             (inputs.shape, outputs.shape))
        if not (np.isfinite(inputs).all() and np.isfinite(outputs).all()):
            raise FencError("dataset contains non-finite values")
        if self.space.kind == LOGIT_KIND and outputs.shape[1] != self.space.classes:
            raise ShapeError("logit outputs",
                             f"(m, {self.space.classes})", outputs.shape)

    @property
    def m(self) -> int:
        return self.inputs.shape[0]


def centered(vals: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Map sampled values to coordinates where the inner product is a dot.

    Identity for the Euclidean space; subtracts the per-row mean along the
    last axis for logit space (quotient by constant shifts).
    """
    vals = np.asarray(vals, dtype=np.float64)
    if space.kind == LOGIT_KIND:
        return vals - vals.mean(axis=-1, keepdims=True)
    return vals


def mc_inner_product(f_vals, g_vals, space: HilbertSpace = EUCLIDEAN) -> float:
    """Monte-Carlo estimate (1/m) sum_i <f(x_i), g(x_i)> over shared samples."""
    f_vals = as_rows(f_vals)
    g_vals = as_rows(g_vals)
    if f_vals.shape != g_vals.shape:
        raise ShapeError("mc_inner_product", f_vals.shape, g_vals.shape)
    if f_vals.shape[0] < 1:
        raise FencError("mc_inner_product needs at least one sample")
    cf = centered(f_vals, space)
    cg = centered(g_vals, space)
    return float(np.mean(np.sum(cf * cg, axis=1)))


def norm(f_vals, space: HilbertSpace = EUCLIDEAN) -> float:
    """Induced norm sqrt(<f, f>)."""
    return float(np.sqrt(max(mc_inner_product(f_vals, f_vals, space), 0.0)))


def logit_inner_product(x, y) -> float:
    """<x, y> between two logit vectors: dot product after mean-centering."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError("logit_inner_product", x.shape, y.shape)
    return float(np.dot(x - x.mean(), y - y.mean()))


def _check_simplex(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 2:
        raise FencError(f"simplex point must be a 1-d vector of D >= 2, got {p.shape}")
    if np.any(p <= 0.0):
        raise FencError("simplex point entries must be strictly positive")
    if abs(p.sum() - 1.0) > 1e-8:
        raise FencError(f"simplex point must sum to 1, got {p.sum()!r}")
    return p / p.sum()


def probability_to_logit(p) -> np.ndarray:
    """Componentwise log, returned in canonical (mean-zero) form."""
    p = _check_simplex(p)
    z = np.log(p)
    return z - z.mean()


def logit_to_probability(z) -> np.ndarray:
    """Softmax; invariant under constant shifts of the logits."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or not np.isfinite(z).all():
        raise FencError("logits must be a finite 1-d vector")
    e = np.exp(z - z.max())
    return e / e.sum()


def simplex_add(x, y) -> np.ndarray:
    """Perturbation: normalized entrywise product (simplex vector addition)."""
    x = _check_simplex(x)
    y = _check_simplex(y)
    if x.shape != y.shape:
        raise ShapeError("simplex_add", x.shape, y.shape)
    prod = x * y
    return prod / prod.sum()


def simplex_scale(alpha: float, x) -> np.ndarray:
    """Powering: normalized entrywise power (simplex scalar multiplication)."""
    x = _check_simplex(x)
    powered = x ** float(alpha)
    return powered / powered.sum()


def label_to_logits(class_index: int, num_classes: int,
                    positive_logit: float = 2.0,
                    negative_logit: float = -2.0) -> np.ndarray:
    """Logit vector for one observed class label.

    The positive/negative levels control how confident the encoded
    distribution looks; the defaults (+2, -2) give roughly 98% mass on the
    observed class for D=2.
    """
    if not 0 <= class_index < num_classes:
        raise FencError(
            f"class index {class_index} out of range for {num_classes} classes")
    if not positive_logit > negative_logit:
        raise FencError("positive logit must exceed negative logit")
    z = np.full(num_classes, float(negative_logit))
    z[class_index] = float(positive_logit)
    return z
