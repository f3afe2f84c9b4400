"""Deterministic task generators: polynomial families for the three
transfer types, synthetic few-shot classification over Gaussian blob
classes, and linear-combination task construction.

Every sample carries a ground-truth descriptor (polynomial coefficients or
class id plus labels) so tests can recompute outputs independently.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import FencError
from .hilbert import EUCLIDEAN, FunctionDataset, label_to_logits, logit_space


@dataclass(frozen=True)
class PolynomialTaskSpec:
    degree: int = 2
    coefficient_low: float = -3.0
    coefficient_high: float = 3.0
    input_low: float = -1.0
    input_high: float = 1.0
    m_example: int = 100
    m_query: int = 1000
    noise_std: float = 0.0

    def __post_init__(self):
        if self.coefficient_low >= self.coefficient_high:
            raise FencError("coefficient range must have low < high")
        if self.input_low >= self.input_high:
            raise FencError("input range must have low < high")
        if self.m_example < 1 or self.m_query < 1:
            raise FencError("sample counts must be >= 1")
        if self.noise_std < 0:
            raise FencError("noise_std must be >= 0")


TYPE2_SPEC = PolynomialTaskSpec(coefficient_low=-20.0, coefficient_high=20.0)
TYPE3_SPEC = PolynomialTaskSpec(degree=3)


@dataclass
class TaskSample:
    example_set: FunctionDataset
    query_set: FunctionDataset
    descriptor: dict = field(default_factory=dict)


def poly_eval(coefficients, x) -> np.ndarray:
    """Evaluate a polynomial with ascending coefficients at column input x."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return npoly.polyval(x, np.asarray(coefficients, dtype=np.float64))[:, None]


def _poly_sample(coeffs, spec: PolynomialTaskSpec, rng) -> TaskSample:
    def make(m):
        x = rng.uniform(spec.input_low, spec.input_high, size=(m, 1))
        y = poly_eval(coeffs, x)
        if spec.noise_std > 0:
            y = y + rng.normal(0.0, spec.noise_std, size=y.shape)
        return FunctionDataset(x, y, EUCLIDEAN)

    return TaskSample(make(spec.m_example), make(spec.m_query),
                      {"kind": "polynomial",
                       "coefficients": np.asarray(coeffs, dtype=np.float64)})


def _draw_coeffs(rng, spec: PolynomialTaskSpec) -> np.ndarray:
    return rng.uniform(spec.coefficient_low, spec.coefficient_high,
                       size=spec.degree + 1)


def sample_type1_polynomial(seed: int,
                            spec: PolynomialTaskSpec | None = None) -> TaskSample:
    """A task from the training family (defaults: quadratics, coeffs in
    [-3, 3], inputs uniform on [-1, 1])."""
    spec = spec or PolynomialTaskSpec()
    rng = np.random.default_rng([seed, 11])
    return _poly_sample(_draw_coeffs(rng, spec), spec, rng)


def sample_type2_polynomial(seed: int,
                            spec: PolynomialTaskSpec | None = None,
                            hull_bound: float = 3.0) -> TaskSample:
    """Same family shape with a wider coefficient range; resampled until
    some |coefficient| exceeds the training-range bound, so the task sits
    outside the training hull."""
    spec = spec or TYPE2_SPEC
    rng = np.random.default_rng([seed, 12])
    coeffs = _draw_coeffs(rng, spec)
    while np.max(np.abs(coeffs)) <= hull_bound:
        coeffs = _draw_coeffs(rng, spec)
    return _poly_sample(coeffs, spec, rng)


def sample_type3_cubic(seed: int,
                       spec: PolynomialTaskSpec | None = None,
                       leading_floor: float = 0.5) -> TaskSample:
    """A cubic task; the leading coefficient is resampled to stay away from
    zero so the task genuinely leaves the quadratic span."""
    spec = spec or TYPE3_SPEC
    if spec.degree < 3:
        raise FencError("type-3 tasks need degree >= 3")
    rng = np.random.default_rng([seed, 13])
    coeffs = _draw_coeffs(rng, spec)
    while abs(coeffs[-1]) < leading_floor:
        coeffs = _draw_coeffs(rng, spec)
    return _poly_sample(coeffs, spec, rng)


def sample_linear_combination_task(base_tasks: list[TaskSample],
                                   weights, seed: int,
                                   spec: PolynomialTaskSpec | None = None) -> TaskSample:
    """Task whose predictor is sum_i w_i f_i, reconstructed from the base
    tasks' descriptors and evaluated at fresh inputs."""
    spec = spec or PolynomialTaskSpec()
    weights = np.asarray(weights, dtype=np.float64)
    if len(base_tasks) != weights.size:
        raise FencError("one weight per base task required")
    if not np.isfinite(weights).all():
        raise FencError("weights must be finite")
    coeff_list = []
    for i, task in enumerate(base_tasks):
        if task.descriptor.get("kind") != "polynomial":
            raise FencError(f"base task {i} has no polynomial descriptor")
        coeff_list.append(task.descriptor["coefficients"])
    width = max(c.size for c in coeff_list)
    combined = np.zeros(width)
    for w, c in zip(weights, coeff_list):
        combined[: c.size] += w * c
    rng = np.random.default_rng([seed, 14])
    return _poly_sample(combined, spec, rng)


# ---------------------------------------------------------------------------
# Synthetic few-shot classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationTaskSpec:
    feature_dim: int = 2
    n_classes: int = 100
    n_train_classes: int = 90
    domain_halfwidth: float = 5.0
    min_separation: float = 0.7
    spread: float = 0.2
    examples_per_polarity: int = 100
    queries_per_polarity: int = 100
    positive_logit: float = 2.0
    negative_logit: float = -2.0
    master_seed: int = 7_777

    def __post_init__(self):
        if not 0 < self.n_train_classes < self.n_classes:
            raise FencError("need a nonempty train/heldout class split")
        if self.examples_per_polarity < 1 or self.queries_per_polarity < 1:
            raise FencError("per-polarity counts must be >= 1")


@functools.lru_cache(maxsize=8)
def class_centers(spec: ClassificationTaskSpec) -> np.ndarray:
    """The fixed class pool: blob centers drawn once from the master seed,
    kept pairwise separated by greedy rejection."""
    rng = np.random.default_rng([spec.master_seed, 21])
    centers = np.empty((spec.n_classes, spec.feature_dim))
    count = 0
    attempts = 0
    while count < spec.n_classes:
        cand = rng.uniform(-spec.domain_halfwidth, spec.domain_halfwidth,
                           size=spec.feature_dim)
        attempts += 1
        if attempts > 100_000:
            raise FencError("could not place class centers; loosen separation")
        if count and np.min(np.linalg.norm(centers[:count] - cand, axis=1)) \
                < spec.min_separation:
            continue
        centers[count] = cand
        count += 1
    return centers


def sample_classification_task(seed: int, heldout: bool = False,
                               spec: ClassificationTaskSpec | None = None) -> TaskSample:
    """One binary few-shot task: positives from one class blob, negatives
    from other classes, labels encoded as logit vectors.

    Training tasks draw the class (and the negatives) from the first 90
    pool classes; heldout tasks use the remaining 10, with negatives from
    anywhere else in the pool.
    """
    spec = spec or ClassificationTaskSpec()
    centers = class_centers(spec)
    train_ids = np.arange(spec.n_train_classes)
    held_ids = np.arange(spec.n_train_classes, spec.n_classes)
    rng = np.random.default_rng([seed, 22, int(heldout)])
    pool = held_ids if heldout else train_ids
    cid = int(rng.choice(pool))
    negative_pool = (np.setdiff1d(np.arange(spec.n_classes), [cid]) if heldout
                     else np.setdiff1d(train_ids, [cid]))
    space = logit_space(2)
    pos_logits = label_to_logits(0, 2, spec.positive_logit, spec.negative_logit)
    neg_logits = label_to_logits(1, 2, spec.positive_logit, spec.negative_logit)

    def make(per_polarity):
        xs_pos = centers[cid] + spec.spread * rng.standard_normal(
            (per_polarity, spec.feature_dim))
        neg_ids = rng.choice(negative_pool, size=per_polarity)
        xs_neg = centers[neg_ids] + spec.spread * rng.standard_normal(
            (per_polarity, spec.feature_dim))
        xs = np.concatenate([xs_pos, xs_neg], axis=0)
        ys = np.concatenate([np.tile(pos_logits, (per_polarity, 1)),
                             np.tile(neg_logits, (per_polarity, 1))], axis=0)
        labels = np.concatenate([np.zeros(per_polarity, dtype=int),
                                 np.ones(per_polarity, dtype=int)])
        order = rng.permutation(xs.shape[0])
        return FunctionDataset(xs[order], ys[order], space), labels[order]

    example, example_labels = make(spec.examples_per_polarity)
    query, query_labels = make(spec.queries_per_polarity)
    return TaskSample(example, query, {
        "kind": "classification",
        "class_id": cid,
        "heldout": heldout,
        "example_labels": example_labels,
        "query_labels": query_labels,
    })


# ---------------------------------------------------------------------------
# Task dumps (CSV plus key=value sidecar descriptor)
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def dump_task_csv(path, dataset: FunctionDataset, descriptor: dict | None = None):
    """Write a dataset as CSV (columns x_0..x_{d-1}, y_0..y_{d'-1}, LF line
    endings) and, when a descriptor is given, a ``<path>.desc`` sidecar of
    key=value lines."""
    path = str(path)
    d_in = dataset.inputs.shape[1]
    d_out = dataset.outputs.shape[1]
    header = ",".join([f"x_{i}" for i in range(d_in)]
                      + [f"y_{i}" for i in range(d_out)])
    lines = [header]
    for xi, yi in zip(dataset.inputs, dataset.outputs):
        lines.append(",".join(_fmt(v) for v in (*xi, *yi)))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    if descriptor is not None:
        with open(path + ".desc", "w", newline="\n") as fh:
            for key, value in descriptor.items():
                if isinstance(value, np.ndarray):
                    value = " ".join(_fmt(v) for v in np.ravel(value))
                fh.write(f"{key}={value}\n")


def load_task_csv(path) -> FunctionDataset:
    """Read a task CSV written by dump_task_csv (Euclidean space)."""
    path = str(path)
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        d_in = sum(1 for c in cols if c.startswith("x_"))
        d_out = len(cols) - d_in
        if d_in < 1 or d_out < 1 or cols != (
                [f"x_{i}" for i in range(d_in)]
                + [f"y_{i}" for i in range(d_out)]):
            raise FencError(f"{path}: unrecognized task CSV header {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[1] != len(cols):
        raise FencError(f"{path}: row width does not match header")
    return FunctionDataset(data[:, :d_in], data[:, d_in:], EUCLIDEAN)


# ---------------------------------------------------------------------------
# Training samplers (used by the training loop; draw from a shared rng)
# ---------------------------------------------------------------------------

def polynomial_training_sampler(spec: PolynomialTaskSpec | None = None):
    """Sampler of flat training datasets (2 * m_example rows each) from the
    type-1 family. The training step splits each dataset in half itself."""
    spec = spec or PolynomialTaskSpec()
    m = 2 * spec.m_example

    def sampler(rng, n):
        out = []
        for _ in range(n):
            coeffs = rng.uniform(spec.coefficient_low, spec.coefficient_high,
                                 size=spec.degree + 1)
            x = rng.uniform(spec.input_low, spec.input_high, size=(m, 1))
            y = poly_eval(coeffs, x)
            if spec.noise_std > 0:
                y = y + rng.normal(0.0, spec.noise_std, size=y.shape)
            out.append(FunctionDataset(x, y, EUCLIDEAN))
        return out

    return sampler


def classification_training_sampler(spec: ClassificationTaskSpec | None = None):
    """Sampler of training-class classification datasets (one blob's
    positives plus negatives from other training classes)."""
    spec = spec or ClassificationTaskSpec()
    centers = class_centers(spec)
    train_ids = np.arange(spec.n_train_classes)
    space = logit_space(2)
    pos_logits = label_to_logits(0, 2, spec.positive_logit, spec.negative_logit)
    neg_logits = label_to_logits(1, 2, spec.positive_logit, spec.negative_logit)
    per_polarity = spec.examples_per_polarity

    def sampler(rng, n):
        out = []
        for _ in range(n):
            cid = int(rng.choice(train_ids))
            negative_pool = np.setdiff1d(train_ids, [cid])
            xs_pos = centers[cid] + spec.spread * rng.standard_normal(
                (2 * per_polarity, spec.feature_dim))
            neg_ids = rng.choice(negative_pool, size=2 * per_polarity)
            xs_neg = centers[neg_ids] + spec.spread * rng.standard_normal(
                (2 * per_polarity, spec.feature_dim))
            xs = np.concatenate([xs_pos, xs_neg], axis=0)
            ys = np.concatenate([np.tile(pos_logits, (2 * per_polarity, 1)),
                                 np.tile(neg_logits, (2 * per_polarity, 1))],
                                axis=0)
            order = rng.permutation(xs.shape[0])
            out.append(FunctionDataset(xs[order], ys[order], space))
        return out

    return sampler
