"""Function-encoder core: coefficient solvers, training, persistence.

A model is a set of k learned neural-network basis functions. A sampled
function is represented by the coefficient vector of its projection onto
the basis, computed either by inner products against each basis function
(exact only for an orthonormal basis) or by solving the ridge-stabilized
Gram normal equations (optimal projection onto the learned span).

Training follows the batched scheme: per task, fit coefficients on an
example half of the data, score the linear-combination reconstruction on
the query half, and descend the mean squared Hilbert-norm error plus a
regularizer pulling every basis norm toward 1. The least-squares solve is
treated as a constant during backpropagation (no gradient through the
Gram inverse); inner-product coefficients keep their gradient, which is
what drives the basis toward orthonormality under that method.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import autodiff as ad
from . import nets
from .errors import FencError, ModelFormatError, NumericalError, ShapeError
from .hilbert import (EUCLIDEAN, FunctionDataset, HilbertSpace, LOGIT_KIND,
                      centered, logit_space, norm)

MODEL_MAGIC = b"FENC"
MODEL_VERSION = 1


@dataclass
class EncoderConfig:
    k: int = 100
    method: str = "ls"            # "ls" | "ip"
    ridge: float = 1e-3           # relative to mean Gram diagonal
    use_residuals: bool = False
    space: HilbertSpace = EUCLIDEAN
    arch: str = "multihead"       # "multihead" | "parallel"
    hidden: tuple[int, ...] = (64, 64)
    input_dim: int = 1
    output_dim: int = 1
    activation: str = "relu"
    steps: int = 3000
    task_batch: int = 10
    learning_rate: float = 1e-3
    example_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.k < 1:
            raise FencError(f"k must be >= 1, got {self.k}")
        if self.method not in ("ls", "ip"):
            raise FencError(f"method must be 'ls' or 'ip', got {self.method!r}")
        if self.ridge < 0:
            raise FencError("ridge must be >= 0")
        if self.steps < 0:
            raise FencError("steps must be >= 0")
        if not 0.0 < self.example_fraction < 1.0:
            raise FencError("example_fraction must be in (0, 1)")


@dataclass
class FunctionEncoderModel:
    config: EncoderConfig
    basis: nets.BasisArchitecture
    average_function: nets.MlpParams | None = None
    metrics_log: list[dict] = field(default_factory=list)
    last_basis_norms: np.ndarray | None = None

    def parameter_count(self) -> int:
        n = self.basis.parameter_count()
        if self.average_function is not None:
            n += self.average_function.parameter_count()
        return n

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = self.basis.named_arrays("basis")
        if self.average_function is not None:
            out.update(self.average_function.named_arrays("avg"))
        return out


def new_model(config: EncoderConfig) -> FunctionEncoderModel:
    basis = nets.init_basis(config.arch, config.k, config.input_dim,
                            config.output_dim, config.hidden,
                            config.activation, seed=[config.seed, 0])
    avg = None
    if config.use_residuals:
        avg = nets.init_params(
            (config.input_dim, *config.hidden, config.output_dim),
            config.activation, seed=[config.seed, 1])
    return FunctionEncoderModel(config, basis, avg)


def basis_values(model: FunctionEncoderModel, x) -> np.ndarray:
    """Evaluate the frozen basis at x: [m, k, out_dim]."""
    return nets.evaluate_basis(model.basis, x)


# ---------------------------------------------------------------------------
# Coefficient solvers
# ---------------------------------------------------------------------------

def basis_gram(basis_vals, space: HilbertSpace = EUCLIDEAN) -> np.ndarray:
    """k x k matrix of pairwise basis inner products on shared samples."""
    basis_vals = np.asarray(basis_vals, dtype=np.float64)
    if basis_vals.ndim != 3 or basis_vals.shape[0] < 1:
        raise ShapeError("basis values", "(m, k, d) with m >= 1",
                         basis_vals.shape)
    c = centered(basis_vals, space)
    g = np.einsum("mid,mjd->ij", c, c) / basis_vals.shape[0]
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def _ip_vector(f_vals, basis_vals, space: HilbertSpace) -> np.ndarray:
    cf = centered(np.asarray(f_vals, dtype=np.float64), space)
    cb = centered(np.asarray(basis_vals, dtype=np.float64), space)
    if cf.shape[0] != cb.shape[0] or cf.shape[-1] != cb.shape[-1]:
        raise ShapeError("function vs basis values", cb.shape, cf.shape)
    return np.einsum("md,mkd->k", cf, cb) / cf.shape[0]


def coefficients_ip(dataset: FunctionDataset, basis_vals) -> np.ndarray:
    """Inner-product coefficients c_j = <f, g_j> (basis assumed orthonormal)."""
    return _ip_vector(dataset.outputs, basis_vals, dataset.space)


def _solve_gram(gram: np.ndarray, v: np.ndarray, lam: float) -> np.ndarray:
    """Cholesky solve of (G + lam I) c = v, one retry at 10*lam."""
    k = gram.shape[0]
    for factor in (1.0, 10.0):
        try:
            cf = cho_factor(gram + factor * lam * np.eye(k), lower=True)
            return cho_solve(cf, v)
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Gram matrix not positive definite after ridge {lam!r} and {10 * lam!r} "
        f"(cond ~ {np.linalg.cond(gram):.3e}); basis may be degenerate")


def coefficients_ls(dataset: FunctionDataset, basis_vals,
                    lam: float = 0.0) -> np.ndarray:
    """Least-squares coefficients c = (G + lam I)^-1 v.

    With lam = 0 this is the optimal projection of the sampled function
    onto the span of the basis under the space's Monte-Carlo inner product.
    """
    if lam < 0:
        raise FencError("ridge must be >= 0")
    gram = basis_gram(basis_vals, dataset.space)
    v = _ip_vector(dataset.outputs, basis_vals, dataset.space)
    return _solve_gram(gram, v, lam)


def _relative_ridge(gram: np.ndarray, ridge: float) -> float:
    scale = float(np.mean(np.diag(gram)))
    return ridge * (scale if scale > 0.0 else 1.0)


def _solve_values(f_vals, basis_vals, space, method, ridge) -> np.ndarray:
    if method == "ip":
        return _ip_vector(f_vals, basis_vals, space)
    gram = basis_gram(basis_vals, space)
    v = _ip_vector(f_vals, basis_vals, space)
    return _solve_gram(gram, v, _relative_ridge(gram, ridge))


def residual_coefficients(dataset: FunctionDataset,
                          model: FunctionEncoderModel,
                          method: str | None = None) -> np.ndarray:
    """Fit coefficients to the deviation of f from the average function."""
    if model.average_function is None:
        raise FencError("model has no average function")
    avg = nets.mlp_forward(model.average_function, dataset.inputs)
    basis_vals = basis_values(model, dataset.inputs)
    return _solve_values(dataset.outputs - avg, basis_vals, dataset.space,
                         method or model.config.method, model.config.ridge)


def solve_coefficients(model: FunctionEncoderModel,
                       dataset: FunctionDataset,
                       method: str | None = None) -> np.ndarray:
    """Coefficients for one sampled function.

    ``method`` overrides the model's configured solver (for side-by-side
    method comparisons on the same basis).
    """
    if model.config.use_residuals:
        return residual_coefficients(dataset, model, method)
    basis_vals = basis_values(model, dataset.inputs)
    return _solve_values(dataset.outputs, basis_vals, dataset.space,
                         method or model.config.method, model.config.ridge)


def predict(x, model: FunctionEncoderModel, coefficients) -> np.ndarray:
    """Linear combination of the basis at x (plus the average function,
    when the model uses residuals)."""
    c = np.asarray(coefficients, dtype=np.float64)
    if c.shape != (model.config.k,):
        raise ShapeError("coefficients", (model.config.k,), c.shape)
    vals = basis_values(model, x)
    out = np.einsum("mkd,k->md", vals, c)
    if model.config.use_residuals:
        out = out + nets.mlp_forward(model.average_function, x)
    return out


def approximation_error_sq(f_vals, basis_vals, coefficients,
                           space: HilbertSpace = EUCLIDEAN) -> float:
    """Squared H-norm of f - sum_j c_j g_j on the sample set."""
    c = np.asarray(coefficients, dtype=np.float64)
    res = np.asarray(f_vals, dtype=np.float64) - np.einsum(
        "mkd,k->md", np.asarray(basis_vals, dtype=np.float64), c)
    return norm(res, space) ** 2


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _sqnorm_var(res: ad.Var, space: HilbertSpace) -> ad.Var:
    if space.kind == LOGIT_KIND:
        res = res - ad.vmean(res, axis=1, keepdims=True)
    return ad.vmean(ad.vsum(ad.square(res), axis=1))


def _head_sqnorms_var(basis: ad.Var, space: HilbertSpace) -> ad.Var:
    if space.kind == LOGIT_KIND:
        basis = basis - ad.vmean(basis, axis=2, keepdims=True)
    return ad.vmean(ad.vsum(ad.square(basis), axis=2), axis=0)


def training_step(model: FunctionEncoderModel,
                  task_batch: list[FunctionDataset],
                  opt_state: nets.AdamState) -> tuple[float, float]:
    """One gradient step on a batch of task datasets.

    Returns (approximation loss, basis-norm regularizer loss). The basis
    norms estimated on the pooled batch inputs are stashed on the model as
    ``last_basis_norms``.
    """
    if not task_batch:
        raise FencError("training_step needs a non-empty task batch")
    config = model.config
    space = config.space
    residuals = config.use_residuals

    splits = []
    offset = 0
    for ds in task_batch:
        if ds.m < 2:
            raise FencError("training datasets need at least 2 samples to split")
        n_ex = min(max(int(round(ds.m * config.example_fraction)), 1), ds.m - 1)
        splits.append((offset, offset + n_ex, offset + ds.m))
        offset += ds.m
    x_all = np.concatenate([ds.inputs for ds in task_batch], axis=0)

    tape = ad.Tape()
    basis_all = nets.evaluate_basis(model.basis, x_all, tape=tape)
    avg_all = None
    if residuals:
        avg_all = nets.mlp_forward(model.average_function, x_all, tape=tape,
                                   prefix="avg")

    n = len(task_batch)
    loss_var = None
    avg_loss_var = None
    for ds, (a, b, c_end) in zip(task_batch, splits):
        y_ex = ds.outputs[: b - a]
        y_qr = ds.outputs[b - a:]
        if residuals:
            fit_target = y_ex - avg_all.value[a:b]
        else:
            fit_target = y_ex
        if config.method == "ip":
            # inner-product coefficients stay on the tape: the gradient
            # through them is what drives the basis toward orthonormality
            basis_ex = basis_all[a:b]
            if space.kind == LOGIT_KIND:
                basis_ex = basis_ex - ad.vmean(basis_ex, axis=2, keepdims=True)
            target = tape.constant(
                centered(fit_target, space)[:, None, :])
            c_var = ad.vmean(ad.vsum(basis_ex * target, axis=2), axis=0)
            c_bcast = c_var.reshape(1, -1, 1)
        else:
            coeffs = _solve_values(fit_target, basis_all.value[a:b], space,
                                   config.method, config.ridge)
            c_bcast = tape.constant(coeffs.reshape(1, -1, 1))
        pred_qr = ad.vsum(basis_all[b:c_end] * c_bcast, axis=1)
        if residuals:
            avg_qr = avg_all[b:c_end]
            task_avg_loss = _sqnorm_var(tape.constant(y_qr) - avg_qr, space)
            avg_loss_var = (task_avg_loss if avg_loss_var is None
                            else avg_loss_var + task_avg_loss)
            # basis sees the average function as fixed (detached) values
            res = tape.constant(y_qr - avg_qr.value) - pred_qr
        else:
            res = tape.constant(y_qr) - pred_qr
        task_loss = _sqnorm_var(res, space)
        loss_var = task_loss if loss_var is None else loss_var + task_loss

    loss_var = loss_var * (1.0 / n)
    norms_sq = _head_sqnorms_var(basis_all, space)
    reg_var = ad.vsum(ad.square(norms_sq - 1.0))
    total = loss_var + reg_var
    if residuals:
        total = total + avg_loss_var * (1.0 / n)

    grads = ad.backward(tape, total)
    params = model.named_arrays()
    updated = nets.adam_step(opt_state, params, grads)
    for name, arr in params.items():
        arr[...] = updated[name]

    model.last_basis_norms = np.sqrt(np.maximum(norms_sq.value, 0.0))
    return float(loss_var.value), float(reg_var.value)


def train(task_sampler, config: EncoderConfig,
          eval_hook=None) -> FunctionEncoderModel:
    """Run the training loop for config.steps freshly-sampled task batches.

    ``task_sampler(rng, n)`` must return a list of n FunctionDatasets.
    ``eval_hook(step, model)``, when given, is called after every step
    (step counting from 1); it must not mutate the model. Deterministic
    for a fixed config seed.
    """
    model = new_model(config)
    opt = nets.AdamState(learning_rate=config.learning_rate)
    rng = np.random.default_rng([config.seed, 2])
    for step in range(1, config.steps + 1):
        batch = task_sampler(rng, config.task_batch)
        loss, reg_loss = training_step(model, batch, opt)
        model.metrics_log.append({
            "step": step,
            "loss": loss,
            "reg_loss": reg_loss,
            "median_basis_norm": float(np.median(model.last_basis_norms)),
        })
        if eval_hook is not None:
            eval_hook(step, model)
    return model


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _config_to_dict(config: EncoderConfig) -> dict:
    d = asdict(config)
    d["space"] = {"kind": config.space.kind, "classes": config.space.classes}
    d["hidden"] = list(config.hidden)
    return d


def _config_from_dict(d: dict) -> EncoderConfig:
    d = dict(d)
    sp = d.pop("space")
    space = (logit_space(sp["classes"]) if sp["kind"] == LOGIT_KIND
             else EUCLIDEAN)
    d["hidden"] = tuple(d["hidden"])
    return EncoderConfig(space=space, **d)


def save_model(model: FunctionEncoderModel, path) -> None:
    """Write a model file: magic, version, config JSON, named float64
    arrays with shape headers, and a trailing CRC-32 of the payload."""
    payload = bytearray()
    payload += struct.pack("<I", MODEL_VERSION)
    config_json = json.dumps(_config_to_dict(model.config),
                             sort_keys=True).encode("utf-8")
    payload += struct.pack("<I", len(config_json))
    payload += config_json
    arrays = model.named_arrays()
    payload += struct.pack("<I", len(arrays))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        name_b = name.encode("utf-8")
        payload += struct.pack("<H", len(name_b))
        payload += name_b
        payload += struct.pack("<B", arr.ndim)
        payload += struct.pack(f"<{arr.ndim}q", *arr.shape)
        payload += arr.tobytes()
    crc = zlib.crc32(bytes(payload))
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<I", crc))


def load_model(path) -> FunctionEncoderModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MODEL_MAGIC) + 8 or not blob.startswith(MODEL_MAGIC):
        raise ModelFormatError(f"{path}: not a model file (bad magic)")
    payload, crc_bytes = blob[len(MODEL_MAGIC):-4], blob[-4:]
    if zlib.crc32(payload) != struct.unpack("<I", crc_bytes)[0]:
        raise ModelFormatError(f"{path}: checksum mismatch (corrupt file)")
    try:
        pos = 0
        version, = struct.unpack_from("<I", payload, pos)
        pos += 4
        if version > MODEL_VERSION:
            raise ModelFormatError(
                f"{path}: format version {version} is newer than supported "
                f"version {MODEL_VERSION}")
        cfg_len, = struct.unpack_from("<I", payload, pos)
        pos += 4
        config = _config_from_dict(json.loads(payload[pos:pos + cfg_len]))
        pos += cfg_len
        n_arrays, = struct.unpack_from("<I", payload, pos)
        pos += 4
        arrays = {}
        for _ in range(n_arrays):
            name_len, = struct.unpack_from("<H", payload, pos)
            pos += 2
            name = payload[pos:pos + name_len].decode("utf-8")
            pos += name_len
            ndim, = struct.unpack_from("<B", payload, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}q", payload, pos)
            pos += 8 * ndim
            count = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(payload, dtype="<f8", count=count,
                                offset=pos).reshape(shape).copy()
            pos += 8 * count
            arrays[name] = arr
        if pos != len(payload):
            raise ModelFormatError(f"{path}: trailing bytes in model file")
    except (struct.error, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from exc

    model = new_model(config)
    expected = model.named_arrays()
    if set(expected) != set(arrays):
        raise ModelFormatError(f"{path}: parameter names do not match config")
    for name, arr in expected.items():
        if arr.shape != arrays[name].shape:
            raise ModelFormatError(
                f"{path}: parameter {name} has shape {arrays[name].shape}, "
                f"expected {arr.shape}")
        arr[...] = arrays[name]
    return model
