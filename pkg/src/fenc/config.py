"""Run configuration: flat key=value files with [section] headers.

Flags given on the command line override file values. Unknown sections or
keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .encoder import EncoderConfig
from .errors import ConfigError
from .hilbert import EUCLIDEAN, logit_space
from .tasks import ClassificationTaskSpec, PolynomialTaskSpec

_ENCODER_KEYS = {
    "k": int,
    "method": str,
    "ridge": float,
    "use_residuals": bool,
    "arch": str,
    "hidden": "ints",
    "activation": str,
    "steps": int,
    "task_batch": int,
    "learning_rate": float,
    "example_fraction": float,
}

_TASK_KEYS = {
    "family": str,  # "quadratic" | "classification"
    "degree": int,
    "coefficient_low": float,
    "coefficient_high": float,
    "type2_low": float,
    "type2_high": float,
    "input_low": float,
    "input_high": float,
    "m_example": int,
    "m_query": int,
    "noise_std": float,
    "feature_dim": int,
    "n_classes": int,
    "n_train_classes": int,
    "spread": float,
    "examples_per_polarity": int,
    "queries_per_polarity": int,
    "positive_logit": float,
    "negative_logit": float,
}

_EVAL_KEYS = {
    "cadence": int,
    "tasks_per_type": int,
    "eval_tasks": int,
}

_RUN_KEYS = {
    "seed": int,
    "out": str,
}

_SECTIONS = {
    "encoder": _ENCODER_KEYS,
    "tasks": _TASK_KEYS,
    "eval": _EVAL_KEYS,
    "run": _RUN_KEYS,
}


@dataclass
class RunConfig:
    """Everything one command needs: encoder hyperparameters, task family
    settings, evaluation cadence/counts, seed, and output directory."""

    raw: dict[str, dict[str, object]] = field(default_factory=dict)
    seed: int = 0
    out: str = "out"
    reproducible: bool = False

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})

    @property
    def family(self) -> str:
        return self.section("tasks").get("family", "quadratic")

    @property
    def eval_cadence(self) -> int:
        return self.section("eval").get("cadence", 100)

    @property
    def tasks_per_type(self) -> int:
        return self.section("eval").get("tasks_per_type", 20)

    @property
    def eval_tasks(self) -> int:
        return self.section("eval").get("eval_tasks", 100)

    def polynomial_spec(self) -> PolynomialTaskSpec:
        t = self.section("tasks")
        return PolynomialTaskSpec(
            degree=t.get("degree", 2),
            coefficient_low=t.get("coefficient_low", -3.0),
            coefficient_high=t.get("coefficient_high", 3.0),
            input_low=t.get("input_low", -1.0),
            input_high=t.get("input_high", 1.0),
            m_example=t.get("m_example", 100),
            m_query=t.get("m_query", 1000),
            noise_std=t.get("noise_std", 0.0),
        )

    def type2_spec(self) -> PolynomialTaskSpec:
        t = self.section("tasks")
        base = self.polynomial_spec()
        return PolynomialTaskSpec(
            degree=base.degree,
            coefficient_low=t.get("type2_low", -20.0),
            coefficient_high=t.get("type2_high", 20.0),
            input_low=base.input_low,
            input_high=base.input_high,
            m_example=base.m_example,
            m_query=base.m_query,
            noise_std=base.noise_std,
        )

    def type3_spec(self) -> PolynomialTaskSpec:
        base = self.polynomial_spec()
        return PolynomialTaskSpec(
            degree=base.degree + 1,
            coefficient_low=base.coefficient_low,
            coefficient_high=base.coefficient_high,
            input_low=base.input_low,
            input_high=base.input_high,
            m_example=base.m_example,
            m_query=base.m_query,
            noise_std=base.noise_std,
        )

    def classification_spec(self) -> ClassificationTaskSpec:
        t = self.section("tasks")
        return ClassificationTaskSpec(
            feature_dim=t.get("feature_dim", 2),
            n_classes=t.get("n_classes", 100),
            n_train_classes=t.get("n_train_classes", 90),
            spread=t.get("spread", 0.2),
            examples_per_polarity=t.get("examples_per_polarity", 100),
            queries_per_polarity=t.get("queries_per_polarity", 100),
            positive_logit=t.get("positive_logit", 2.0),
            negative_logit=t.get("negative_logit", -2.0),
        )

    def encoder_config(self) -> EncoderConfig:
        e = self.section("encoder")
        if self.family == "classification":
            spec = self.classification_spec()
            space = logit_space(2)
            input_dim, output_dim = spec.feature_dim, 2
        else:
            space = EUCLIDEAN
            input_dim, output_dim = 1, 1
        return EncoderConfig(
            k=e.get("k", 11),
            method=e.get("method", "ls"),
            ridge=e.get("ridge", 1e-3),
            use_residuals=e.get("use_residuals", False),
            space=space,
            arch=e.get("arch", "multihead"),
            hidden=tuple(e.get("hidden", (64, 64))),
            input_dim=input_dim,
            output_dim=output_dim,
            activation=e.get("activation", "relu"),
            steps=e.get("steps", 3000),
            task_batch=e.get("task_batch", 10),
            learning_rate=e.get("learning_rate", 1e-3),
            example_fraction=e.get("example_fraction", 0.5),
            seed=self.seed,
        )

    def echo(self) -> dict:
        """Fully-resolved configuration for JSON reports."""
        out = {name: dict(self.raw.get(name, {})) for name in _SECTIONS}
        out["run"]["seed"] = self.seed
        out["run"]["out"] = self.out
        out["run"]["reproducible"] = self.reproducible
        return out


def _parse_value(section: str, key: str, raw: str):
    keys = _SECTIONS[section]
    if key not in keys:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    kind = keys[key]
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "ints":
            return tuple(int(part) for part in raw.replace(",", " ").split())
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(
            f"bad value for {key!r} in section [{section}]: {raw!r}") from exc


def parse_config_text(text: str) -> dict[str, dict[str, object]]:
    sections: dict[str, dict[str, object]] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, raw = line.partition("=")
        sections[current][key.strip()] = _parse_value(current, key.strip(),
                                                      raw.strip())
    return sections


def load_run_config(path=None, seed=None, out=None, reproducible=False,
                    overrides=None) -> RunConfig:
    """Assemble a RunConfig from an optional file plus flag overrides.

    ``overrides`` is a list of ``section.key=value`` strings.
    """
    raw: dict[str, dict[str, object]] = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        dotted, _, raw_value = item.partition("=")
        section, _, key = dotted.strip().partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section {section!r} in override {item!r}")
        raw.setdefault(section, {})[key] = _parse_value(section, key,
                                                        raw_value.strip())
    config = RunConfig(raw=raw, reproducible=reproducible)
    config.seed = seed if seed is not None else raw.get("run", {}).get("seed", 0)
    config.out = out if out is not None else raw.get("run", {}).get("out", "out")
    return config
