"""Run configuration: sectioned key-value files and the name registries."""

from __future__ import annotations

import configparser
import hashlib
import inspect
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from covbalance.optim import OPTIMIZERS
from covbalance.problems import (
    ImageFitProblem,
    MixedNormRegression,
    MultiScaleComposite,
    StereoImageProblem,
    SyntheticStreams,
    read_pgm,
    shared_optimum_quadratic,
    synthetic_image,
)
from covbalance.weighting import (
    CovVariant,
    CovWeighting,
    EqualWeighting,
    GradNormWeighting,
    MGDAWeighting,
    StaticWeighting,
    UncertaintyWeighting,
)


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending ``section.key``."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


def _image(image=None, size=32, problem_seed=0):
    if image:
        return read_pgm(image)
    return synthetic_image(int(size), seed=int(problem_seed))


def _quadratic(n_losses=2, dim=4, rows=None, noise=0.0, scales=None, problem_seed=0):
    return shared_optimum_quadratic(int(n_losses), int(dim), rows, noise, scales, seed=int(problem_seed))


def _mixed_norm(n_samples=32, dim=4, noise=0.1, delta=1.0, problem_seed=0):
    return MixedNormRegression.random(int(n_samples), int(dim), noise, delta, seed=int(problem_seed))


def _image_fit(image=None, size=32, noise=0.05, problem_seed=0):
    return ImageFitProblem(_image(image, size, problem_seed), noise=noise)


def _stereo(image=None, size=32, noise=0.05, shift=1, problem_seed=0):
    return StereoImageProblem(_image(image, size, problem_seed), noise=noise, shift=shift)


def _multiscale(base="stereo", scales=4, heads="auto", **base_params):
    if base == "multiscale" or base not in PROBLEMS:
        raise ConfigError("problem.base", f"unknown base problem {base!r}")
    return MultiScaleComposite(build(PROBLEMS, "problem", base, base_params), scales=int(scales), heads=heads)


def _synthetic(levels=(1.0, 1.0), rates=0.0, noise=0.0, floor=0.1):
    return SyntheticStreams(levels, rates, noise, floor)


PROBLEMS = {
    "quadratic": _quadratic,
    "mixed_norm": _mixed_norm,
    "image_fit": _image_fit,
    "stereo": _stereo,
    "multiscale": _multiscale,
    "synthetic": _synthetic,
}

STRATEGIES = {
    "equal": EqualWeighting,
    "static": StaticWeighting,
    "cov": CovWeighting,
    "uncertainty": UncertaintyWeighting,
    "gradnorm": GradNormWeighting,
    "mgda": MGDAWeighting,
}

VARIANTS = [v.value for v in CovVariant]

#: Sweepable axes and the (section, key) each one sets.
AXES = {
    "decay": ("strategy", "decay"),
    "variant": ("strategy", "variant"),
    "temperature": ("strategy", "temperature"),
    "lr": ("optimizer", "lr"),
}


def _accepted_keys(factory):
    if isinstance(factory, type) and hasattr(factory, "_get_param_names"):
        return set(factory._get_param_names()), False
    params = inspect.signature(factory).parameters.values()
    var_kw = any(p.kind is p.VAR_KEYWORD for p in params)
    return {p.name for p in params if p.kind is not p.VAR_KEYWORD}, var_kw


def build(registry, section, name, params):
    """Instantiate ``registry[name](**params)``, mapping failures to :class:`ConfigError`."""
    if name not in registry:
        raise ConfigError(f"{section}.name", f"unknown {section} {name!r}; valid: {', '.join(registry)}")
    factory = registry[name]
    keys, open_ended = _accepted_keys(factory)
    for key in params:
        if key not in keys and not open_ended:
            raise ConfigError(f"{section}.{key}", f"not accepted by {section} {name!r}; valid: {', '.join(sorted(keys))}")
    try:
        obj = factory(**params)
        if hasattr(obj, "_check_params"):
            obj._check_params()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}", f"{name}: {exc}") from None
    return obj


def resolved_params(factory, params):
    """``params`` with every unspecified default filled in."""
    if hasattr(factory, "_get_param_names"):
        return factory(**params).get_params()
    out = {}
    for p in inspect.signature(factory).parameters.values():
        if p.default is not p.empty:
            out[p.name] = p.default
    out.update(params)
    return out


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one training run.

    ``problem``, ``strategy`` and ``optimizer`` are dicts with a ``name``
    entry plus keyword arguments for the registered factory.
    """

    problem: dict
    strategy: dict
    optimizer: dict = field(default_factory=lambda: {"name": "adam"})
    iterations: int = 1000
    seed: int = 0
    record_every: int = 1
    name: str = "experiment"

    def __post_init__(self):
        for section in ("problem", "strategy", "optimizer"):
            d = getattr(self, section)
            if not isinstance(d, dict) or "name" not in d:
                raise ConfigError(f"{section}.name", "missing")
        for key in ("iterations", "record_every"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"run.{key}", f"must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ConfigError("run.seed", f"must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("run.seed", "must fit in an unsigned 64-bit integer")

    @staticmethod
    def _split(d):
        d = dict(d)
        return d.pop("name"), d

    def build_problem(self):
        return build(PROBLEMS, "problem", *self._split(self.problem))

    def build_strategy(self):
        return build(STRATEGIES, "strategy", *self._split(self.strategy))

    def build_optimizer(self):
        return build(OPTIMIZERS, "optimizer", *self._split(self.optimizer))

    def validate(self):
        """Build every component once so bad keys fail before any step runs."""
        problem = self.build_problem()
        strategy = self.build_strategy()
        self.build_optimizer()
        if strategy.requires_gradients and not problem.has_gradients:
            raise ConfigError(
                "strategy.name",
                f"{self.strategy['name']!r} needs gradients but problem {self.problem['name']!r} has none",
            )
        return self

    def resolved(self) -> dict:
        """Flat ``section.key`` mapping including all defaults."""
        out = {"run.name": self.name, "run.iterations": self.iterations, "run.seed": self.seed,
               "run.record_every": self.record_every}
        for section, registry in (("problem", PROBLEMS), ("strategy", STRATEGIES), ("optimizer", OPTIMIZERS)):
            name, params = self._split(getattr(self, section))
            out[f"{section}.name"] = name
            factory = registry.get(name)
            full = resolved_params(factory, params) if factory is not None else params
            for key, value in sorted(full.items()):
                out[f"{section}.{key}"] = value
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_axis(self, axis, value) -> "RunConfig":
        if axis not in AXES:
            raise ConfigError("axis", f"unknown axis {axis!r}; valid: {', '.join(AXES)}")
        section, key = AXES[axis]
        updated = dict(getattr(self, section))
        updated[key] = value
        return replace(self, **{section: updated})

    def with_strategy(self, name, params=None) -> "RunConfig":
        return replace(self, strategy={"name": name, **(params or {})})

    def to_dict(self):
        return asdict(self)


def parse_value(text):
    """Coerce a config value: JSON literal, else float, else bare/quoted string."""
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


RUN_KEYS = {"name", "iterations", "seed", "record_every"}


def load_config(path):
    """Read a sectioned config file.

    Returns the base :class:`RunConfig` and per-strategy parameter
    overrides from optional ``[strategy.<name>]`` sections (used when
    comparing several strategies).
    """
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    sections = {s: {k: parse_value(v) for k, v in parser[s].items()} for s in parser.sections()}
    overrides = {}
    for s in list(sections):
        if s.startswith("strategy."):
            overrides[s.split(".", 1)[1]] = sections.pop(s)
    unknown = set(sections) - {"problem", "strategy", "optimizer", "run"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section; valid: problem, strategy, optimizer, run")
    for s in ("problem", "strategy"):
        if s not in sections:
            raise ConfigError(f"{s}.name", "section missing")
    run = sections.get("run", {})
    for key in run:
        if key not in RUN_KEYS:
            raise ConfigError(f"run.{key}", f"unknown key; valid: {', '.join(sorted(RUN_KEYS))}")
    for key in ("iterations", "seed", "record_every"):
        if key in run and isinstance(run[key], float) and run[key].is_integer():
            run[key] = int(run[key])
    run.setdefault("name", path.stem)
    config = RunConfig(
        problem=sections["problem"],
        strategy=sections["strategy"],
        optimizer=sections.get("optimizer", {"name": "adam"}),
        **run,
    )
    for name in overrides:
        if name not in STRATEGIES:
            raise ConfigError(f"strategy.{name}", f"unknown strategy; valid: {', '.join(STRATEGIES)}")
    return config, overrides
