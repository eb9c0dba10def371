"""
Configuration management for experiments.
Loads YAML experiment files, merges them over defaults and builds generators.
"""

import copy
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from .base_dynamics import HyperbolicToralMap, RateData, TorusPoint, constant_rates, toral_rates
from .errors import ConfigError, InvalidParameter
from .linear_cocycle import (
    CocycleGenerator,
    HolderData,
    closed_form_generator,
    constant_generator,
    load_grid_generator,
)
from .model_zoo import TrigPolynomial

logger = logging.getLogger(__name__)

GENERATOR_SPEC_KINDS = ("constant", "closed_form", "grid_sampled", "family")
CONJUGACY_SPEC_KINDS = ("identity", "closed_form", "family")
OUTPUT_FORMATS = ("json", "csv")
RATE_NAMES = ("nu", "nu_hat", "gamma", "gamma_hat", "mu", "mu_hat")


@dataclass
class BaseConfig:
    matrix: List[List[int]] = field(default_factory=lambda: [[2, 1], [1, 1]])
    gamma_exponent: float = 0.4


@dataclass
class GeneratorConfig:
    kind: str = "constant"
    matrix: Optional[List[List[float]]] = None
    # closed_form: a matrix of entries, each a number or a list of [k1, k2, a, b] terms
    entries: Optional[List[List[Any]]] = None
    grid_file: Optional[str] = None
    family: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass
class ConjugacyConfig:
    kind: str = "identity"
    entries: Optional[List[List[Any]]] = None
    base_point: List[float] = field(default_factory=lambda: [0.0, 0.0])
    base_value: Optional[List[List[float]]] = None
    gauge: Optional[List[float]] = None
    envelope_exponent: float = 0.25
    envelope_grid: int = 32


@dataclass
class RatesConfig:
    nu: Optional[float] = None
    nu_hat: Optional[float] = None
    gamma: Optional[float] = None
    gamma_hat: Optional[float] = None
    mu: Optional[float] = None
    mu_hat: Optional[float] = None


@dataclass
class RunConfig:
    seed: int = 0
    tol: float = 1e-10
    n_max: int = 200
    threads: int = 1
    beta: float = 1.0
    safety: float = 0.99
    grid_n: int = 16
    weak_n_max: int = 12
    n_legs: int = 20
    n_check: int = 5
    t_min: float = 1e-3
    t_max: float = 0.5
    leg_length: float = 0.3
    n_cycles: int = 20
    max_leg: float = 2.0
    x0: List[float] = field(default_factory=lambda: [0.0, 0.0])
    n_pairs: int = 200
    d_min: float = 1e-5
    d_max: float = 1e-1
    n_quadruples: int = 200
    delta: float = 1e-2
    leaf_radius: float = 0.5
    n_targets: int = 10
    k_max: int = 40
    premise_tol: float = 1e-8
    cycle_tol: float = 1e-6
    theta: Optional[float] = None
    eps: Optional[float] = None


@dataclass
class OutputConfig:
    dir: str = "reports"
    format: str = "json"
    tables: bool = True


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    base: BaseConfig = field(default_factory=BaseConfig)
    cocycle: GeneratorConfig = field(default_factory=GeneratorConfig)
    target: Optional[GeneratorConfig] = None
    conjugacy: ConjugacyConfig = field(default_factory=ConjugacyConfig)
    rates: RatesConfig = field(default_factory=RatesConfig)
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    # directory the config was read from; relative grid files resolve against it
    source_dir: Optional[str] = field(default=None, compare=False)


_SECTIONS = {
    "base": BaseConfig,
    "cocycle": GeneratorConfig,
    "target": GeneratorConfig,
    "conjugacy": ConjugacyConfig,
    "rates": RatesConfig,
    "run": RunConfig,
    "output": OutputConfig,
}


def create_default_config() -> Dict[str, Any]:
    """
    Create the default configuration as a plain dict.

    Returns:
        dict: Default configuration, identity cocycle over the cat map
    """
    defaults = config_to_dict(ExperimentConfig())
    defaults["cocycle"]["matrix"] = [[1.0, 0.0], [0.0, 1.0]]
    return defaults


def merge_config(defaults: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge a user document over defaults key by key.

    Nested sections merge recursively; any other value in ``overrides``
    replaces the default, including lists.
    """
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != "params":
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _section(cls, data: Any, name: str):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ConfigError(f"section '{name}' must be a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section '{name}': {', '.join(unknown)}")
    return cls(**data)


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a (merged) dict.

    Raises:
        ConfigError: on unknown sections or keys
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration document must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS) - {"name"})
    if unknown:
        raise ConfigError(f"unknown configuration sections: {', '.join(unknown)}")
    kwargs: Dict[str, Any] = {"name": str(data.get("name", "experiment"))}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _section(cls, data[name], name)
    return ExperimentConfig(**kwargs)


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    data = asdict(config)
    data.pop("source_dir", None)
    return data


def config_digest(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form of the configuration."""
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load an experiment file merged over the defaults.

    Args:
        path: YAML file

    Returns:
        ExperimentConfig: parsed configuration

    Raises:
        ConfigError: if the file cannot be read or parsed
    """
    path = Path(path)
    try:
        with open(path) as f:
            document = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {path} is not valid YAML: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    config = config_from_dict(merge_config(create_default_config(), document))
    config.source_dir = str(path.resolve().parent)
    logger.debug("loaded config %s (%s)", path, config.name)
    return config


def save_config(config: ExperimentConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(config), f, default_flow_style=None, sort_keys=False)
    return path


def apply_overrides(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    tol: Optional[float] = None,
    threads: Optional[int] = None,
    out_dir: Optional[str] = None,
    fmt: Optional[str] = None,
) -> ExperimentConfig:
    """Copy of the config with command-line overrides applied."""
    run = config.run
    if seed is not None:
        run = replace(run, seed=seed)
    if tol is not None:
        run = replace(run, tol=tol)
    if threads is not None:
        run = replace(run, threads=threads)
    output = config.output
    if out_dir is not None:
        output = replace(output, dir=out_dir)
    if fmt is not None:
        output = replace(output, format=fmt)
    updated = replace(config, run=run, output=output)
    updated.source_dir = config.source_dir
    return updated


def entry_polynomial(entry: Any) -> TrigPolynomial:
    """A closed-form entry: a number or a list of [k1, k2, a, b] terms."""
    try:
        return TrigPolynomial.from_entry(entry)
    except (TypeError, ValueError) as e:
        raise InvalidParameter(f"malformed closed-form entry {entry!r}: {e}") from e


def entries_function(entries: List[List[Any]]):
    """Matrix field x -> [[p_ij(x)]] from a matrix of closed-form entries."""
    polys = [[entry_polynomial(e) for e in row] for row in entries]

    def matrix(x: TorusPoint) -> np.ndarray:
        return np.array([[p(x) for p in row] for row in polys])

    lipschitz = max(p.lipschitz for row in polys for p in row)
    return matrix, lipschitz


def build_generator(spec: GeneratorConfig, source_dir: Optional[str] = None) -> CocycleGenerator:
    """
    Generator for the constant, closed_form and grid_sampled spec kinds.

    Family specs are built by ``model_zoo.build_family``.
    """
    if spec.kind == "constant":
        return constant_generator(spec.matrix)
    if spec.kind == "closed_form":
        matrix, lipschitz = entries_function(spec.entries or [])
        return closed_form_generator(matrix, len(spec.entries or []), HolderData(1.0, lipschitz))
    if spec.kind == "grid_sampled":
        path = Path(spec.grid_file or "")
        if not path.is_absolute() and source_dir:
            path = Path(source_dir) / path
        return load_grid_generator(path)
    raise ConfigError(f"generator kind {spec.kind!r} is not built from a matrix spec")


def build_rates(rates: RatesConfig, f: HyperbolicToralMap, gamma_exponent: float) -> RateData:
    """Toral rates of f with any configured constants overriding them."""
    toral = toral_rates(f, gamma_exponent)
    origin = TorusPoint(0.0, 0.0)
    values = {name: getattr(toral, name)(origin) for name in RATE_NAMES}
    for name in RATE_NAMES:
        override = getattr(rates, name)
        if override is not None:
            values[name] = float(override)
    return constant_rates(**values)
