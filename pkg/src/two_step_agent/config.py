"""Run configuration: a TOML (or JSON) file validated against a bundled schema."""
import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from .decision import DecisionConfig
from .errors import ConfigError
from .experiments.sweep import SweepConfig
from .inference import AgentPrior, McmcConfig
from .scm import LinearGaussianScm

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def load_schema():
    text = resources.files("two_step_agent").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    scm: LinearGaussianScm = field(default_factory=LinearGaussianScm)
    prior: AgentPrior = field(default_factory=AgentPrior)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    seed: int = 0
    output_dir: str = "out"
    n_train: int = 1000
    model: Optional[str] = None
    jobs: int = 1


def _location(err):
    path = ".".join(str(p) for p in err.absolute_path)
    return path or "<top level>"


def validate(raw: dict):
    """Raise ConfigError naming the offending key on any schema violation."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"invalid config at {_location(err)}: {err.message}")


def from_dict(raw: dict) -> RunConfig:
    validate(raw)
    try:
        scm = LinearGaussianScm.from_dict(raw.get("scm", {}))
        prior = AgentPrior.from_dict(raw.get("prior", {}))
        decision = DecisionConfig(**raw.get("decision", {}))
        mcmc = McmcConfig(**raw.get("mcmc", {}))
        sw = dict(raw.get("sweep", {}))
        jobs = sw.pop("jobs", 1)
        n_train = raw.get("n_train", 1000)
        sweep = SweepConfig(scm=scm, base_prior=prior, decision=decision, mcmc=mcmc,
                            n_train=n_train, **sw)
    except ValueError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return RunConfig(scm=scm, prior=prior, decision=decision, mcmc=mcmc, sweep=sweep,
                     seed=raw.get("seed", 0), output_dir=raw.get("output_dir", "out"),
                     n_train=n_train, model=raw.get("model"), jobs=jobs)


def load_config(path) -> RunConfig:
    """Read a ``.toml`` or ``.json`` config file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(data)
        else:
            raw = tomllib.loads(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a table/object at top level")
    return from_dict(raw)
