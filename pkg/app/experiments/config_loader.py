"""
Load experiment descriptions from TOML files into `ExperimentConfig`.

Layout::

    [experiment]   kind, name, seed, trials, epsilon, epsilons, measure,
                   error_points, gram_points, quadrature_order, grid_size
    [domain]       kind, dimension, half_width, radius, ... (DomainSpec fields)
    [basis]        kind, half_width
    [index_set]    kind
    [schedule]     mode, values, rules = [{kind = "linear", constant = 5}]
    [target]       id, multi_index, bound
    [bounds]       delta, gamma, truncation_bound
    [output]       dir
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.core.schemas import ExperimentConfig
from app.core.utils import config_hash, logger

_SECTIONS = {"experiment", "domain", "basis", "index_set", "schedule", "target", "bounds", "output"}


def config_from_mapping(document: Dict[str, Any]) -> ExperimentConfig:
    """Validate a parsed TOML document."""
    unknown = set(document) - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    if "experiment" not in document or "kind" not in document["experiment"]:
        raise ConfigError("config needs [experiment] with a kind")

    experiment = dict(document["experiment"])
    data: Dict[str, Any] = {"experiment": experiment.pop("kind")}
    data.update(experiment)
    for section in ("domain", "basis", "schedule", "target", "bounds"):
        if section in document:
            data[section] = document[section]
    if "index_set" in document:
        data["index_set"] = document["index_set"].get("kind")
    if "output" in document and "dir" in document["output"]:
        data["output_dir"] = document["output"]["dir"]

    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config: {e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Parse and validate a TOML experiment file."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            document = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    config = config_from_mapping(document)
    logger.debug(f"Loaded {config.experiment.value} config from {path}")
    return config


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, trials: Optional[int] = None,
                    out: Optional[str] = None) -> ExperimentConfig:
    """CLI flags take precedence over file values."""
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if trials is not None:
        updates["trials"] = trials
    if out is not None:
        updates["output_dir"] = str(out)
    if not updates:
        return config
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **updates})
    except ValidationError as e:
        raise ConfigError(f"invalid override: {e}") from e


def config_payload(config: ExperimentConfig) -> Dict[str, Any]:
    """Config echo written into result headers; the output location is excluded."""
    return config.model_dump(mode="json", exclude={"output_dir"})


def config_digest(config: ExperimentConfig) -> str:
    return config_hash(config_payload(config))
