"""Run configuration: validation, YAML files and logger setup"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Any, Mapping

import colorlog
import voluptuous as vol
import yaml

from .const import (
    CHAIN_ENCODERS,
    CONF_AFFINE_HIDDEN,
    CONF_BATCH_SIZE,
    CONF_CACHE_TOC,
    CONF_CHAIN_ENCODER,
    CONF_CHAIN_WEIGHTING,
    CONF_CURVATURE,
    CONF_ENCODER_DIM,
    CONF_EPOCHS,
    CONF_EPSILON,
    CONF_FILTER_DIM,
    CONF_FILTER_SPACE,
    CONF_GRAD_CLIP,
    CONF_HEADS,
    CONF_LAMBDA,
    CONF_LAYERS,
    CONF_LEARNING_RATE,
    CONF_LOGGER,
    CONF_LOSS,
    CONF_MAX_HOPS,
    CONF_NUMERICAL_AWARE,
    CONF_OUT,
    CONF_PATIENCE,
    CONF_PROJECTION,
    CONF_RELATIONAL_PATH,
    CONF_SAME_ATTRIBUTE_ONLY,
    CONF_SCORE_ORIENTATION,
    CONF_SEED,
    CONF_TEST_PATH,
    CONF_TOP_K,
    CONF_TRAIN_PATH,
    CONF_VALID_PATH,
    CONF_VALUE_ENCODING,
    CONF_WALKS,
    DEFAULT_AFFINE_HIDDEN,
    DEFAULT_BATCH_SIZE,
    DEFAULT_CURVATURE,
    DEFAULT_ENCODER_DIM,
    DEFAULT_EPOCHS,
    DEFAULT_EPSILON,
    DEFAULT_FILTER_DIM,
    DEFAULT_GRAD_CLIP,
    DEFAULT_HEADS,
    DEFAULT_LAMBDA,
    DEFAULT_LAYERS,
    DEFAULT_LEARNING_RATE,
    DEFAULT_LOSS,
    DEFAULT_MAX_HOPS,
    DEFAULT_PATIENCE,
    DEFAULT_PROJECTION,
    DEFAULT_SEED,
    DEFAULT_TOP_K,
    DEFAULT_WALKS,
    FILTER_SPACES,
    LOGGER,
    LOSSES,
    PROJECTIONS,
    SCORE_ORIENTATIONS,
    VALUE_ENCODINGS,
)
from .engine.exceptions import ConfigError
from .engine.model import TrainConfig

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"
LOG_LEVELS = ("debug", "info", "warning", "error", "critical")

POSITIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=1))
NON_NEGATIVE_INT = vol.All(vol.Coerce(int), vol.Range(min=0))
POSITIVE_FLOAT = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
NON_NEGATIVE_FLOAT = vol.All(vol.Coerce(float), vol.Range(min=0))
OPTIONAL_PATH = vol.Any(None, vol.Coerce(str))

LOGGER_SCHEMA = vol.Schema(
    {
        vol.Optional("default", default="info"): vol.All(vol.Lower, vol.In(LOG_LEVELS)),
        vol.Optional("logs", default={}): {str: vol.All(vol.Lower, vol.In(LOG_LEVELS))},
    }
)

BASE_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_EPOCHS, default=DEFAULT_EPOCHS): POSITIVE_INT,
        vol.Optional(CONF_LEARNING_RATE, default=DEFAULT_LEARNING_RATE): NON_NEGATIVE_FLOAT,
        vol.Optional(CONF_WALKS, default=DEFAULT_WALKS): POSITIVE_INT,
        vol.Optional(CONF_TOP_K, default=DEFAULT_TOP_K): POSITIVE_INT,
        vol.Optional(CONF_MAX_HOPS, default=DEFAULT_MAX_HOPS): POSITIVE_INT,
        vol.Optional(CONF_ENCODER_DIM, default=DEFAULT_ENCODER_DIM): POSITIVE_INT,
        vol.Optional(CONF_FILTER_DIM, default=DEFAULT_FILTER_DIM): POSITIVE_INT,
        vol.Optional(CONF_LAYERS, default=DEFAULT_LAYERS): POSITIVE_INT,
        vol.Optional(CONF_HEADS, default=DEFAULT_HEADS): POSITIVE_INT,
        vol.Optional(CONF_AFFINE_HIDDEN, default=DEFAULT_AFFINE_HIDDEN): POSITIVE_INT,
        vol.Optional(CONF_LAMBDA, default=DEFAULT_LAMBDA): vol.All(vol.Coerce(float), vol.Range(min=0, max=1)),
        vol.Optional(CONF_CURVATURE, default=DEFAULT_CURVATURE): POSITIVE_FLOAT,
        vol.Optional(CONF_PROJECTION, default=DEFAULT_PROJECTION): vol.In(PROJECTIONS),
        vol.Optional(CONF_LOSS, default=DEFAULT_LOSS): vol.In(LOSSES),
        vol.Optional(CONF_BATCH_SIZE, default=DEFAULT_BATCH_SIZE): POSITIVE_INT,
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): NON_NEGATIVE_INT,
        vol.Optional(CONF_EPSILON, default=DEFAULT_EPSILON): NON_NEGATIVE_FLOAT,
        vol.Optional(CONF_PATIENCE, default=DEFAULT_PATIENCE): NON_NEGATIVE_INT,
        vol.Optional(CONF_GRAD_CLIP, default=DEFAULT_GRAD_CLIP): NON_NEGATIVE_FLOAT,
        vol.Optional(CONF_CACHE_TOC, default=False): vol.Boolean(),
        vol.Optional(CONF_SCORE_ORIENTATION, default="smallest"): vol.In(SCORE_ORIENTATIONS),
        vol.Optional(CONF_FILTER_SPACE, default="hyperbolic"): vol.In(FILTER_SPACES),
        vol.Optional(CONF_CHAIN_ENCODER, default="transformer"): vol.In(CHAIN_ENCODERS),
        vol.Optional(CONF_VALUE_ENCODING, default="float64"): vol.In(VALUE_ENCODINGS),
        vol.Optional(CONF_NUMERICAL_AWARE, default=True): vol.Boolean(),
        vol.Optional(CONF_CHAIN_WEIGHTING, default=True): vol.Boolean(),
        vol.Optional(CONF_SAME_ATTRIBUTE_ONLY, default=False): vol.Boolean(),
        vol.Optional(CONF_RELATIONAL_PATH, default=None): OPTIONAL_PATH,
        vol.Optional(CONF_TRAIN_PATH, default=None): OPTIONAL_PATH,
        vol.Optional(CONF_VALID_PATH, default=None): OPTIONAL_PATH,
        vol.Optional(CONF_TEST_PATH, default=None): OPTIONAL_PATH,
        vol.Optional(CONF_OUT, default="runs"): vol.Coerce(str),
        vol.Optional(CONF_LOGGER, default={}): LOGGER_SCHEMA,
    }
)


def _top_k_within_walks(conf: dict[str, Any]) -> dict[str, Any]:
    if conf[CONF_TOP_K] > conf[CONF_WALKS]:
        raise vol.Invalid(f"{CONF_TOP_K} ({conf[CONF_TOP_K]}) cannot exceed {CONF_WALKS} ({conf[CONF_WALKS]})")
    if conf[CONF_ENCODER_DIM] % conf[CONF_HEADS]:
        raise vol.Invalid(f"{CONF_HEADS} must divide {CONF_ENCODER_DIM}")
    return conf


RUN_SCHEMA = vol.Schema(vol.All(BASE_SCHEMA, _top_k_within_walks))
RUN_KEYS = frozenset(str(key) for key in BASE_SCHEMA.schema)


def load_config(path: str | Path | None) -> dict[str, Any]:
    """Raw mapping of a YAML config file; an absent path gives an empty mapping."""
    if path is None:
        return {}
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML in {path}: {err}") from err
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return raw


def build_config(file_conf: Mapping[str, Any], overrides: Mapping[str, Any] | None = None) -> dict[str, Any]:
    """defaults < config file < flags; flags left as None do not override."""
    merged = dict(file_conf)
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return RUN_SCHEMA(merged)


def dump_config(conf: Mapping[str, Any], path: str | Path | None = None) -> str:
    """Sorted YAML text of a configuration, also written to path when given."""
    text = yaml.safe_dump(dict(conf), sort_keys=True, default_flow_style=False)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text


def train_config(conf: Mapping[str, Any]) -> TrainConfig:
    """Library hyperparameters of a validated run configuration."""
    return TrainConfig.from_mapping(conf)


_HANDLER: logging.Handler | None = None


def setup_logging(logger_conf: Mapping[str, Any] | None = None, verbose: bool = False) -> None:
    """Install the colored stderr handler and apply the ``logger:`` levels."""
    global _HANDLER
    logger_conf = LOGGER_SCHEMA(dict(logger_conf or {}))
    root = logging.getLogger()
    if _HANDLER is not None:
        root.removeHandler(_HANDLER)
    _HANDLER = colorlog.StreamHandler(sys.stderr)
    _HANDLER.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
    root.addHandler(_HANDLER)
    root.setLevel(logging.DEBUG if verbose else logger_conf["default"].upper())
    for name, level in logger_conf["logs"].items():
        logging.getLogger(name).setLevel(logging.DEBUG if verbose else level.upper())
    LOGGER.debug("Logging configured: %s", logger_conf)
