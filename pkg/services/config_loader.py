"""
Run configuration loading.

Precedence, lowest first: dataclass defaults, environment (a .env file in the
working directory is loaded first), JSON config file, command-line overrides.
Config files are flat JSON objects whose keys are StyleConfig fields plus the
run-level keys in RUN_KEYS; any other key is an error naming it.
"""

import json
import logging
import os
from typing import Any, Callable, Dict, Mapping, Optional

from dotenv import find_dotenv, load_dotenv

from models.backend_descriptor import BackendDescriptor
from models.enums import BackendKind, CompositeMode
from models.errors import ConfigurationError, InvalidInputError
from models.mask_provider import SyntheticShape
from models.style_config import EndpointConfig, RunSettings, StyleConfig

logger = logging.getLogger(__name__)

ENV_API_KEY = 'STYLIZE_LLM_API_KEY'
ENV_ENDPOINT = 'STYLIZE_LLM_ENDPOINT'
ENV_MODEL = 'STYLIZE_LLM_MODEL'

_TRUE = {'true', '1', 'yes', 'on'}
_FALSE = {'false', '0', 'no', 'off'}


def _to_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in _TRUE | _FALSE:
        return value.strip().lower() in _TRUE
    raise ValueError(f"expected a boolean, got {value!r}")


def _to_int(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError(f"expected an integer, got {value!r}")
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {value!r}")
        return int(value)
    return int(value)


def _to_float(value: Any) -> float:
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _optional(convert: Callable[[Any], Any]) -> Callable[[Any], Any]:
    def coerce(value: Any) -> Any:
        if value is None or (isinstance(value, str) and value.strip().lower() in ('', 'none', 'null')):
            return None
        return convert(value)
    return coerce


def _to_text(value: Any) -> str:
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _to_shape(value: Any) -> Optional[SyntheticShape]:
    if value is None:
        return None
    if isinstance(value, SyntheticShape):
        return value
    if isinstance(value, str):
        value = json.loads(value)
    if not isinstance(value, dict):
        raise ValueError(f"expected an object, got {value!r}")
    return SyntheticShape.from_dict(value)


STYLE_KEYS: Dict[str, Callable[[Any], Any]] = {
    'lambda_d': _to_float,
    'lambda_p': _to_float,
    'lambda_c': _to_float,
    'lambda_tv': _to_float,
    'lambda_m': _to_float,
    'threshold': _to_float,
    'patch_size': _to_int,
    'n_patches': _to_int,
    'augment_strength': _to_float,
    'reject_tau': _optional(_to_float),
    'source_text': _to_text,
    'iterations': _to_int,
    'lr': _to_float,
    'lr_decay_step': _optional(_to_int),
    'lr_decay_factor': _to_float,
    'seed': _to_int,
    'gate_patches': _to_bool,
    'weight_mask_by_threshold': _to_bool,
    'dir_on_composite': _to_bool,
    'mask_binarize': _to_bool,
    'text_templates': _to_bool,
}

RUN_KEYS: Dict[str, Callable[[Any], Any]] = {
    'backend': _to_text,
    'weights_path': _optional(_to_text),
    'backend_dim': _to_int,
    'backend_seed': _to_int,
    'backend_resolution': _to_int,
    'llm_endpoint': _optional(_to_text),
    'llm_model': _optional(_to_text),
    'llm_temperature': _to_float,
    'llm_max_tokens': _to_int,
    'llm_max_retries': _to_int,
    'llm_backoff': _to_float,
    'llm_timeout': _to_float,
    'mask_model_endpoint': _optional(_to_text),
    'mask_model_checkpoint': _optional(_to_text),
    'mask_synthetic': _to_shape,
    'composite': _to_text,
    'jobs': _to_int,
    'output_dir': _to_text,
    'image_size': _to_int,
    'log_every': _to_int,
}

ALL_KEYS = {**STYLE_KEYS, **RUN_KEYS}


def _check_keys(values: Mapping[str, Any], origin: str) -> None:
    unknown = sorted(set(values) - set(ALL_KEYS))
    if unknown:
        raise ConfigurationError(f"Unknown configuration key(s) in {origin}: {', '.join(unknown)}")


def _read_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold a JSON object")
    return data


def environment_values(environ: Mapping[str, str]) -> Dict[str, Any]:
    """Config values taken from STYLIZE_* environment variables."""
    values = {}
    if environ.get(ENV_ENDPOINT):
        values['llm_endpoint'] = environ[ENV_ENDPOINT]
    if environ.get(ENV_MODEL):
        values['llm_model'] = environ[ENV_MODEL]
    return values


def merge_values(
    environ: Mapping[str, str],
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """
    Flat key/value view after applying precedence.

    Raises:
        ConfigurationError: Unknown keys or an unreadable config file
    """
    merged = environment_values(environ)
    if path:
        data = _read_config_file(path)
        _check_keys(data, path)
        merged.update(data)
    if overrides:
        given = {key: value for key, value in overrides.items() if value is not None}
        _check_keys(given, "overrides")
        merged.update(given)
    return merged


def _coerce(values: Mapping[str, Any]) -> Dict[str, Any]:
    coerced = {}
    for key, value in values.items():
        try:
            coerced[key] = ALL_KEYS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"Invalid value for '{key}': {exc}") from exc
    return coerced


def build_settings(values: Mapping[str, Any], api_key: Optional[str] = None) -> RunSettings:
    """
    Turn flat, already-merged values into RunSettings.

    Raises:
        ConfigurationError: Bad values or inconsistent combinations
    """
    values = _coerce(values)
    try:
        style = StyleConfig(**{k: v for k, v in values.items() if k in STYLE_KEYS})

        backend = BackendDescriptor(
            kind=BackendKind(values.get('backend', BackendKind.MOCK.value)),
            dim=values.get('backend_dim', 512),
            weights_path=values.get('weights_path'),
            seed=values.get('backend_seed', 0),
            input_resolution=values.get('backend_resolution', 32),
        )

        endpoint = None
        if values.get('llm_endpoint'):
            if not values.get('llm_model'):
                raise ConfigurationError("llm_endpoint is set but llm_model is not")
            endpoint = EndpointConfig(
                base_url=values['llm_endpoint'],
                model=values['llm_model'],
                api_key=api_key,
                temperature=values.get('llm_temperature', 0.0),
                max_tokens=values.get('llm_max_tokens', 256),
                max_retries=values.get('llm_max_retries', 3),
                backoff=values.get('llm_backoff', 1.0),
                timeout=values.get('llm_timeout', 30.0),
            )

        return RunSettings(
            style=style,
            backend=backend,
            endpoint=endpoint,
            mask_model_endpoint=values.get('mask_model_endpoint'),
            mask_model_checkpoint=values.get('mask_model_checkpoint'),
            mask_synthetic=values.get('mask_synthetic'),
            composite=CompositeMode(values.get('composite', CompositeMode.OFF.value)),
            jobs=values.get('jobs', 1),
            output_dir=values.get('output_dir', 'output'),
            image_size=values.get('image_size', 512),
            log_every=values.get('log_every', 20),
        )
    except (InvalidInputError, ValueError) as exc:
        raise ConfigurationError(f"Invalid configuration: {exc}") from exc


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None
) -> RunSettings:
    """
    Load run settings.

    Args:
        path: Optional JSON config file
        overrides: Command-line values; None entries are ignored
        environ: Environment to read; defaults to os.environ after loading .env

    Returns:
        Validated RunSettings

    Raises:
        ConfigurationError: Unknown key (named in the message), bad value,
            or unreadable config file
    """
    if environ is None:
        load_dotenv(find_dotenv(usecwd=True), override=False)
        environ = os.environ

    values = merge_values(environ, path, overrides)
    settings = build_settings(values, api_key=environ.get(ENV_API_KEY) or None)
    logger.debug("Configuration keys set: %s", ', '.join(sorted(values)) or 'none')
    return settings
