"""Flat ``key=value`` experiment config files."""

from io import StringIO
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Set, Union

from dotenv import dotenv_values
from dotenv.parser import Binding, parse_stream
from pydantic import ValidationError

from app.models.architecture import BackboneConfig, TransformerConfig
from app.models.training import AdaptConfig, ExperimentConfig, LossConfig
from app.utils.exceptions import ConfigError

# Nested AdaptConfig blocks whose fields may be written flat in the file.
_NESTED_BLOCKS = {
    "loss": LossConfig,
    "backbone": BackboneConfig,
    "transformer": TransformerConfig,
}
_LIST_FIELDS = {"conv_channels"}


def _experiment_keys() -> set:
    return set(ExperimentConfig.model_fields) - {"adapt"}


def _adapt_keys() -> set:
    return set(AdaptConfig.model_fields) - set(_NESTED_BLOCKS)


def known_keys() -> set:
    keys = _experiment_keys() | _adapt_keys()
    for block in _NESTED_BLOCKS.values():
        keys |= set(block.model_fields)
    return keys


def _line_of(binding: Binding) -> int:
    # the parser's mark starts before any blank lines preceding the binding
    text = binding.original.string
    return binding.original.line + text[: len(text) - len(text.lstrip())].count("\n")


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Read ``key=value`` lines with python-dotenv; reject unknown, duplicate and malformed keys."""
    seen: Set[str] = set()
    for binding in parse_stream(StringIO(text)):
        if binding.key is None and not binding.error:
            continue
        where = f"{source}:{_line_of(binding)}"
        if binding.error or binding.value is None:
            raise ConfigError(f"{where}: expected key=value, got {binding.original.string.strip()!r}")
        if binding.key not in known_keys():
            raise ConfigError(f"{where}: unknown config key '{binding.key}'")
        if binding.key in seen:
            raise ConfigError(f"{where}: duplicate config key '{binding.key}'")
        seen.add(binding.key)
    values = dotenv_values(stream=StringIO(text), interpolate=False)
    return {key: value for key, value in values.items() if value is not None}


def build_experiment_config(
    values: Mapping[str, Any],
    base: Optional[ExperimentConfig] = None,
) -> ExperimentConfig:
    """Fold flat values into an ExperimentConfig; pydantic does the coercion."""
    unknown = set(values) - known_keys()
    if unknown:
        raise ConfigError(f"Unknown config keys: {sorted(unknown)}")

    data = (base or ExperimentConfig()).model_dump()
    adapt = data["adapt"]
    for key, value in values.items():
        if key in _LIST_FIELDS and isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        if key in _experiment_keys():
            data[key] = value
        elif key in _adapt_keys():
            adapt[key] = value
        else:
            for block, model in _NESTED_BLOCKS.items():
                if key in model.model_fields:
                    adapt[block][key] = value
                    break
    if adapt["transformer"].get("mlp_hidden") and "embed_dim" in values and "mlp_hidden" not in values:
        # mlp_hidden tracks 4*d_bar unless set explicitly
        adapt["transformer"]["mlp_hidden"] = None
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc


def load_experiment_config(path: Union[str, Path], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return build_experiment_config(parse_config_text(path.read_text(encoding="utf-8"), str(path)), base)
