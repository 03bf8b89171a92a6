"""
Run Configuration
Defaults, .env / environment, INI config file and command-line overrides, in that order of precedence
"""

import configparser
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from dotenv import load_dotenv

from network.gcn import ModelConfig
from network.graph import ConnectivityConfig
from tools.filters import PreprocessConfig
from tools.spectral import WelchParams

load_dotenv()

OUTPUT_DIR_ENV = "EEG_GCN_OUTPUT_DIR"
CACHE_DIR_ENV = "EEG_GCN_CACHE_DIR"
EXPERIMENTS = ("single", "sweep", "connectivity", "channels", "synthetic")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    manifest_path: Optional[Path] = None
    output_dir: Path = Path("results")
    cache_dir: Path = Path(".graph_cache")
    montage_path: Optional[Path] = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "single"
    window_seconds: float = 50.0
    omit_channel: Optional[str] = None
    seed: int = 0
    n_folds: int = 5
    jobs: int = 1
    subjects_per_class: int = 8
    duration: float = 600.0
    accuracy_gate: float = 0.90


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    connectivity: ConnectivityConfig = field(default_factory=ConnectivityConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    @property
    def welch(self) -> WelchParams:
        return self.connectivity.welch

    def to_dict(self) -> Dict:
        return json.loads(json.dumps(asdict(self), default=str))


# Model settings that make the synthetic gate converge in a few minutes
SYNTHETIC_MODEL = ModelConfig(batch_size=4, epochs=30, lr0=0.01)

# INI section -> dataclass holding its keys
_SECTIONS = {
    "data": DataConfig,
    "preprocess": PreprocessConfig,
    "connectivity": ConnectivityConfig,
    "welch": WelchParams,
    "model": ModelConfig,
    "experiment": ExperimentConfig,
}

_OPTIONAL_TYPES = {
    ("data", "manifest_path"): Path,
    ("data", "montage_path"): Path,
    ("preprocess", "notch_hz"): float,
    ("experiment", "omit_channel"): str,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(section: str, key: str, raw: str, default: Any) -> Any:
    text = raw.strip()
    try:
        if (section, key) in _OPTIONAL_TYPES:
            if text.lower() in ("", "none"):
                return None
            return _OPTIONAL_TYPES[(section, key)](text)
        if isinstance(default, bool):
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(f"expected a boolean, got '{raw}'")
        if isinstance(default, tuple):
            element = type(default[0]) if default else float
            return tuple(element(part) for part in text.split(",") if part.strip())
        if isinstance(default, Path):
            return Path(text)
        return type(default)(text)
    except ValueError as e:
        raise ConfigError(f"[{section}] {key}: {e}") from None


def _section_defaults(config: RunConfig, section: str) -> Any:
    if section == "welch":
        return config.connectivity.welch
    return getattr(config, section)


def _with_section(config: RunConfig, section: str, value: Any) -> RunConfig:
    if section == "welch":
        return replace(config, connectivity=replace(config.connectivity, welch=value))
    return replace(config, **{section: value})


def apply_environment(config: RunConfig) -> RunConfig:
    data = config.data
    if os.getenv(OUTPUT_DIR_ENV):
        data = replace(data, output_dir=Path(os.environ[OUTPUT_DIR_ENV]))
    if os.getenv(CACHE_DIR_ENV):
        data = replace(data, cache_dir=Path(os.environ[CACHE_DIR_ENV]))
    return replace(config, data=data)


def apply_ini(config: RunConfig, text: str, source: str = "<config>") -> RunConfig:
    """
    Apply INI text on top of a config

    Raises:
        ConfigError: unknown section or key, or a value of the wrong type
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse {source}: {e}") from None

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        current = _section_defaults(config, section)
        known = {f.name for f in fields(current) if f.name != "welch"}
        updates = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"{source}: unknown key '{key}' in [{section}]")
            updates[key] = _coerce(section, key, raw, getattr(current, key))
        config = _with_section(config, section, replace(current, **updates))
    return config


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Resolve defaults, then environment, then the config file (if given)
    """
    config = apply_environment(RunConfig())
    if path is None:
        return config
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from None
    return apply_ini(config, text, source=str(path))


def apply_overrides(config: RunConfig, manifest: Optional[Union[str, Path]] = None,
                    output_dir: Optional[Union[str, Path]] = None, cache_dir: Optional[Union[str, Path]] = None,
                    experiment: Optional[str] = None, window: Optional[float] = None,
                    omit_channel: Optional[str] = None, no_distance: bool = False,
                    seed: Optional[int] = None, jobs: Optional[int] = None,
                    subjects_per_class: Optional[int] = None, duration: Optional[float] = None) -> RunConfig:
    """Command-line flags; arguments left as None keep the resolved value"""
    data_updates = {
        name: Path(value)
        for name, value in (("manifest_path", manifest), ("output_dir", output_dir), ("cache_dir", cache_dir))
        if value is not None
    }
    experiment_updates = {
        name: value
        for name, value in (
            ("name", experiment),
            ("window_seconds", window),
            ("omit_channel", omit_channel),
            ("seed", seed),
            ("jobs", jobs),
            ("subjects_per_class", subjects_per_class),
            ("duration", duration),
        )
        if value is not None
    }
    config = replace(
        config,
        data=replace(config.data, **data_updates),
        experiment=replace(config.experiment, **experiment_updates),
    )
    if seed is not None:
        config = replace(config, model=replace(config.model, seed=seed))
    if no_distance:
        config = replace(config, connectivity=replace(config.connectivity, use_distance_term=False))
    return config


def graph_cache_key(config: RunConfig, window_seconds: float, omit_channel: Optional[str],
                    use_distance_term: bool) -> str:
    """sha256 over every setting that changes the graphs"""
    connectivity = asdict(config.connectivity)
    connectivity["use_distance_term"] = use_distance_term
    payload = {
        "preprocess": asdict(config.preprocess),
        "connectivity": connectivity,
        "window_seconds": float(window_seconds),
        "omit_channel": omit_channel,
        "montage_path": str(config.data.montage_path) if config.data.montage_path else None,
    }
    canonical = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
