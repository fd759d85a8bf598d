"""Flat key = value configuration files with a closed schema.

Files use INI-style section headers over ``key = value`` lines.  Every
section and key must appear in the schema below; anything else is a hard
error naming the file and the offending key, so a typo in a weight name
cannot silently fall back to a default.

The effective configuration (defaults merged with the file) can be dumped
back as text.  Defaulted values that are engineering choices rather than
published method constants carry a ``# substituted`` marker in that dump;
values the user set explicitly are never marked.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from typing import Callable

from .features import FeatureConfig
from .fusion import FusionConfig
from .gradients import RefineConfig
from .losses import LossWeights
from .planesweep import DepthHypotheses


class ConfigError(ValueError):
    """Unknown key, malformed value, or unreadable config file."""


def _parse_vec3(text: str) -> tuple[float, float, float]:
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise ValueError("expected exactly three numbers")
    x, y, z = (float(p) for p in parts)
    return (x, y, z)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class _Field:
    parse: Callable[[str], object]
    default: object
    published: bool = False  # True: default is a method constant, not a guess
    choices: tuple[str, ...] | None = None


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


_SCHEMA: dict[str, dict[str, _Field]] = {
    "scene": {
        "geometry": _Field(str, "plane", choices=("plane", "sphere")),
        "plane_normal": _Field(_parse_vec3, (0.0, 0.0, 1.0)),
        "plane_offset": _Field(float, 600.0),
        "sphere_center": _Field(_parse_vec3, (0.0, 0.0, 700.0)),
        "sphere_radius": _Field(float, 150.0),
        "texture": _Field(str, "noise", choices=("checker", "noise", "image")),
        "checker_period": _Field(float, 8.0),
        "noise_seed": _Field(int, 1),
        "noise_octaves": _Field(int, 4),
        "noise_cell": _Field(float, 12.0),
        "texture_image": _Field(str, ""),
        "texture_margin": _Field(float, 0.0),
        "width": _Field(int, 64),
        "height": _Field(int, 48),
        "views": _Field(int, 2),
        "baseline": _Field(float, 50.0),
        "focal": _Field(float, 96.0),
        "image_noise_sigma": _Field(float, 0.0),
    },
    "depth": {
        "d_min": _Field(float, 425.0, published=True),
        "d_max": _Field(float, 935.0, published=True),
        "count": _Field(int, 192, published=True),
        "temperature": _Field(float, 0.0005),
        "regularizer_radius": _Field(int, 1),
        "regularizer_passes": _Field(int, 1),
        "feature_channels": _Field(int, 8),
        "feature_window": _Field(int, 5),
        "feature_level": _Field(int, 0),
        "probability_window": _Field(int, 4),
    },
    "loss": {
        "gamma1": _Field(float, 1.0, published=True),
        "gamma2": _Field(float, 1.0, published=True),
        "lambda1": _Field(float, 0.8, published=True),
        "lambda2": _Field(float, 0.2, published=True),
        "lambda3": _Field(float, 0.067, published=True),
        "beta1": _Field(float, 0.2, published=True),
        "beta2": _Field(float, 0.8, published=True),
        "beta3": _Field(float, 0.4, published=True),
        "alpha1": _Field(float, 0.1, published=True),
        "alpha2": _Field(float, 0.5, published=True),
        "alpha3": _Field(float, 0.5, published=True),
    },
    "refine": {
        "step": _Field(float, 8.0),
        "max_iterations": _Field(int, 200),
        "tolerance": _Field(float, 1e-7),
        "nd_passes": _Field(int, 1),
    },
    "fusion": {
        "prob_threshold": _Field(float, 0.6, published=True),
        "pixel_threshold": _Field(float, 1.0),
        "rel_depth_threshold": _Field(float, 0.01),
        "min_consistent_views": _Field(int, 2),
    },
}

_SECTION_ORDER = tuple(_SCHEMA)


class Config:
    """Typed view over the schema with file-provided overrides."""

    def __init__(self, values: dict[tuple[str, str], object], provided: set[tuple[str, str]]):
        self._values = values
        self._provided = provided

    def __getitem__(self, key: tuple[str, str]) -> object:
        return self._values[key]

    def get(self, section: str, key: str):
        return self._values[(section, key)]

    def is_provided(self, section: str, key: str) -> bool:
        return (section, key) in self._provided

    # -- typed bundles ------------------------------------------------------

    def hypotheses(self) -> DepthHypotheses:
        return DepthHypotheses(
            d_min=self.get("depth", "d_min"),
            d_max=self.get("depth", "d_max"),
            count=self.get("depth", "count"),
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            gamma1=self.get("loss", "gamma1"),
            gamma2=self.get("loss", "gamma2"),
            lambda1=self.get("loss", "lambda1"),
            lambda2=self.get("loss", "lambda2"),
            lambda3=self.get("loss", "lambda3"),
            beta1=self.get("loss", "beta1"),
            beta2=self.get("loss", "beta2"),
            beta3=self.get("loss", "beta3"),
            alpha2=self.get("loss", "alpha2"),
            alpha3=self.get("loss", "alpha3"),
        )

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            channels=self.get("depth", "feature_channels"),
            window=self.get("depth", "feature_window"),
        )

    def fusion_config(self) -> FusionConfig:
        return FusionConfig(
            prob_threshold=self.get("fusion", "prob_threshold"),
            pixel_threshold=self.get("fusion", "pixel_threshold"),
            rel_depth_threshold=self.get("fusion", "rel_depth_threshold"),
            min_consistent_views=self.get("fusion", "min_consistent_views"),
        )

    def refine_config(self) -> RefineConfig:
        return RefineConfig(
            step=self.get("refine", "step"),
            max_iterations=self.get("refine", "max_iterations"),
            tolerance=self.get("refine", "tolerance"),
            d_min=self.get("depth", "d_min"),
            d_max=self.get("depth", "d_max"),
        )

    def set_value(self, section: str, key: str, value: object) -> None:
        """Override one value programmatically (counts as provided)."""
        if (section, key) not in self._values:
            raise ConfigError(f"unknown config key [{section}] {key}")
        self._values[(section, key)] = value
        self._provided.add((section, key))

    def dump_effective(self) -> str:
        """The full effective configuration as config-file text."""
        lines: list[str] = []
        for section in _SECTION_ORDER:
            lines.append(f"[{section}]")
            for key, field in _SCHEMA[section].items():
                line = f"{key} = {_fmt(self._values[(section, key)])}"
                defaulted = (section, key) not in self._provided
                if defaulted and not field.published:
                    line += "  # substituted"
                lines.append(line)
            lines.append("")
        return "\n".join(lines)


def default_config() -> Config:
    values = {
        (section, key): field.default
        for section, fields in _SCHEMA.items()
        for key, field in fields.items()
    }
    return Config(values, set())


def load_config(path: str | os.PathLike | None) -> Config:
    """Parse a config file against the schema; ``None`` gives pure defaults."""
    cfg = default_config()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#", ";"),
        inline_comment_prefixes=("#", ";"),
        strict=True,
        interpolation=None,
        default_section="__defaults_disabled__",
    )
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: malformed config file: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown config section [{section}]")
        for key, raw in parser.items(section):
            field = _SCHEMA[section].get(key)
            if field is None:
                raise ConfigError(f"{path}: unknown config key [{section}] {key}")
            try:
                value = field.parse(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}: bad value for [{section}] {key}: {exc}"
                ) from exc
            if field.choices is not None and value not in field.choices:
                raise ConfigError(
                    f"{path}: [{section}] {key} must be one of {field.choices}, "
                    f"got {value!r}"
                )
            cfg.set_value(section, key, value)
    return cfg
