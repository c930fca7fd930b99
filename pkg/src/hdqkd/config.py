"""Config files: INI sections with preset inheritance.

A config file is standard INI; values are parsed as Python literals where
possible.  The [meta] section may carry `extends = <preset name>`; file
values then override the resolved preset section by section.
"""

from __future__ import annotations

import ast
import configparser

from .detector import DetectorParams, GateConfig
from .errors import InvalidParameterError
from .franson import FransonConfig
from .presets import deep_merge, resolve_preset
from .sifting import FrameConfig
from .source import LossBudget, SourceParams
from .timetags import TdcConfig


def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip()


def load_config(path) -> dict:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    file_cfg = {section: {k: _parse_value(v) for k, v in parser[section].items()}
                for section in parser.sections()}
    parent = file_cfg.get("meta", {}).get("extends")
    if parent:
        cfg = deep_merge(resolve_preset(parent), file_cfg)
    else:
        cfg = file_cfg
    return cfg


def set_config_value(cfg: dict, dotted_path: str, value) -> None:
    """Set `section.key` in a nested config dict; path must already exist."""
    try:
        section, key = dotted_path.split(".", 1)
    except ValueError:
        raise InvalidParameterError(f"bad config path {dotted_path!r}") from None
    if section not in cfg or key not in cfg[section]:
        raise InvalidParameterError(f"config path {dotted_path!r} does not exist")
    cfg[section][key] = value


def build_source(cfg: dict) -> SourceParams:
    return SourceParams(**cfg["source"])


def build_loss(cfg: dict, side: str) -> LossBudget:
    return LossBudget(**cfg[f"loss_{side}"])


def build_gate(cfg: dict, side: str) -> GateConfig:
    return GateConfig(**cfg[f"gate_{side}"])


def build_detector(cfg: dict, side: str) -> DetectorParams:
    return DetectorParams(**cfg[f"detector_{side}"])


def build_tdc(cfg: dict) -> TdcConfig:
    return TdcConfig(**cfg["tdc"])


def build_frames(cfg: dict) -> FrameConfig:
    return FrameConfig(**cfg["frames"])


def build_franson(cfg: dict, alpha: float | None = None) -> FransonConfig:
    params = dict(cfg["franson"])
    if alpha is not None:
        params["alpha"] = alpha
    params.setdefault("alpha", 0.031)
    return FransonConfig(**params)
