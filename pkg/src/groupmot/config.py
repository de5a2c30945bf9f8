"""Run configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Every key maps to one field of
:class:`RunConfig`; unknown keys are rejected. Any key can be overridden by an
environment variable named ``GROUPMOT_<KEY>`` (upper case), e.g.
``GROUPMOT_TAU_HIGH=0.7``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from typing import Mapping

from groupmot.association import AssocConfig
from groupmot.errors import ConfigError, ParseError
from groupmot.vackf import NoiseConfig

ENV_PREFIX = "GROUPMOT_"

_ASSOC_KEYS = {f.name: f for f in dataclasses.fields(AssocConfig)}
_NOISE_KEYS = {f.name: f for f in dataclasses.fields(NoiseConfig)}


@dataclass
class RunConfig:
    assoc: AssocConfig = field(default_factory=AssocConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    use_vackf: bool = True
    use_gmcs: bool = True
    use_stmp: bool = True
    stmp_checkpoint: str = ""
    image_width: float = 1920.0
    image_height: float = 1080.0
    frame_rate: float = 30.0

    def to_items(self) -> dict[str, object]:
        items: dict[str, object] = {}
        items.update(dataclasses.asdict(self.assoc))
        items.update(dataclasses.asdict(self.noise))
        for f in dataclasses.fields(self):
            if f.name not in ("assoc", "noise"):
                items[f.name] = getattr(self, f.name)
        return dict(sorted(items.items()))

    def dumps(self) -> str:
        lines = []
        for k, v in self.to_items().items():
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


_TOP_KEYS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name not in ("assoc", "noise")}


def _convert(key: str, raw: str, typ) -> object:
    typ = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    raw = raw.strip()
    try:
        if typ == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ}") from None


def parse_items(text: str, source: str = "<config>") -> dict[str, str]:
    items = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", source, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", source, lineno)
        items[key.lower()] = value
    return items


def build(items: Mapping[str, str], env: Mapping[str, str] | None = None) -> RunConfig:
    """Validate raw string items (plus env overrides) into a RunConfig."""
    merged = dict(items)
    env = os.environ if env is None else env
    for k, v in env.items():
        if k.startswith(ENV_PREFIX):
            merged[k[len(ENV_PREFIX):].lower()] = v
    assoc, noise, top = {}, {}, {}
    for key, raw in merged.items():
        if key in _ASSOC_KEYS:
            assoc[key] = _convert(key, raw, _ASSOC_KEYS[key].type)
        elif key in _NOISE_KEYS:
            noise[key] = _convert(key, raw, _NOISE_KEYS[key].type)
        elif key in _TOP_KEYS:
            top[key] = _convert(key, raw, _TOP_KEYS[key].type)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return RunConfig(AssocConfig(**assoc), NoiseConfig(**noise), **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load(path, env: Mapping[str, str] | None = None) -> RunConfig:
    with open(path) as fh:
        text = fh.read()
    return build(parse_items(text, str(path)), env)
