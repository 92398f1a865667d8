"""INI experiment configuration with strict keys and line-numbered errors.

Every section is optional and falls back to the defaults below. Values are
plain text, and a ``;`` after whitespace starts a comment. Lists are comma
separated; a grid may also be written as ``start:stop:num`` (inclusive
linspace).
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput

SECTIONS = ("gaussian", "nonparam", "train", "output")

DEFAULTS = {
    "gaussian": {
        "mu_star": "0.0",
        "sigma2": "1.0",
        "m": "150",
        "mu_pre": "0.1",
        "axis": "beta",
        "grid": "0:1:101",
        "mc_trials": "0",
        "seed": "0",
    },
    "nonparam": {
        "support": "0, 1",
        "energy": "linear",
        "slope": "0.7",
        "intercept": "0.9",
        "energy_x": "",
        "energy_values": "",
        "lambdas": "1",
        "divergences": "KL, JS",
        "quad_nodes": "1024",
        "grid_points": "201",
        "tol": "1e-10",
    },
    "train": {
        "family": "ring8",
        "full_size": "2000",
        "limited_m": "64",
        "latent_dim": "2",
        "g_hidden": "64, 64",
        "d_hidden": "64, 64",
        "g_lr": "0.001",
        "d_lr": "0.001",
        "beta1": "0.5",
        "beta2": "0.999",
        "batch_size": "64",
        "lambda": "0",
        "steps": "2000",
        "energy_kind": "data_mse",
        "n_mc": "1",
        "entropy_sign": "1",
        "extractor_path": "",
        "seeds": "0",
        "eval_every": "500",
        "n_eval": "1000",
    },
    "output": {
        "dir": "out",
        "plot": "false",
    },
}


class ConfigError(InvalidInput):
    """A malformed or inconsistent configuration file."""

    def __init__(self, message, path=None, lineno=None):
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^([^\s=:#;][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    index = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), no)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            index.setdefault((section, m.group(1).strip().lower()), no)
    return index


@dataclass
class ExperimentConfig:
    """Raw string values per section plus where each came from."""

    values: dict = field(default_factory=lambda: {s: dict(v) for s, v in DEFAULTS.items()})
    path: str | None = None
    lines: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, path: str | None = None) -> "ExperimentConfig":
        cp = configparser.ConfigParser(
            interpolation=None, default_section="\0defaults", inline_comment_prefixes=(";",)
        )
        try:
            cp.read_string(text, source=str(path or "<config>"))
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError("key outside of any [section]", path, exc.lineno) from exc
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"duplicate section [{exc.section}]", path, exc.lineno) from exc
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", path, exc.lineno) from exc
        except configparser.ParsingError as exc:
            lineno = exc.errors[0][0] if exc.errors else None
            raise ConfigError("unparseable line", path, lineno) from exc

        cfg = cls(path=None if path is None else str(path), lines=_line_index(text))
        for section in cp.sections():
            name = section.strip().lower()
            if name not in DEFAULTS:
                raise ConfigError(
                    f"unknown section [{section}]; expected one of {', '.join(SECTIONS)}",
                    cfg.path, cfg.lines.get((name, None)),
                )
            for key, value in cp.items(section):
                if key not in DEFAULTS[name]:
                    raise ConfigError(
                        f"unknown key {key!r} in [{name}]", cfg.path, cfg.lines.get((name, key))
                    )
                cfg.values[name][key] = value.strip()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", p) from exc
        return cls.from_text(text, p)

    def set(self, section: str, key: str, value) -> None:
        self.values[section][key] = str(value)

    def error(self, section: str, key: str | None, message: str) -> ConfigError:
        lineno = self.lines.get((section, key)) or self.lines.get((section, None))
        label = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(f"{label}: {message}", self.path, lineno)

    def raw(self, section: str, key: str) -> str:
        return self.values[section][key]

    def _convert(self, section, key, conv, what):
        text = self.raw(section, key)
        try:
            return conv(text)
        except (ValueError, TypeError) as exc:
            raise self.error(section, key, f"expected {what}, got {text!r}") from exc

    def get_float(self, section, key) -> float:
        return self._convert(section, key, float, "a real number")

    def get_int(self, section, key) -> int:
        return self._convert(section, key, _to_int, "an integer")

    def get_bool(self, section, key) -> bool:
        return self._convert(section, key, _to_bool, "true or false")

    def get_str(self, section, key) -> str:
        return self.raw(section, key)

    def get_floats(self, section, key) -> list:
        return self._convert(section, key, _to_grid, "a comma separated list or start:stop:num")

    def get_ints(self, section, key) -> list:
        return self._convert(section, key, lambda s: [_to_int(t) for t in _split(s)], "integers")

    def get_strs(self, section, key) -> list:
        return _split(self.raw(section, key))

    def write(self, path, sections=SECTIONS) -> None:
        """Write the fully resolved configuration (every key, defaults filled in)."""
        lines = []
        for s in sections:
            lines.append(f"[{s}]")
            lines.extend(f"{k} = {v}" for k, v in self.values[s].items())
            lines.append("")
        Path(path).write_text("\n".join(lines))


def _split(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def _to_int(text: str) -> int:
    v = float(text)
    if not math.isfinite(v) or v != int(v):
        raise ValueError(text)
    return int(v)


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _to_grid(text: str) -> list:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(text)
        start, stop, num = float(parts[0]), float(parts[1]), _to_int(parts[2])
        if num < 1:
            raise ValueError(text)
        return [float(v) for v in np.linspace(start, stop, num)]
    vals = [float(t) for t in _split(text)]
    if not vals:
        raise ValueError(text)
    return vals
