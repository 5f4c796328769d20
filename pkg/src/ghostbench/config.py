"""Run configuration: a line-oriented ``key = value`` format with sections.

A file has a ``[run]`` section (``command``, ``seed``, ``output_dir``) and
one section named after the command holding its parameters::

    [run]
    command = sweep
    seed = 42

    [sweep]
    preset = snr_vs_J_fixed_t0
    seeds = 2

Keys are typed per command.  Unknown sections or keys, type mismatches and
missing required keys raise :class:`ConfigError` carrying the line number.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

__all__ = [
    "ConfigError",
    "RunConfig",
    "COMMANDS",
    "SCHEMAS",
    "parse_config",
    "serialize_config",
    "apply_overrides",
    "coerce",
]

COMMANDS = ("masks", "simulate", "reconstruct", "psf", "sweep", "zhang")
INT64 = (-(2 ** 63), 2 ** 63 - 1)


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based or None."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class Field:
    kind: str  # int, float, str, bool, ints, floats, strs
    default: Any = None
    choices: Optional[tuple] = None


MASK_FAMILIES = ("random_binary", "random_gray", "hadamard", "ura", "pinhole")
NOISE_KINDS = ("none", "poisson", "gaussian", "both")

_MASKS = {
    "family": Field("str", "random_binary", MASK_FAMILIES),
    "n": Field("int", 32),
    "J": Field("int", None),
    "mu_A": Field("float", 0.5),
    "sigma_A": Field("float", None),
    "sigma_g_px": Field("float", 0.0),
}
_OBJECT = {
    "object": Field("str", "uniform", ("uniform", "text", "stencil")),
    "mu_T": Field("float", 0.5),
    "sigma_T": Field("float", 1.0 / math.sqrt(12.0)),
    "flux_B": Field("float", 4.1e5),
    "t0_s": Field("float", 0.01),
    "pitch_mm": Field("float", None),
    "noise": Field("str", "none", NOISE_KINDS),
    "sigma_p": Field("float", 1.0),
    "sigma_m": Field("float", 0.0),
}

SCHEMAS: dict[str, dict[str, Field]] = {
    "masks": {**_MASKS, "export": Field("int", 4)},
    "simulate": {**_MASKS, **_OBJECT},
    "reconstruct": {
        **_MASKS, **_OBJECT,
        "method": Field("str", "xc", ("xc", "landweber", "pinv")),
        "alpha": Field("float", 1.0),
        "iters": Field("int", 100),
        "buckets": Field("str", None),
    },
    "psf": dict(_MASKS),
    "sweep": {
        "preset": Field("str", None),
        "name": Field("str", None),
        "vary": Field("str", None),
        "values": Field("floats", None),
        "families": Field("strs", None),
        "noises": Field("strs", None),
        "recons": Field("strs", None),
        "seeds": Field("int", None),
        "budget": Field("str", None, ("constant_t0", "constant_tau", "noise_free")),
        "J": Field("int", None),
        "n": Field("int", None),
        "mu_A": Field("float", None),
        "sigma_A": Field("float", None),
        "mu_T": Field("float", None),
        "sigma_T": Field("float", None),
        "flux_B": Field("float", None),
        "t0_s": Field("float", None),
        "tau_s": Field("float", None),
        "sigma_p": Field("float", None),
        "sigma_m": Field("float", None),
        "sigma_g_px": Field("float", None),
        "ortho_cap": Field("float", None),
        "landweber_alpha": Field("float", None),
        "landweber_iters": Field("int", None),
    },
    "zhang": {
        "experiment": Field("str", "i", ("i", "ii", "iii")),
        "shutter": Field("bool", True),
        "J": Field("int", None),
        "n": Field("int", 250),
        "t0_s": Field("float", None),
        "mitigation": Field("str", "none", ("none", "crop_smear", "darkfield_subtract")),
        "rows": Field("ints", None),
        "dark_rows": Field("ints", None),
    },
}
RUN_KEYS = {
    "command": Field("str", None, COMMANDS),
    "seed": Field("int", 0),
    "output_dir": Field("str", "out"),
}
SWEEP_REQUIRED = ("preset", "vary", "values")


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run: command, typed parameters, seed and output directory."""

    command: str
    params: dict = field(default_factory=dict)
    root_seed: int = 0
    output_dir: str = "out"

    def as_dict(self) -> dict:
        return {"command": self.command, "seed": self.root_seed,
                "output_dir": self.output_dir, "params": dict(sorted(self.params.items()))}


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def coerce(f: Field, key: str, raw: str, line: Optional[int] = None):
    """Convert the text ``raw`` to the type of field ``f``."""
    raw = raw.strip()
    try:
        if f.kind == "int":
            if not re.fullmatch(r"[+-]?\d+", raw):
                raise ValueError
            v = int(raw)
            if not INT64[0] <= v <= INT64[1]:
                raise ConfigError(f"{key} = {raw} does not fit in 64 bits", line)
        elif f.kind == "float":
            v = float(raw)
        elif f.kind == "bool":
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError
            v = low in _TRUE
        elif f.kind == "ints":
            parts = [x.strip() for x in raw.split(",") if x.strip()]
            if not parts or not all(re.fullmatch(r"[+-]?\d+", x) for x in parts):
                raise ValueError
            v = tuple(int(x) for x in parts)
        elif f.kind == "floats":
            v = tuple(float(x) for x in raw.split(",") if x.strip())
            if not v:
                raise ValueError
        elif f.kind == "strs":
            v = tuple(x.strip() for x in raw.split(",") if x.strip())
            if not v:
                raise ValueError
        else:
            v = raw
    except ValueError:
        raise ConfigError(f"{key} expects {f.kind}, got {raw!r}", line) from None
    if f.choices is not None and v not in f.choices:
        raise ConfigError(f"{key} must be one of {', '.join(f.choices)}; got {raw!r}", line)
    return v


def _key_lines(text: str) -> dict:
    """Map (section, key) to the 1-based line where it is set."""
    out = {}
    section = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
            continue
        k = s.split("=", 1)[0].strip()
        out.setdefault((section, k), i)
    return out


def _resolve(command: str, given: dict, lines: dict, section_line: Optional[int]) -> dict:
    schema = SCHEMAS[command]
    params = {}
    for k, f in schema.items():
        if k in given:
            params[k] = given[k]
        elif f.default is not None:
            params[k] = f.default
    if command == "sweep" and "preset" not in params and not ("vary" in params and "values" in params):
        raise ConfigError("sweep needs either preset or both vary and values "
                          f"(required keys: {', '.join(SWEEP_REQUIRED)})", section_line)
    if command == "zhang":
        for k in ("rows", "dark_rows"):
            if k in params:
                a = params[k]
                if len(a) != 2 or not 0 <= a[0] < a[1]:
                    raise ConfigError(f"{k} must be two row indices 'start, stop'", lines.get((command, k)))
    return params


def parse_config(text: str) -> RunConfig:
    """Parse configuration text into a :class:`RunConfig` with defaults filled."""
    cp = configparser.ConfigParser(interpolation=None, default_section="\0none", strict=True,
                                   delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None, empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header before the first key", exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], getattr(exc, "lineno", None)) from None
    except configparser.ParsingError as exc:
        ln = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected 'key = value')", ln) from None
    lines = _key_lines(text)
    if "run" not in cp:
        raise ConfigError("missing [run] section with a command")
    for key in cp["run"]:
        if key not in RUN_KEYS:
            raise ConfigError(f"unknown key {key!r} in [run]", lines.get(("run", key)))
    run = {k: coerce(RUN_KEYS[k], k, v, lines.get(("run", k))) for k, v in cp["run"].items()}
    if "command" not in run:
        raise ConfigError("missing required key 'command' in [run]", lines.get(("run", None)))
    command = run["command"]
    for sec in cp.sections():
        if sec not in ("run", command):
            raise ConfigError(f"unexpected section [{sec}] for command {command!r}", lines.get((sec, None)))
    schema = SCHEMAS[command]
    given = {}
    if command in cp:
        for key, raw in cp[command].items():
            ln = lines.get((command, key))
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} for command {command!r}", ln)
            given[key] = coerce(schema[key], key, raw, ln)
    params = _resolve(command, given, lines, lines.get((command, None)))
    return RunConfig(command, params, run.get("seed", RUN_KEYS["seed"].default),
                     run.get("output_dir", RUN_KEYS["output_dir"].default))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    out = ["[run]", f"command = {cfg.command}", f"seed = {cfg.root_seed}",
           f"output_dir = {cfg.output_dir}", "", f"[{cfg.command}]"]
    for k in SCHEMAS[cfg.command]:
        if k in cfg.params:
            out.append(f"{k} = {_fmt(cfg.params[k])}")
    return "\n".join(out) + "\n"


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply ``{key: text}`` overrides (command-line flags) to a config."""
    schema = SCHEMAS[cfg.command]
    params = dict(cfg.params)
    seed, out = cfg.root_seed, cfg.output_dir
    given = {}
    for k, raw in overrides.items():
        if k == "seed":
            seed = coerce(RUN_KEYS["seed"], k, raw)
        elif k == "output_dir":
            out = raw
        elif k in schema:
            given[k] = coerce(schema[k], k, raw)
        else:
            raise ConfigError(f"unknown option --{k.replace('_', '-')} for command {cfg.command!r}")
    params.update(given)
    return RunConfig(cfg.command, _resolve(cfg.command, params, {}, None), seed, out)
