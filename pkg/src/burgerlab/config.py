"""Flat key-value experiment configuration with strict validation.

A config file is a sequence of `key = value` lines; `#` starts a comment.
Every accepted key is listed in SCHEMA below, each with a type and default;
an unknown key aborts the run (strict mode).  One config describes one
experiment, so manifests stay diff-able.

Sparse fields are written as mode:coefficient pairs, e.g. `h = 1:1.0,3:-0.5`;
an empty string is the zero field.  Lists are comma separated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .spectral import SpectralField


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_pairs(text: str) -> tuple:
    """`1:1.0,2:-0.5` -> ((1, 1.0), (2, -0.5)); empty -> zero field."""
    text = text.strip()
    if not text:
        return ()
    pairs = []
    for item in text.split(","):
        if ":" not in item:
            raise ConfigError(f"expected mode:coeff, got {item!r}")
        mode, coeff = item.split(":", 1)
        try:
            pairs.append((int(mode), float(coeff)))
        except ValueError as exc:
            raise ConfigError(f"bad mode:coeff pair {item!r}") from exc
    return tuple(pairs)


def _parse_floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad float list {text!r}") from exc


def _parse_pair_groups(text: str) -> tuple:
    """Semicolon-separated pair lists, one per mixture atom."""
    text = text.strip()
    if not text:
        return ()
    return tuple(_parse_pairs(group) for group in text.split(";"))


_PARSERS = {
    "int": int,
    "float": float,
    "bool": _parse_bool,
    "str": str,
    "pairs": _parse_pairs,
    "floats": _parse_floats,
    "pair_groups": _parse_pair_groups,
}


@dataclass(frozen=True)
class Field:
    kind: str
    default: object
    help: str


SCHEMA = {
    "m": Field("int", 32, "Galerkin truncation level (number of sine modes)"),
    "dt": Field("float", 1e-3, "time step"),
    "T": Field("float", 0.2, "simulation horizon for `simulate`"),
    "t": Field("float", 0.1, "estimator horizon"),
    "s": Field("float", 0.1, "first leg of the Chapman-Kolmogorov check"),
    "seed": Field("int", 1234, "master seed for all streams"),
    "workers": Field("int", 1, "worker threads (results do not depend on this)"),
    "drift": Field("bool", True, "enable the Burgers drift"),
    "noise": Field("bool", True, "enable the stochastic forcing"),
    "record_stride": Field("int", 1, "steps between recorded snapshots"),
    "quad_points": Field("int", 0, "Gauss-Legendre points; 0 = max(4m, 64)"),
    "n": Field("int", 10000, "Monte Carlo sample count"),
    "n_outer": Field("int", 1000, "outer paths of the nested estimator"),
    "n_inner": Field("int", 100, "inner paths per outer path"),
    "eps": Field("float", 1e-3, "finite-difference offset for derivatives"),
    "c": Field("float", 0.5, "Feynman-Kac potential constant"),
    "n_quad": Field("int", 16, "time-quadrature intervals for the weak residual"),
    "s_nodes": Field("int", 8, "s-quadrature nodes for the FK reconstruction"),
    "n_particles": Field("int", 10000, "particles in the initial measure"),
    "p": Field("float", 4.0, "norm exponent for moment estimates"),
    "k": Field("float", 2.0, "moment power"),
    "x0": Field("pairs", (), "initial state, sparse mode:coeff pairs"),
    "h": Field("pairs", ((1, 1.0),), "test-function frequency vector"),
    "g": Field("pairs", ((1, 1.0),), "derivative direction"),
    "t_grid": Field("floats", (0.02, 0.01), "t-levels for the generator check"),
    "measure": Field("str", "dirac", "initial measure: dirac|gaussian_modes|mixture"),
    "measure_x0": Field("pairs", (), "location of the dirac measure"),
    "measure_sigmas": Field("floats", (0.5, 0.25), "per-mode standard deviations"),
    "measure_atoms": Field("pair_groups", (((1, 1.0),),),
                           "mixture atoms, pair lists separated by ';'"),
    "measure_weights": Field("floats", (1.0,), "mixture weights (signed allowed)"),
}


def default_config() -> dict:
    return {key: field.default for key, field in SCHEMA.items()}


def parse_config(path: str | Path | None) -> dict:
    """Load a config file over the defaults; unknown keys abort."""
    values = default_config()
    if path is None:
        return values
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected `key = value`")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        parser = _PARSERS[SCHEMA[key].kind]
        try:
            values[key] = parser(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return values


def field_from_pairs(pairs, m: int) -> SpectralField:
    """Materialize sparse pairs as a field with m modes."""
    if not pairs:
        return SpectralField.zero(m)
    return SpectralField.from_pairs(pairs, m)


def pairs_to_text(pairs) -> str:
    return ",".join(f"{k}:{v:g}" for k, v in pairs)


def config_to_text(values: dict) -> dict:
    """Echo of the effective config with serializable values (for manifests)."""
    out = {}
    for key, field in SCHEMA.items():
        val = values[key]
        if field.kind == "pairs":
            out[key] = pairs_to_text(val)
        elif field.kind == "floats":
            out[key] = ",".join(f"{v:g}" for v in val)
        elif field.kind == "pair_groups":
            out[key] = ";".join(pairs_to_text(g) for g in val)
        else:
            out[key] = val
    return out
