"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, unknown keys are rejected.
Energies are in cm^-1 relative to the open-channel threshold; lengths in
bohr. Pairs are written ``a, b`` and grid variants ``L:R_opt, L:R_opt, ...``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields

from .units import RB85_REDUCED_MASS, RB_FINE_STRUCTURE_CM


class ConfigError(ValueError):
    def __init__(self, message, lineno=None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


METHODS = ("mfgh", "qdt", "both")


@dataclass
class RunConfig:
    # potential source: "synthetic", "morse" (decoupled oracle) or a curve file
    potential: str = "synthetic"
    asymptote_energy: float = 0.0
    reduced_mass_me: float = RB85_REDUCED_MASS
    delta_e_so_cm: float = RB_FINE_STRUCTURE_CM
    depth_A_cm: float = 4000.0
    r_eq_A: float = 8.6
    stiffness_A: float = 0.5
    depth_b_cm: float = 3000.0
    r_eq_b: float = 8.6
    stiffness_b: float = 0.5
    c3: float = 10.0
    coupling_amplitude: float = -0.9
    coupling_center: float = 10.0
    coupling_width: float = 1.0
    join_radius: float = 10.0
    join_width: float = 0.45
    # method selection
    method: str = "both"
    rotated: bool = True
    # energy windows (cm^-1 above E_open)
    bound_window_cm: tuple = (-81.0, -1.0)
    resonance_window_cm: tuple = (5.0, 230.0)
    phase_window_cm: tuple = (5.0, 230.0)
    # mapped grid
    bound_density: float = 2.0
    bound_length: float = 400.0
    bound_e_infty_cm: float = 1.0
    stab_density: float = 1.5
    stab_variants: tuple = ((80.0, 40.0), (160.0, 120.0), (180.0, 140.0))
    stab_e_infty_cm: float = math.nan
    stab_tolerance: float = 0.05
    max_points: int = 4096
    a_opt: float = 4e-5
    l_opt: float = 40.0
    n_opt: float = 13.22
    # quantum-defect pipeline
    r0: float = 13.0
    coarse_step_cm: float = 0.5
    phase_step_cm: float = 0.05
    fine_step_cm: float = 0.005
    delay_step_cm: float = 0.01
    out: str = "out"

    source_path: str = field(default="", repr=False, compare=False)

    def items(self):
        """(key, value) pairs in schema order, values as written in files."""
        for f in fields(self):
            if f.name == "source_path":
                continue
            yield f.name, format_value(getattr(self, f.name))

    def potential_path(self):
        path = self.potential
        if not os.path.isabs(path) and self.source_path:
            path = os.path.join(os.path.dirname(self.source_path), path)
        return path

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.potential not in ("synthetic", "morse"):
            if not os.path.isfile(self.potential_path()):
                raise ConfigError(f"potential file {self.potential!r} does not exist")
        for name in ("bound_window_cm", "resonance_window_cm", "phase_window_cm"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name}: lower edge {lo} above upper edge {hi}")
        if self.bound_window_cm[1] > 0:
            raise ConfigError("bound_window_cm must lie below the open threshold (<= 0)")
        for name in ("resonance_window_cm", "phase_window_cm"):
            lo, hi = getattr(self, name)
            if lo < 0:
                raise ConfigError(f"{name} must lie above the open threshold (>= 0)")
        positive = ("reduced_mass_me", "delta_e_so_cm", "depth_A_cm", "r_eq_A", "stiffness_A", "depth_b_cm",
                    "r_eq_b", "stiffness_b", "coupling_width", "join_radius", "join_width", "bound_length",
                    "l_opt", "n_opt", "r0", "coarse_step_cm", "phase_step_cm", "fine_step_cm",
                    "delay_step_cm", "stab_tolerance")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("bound_density", "stab_density"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.c3 < 0 or self.a_opt < 0 or self.bound_e_infty_cm < 0:
            raise ConfigError("c3, a_opt and bound_e_infty_cm must be non-negative")
        if not math.isnan(self.stab_e_infty_cm) and self.stab_e_infty_cm < 0:
            raise ConfigError("stab_e_infty_cm must be non-negative")
        if len(self.stab_variants) < 3:
            raise ConfigError("stab_variants needs at least 3 (L:R_opt) entries")
        for L, R_opt in self.stab_variants:
            if not L > R_opt > 0:
                raise ConfigError(f"grid variant {L}:{R_opt} needs L > R_opt > 0")
        if self.max_points < 4:
            raise ConfigError("max_points must be >= 4")
        return self


def format_value(v):
    """Config value as written in files; floats use the shortest exact repr
    so a provenance header reproduces the run bit for bit."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return ", ".join(f"{a!r}:{b!r}" for a, b in v)
    if isinstance(v, tuple):
        return ", ".join(format_value(x) for x in v)
    return str(v)


def _float(text):
    return float(text)


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text}")
    return int(v)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _pair(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ValueError(f"expected two numbers 'lo, hi', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _variants(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        a, sep, b = item.partition(":")
        if not sep:
            raise ValueError(f"grid variant {item!r} is not of the form L:R_opt")
        out.append((float(a), float(b)))
    return tuple(out)


def _parser_for(name, default):
    if name == "stab_variants":
        return _variants
    if isinstance(default, bool):
        return _bool
    if isinstance(default, int):
        return _int
    if isinstance(default, float):
        return _float
    if isinstance(default, tuple):
        return _pair
    return str.strip


def parse_config(text, path=None) -> RunConfig:
    cfg = RunConfig()
    known = {f.name: f for f in fields(RunConfig) if f.name != "source_path"}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, sep, value = body.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError("expected 'key = value'", lineno, path)
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno, path)
        seen.add(key)
        try:
            setattr(cfg, key, _parser_for(key, known[key].default)(value))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno, path) from None
    if path is not None:
        cfg.source_path = str(path)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, path)
