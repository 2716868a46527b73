"""Scenario files: flat ``key = value`` lines with optional ``[scenario LABEL]`` sections.

Keys before the first section are shared by every scenario; each section
defines one scenario and may override any shared key. A file without
sections describes a single scenario. Blank lines and ``#`` comments are
ignored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .analysis import ThresholdRule
from .bloch import REFERENCE_INITIAL_STATE, BlochVector, TimeGrid
from .pmp import CostWeights, SweepConfig
from .reservoir import Method, ReservoirParams


class ConfigError(ValueError):
    """Malformed or invalid scenario configuration."""


_FLOAT = float


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _method(text: str) -> Method:
    try:
        return Method(text.lower())
    except ValueError:
        choices = ", ".join(m.value for m in Method)
        raise ValueError(f"unknown method {text!r} (choose from {choices})") from None


_defaults_params = ReservoirParams()
_defaults_grid = TimeGrid()
_defaults_sweep = SweepConfig()
_defaults_rule = ThresholdRule()

#: key -> (parser, default)
KEYS = {
    "alpha2": (_FLOAT, _defaults_params.alpha2),
    "omega0": (_FLOAT, _defaults_params.omega0),
    "r": (_FLOAT, _defaults_params.r),
    "kBT": (_FLOAT, _defaults_params.kBT),
    "gamma0": (_FLOAT, _defaults_params.gamma0),
    "x1": (_FLOAT, REFERENCE_INITIAL_STATE.x1),
    "x2": (_FLOAT, REFERENCE_INITIAL_STATE.x2),
    "x3": (_FLOAT, REFERENCE_INITIAL_STATE.x3),
    "t_final": (_FLOAT, _defaults_grid.tf),
    "n_steps": (_int, _defaults_grid.n_steps),
    "theta": (_FLOAT, CostWeights().theta),
    "relaxation": (_FLOAT, _defaults_sweep.relaxation),
    "max_iters": (_int, _defaults_sweep.max_iters),
    "tol_cost": (_FLOAT, _defaults_sweep.tol_cost),
    "tol_control": (_FLOAT, _defaults_sweep.tol_control),
    "method": (_method, Method.EXACT),
    "slow_decay": (_FLOAT, _defaults_rule.slow_decay),
    "gain": (_FLOAT, _defaults_rule.gain),
    "floor": (_FLOAT, _defaults_rule.floor),
    "label": (str, "default"),
}


@dataclass(frozen=True)
class Scenario:
    params: ReservoirParams
    x0: BlochVector
    grid: TimeGrid
    weights: CostWeights
    sweep: SweepConfig
    coefficient_method: Method
    label: str
    rule: ThresholdRule = ThresholdRule()
    #: keys taken from defaults rather than the file
    defaults_applied: tuple = field(default=(), compare=False)

    def values(self) -> dict:
        """Every configuration value, keyed as in the file format."""
        p, g, s = self.params, self.grid, self.sweep
        return {
            "alpha2": p.alpha2, "omega0": p.omega0, "r": p.r, "kBT": p.kBT,
            "gamma0": p.gamma0, "x1": self.x0.x1, "x2": self.x0.x2, "x3": self.x0.x3,
            "t_final": g.tf, "n_steps": g.n_steps, "theta": self.weights.theta,
            "relaxation": s.relaxation, "max_iters": s.max_iters, "tol_cost": s.tol_cost,
            "tol_control": s.tol_control, "method": self.coefficient_method.value,
            "slow_decay": self.rule.slow_decay, "gain": self.rule.gain,
            "floor": self.rule.floor, "label": self.label,
        }


def _build(values: dict, given: set, where: str) -> Scenario:
    try:
        x0 = BlochVector(values["x1"], values["x2"], values["x3"])
        if not x0.is_physical:
            raise ValueError("initial Bloch vector must satisfy |x| <= 1")
        label = values["label"].strip()
        if not label or any(c in label for c in "/\\") or label in (".", ".."):
            raise ValueError(f"label {label!r} is not a valid directory name")
        return Scenario(
            params=ReservoirParams(values["alpha2"], values["omega0"], values["r"],
                                   values["kBT"], values["gamma0"]),
            x0=x0,
            grid=TimeGrid(0.0, values["t_final"], values["n_steps"]),
            weights=CostWeights(values["theta"]),
            sweep=SweepConfig(values["relaxation"], values["max_iters"],
                              values["tol_cost"], values["tol_control"]),
            coefficient_method=values["method"],
            label=label,
            rule=ThresholdRule(values["slow_decay"], values["gain"], values["floor"]),
            defaults_applied=tuple(k for k in KEYS if k not in given),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(text: str) -> list:
    """Parse a scenario file into a list of validated `Scenario` objects.

    Raises
    ------
    ConfigError
        On syntax errors (with the line number), unknown or repeated keys,
        duplicate labels, or any violated parameter invariant.
    """
    shared: dict = {}
    sections: list = []  # (label, line number, {key: value})
    current = shared
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated section header")
            name = line[1:-1].strip()
            if name.startswith("scenario"):
                name = name[len("scenario"):].strip()
            if not name:
                raise ConfigError(f"line {lineno}: section header needs a label")
            current = {}
            sections.append((name, lineno, current))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key == "label" and current is not shared:
            raise ConfigError(f"line {lineno}: 'label' is set by the section header")
        if key in current:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        parser = KEYS[key][0]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
        if isinstance(parsed, float) and not math.isfinite(parsed):
            raise ConfigError(f"line {lineno}: {key} must be finite")
        current[key] = parsed

    defaults = {k: d for k, (_, d) in KEYS.items()}
    if not sections:
        values = {**defaults, **shared}
        return [_build(values, set(shared), f"scenario {values['label']!r}")]
    scenarios, seen = [], set()
    for name, lineno, body in sections:
        if name in seen:
            raise ConfigError(f"line {lineno}: duplicate scenario label {name!r}")
        seen.add(name)
        values = {**defaults, **shared, **body, "label": name}
        given = set(shared) | set(body) | {"label"}
        scenarios.append(_build(values, given, f"scenario {name!r} (line {lineno})"))
    return scenarios


def load_config(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
