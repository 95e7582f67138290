"""Model configuration: a JSON schema for components, solver, and search.

A config file declares, in order: preprocessing steps, the component
classes with their parameters, solver settings, validation settings, and
optional grid axes.  Everything is validated eagerly with error messages
that point into the document (``components[2].lambda``), and a parsed
config can rebuild its class list with substituted parameter values,
which is how grid search sweeps user-facing weights.

Schema sketch::

    {
      "preprocess": [{"op": "log"}, {"op": "standardize"}],
      "components": [
        {"class": "sum_square"},
        {"class": "smooth2", "lambda": 1e4},
        {"class": "common", "inner": {"class": "quantile", "lambda": 1, "tau": 0.65}}
      ],
      "solver": {"algorithm": "hybrid", "max_iter": 1000},
      "validation": {"fraction": 0.2, "folds": 10, "seeds": 0},
      "grid": {"axes": [
        {"component": 2, "param": "lambda", "spacing": "log",
         "min": 1e-1, "max": 1e6, "count": 21}
      ]}
    }

The first component must be the plain mean-square class ("sum_square"),
which carries no free weight.  Wrappers nest at most once: "common" may
wrap any non-wrapper class.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, SigDecompError
from .losses import CLASS_TABLE, CommonTerm
from .modelsel import ParamGrid
from .solver import SolverConfig

_PREPROCESS_OPS = ("log", "standardize")
_SOLVER_KEYS = {
    "algorithm",
    "rho_scale",
    "eps_abs",
    "eps_rel",
    "max_iter",
    "seed",
    "random_init",
    "track_updates",
}


@dataclass(frozen=True)
class PreprocessStep:
    op: str
    per_channel: bool = True


@dataclass(frozen=True)
class GridAxis:
    """One swept parameter: a component index (1-based) and value range."""

    component: int
    param: str
    spacing: str
    lo: float
    hi: float
    count: int

    @property
    def name(self) -> str:
        return f"component{self.component}.{self.param}"

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.logspace(np.log10(self.lo), np.log10(self.hi), self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class ValidationSettings:
    fraction: float = 0.2
    folds: int = 10
    seeds: object = None


@dataclass(frozen=True)
class ModelConfig:
    """A fully validated model declaration."""

    preprocess: tuple = ()
    components: tuple = ()
    solver: SolverConfig = field(default_factory=SolverConfig)
    validation: ValidationSettings = field(default_factory=ValidationSettings)
    grid_axes: tuple = ()

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def uses_log(self) -> bool:
        return any(step.op == "log" for step in self.preprocess)

    def build_classes(self, overrides: dict | None = None):
        """Instantiate the component classes, applying grid overrides.

        ``overrides`` maps ``(component_index_1based, param_name)`` to a
        value, as produced by :func:`grid_overrides`.
        """
        overrides = overrides or {}
        classes = []
        for idx, spec in enumerate(self.components, start=1):
            params = dict(spec["params"])
            for (comp, name), value in overrides.items():
                if comp == idx:
                    params[name] = value
            classes.append(_instantiate(spec, params, f"components[{idx - 1}]"))
        return classes

    def param_grid(self) -> ParamGrid:
        if not self.grid_axes:
            raise ConfigError("config declares no grid axes", path="grid")
        return ParamGrid(tuple((ax.name, ax.values()) for ax in self.grid_axes))

    def grid_overrides(self, point: dict) -> dict:
        """Translate a grid point (axis name -> value) into overrides."""
        by_name = {ax.name: ax for ax in self.grid_axes}
        out = {}
        for name, value in point.items():
            ax = by_name[name]
            out[(ax.component, ax.param)] = value
        return out


def make_classes_for(config: ModelConfig, point: dict):
    """Build the class list at one grid point; picklable for worker pools."""
    return config.build_classes(config.grid_overrides(point))


def _err(message, path):
    return ConfigError(message, path=path)


def _require_dict(obj, path):
    if not isinstance(obj, dict):
        raise _err(f"expected an object, got {type(obj).__name__}", path)
    return obj


def _check_keys(obj, allowed, path):
    for key in obj:
        if key not in allowed:
            raise _err(f"unknown key {key!r}", f"{path}.{key}" if path else key)


def _number(value, path, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _err(f"expected a number, got {value!r}", path)
    if integer:
        if float(value) != int(value):
            raise _err(f"expected an integer, got {value!r}", path)
        return int(value)
    return float(value)


def _instantiate(spec, params, path):
    if spec["class"] == "common":
        inner_spec = spec["inner"]
        inner = _instantiate(inner_spec, dict(inner_spec["params"]), f"{path}.inner")
        try:
            return CommonTerm(inner)
        except SigDecompError as exc:
            raise _err(str(exc), path) from exc
    ctor, accepted = CLASS_TABLE[spec["class"]]
    kwargs = {accepted[name]: value for name, value in params.items()}
    try:
        return ctor(**kwargs)
    except (SigDecompError, TypeError, ValueError) as exc:
        raise _err(str(exc), path) from exc


def _parse_component(obj, idx, path):
    obj = _require_dict(obj, path)
    if "class" not in obj:
        raise _err("missing 'class'", path)
    cid = obj["class"]
    if cid == "common":
        _check_keys(obj, {"class", "inner"}, path)
        if "inner" not in obj:
            raise _err("wrapper 'common' needs an 'inner' component", path)
        inner = _require_dict(obj["inner"], f"{path}.inner")
        if inner.get("class") == "common":
            raise _err("wrappers nest at most once", f"{path}.inner.class")
        inner_spec = _parse_component(obj["inner"], idx, f"{path}.inner")
        spec = {"class": "common", "params": {}, "inner": inner_spec}
        _instantiate(spec, {}, path)
        return spec
    if cid not in CLASS_TABLE:
        raise _err(f"unknown class {cid!r}", f"{path}.class")
    _, accepted = CLASS_TABLE[cid]
    _check_keys(obj, {"class"} | set(accepted), path)
    params = {}
    for name in accepted:
        if name in obj:
            params[name] = obj[name]
    spec = {"class": cid, "params": params, "inner": None}
    _instantiate(spec, params, path)
    return spec


def _parse_preprocess(obj, path):
    if not isinstance(obj, list):
        raise _err("expected a list of steps", path)
    steps = []
    for i, step in enumerate(obj):
        spath = f"{path}[{i}]"
        step = _require_dict(step, spath)
        _check_keys(step, {"op", "per_channel"}, spath)
        op = step.get("op")
        if op not in _PREPROCESS_OPS:
            raise _err(f"unknown op {op!r} (expected one of {list(_PREPROCESS_OPS)})", f"{spath}.op")
        per_channel = step.get("per_channel", True)
        if not isinstance(per_channel, bool):
            raise _err("expected true/false", f"{spath}.per_channel")
        steps.append(PreprocessStep(op=op, per_channel=per_channel))
    return tuple(steps)


def _parse_solver(obj, path):
    obj = _require_dict(obj, path)
    _check_keys(obj, _SOLVER_KEYS, path)
    kwargs = {}
    for key in _SOLVER_KEYS:
        if key in obj:
            kwargs[key] = obj[key]
    try:
        return SolverConfig(**kwargs)
    except SigDecompError as exc:
        raise _err(str(exc), path) from exc


def _parse_validation(obj, path):
    obj = _require_dict(obj, path)
    _check_keys(obj, {"fraction", "folds", "seeds"}, path)
    fraction = _number(obj.get("fraction", 0.2), f"{path}.fraction")
    if not 0 < fraction < 1:
        raise _err(f"fraction must be in (0, 1), got {fraction}", f"{path}.fraction")
    folds = _number(obj.get("folds", 10), f"{path}.folds", integer=True)
    if folds < 1:
        raise _err(f"folds must be >= 1, got {folds}", f"{path}.folds")
    seeds = obj.get("seeds")
    if seeds is not None:
        if isinstance(seeds, list):
            seeds = [_number(s, f"{path}.seeds[{i}]", integer=True) for i, s in enumerate(seeds)]
            if len(seeds) != folds:
                raise _err(f"need {folds} fold seeds, got {len(seeds)}", f"{path}.seeds")
        else:
            seeds = _number(seeds, f"{path}.seeds", integer=True)
    return ValidationSettings(fraction=fraction, folds=folds, seeds=seeds)


def _parse_grid(obj, components, path):
    obj = _require_dict(obj, path)
    _check_keys(obj, {"axes"}, path)
    axes_obj = obj.get("axes")
    if not isinstance(axes_obj, list) or not axes_obj:
        raise _err("expected a nonempty list of axes", f"{path}.axes")
    axes = []
    for i, ax in enumerate(axes_obj):
        apath = f"{path}.axes[{i}]"
        ax = _require_dict(ax, apath)
        _check_keys(ax, {"component", "param", "spacing", "min", "max", "count"}, apath)
        comp = _number(ax.get("component"), f"{apath}.component", integer=True)
        if not 1 <= comp <= len(components):
            raise _err(
                f"component must be in 1..{len(components)}, got {comp}", f"{apath}.component"
            )
        spec = components[comp - 1]
        if comp == 1:
            raise _err("the first component's weight is fixed at 1", f"{apath}.component")
        if spec["class"] == "common":
            raise _err("cannot sweep parameters of a wrapped component", f"{apath}.component")
        param = ax.get("param")
        _, accepted = CLASS_TABLE[spec["class"]]
        if param not in accepted:
            raise _err(
                f"class {spec['class']!r} has no parameter {param!r} "
                f"(expected one of {sorted(accepted)})",
                f"{apath}.param",
            )
        spacing = ax.get("spacing", "linear")
        if spacing not in ("log", "linear"):
            raise _err(f"spacing must be 'log' or 'linear', got {spacing!r}", f"{apath}.spacing")
        lo = _number(ax.get("min"), f"{apath}.min")
        hi = _number(ax.get("max"), f"{apath}.max")
        if spacing == "log" and not lo > 0:
            raise _err(f"log spacing needs min > 0, got {lo}", f"{apath}.min")
        if not lo < hi:
            raise _err(f"need min < max, got [{lo}, {hi}]", f"{apath}.max")
        count = _number(ax.get("count"), f"{apath}.count", integer=True)
        if count < 2:
            raise _err(f"count must be >= 2, got {count}", f"{apath}.count")
        axes.append(
            GridAxis(component=comp, param=param, spacing=spacing, lo=lo, hi=hi, count=count)
        )
    return tuple(axes)


def parse_config(obj: dict) -> ModelConfig:
    """Validate a config document (already parsed JSON) into a ModelConfig."""
    obj = _require_dict(obj, "")
    _check_keys(obj, {"preprocess", "components", "solver", "validation", "grid"}, "")
    comps_obj = obj.get("components")
    if not isinstance(comps_obj, list) or not comps_obj:
        raise _err("expected a nonempty list of components", "components")
    components = [
        _parse_component(c, i, f"components[{i}]") for i, c in enumerate(comps_obj)
    ]
    first = components[0]
    if first["class"] != "sum_square":
        raise _err(
            "the first component must be the mean-square residual class 'sum_square'",
            "components[0].class",
        )
    lam = first["params"].get("lambda", 1.0)
    if lam != 1.0:
        raise _err(
            f"the mean-square residual class has weight fixed at 1, got {lam}",
            "components[0].lambda",
        )
    if len(components) < 2:
        raise _err("a decomposition needs at least 2 components", "components")
    preprocess = _parse_preprocess(obj.get("preprocess", []), "preprocess")
    solver = _parse_solver(obj.get("solver", {}), "solver")
    validation = _parse_validation(obj.get("validation", {}), "validation")
    grid_axes = ()
    if "grid" in obj:
        grid_axes = _parse_grid(obj["grid"], components, "grid")
    return ModelConfig(
        preprocess=preprocess,
        components=tuple(components),
        solver=solver,
        validation=validation,
        grid_axes=grid_axes,
    )


def load_config(path) -> ModelConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _err(f"cannot read config: {exc}", None) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _err(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", None) from exc
    return parse_config(obj)


def config_hash(path) -> str:
    """SHA-256 of the config file bytes, for run manifests."""
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
