"""Flat ``section.key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Every key must appear in
:data:`SCHEMA`; unknown or repeated keys are parse errors.  Field presets
(``initial.*``, ``cost.rho_T``, ``cost.mu_T``) are whitespace-separated::

    constant <c>
    ramp <a> <b>                 # a + b * x  (x: first coordinate)
    bump <base> <amp> <width>    # base + amp * exp(-|x - centre|^2 / width^2)

Control presets (``control.u``, ``admissible.U1``/``U2`` accept plain numbers)::

    constant <c>
    wave <mean> <amp> <freq>     # mean + amp * sin(2 pi freq t)
    ramp <a> <b>                 # a + b * t
    sides <c_first> <c_last>     # per boundary node, linear in node ordinal
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .cost import CostSpec
from .errors import ParseError, ValidationError
from .grid import SpatialMesh, build_mesh
from .optimize import AdmissibleSet, OptimizerConfig
from .potential import PotentialSpec
from .state import InitialData, ModelParams, NewtonConfig, solve_state


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _field_spec(text: str):
    parts = text.split()
    if not parts:
        raise ValueError("empty field spec")
    kind, args = parts[0], [float(a) for a in parts[1:]]
    arity = {"constant": 1, "ramp": 2, "bump": 3}
    if kind not in arity or len(args) != arity[kind]:
        raise ValueError(f"expected one of constant <c> | ramp <a> <b> | bump <base> <amp> <width>, "
                         f"got {text!r}")
    return (kind, *args)


def _control_spec(text: str):
    parts = text.split()
    if len(parts) == 1:
        return ("constant", float(parts[0]))
    kind, args = parts[0], [float(a) for a in parts[1:]]
    arity = {"constant": 1, "wave": 3, "ramp": 2, "sides": 2}
    if kind not in arity or len(args) != arity[kind]:
        raise ValueError(f"expected constant | wave <mean> <amp> <freq> | ramp <a> <b> | "
                         f"sides <c0> <c1>, got {text!r}")
    return (kind, *args)


def _float_list(text: str):
    vals = [float(v) for v in text.replace(",", " ").split()]
    if not vals:
        raise ValueError("empty list")
    return tuple(vals)


def _int_list(text: str):
    return tuple(int(v) for v in _float_list(text))


def _bool(text: str):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool] | None = None
    constraint: str = ""
    doc: str = ""


SCHEMA: dict[str, Key] = {
    "mesh.dimension": Key(int, 1, lambda d: d in (1, 2), "dimension in {1, 2}", "spatial dimension"),
    "mesh.extent_x": Key(float, 1.0, _pos, "> 0", "length of the x-axis"),
    "mesh.extent_y": Key(float, 1.0, _pos, "> 0", "length of the y-axis (2D)"),
    "mesh.nodes_x": Key(int, 33, lambda n: n >= 3, ">= 3", "nodes along x"),
    "mesh.nodes_y": Key(int, 17, lambda n: n >= 3, ">= 3", "nodes along y (2D)"),
    "model.epsilon": Key(float, 1.0, _pos, "epsilon > 0", "coefficient of mu_t"),
    "model.delta": Key(float, 1.0, _pos, "delta > 0", "coefficient of rho_t"),
    "model.alpha": Key(_control_spec, ("constant", 1.0), None, "",
                       "heat-exchange coefficient on Gamma (control preset at t = 0)"),
    "model.T": Key(float, 1.0, _pos, "T > 0", "final time"),
    "model.steps": Key(int, 40, lambda n: n >= 1, "N >= 1", "number of time steps"),
    "model.delay_k": Key(int, 1, lambda k: k >= 1, "k >= 1", "delay in steps (tau = k dt)"),
    "model.max_refinements": Key(int, 4, _nonneg, ">= 0", "time-step halvings on solver failure"),
    "newton.tol": Key(float, 1e-10, _pos, "> 0", "Newton residual tolerance (L2)"),
    "newton.max_iter": Key(int, 50, lambda n: n >= 1, ">= 1", "Newton iteration cap"),
    "newton.damping_min": Key(float, 1.0 / 1024, lambda x: 0 < x <= 1, "in (0, 1]", "smallest damping"),
    "potential.c": Key(float, 1.0, _pos, "c > 0", "logarithmic coefficient"),
    "potential.c2": Key(float, 0.0, np.isfinite, "finite", "f2(r) = c2 r (1 - r)"),
    "potential.barrier_guard": Key(float, 1e-12, lambda g: 0 < g < 0.5, "in (0, 0.5)", "barrier guard"),
    "initial.rho0": Key(_field_spec, ("constant", 0.5), None, "", "initial order parameter"),
    "initial.mu0": Key(_field_spec, ("constant", 0.5), None, "", "initial chemical potential"),
    "control.u": Key(_control_spec, ("constant", 1.0), None, "", "boundary control preset"),
    "control.file": Key(str, "", None, "", "control CSV (overrides control.u)"),
    "cost.beta1": Key(float, 0.0, _nonneg, "beta1 >= 0", "control weight"),
    "cost.beta2": Key(float, 0.0, _nonneg, "beta2 >= 0", "tracking weight"),
    "cost.rho_T": Key(_field_spec, ("constant", 0.5), None, "", "terminal target for rho"),
    "cost.mu_T": Key(_field_spec, ("constant", 0.5), None, "", "tracking target for mu"),
    "cost.targets_from": Key(_control_spec, None, None, "",
                             "if set, targets are the state driven by this control"),
    "admissible.U1": Key(_control_spec, ("constant", 0.5), None, "", "lower control bound"),
    "admissible.U2": Key(_control_spec, ("constant", 2.0), None, "", "upper control bound"),
    "admissible.R": Key(float, 10.0, _pos, "R > 0", "bound on ||v_t||"),
    "admissible.u_lower": Key(float, None, _pos, "u_lower > 0", "u_* (default min U1)"),
    "admissible.u_upper": Key(float, None, _pos, "u_upper > 0", "u^* (default max U2)"),
    "optimizer.s0": Key(float, 1.0, _pos, "> 0", "first trial step"),
    "optimizer.sigma": Key(float, 1e-4, lambda s: 0 < s < 1, "in (0, 1)", "Armijo factor"),
    "optimizer.shrink": Key(float, 0.5, lambda s: 0 < s < 1, "in (0, 1)", "backtracking factor"),
    "optimizer.max_iter": Key(int, 100, _nonneg, ">= 0", "outer iteration cap"),
    "optimizer.vi_tol": Key(float, 1e-6, _pos, "> 0", "stationarity tolerance"),
    "optimizer.max_sweeps": Key(int, 50, lambda n: n >= 1, ">= 1", "projection sweeps"),
    "optimizer.bb_steps": Key(_bool, True, None, "", "Barzilai-Borwein trial steps"),
    "taylor.scales": Key(_float_list, (1e-2, 5e-3, 2.5e-3, 1.25e-3), None, "", "perturbation sizes"),
    "taylor.direction": Key(_control_spec, None, None, "",
                            "direction preset (default: random, --seed)"),
    "gradcheck.directions": Key(int, 5, lambda n: n >= 1, ">= 1", "random directions"),
    "gradcheck.steps": Key(_float_list, (1e-4, 1e-5, 1e-6), None, "", "FD step sweep"),
    "stability.perturbations": Key(_float_list, (1e-1, 1e-2, 1e-3), None, "", "perturbation sizes"),
    "stability.direction": Key(_control_spec, ("wave", 0.0, 1.0, 0.5), None, "", "perturbation shape"),
    "delay.k_list": Key(_int_list, (1, 2, 4), None, "", "delay multipliers"),
    "output.directory": Key(str, ".", None, "", "output directory (--out overrides)"),
    "output.files": Key(lambda t: tuple(t.replace(",", " ").split()), (), None, "",
                        "CSV files to write (empty: all)"),
}


@dataclass
class RunConfig:
    values: dict[str, Any] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)

    def __getitem__(self, key: str):
        if key not in SCHEMA:
            raise KeyError(key)
        return self.values.get(key, SCHEMA[key].default)

    # -- builders -------------------------------------------------------------

    def mesh(self) -> SpatialMesh:
        d = self["mesh.dimension"]
        if d == 1:
            return build_mesh(1, [self["mesh.extent_x"]], [self["mesh.nodes_x"]])
        return build_mesh(2, [self["mesh.extent_x"], self["mesh.extent_y"]],
                          [self["mesh.nodes_x"], self["mesh.nodes_y"]])

    def params(self, mesh: SpatialMesh) -> ModelParams:
        return ModelParams(
            epsilon=self["model.epsilon"], delta=self["model.delta"],
            alpha=self.alpha(mesh), T=self["model.T"],
            N=self["model.steps"], delay_k=self["model.delay_k"],
            newton=NewtonConfig(self["newton.tol"], self["newton.max_iter"],
                                self["newton.damping_min"]),
            max_refinements=self["model.max_refinements"])

    def alpha(self, mesh: SpatialMesh) -> np.ndarray:
        return eval_control(self["model.alpha"], mesh, np.zeros(1))[0]

    def potential(self) -> PotentialSpec:
        return PotentialSpec.double_well(self["potential.c"], self["potential.c2"],
                                         self["potential.barrier_guard"])

    def initial(self, mesh: SpatialMesh) -> InitialData:
        return InitialData(eval_field(self["initial.rho0"], mesh), eval_field(self["initial.mu0"], mesh))

    def control(self, mesh: SpatialMesh, params: ModelParams) -> np.ndarray:
        if self["control.file"]:
            from .io import read_control_csv

            return read_control_csv(self["control.file"], mesh, params.N)
        return eval_control(self["control.u"], mesh, params.times)

    def admissible(self, mesh: SpatialMesh, params: ModelParams) -> AdmissibleSet:
        U1 = eval_control(self["admissible.U1"], mesh, params.times)
        U2 = eval_control(self["admissible.U2"], mesh, params.times)
        lo = self["admissible.u_lower"]
        hi = self["admissible.u_upper"]
        return AdmissibleSet(U1, U2, self["admissible.R"],
                             float(U1.min()) if lo is None else lo,
                             float(U2.max()) if hi is None else hi)

    def cost(self, mesh: SpatialMesh, params: ModelParams, spec: PotentialSpec,
             init: InitialData) -> CostSpec:
        """Cost weights and targets; ``cost.targets_from`` replaces both targets
        by the state driven by that control."""
        src = self["cost.targets_from"]
        if src is not None:
            ref = solve_state(mesh, params, spec, init, eval_control(src, mesh, params.times),
                              adaptive=False)
            rho_T, mu_T = ref.rho[-1], ref.mu
        else:
            rho_T = eval_field(self["cost.rho_T"], mesh)
            mu_T = np.tile(eval_field(self["cost.mu_T"], mesh), (params.N + 1, 1))
        return CostSpec(self["cost.beta1"], self["cost.beta2"], rho_T, mu_T)

    def wants(self, name: str) -> bool:
        files = self["output.files"]
        return not files or name in files

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            s0=self["optimizer.s0"], sigma=self["optimizer.sigma"], shrink=self["optimizer.shrink"],
            max_iter=self["optimizer.max_iter"], vi_tol=self["optimizer.vi_tol"],
            max_sweeps=self["optimizer.max_sweeps"], bb_steps=self["optimizer.bb_steps"])


def eval_field(spec: tuple, mesh: SpatialMesh) -> np.ndarray:
    kind, *a = spec
    x = mesh.coordinates
    if kind == "constant":
        return np.full(mesh.n_nodes, a[0])
    if kind == "ramp":
        return a[0] + a[1] * x[:, 0]
    centre = 0.5 * np.asarray(mesh.extents)
    r2 = np.sum((x - centre) ** 2, axis=1)
    return a[0] + a[1] * np.exp(-r2 / a[2] ** 2)


def eval_control(spec: tuple, mesh: SpatialMesh, times: np.ndarray) -> np.ndarray:
    kind, *a = spec
    nb = mesh.n_boundary
    t = np.asarray(times)[:, None]
    if kind == "constant":
        return np.full((len(times), nb), a[0])
    if kind == "wave":
        return np.broadcast_to(a[0] + a[1] * np.sin(2 * np.pi * a[2] * t), (len(times), nb)).copy()
    if kind == "ramp":
        return np.broadcast_to(a[0] + a[1] * t, (len(times), nb)).copy()
    if kind == "sides":
        s = np.linspace(0.0, 1.0, nb)
        return np.broadcast_to(a[0] + (a[1] - a[0]) * s, (len(times), nb)).copy()
    raise ValueError(f"unknown control preset {kind!r}")


def parse_config(text: str, overrides: list[str] | tuple[str, ...] = ()) -> RunConfig:
    """Parse and validate a configuration.

    ``overrides`` are extra ``section.key=value`` entries applied after the
    file; they are reported as line 0 in error messages.
    """
    cfg = RunConfig()
    entries = [(i, line) for i, line in enumerate(text.splitlines(), start=1)]
    seen: set[str] = set()
    for lineno, raw in entries:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, value = _split(lineno, line)
        if key in seen:
            raise ParseError(lineno, f"duplicate key {key!r}")
        seen.add(key)
        _assign(cfg, lineno, key, value)
    for ov in overrides:
        try:
            key, value = _split(0, ov.strip())
            _assign(cfg, 0, key, value)
        except ParseError as exc:
            raise ParseError(0, f"--override {ov!r}: {str(exc).split(': ', 1)[1]}") from None
    _validate(cfg)
    return cfg


def _split(lineno: int, line: str) -> tuple[str, str]:
    if "=" not in line:
        raise ParseError(lineno, f"expected 'section.key = value', got {line!r}")
    key, value = (s.strip() for s in line.split("=", 1))
    if key not in SCHEMA:
        raise ParseError(lineno, f"unknown key {key!r}")
    return key, value


def _assign(cfg: RunConfig, lineno: int, key: str, value: str) -> None:
    try:
        cfg.values[key] = SCHEMA[key].parse(value)
    except (ValueError, TypeError) as exc:
        raise ParseError(lineno, f"{key}: {exc}") from None
    cfg.lines[key] = lineno


def _fail(cfg: RunConfig, key: str, constraint: str):
    line = cfg.lines.get(key)
    where = f" (line {line})" if line else ""
    raise ValidationError(key, f"{constraint}{where}")


def _validate(cfg: RunConfig) -> None:
    for key, spec in SCHEMA.items():
        val = cfg[key]
        if val is None or spec.check is None:
            continue
        if not spec.check(val):
            _fail(cfg, key, f"got {val!r}, requires {spec.constraint}")
    if cfg["model.delay_k"] > cfg["model.steps"]:
        _fail(cfg, "model.delay_k", "requires delay_k <= model.steps")
    mesh = cfg.mesh()
    if cfg.alpha(mesh).min() <= 0:
        _fail(cfg, "model.alpha", "requires alpha >= alpha0 > 0")
    if not np.all((eval_field(cfg["initial.rho0"], mesh) > 0)
                  & (eval_field(cfg["initial.rho0"], mesh) < 1)):
        _fail(cfg, "initial.rho0", "requires 0 < rho0 < 1 at every node")
    if eval_field(cfg["initial.mu0"], mesh).min() < 0:
        _fail(cfg, "initial.mu0", "requires mu0 >= 0")
    times = np.linspace(0, cfg["model.T"], cfg["model.steps"] + 1)
    if not cfg["control.file"] and eval_control(cfg["control.u"], mesh, times).min() < 0:
        _fail(cfg, "control.u", "requires u >= 0")
    U1 = eval_control(cfg["admissible.U1"], mesh, times)
    U2 = eval_control(cfg["admissible.U2"], mesh, times)
    if np.any(U1 > U2):
        _fail(cfg, "admissible.U2", "requires U1 <= U2")
    lo, hi = cfg["admissible.u_lower"], cfg["admissible.u_upper"]
    if U1.min() <= 0 and lo is None:
        _fail(cfg, "admissible.U1", "requires U1 >= u_lower > 0")
    if lo is not None and U1.min() < lo:
        _fail(cfg, "admissible.u_lower", "requires u_lower <= U1")
    if hi is not None and U2.max() > hi:
        _fail(cfg, "admissible.u_upper", "requires U2 <= u_upper")
    for key in ("taylor.scales", "gradcheck.steps", "stability.perturbations"):
        if min(cfg[key]) <= 0:
            _fail(cfg, key, "requires positive entries")
    if "delay.k_list" in cfg.values:
        check_k_list(cfg)


def check_k_list(cfg: RunConfig) -> None:
    ks = cfg["delay.k_list"]
    if min(ks) < 1 or max(ks) > cfg["model.steps"]:
        _fail(cfg, "delay.k_list", "requires 1 <= k <= model.steps")


def describe_keys() -> str:
    """One line per key: name, default, constraint, meaning."""
    out = []
    for key, spec in SCHEMA.items():
        default = spec.default
        if isinstance(default, tuple):
            default = " ".join(str(d) for d in default)
        extra = f" [{spec.constraint}]" if spec.constraint else ""
        out.append(f"{key} = {default}{extra}  # {spec.doc}")
    return "\n".join(out)
