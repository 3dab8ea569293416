"""Experiment configuration: flat `section.key = value` text, typed and defaulted.

The format is line oriented and diff friendly: one key per line, `#` starts a
comment, unknown keys are rejected, duplicates are an error naming both
lines. parse_config returns a fully typed ExperimentConfig with defaults
applied and cross-section invariants (CFL, radii ordering, scale lists)
already validated.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import damping, disturbance, geometry
from .errors import ConfigError
from .solver import CFL_SAFETY, InitialRule, SimConfig


@dataclass(frozen=True)
class _Key:
    kind: str       # float | int | bool | str | floats | point
    default: object
    help: str = ""


REGISTRY = {
    "geometry.shape": _Key("str", "rectangle", "rectangle | disk"),
    "geometry.width": _Key("float", 1.0),
    "geometry.height": _Key("float", 1.0),
    "geometry.radius": _Key("float", 1.0),
    "geometry.x0": _Key("point", (-1.0, -1.0), "observation point"),
    "geometry.eps": _Key("float", 0.25, "neighborhood radius of the illuminated boundary"),
    "geometry.eps0": _Key("float", None),
    "geometry.eps1": _Key("float", None),
    "geometry.eps2": _Key("float", None),
    "geometry.a0": _Key("float", 1.0, "localization floor on omega"),
    "geometry.profile": _Key("str", "constant", "constant | indicator-smooth"),
    "geometry.omega": _Key("str", "mgc", "mgc | all | none"),
    "geometry.require_mgc": _Key("bool", False),
    "damping.family": _Key("str", "saturating", "linear | saturating | sublinear | cubic | custom"),
    "damping.kappa": _Key("float", 1.0, "gain of the linear family"),
    "damping.q": _Key("float", None, "declared growth exponent override"),
    "damping.m": _Key("float", None, "declared derivative exponent override"),
    "damping.c_growth": _Key("float", None, "declared growth constant override"),
    "damping.g": _Key("str", None, "custom family: expression in s"),
    "damping.g_prime": _Key("str", None, "custom family: derivative expression in s"),
    "damping.require_h1": _Key("bool", False),
    "disturbance.d_time": _Key("str", "zero", "zero | exp-decay | pulse"),
    "disturbance.d_rate": _Key("float", 1.0),
    "disturbance.d_t0": _Key("float", 0.0, "pulse start"),
    "disturbance.d_t1": _Key("float", math.inf, "pulse end / exp switch-off"),
    "disturbance.d_space": _Key("str", "gaussian", "gaussian | eigenmode | constant"),
    "disturbance.d_center": _Key("point", (0.5, 0.5)),
    "disturbance.d_width": _Key("float", 0.1),
    "disturbance.d_k": _Key("int", 1),
    "disturbance.d_l": _Key("int", 1),
    "disturbance.d_value": _Key("float", 1.0, "constant-profile value"),
    "disturbance.d_amplitude": _Key("float", 0.0, "channel amplitude; 0 disables"),
    "disturbance.e_time": _Key("str", "zero"),
    "disturbance.e_rate": _Key("float", 1.0),
    "disturbance.e_t0": _Key("float", 0.0),
    "disturbance.e_t1": _Key("float", math.inf),
    "disturbance.e_space": _Key("str", "gaussian"),
    "disturbance.e_center": _Key("point", (0.5, 0.5)),
    "disturbance.e_width": _Key("float", 0.1),
    "disturbance.e_k": _Key("int", 1),
    "disturbance.e_l": _Key("int", 1),
    "disturbance.e_value": _Key("float", 1.0),
    "disturbance.e_amplitude": _Key("float", 0.0),
    "disturbance.scales": _Key("floats", (0.0,), "sweep scales; must include 0"),
    "disturbance.budget_horizon": _Key("float", None, "defaults to the solver horizon"),
    "disturbance.quad_dt": _Key("float", 0.01),
    "solver.h": _Key("float", 1.0 / 32.0),
    "solver.dt": _Key("str", "auto", "auto (0.9 h/sqrt(2)) or a number"),
    "solver.horizon": _Key("float", 10.0),
    "solver.record_stride": _Key("int", 1),
    "solver.snapshot_every": _Key("int", 0, "snapshots every N samples; 0 disables"),
    "solver.u0": _Key("str", "eigenmode 1 1 1.0", "eigenmode k l amp | gaussian cx cy w amp | zero"),
    "solver.u1": _Key("str", "zero"),
    "analysis.fit_t0": _Key("float", None),
    "analysis.fit_t1": _Key("float", None),
    "analysis.multiplier_windows": _Key("floats", ()),
    "output.dir": _Key("str", "out"),
    "output.rasters": _Key("bool", False),
    "output.snapshot_rasters": _Key("bool", False),
    "run.seed": _Key("int", 0, "reserved for future stochastic rules"),
}


def _convert(key, kind, raw, lineno):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "floats":
            return tuple(float(tok) for tok in raw.split())
        if kind == "point":
            toks = raw.split()
            if len(toks) != 2:
                raise ValueError(raw)
            return (float(toks[0]), float(toks[1]))
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {key} value {raw!r} as {kind}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict
    digest: str

    def __getitem__(self, key):
        return self.values[key]

    @property
    def resolved_dt(self):
        dt = self.values["solver.dt"]
        if dt == "auto":
            return CFL_SAFETY * self.values["solver.h"] / math.sqrt(2.0)
        return float(dt)

    @property
    def radii(self):
        eps = self.values["geometry.eps"]
        d0, d1, d2, _ = geometry.default_radii(eps)
        e0 = self.values["geometry.eps0"] or d0
        e1 = self.values["geometry.eps1"] or d1
        e2 = self.values["geometry.eps2"] or d2
        return (e0, e1, e2, eps)


def _canonical_value(kind, value):
    if value is None:
        return ""
    if kind == "floats":
        return " ".join(f"{v:.17g}" for v in value)
    if kind == "point":
        return f"{value[0]:.17g} {value[1]:.17g}"
    if kind == "float":
        return f"{value:.17g}"
    if kind == "bool":
        return "true" if value else "false"
    return str(value)


def parse_config(text):
    """Parse config text into a typed, defaulted, validated ExperimentConfig."""
    seen = {}
    values = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in REGISTRY:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} on lines {seen[key]} and {lineno}"
            )
        seen[key] = lineno
        values[key] = _convert(key, REGISTRY[key].kind, raw, lineno)

    resolved = {k: values.get(k, spec.default) for k, spec in REGISTRY.items()}
    _validate(resolved, seen)

    canon = "\n".join(
        f"{k} = {_canonical_value(REGISTRY[k].kind, resolved[k])}" for k in sorted(REGISTRY)
    )
    digest = hashlib.sha256(canon.encode()).hexdigest()[:16]
    return ExperimentConfig(values=resolved, digest=digest)


def _validate(v, seen):
    def err(key, msg):
        where = f"line {seen[key]}: " if key in seen else ""
        raise ConfigError(f"{where}{msg}")

    if v["geometry.shape"] not in ("rectangle", "disk"):
        err("geometry.shape", f"unknown shape {v['geometry.shape']!r}")
    if v["geometry.omega"] not in ("mgc", "all", "none"):
        err("geometry.omega", f"unknown omega mode {v['geometry.omega']!r}")
    if v["geometry.profile"] not in ("constant", "indicator-smooth"):
        err("geometry.profile", f"unknown localization profile {v['geometry.profile']!r}")
    if v["geometry.eps"] <= 0:
        err("geometry.eps", "eps must be positive")
    e0, e1, e2, eps = _radii_of(v)
    if not (0 < e0 < e1 < e2 < eps):
        err("geometry.eps0", "cutoff radii must be strictly increasing below eps")
    if v["geometry.a0"] <= 0:
        err("geometry.a0", "a0 must be positive")

    fam = v["damping.family"]
    if fam not in damping.BUILTIN_FAMILIES + ("custom",):
        err("damping.family", f"unknown damping family {fam!r}")
    if fam == "custom" and (v["damping.g"] is None or v["damping.g_prime"] is None):
        err("damping.family", "custom damping needs damping.g and damping.g_prime")

    for ch in ("d", "e"):
        tkey = f"disturbance.{ch}_time"
        if v[tkey] not in ("zero", "exp-decay", "pulse"):
            err(tkey, f"unknown time profile {v[tkey]!r}")
        skey = f"disturbance.{ch}_space"
        if v[skey] not in ("gaussian", "eigenmode", "constant"):
            err(skey, f"unknown space profile {v[skey]!r}")
        if v[f"disturbance.{ch}_amplitude"] < 0:
            err(f"disturbance.{ch}_amplitude", "amplitude must be nonnegative")
    if any(s < 0 for s in v["disturbance.scales"]):
        err("disturbance.scales", "scales must be nonnegative")

    h = v["solver.h"]
    if h <= 0:
        err("solver.h", "grid spacing must be positive")
    dt_raw = v["solver.dt"]
    if dt_raw != "auto":
        try:
            dt = float(dt_raw)
        except ValueError:
            err("solver.dt", f"dt must be 'auto' or a number, got {dt_raw!r}")
        cfl = CFL_SAFETY * h / math.sqrt(2.0)
        if dt <= 0:
            err("solver.dt", "dt must be positive")
        if dt > cfl * (1.0 + 1e-12):
            err("solver.dt", f"CFL violation: dt={dt:g} > {CFL_SAFETY}*h/sqrt(2)={cfl:g}")
    if v["solver.horizon"] < 0:
        err("solver.horizon", "horizon must be nonnegative")
    if v["solver.record_stride"] < 1:
        err("solver.record_stride", "record stride must be >= 1")
    if v["solver.snapshot_every"] < 0:
        err("solver.snapshot_every", "snapshot_every must be >= 0")
    _parse_initial(v["solver.u0"], "solver.u0")
    _parse_initial(v["solver.u1"], "solver.u1")
    if v["disturbance.quad_dt"] <= 0:
        err("disturbance.quad_dt", "quadrature step must be positive")


def _radii_of(v):
    eps = v["geometry.eps"]
    d0, d1, d2, _ = geometry.default_radii(eps)
    return (
        v["geometry.eps0"] or d0,
        v["geometry.eps1"] or d1,
        v["geometry.eps2"] or d2,
        eps,
    )


def _parse_initial(spec_str, key):
    toks = spec_str.split()
    if not toks:
        raise ConfigError(f"{key}: empty initial rule")
    kind = toks[0]
    try:
        if kind == "zero":
            return InitialRule.zero()
        if kind == "eigenmode":
            k, l = int(toks[1]), int(toks[2])
            amp = float(toks[3]) if len(toks) > 3 else 1.0
            return InitialRule(disturbance.EigenmodeField(k, l), amp)
        if kind == "gaussian":
            cx, cy, w = float(toks[1]), float(toks[2]), float(toks[3])
            amp = float(toks[4]) if len(toks) > 4 else 1.0
            return InitialRule(disturbance.GaussianBump((cx, cy), w), amp)
    except (IndexError, ValueError):
        raise ConfigError(f"{key}: cannot parse initial rule {spec_str!r}") from None
    raise ConfigError(f"{key}: unknown initial rule kind {kind!r}")


@lru_cache(maxsize=64)
def _compile_expr(expr):
    return compile(expr, "<damping-expr>", "eval")


_EXPR_NAMES = {
    "np": np, "sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt,
    "abs": np.abs, "sign": np.sign, "tanh": np.tanh, "pi": math.pi,
}


@dataclass(frozen=True)
class ExprFunc:
    """Picklable callable evaluating a trusted expression in the variable s."""

    expr: str

    def __call__(self, s):
        env = dict(_EXPR_NAMES)
        env["s"] = np.asarray(s, dtype=float)
        out = eval(_compile_expr(self.expr), {"__builtins__": {}}, env)
        return np.asarray(out, dtype=float) + 0.0 * env["s"]


@dataclass(frozen=True, eq=False)
class GeometryBundle:
    grid: object
    mgc: object
    cutoffs: object
    localization: object


def build_geometry(cfg):
    v = cfg.values
    if v["geometry.shape"] == "rectangle":
        dom = geometry.DomainSpec.rectangle(v["geometry.width"], v["geometry.height"])
    else:
        dom = geometry.DomainSpec.disk(v["geometry.radius"])
    grid = geometry.build_grid(dom, v["solver.h"])
    radii = cfg.radii
    mgc = geometry.build_mgc_region(grid, v["geometry.x0"], v["geometry.eps"])
    cutoffs = geometry.build_cutoffs(grid, mgc.gamma, radii, v["geometry.x0"])
    mode = v["geometry.omega"]
    if mode == "mgc":
        omega = mgc.omega
    elif mode == "all":
        omega = grid.interior
    else:
        omega = np.zeros(grid.shape, dtype=bool)
    band = radii[3] - radii[2]
    local = geometry.build_localization(
        omega, v["geometry.a0"], v["geometry.profile"], grid, band=band
    )
    return GeometryBundle(grid=grid, mgc=mgc, cutoffs=cutoffs, localization=local)


def build_law(cfg):
    v = cfg.values
    fam = v["damping.family"]
    overrides = {}
    if v["damping.q"] is not None:
        overrides["q"] = v["damping.q"]
    if v["damping.m"] is not None:
        overrides["m"] = v["damping.m"]
    if v["damping.c_growth"] is not None:
        overrides["c_growth"] = v["damping.c_growth"]
    if fam == "linear":
        law = damping.linear(v["damping.kappa"])
    elif fam == "saturating":
        law = damping.saturating()
    elif fam == "sublinear":
        law = damping.sublinear()
    elif fam == "cubic":
        law = damping.cubic()
    else:
        law = damping.custom(
            ExprFunc(v["damping.g"]), ExprFunc(v["damping.g_prime"]),
            q=overrides.pop("q", 2.0), m=overrides.pop("m", 1.0),
            c_growth=overrides.pop("c_growth", 1.0),
        )
    if overrides:
        law = damping.DampingLaw(
            fn=law.fn, deriv=law.deriv,
            q=overrides.get("q", law.q), m=overrides.get("m", law.m),
            c_growth=overrides.get("c_growth", law.c_growth),
            family=law.family, params=law.params,
        )
    return law


def _build_channel(v, ch):
    amp = v[f"disturbance.{ch}_amplitude"]
    tkind = v[f"disturbance.{ch}_time"]
    if amp == 0.0 or tkind == "zero":
        return disturbance.Channel.zero()
    if tkind == "exp-decay":
        tprof = disturbance.ExpDecay(v[f"disturbance.{ch}_rate"], v[f"disturbance.{ch}_t1"])
    else:
        t1 = v[f"disturbance.{ch}_t1"]
        if math.isinf(t1):
            raise ConfigError(f"disturbance.{ch}_t1: pulse needs a finite end time")
        tprof = disturbance.Pulse(v[f"disturbance.{ch}_t0"], t1)
    skind = v[f"disturbance.{ch}_space"]
    if skind == "gaussian":
        sprof = disturbance.GaussianBump(v[f"disturbance.{ch}_center"], v[f"disturbance.{ch}_width"])
    elif skind == "eigenmode":
        sprof = disturbance.EigenmodeField(v[f"disturbance.{ch}_k"], v[f"disturbance.{ch}_l"])
    else:
        sprof = disturbance.ConstantField(v[f"disturbance.{ch}_value"])
    return disturbance.Channel(tprof, sprof, amp)


def build_disturbance(cfg):
    v = cfg.values
    return disturbance.DisturbanceSpec(_build_channel(v, "d"), _build_channel(v, "e"))


def build_sim(cfg, bundle, law, spec, scale=None):
    v = cfg.values
    if scale is not None:
        spec = spec.scaled(scale)
    return SimConfig(
        grid=bundle.grid,
        localization=bundle.localization,
        law=law,
        disturbance=spec,
        dt=cfg.resolved_dt,
        horizon=v["solver.horizon"],
        record_stride=v["solver.record_stride"],
        snapshot_every=v["solver.snapshot_every"],
        u0=_parse_initial(v["solver.u0"], "solver.u0"),
        u1=_parse_initial(v["solver.u1"], "solver.u1"),
    )
