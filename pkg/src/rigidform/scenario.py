"""Scenario files: TOML documents that describe one simulation.

Grammar (agents and edges are 1-based in files)::

    name = "demo"                 # optional, defaults to the file stem
    description = "..."           # optional

    [formation]
    m = 2                         # 2 or 3
    n = 3
    edges = [[2, 1], [2, 3], [3, 1]]      # (tail, head): the tail estimates
    shape = "triangle"            # triangle | square | tetrahedron | hexagon
    side = 10.0
    # or: positions = [[x, y], ...]      one row per agent
    # or: zstar = [[x, y], ...]          one row per edge

    [initial]
    mode = "box"                  # box | perturbed | explicit
    box = 100.0                   # cube edge for mode = box
    box_min = 0.0
    fraction = 0.1                # offset bound for mode = perturbed
    speed_cap = 2.0
    # p = [[...]], v = [[...]]    for mode = explicit

    [controller]
    variant = "estimator1"        # gradient | hamiltonian_family | mismatched
                                  # | estimator1 | estimator2 | motion
    mu = [...]                    # one per edge
    mu_hat0 = [...]               # optional, zeros by default
    kappa = 1.0
    lam = 0.5
    c1 = 1.0
    c2 = 1.0
    # motion variant, either explicit parameter directions
    s_v = 0.15
    mu_v = [...]
    mu_tilde_v = [...]
    s_omega = 0.25
    mu_omega = [...]
    mu_tilde_omega = [...]
    # or a rigid-body target fitted on the motion bases
    v_c = [...]
    omega = [...]                 # scalar in the plane
    scale = 1.0

    [sim]
    h = 1e-3
    t_end = 60.0
    record_every = 10
    seed = 0

    [output]
    dir = "out/demo"
    steady_window = 5.0
    steady_tol = 1e-3
    figures = true
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import graph as gr
from .control import ESTIMATOR2, MOTION, VARIANTS, ControllerConfig
from .errors import ConfigError, InvalidInputError, PreconditionError
from .graph import FormationGraph, ShapeSpec
from .motion import MotionParams, assemble_motion, fit_motion_parameters
from .simulator import InitialSpec, SimConfig

SECTIONS = ("formation", "initial", "controller", "sim", "output")
_KEYS = {
    "formation": {"m", "n", "edges", "shape", "side", "positions", "zstar"},
    "initial": {"mode", "box", "box_min", "fraction", "speed_cap", "p", "v"},
    "controller": {
        "variant", "mu", "mu_hat0", "kappa", "lam", "c1", "c2", "s_v", "s_omega",
        "mu_v", "mu_tilde_v", "mu_omega", "mu_tilde_omega", "v_c", "omega", "scale",
    },
    "sim": {"h", "t_end", "record_every", "seed"},
    "output": {"dir", "steady_window", "steady_tol", "figures"},
}
SHAPES = {
    "triangle": (2, 3),
    "square": (2, 4),
    "tetrahedron": (3, 4),
    "hexagon": (2, 6),
}


@dataclass
class Scenario:
    name: str
    description: str
    sim: SimConfig
    motion: MotionParams | None
    out_dir: Path | None
    steady_window: float
    steady_tol: float
    figures: bool
    source: Path | None = None

    @property
    def graph(self) -> FormationGraph:
        return self.sim.graph

    @property
    def shape(self) -> ShapeSpec:
        return self.sim.shape

    @property
    def controller(self) -> ControllerConfig:
        return self.sim.controller

    def with_overrides(
        self, seed: int | None = None, h: float | None = None, t_end: float | None = None
    ) -> Scenario:
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if h is not None:
            changes["h"] = h
        if t_end is not None:
            changes["t_end"] = t_end
        try:
            sim = replace(self.sim, **changes)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
        return replace(self, sim=sim)


class _Locator:
    """Maps ``section.key`` to the line where the key is written."""

    _header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]")
    _assign = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")

    def __init__(self, text: str):
        self.lines: dict[str, int] = {}
        section = ""
        for no, line in enumerate(text.splitlines(), start=1):
            if (mh := self._header.match(line)) is not None:
                section = mh.group(1)
                self.lines.setdefault(section, no)
            elif (ma := self._assign.match(line)) is not None:
                key = f"{section}.{ma.group(1)}" if section else ma.group(1)
                self.lines.setdefault(key, no)

    def line(self, section: str, key: str | None = None) -> int | None:
        if key is not None and f"{section}.{key}" in self.lines:
            return self.lines[f"{section}.{key}"]
        return self.lines.get(section)


class _Reader:
    def __init__(self, doc: dict, loc: _Locator, path: str | None):
        self.doc, self.loc, self.path = doc, loc, path

    def fail(self, msg: str, section: str, key: str | None = None) -> ConfigError:
        where = f"[{section}] {key}: " if key else f"[{section}]: "
        return ConfigError(where + msg, self.loc.line(section, key), self.path)

    def section(self, name: str, required: bool = True) -> dict:
        sec = self.doc.get(name)
        if sec is None:
            if required:
                raise ConfigError(f"missing section [{name}]", None, self.path)
            return {}
        if not isinstance(sec, dict):
            raise self.fail("must be a table", name)
        unknown = set(sec) - _KEYS[name]
        if unknown:
            key = sorted(unknown)[0]
            raise self.fail(f"unknown key (allowed: {', '.join(sorted(_KEYS[name]))})", name, key)
        return sec

    def number(self, sec: dict, s: str, key: str, default=None, positive=False, integer=False):
        if key not in sec:
            if default is None:
                raise self.fail("required key is missing", s, key)
            return default
        val = sec[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise self.fail(f"expected a number, got {val!r}", s, key)
        if integer and not isinstance(val, int):
            raise self.fail("expected an integer", s, key)
        if not np.isfinite(val):
            raise self.fail("must be finite", s, key)
        if positive and val <= 0:
            raise self.fail("must be positive", s, key)
        return val

    def array(self, sec: dict, s: str, key: str, shape: tuple[int, ...] | None = None):
        if key not in sec:
            return None
        try:
            arr = np.array(sec[key], dtype=float)
        except (TypeError, ValueError):
            raise self.fail("expected a numeric array", s, key) from None
        if not np.all(np.isfinite(arr)):
            raise self.fail("entries must be finite", s, key)
        if shape is not None:
            if arr.ndim != len(shape):
                raise self.fail(f"expected shape {shape}, got {arr.shape}", s, key)
            want = tuple(arr.shape[i] if d == -1 else d for i, d in enumerate(shape))
            if arr.shape != want:
                raise self.fail(f"expected shape {shape}, got {arr.shape}", s, key)
        return arr


def _formation(r: _Reader) -> tuple[FormationGraph, ShapeSpec]:
    s = "formation"
    sec = r.section(s)
    m = r.number(sec, s, "m", integer=True)
    if m not in (2, 3):
        raise r.fail("must be 2 or 3", s, "m")
    n = r.number(sec, s, "n", integer=True)
    if n < 2:
        raise r.fail("needs at least two agents", s, "n")
    edges_raw = sec.get("edges")
    if edges_raw is None:
        raise r.fail("required key is missing", s, "edges")
    try:
        E = np.array(edges_raw)
    except ValueError:
        raise r.fail("edges must be [tail, head] pairs", s, "edges") from None
    if E.ndim != 2 or E.shape[1] != 2 or E.size == 0 or not np.issubdtype(E.dtype, np.integer):
        raise r.fail("edges must be a non-empty list of integer [tail, head] pairs", s, "edges")
    if E.min() < 1 or E.max() > n:
        raise r.fail(f"agent indices must lie in 1..{n}", s, "edges")
    try:
        G = FormationGraph(n, tuple((int(t) - 1, int(h) - 1) for t, h in E))
    except InvalidInputError as exc:
        raise r.fail(str(exc), s, "edges") from None

    given = [k for k in ("shape", "positions", "zstar") if k in sec]
    if len(given) != 1:
        raise r.fail("give exactly one of shape, positions, zstar", s)
    try:
        if "shape" in sec:
            name = sec["shape"]
            if name not in SHAPES:
                raise r.fail(f"unknown shape {name!r} (known: {', '.join(SHAPES)})", s, "shape")
            if SHAPES[name] != (m, n):
                raise r.fail(f"shape {name} needs m = {SHAPES[name][0]}, n = {SHAPES[name][1]}", s, "shape")
            side = r.number(sec, s, "side", default=1.0, positive=True)
            P = named_shape(name, side)
            return G, ShapeSpec.from_positions(G, P)
        if "positions" in sec:
            P = r.array(sec, s, "positions", (n, m))
            return G, ShapeSpec.from_positions(G, P)
        Z = r.array(sec, s, "zstar", (G.num_edges, m))
        return G, ShapeSpec.from_relative(G, Z, m)
    except InvalidInputError as exc:
        raise r.fail(str(exc), s, given[0]) from None


def named_shape(name: str, side: float) -> np.ndarray:
    """Reference placement of one of the bundled shapes."""
    if name == "triangle":
        return gr.equilateral_triangle(side)
    if name == "square":
        return side * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    if name == "tetrahedron":
        return gr.regular_tetrahedron(side)
    if name == "hexagon":
        return gr.regular_hexagon(side)
    raise InvalidInputError(f"unknown shape {name!r}")


def _initial(r: _Reader, G: FormationGraph, m: int) -> InitialSpec:
    s = "initial"
    sec = r.section(s)
    mode = sec.get("mode", "box")
    if mode not in ("box", "perturbed", "explicit"):
        raise r.fail(f"unknown mode {mode!r}", s, "mode")
    kw: dict[str, Any] = {"mode": mode}
    kw["speed_cap"] = r.number(sec, s, "speed_cap", default=0.0)
    if kw["speed_cap"] < 0:
        raise r.fail("must be non-negative", s, "speed_cap")
    if mode == "box":
        kw["box_size"] = r.number(sec, s, "box", default=100.0, positive=True)
        kw["box_min"] = r.number(sec, s, "box_min", default=0.0)
    elif mode == "perturbed":
        kw["fraction"] = r.number(sec, s, "fraction", default=0.1)
        if kw["fraction"] < 0:
            raise r.fail("must be non-negative", s, "fraction")
    else:
        if "p" not in sec:
            raise r.fail("explicit mode needs p", s, "p")
        kw["p"] = r.array(sec, s, "p", (G.n, m))
        kw["v"] = r.array(sec, s, "v", (G.n, m))
    return InitialSpec(**kw)


def _edge_vector(r: _Reader, sec: dict, key: str, E: int):
    return r.array(sec, "controller", key, (E,))


def _controller(
    r: _Reader, G: FormationGraph, shape: ShapeSpec
) -> tuple[ControllerConfig, MotionParams | None]:
    s = "controller"
    sec = r.section(s)
    E = G.num_edges
    variant = sec.get("variant")
    if variant not in VARIANTS:
        raise r.fail(f"variant must be one of {', '.join(VARIANTS)}", s, "variant")
    kw: dict[str, Any] = {"variant": variant}
    kw["lam"] = r.number(sec, s, "lam", default=1.0)
    if not 0 <= kw["lam"] <= 1:
        raise r.fail("must lie in [0, 1]", s, "lam")
    kw["kappa"] = r.number(sec, s, "kappa", default=1.0, positive=True)
    kw["c1"] = r.number(sec, s, "c1", default=1.0, positive=True)
    kw["c2"] = r.number(sec, s, "c2", default=1.0, positive=True)
    kw["mu"] = _edge_vector(r, sec, "mu", E)
    kw["mu_hat0"] = _edge_vector(r, sec, "mu_hat0", E)
    if variant in ("mismatched", "estimator1", ESTIMATOR2) and kw["mu"] is None:
        raise r.fail(f"variant {variant} needs mu", s, "mu")
    motion = None
    if variant == MOTION:
        motion = _motion(r, sec, G, shape, kw["c1"])
        kw["A"], kw["A_v"] = motion.A, motion.A_v
    try:
        return ControllerConfig(**kw), motion
    except InvalidInputError as exc:
        raise r.fail(str(exc), s) from None


def _motion(r: _Reader, sec: dict, G: FormationGraph, shape: ShapeSpec, c1: float) -> MotionParams:
    s = "controller"
    E = G.num_edges
    scale = r.number(sec, s, "scale", default=1.0, positive=True)
    explicit = [k for k in ("mu_v", "mu_tilde_v", "mu_omega", "mu_tilde_omega") if k in sec]
    target = [k for k in ("v_c", "omega") if k in sec]
    if explicit and target:
        raise r.fail("give explicit motion parameters or a v_c/omega target, not both", s, target[0])
    if target:
        v_c = r.array(sec, s, "v_c", (shape.m,))
        v_c = np.zeros(shape.m) if v_c is None else v_c
        k = 1 if shape.m == 2 else 3
        om = r.array(sec, s, "omega")
        om = np.zeros(k) if om is None else np.atleast_1d(om)
        if om.shape != (k,):
            raise r.fail(f"omega needs {k} component(s)", s, "omega")
        try:
            mu, mu_t, res = fit_motion_parameters(G, shape, v_c, om if k == 3 else float(om[0]))
        except PreconditionError as exc:
            raise r.fail(str(exc), s, "v_c" if "v_c" in sec else "omega") from None
        return assemble_motion(G, mu, mu_t, c1=c1, scale=scale)
    mu = np.zeros(E)
    mu_t = np.zeros(E)
    for part, s_key in (("v", "s_v"), ("omega", "s_omega")):
        a = _edge_vector(r, sec, f"mu_{part}", E)
        b = _edge_vector(r, sec, f"mu_tilde_{part}", E)
        if (a is None) != (b is None):
            missing = f"mu_{part}" if a is None else f"mu_tilde_{part}"
            raise r.fail("motion parameters come in (mu, mu_tilde) pairs", s, missing)
        if a is None:
            continue
        gain = r.number(sec, s, s_key, default=1.0)
        mu += gain * a
        mu_t += gain * b
    return assemble_motion(G, mu, mu_t, c1=c1, scale=scale)


def parse_scenario(text: str, path: str | Path | None = None) -> Scenario:
    """Parse scenario text into a ready-to-run ``Scenario``.

    Raises:
        ConfigError: with the offending line when the document is malformed or
            describes an inconsistent simulation.
    """
    spath = None if path is None else str(path)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"TOML syntax error: {exc}", int(m.group(1)) if m else None, spath) from None
    loc = _Locator(text)
    r = _Reader(doc, loc, spath)
    for key in doc:
        if key not in SECTIONS and key not in ("name", "description"):
            raise ConfigError(f"unknown top-level key {key!r}", loc.line(key), spath)

    G, shape = _formation(r)
    initial = _initial(r, G, shape.m)
    ctrl, motion = _controller(r, G, shape)

    s = "sim"
    sec = r.section(s, required=False)
    h = r.number(sec, s, "h", default=1e-3, positive=True)
    t_end = r.number(sec, s, "t_end", default=10.0, positive=True)
    rec = r.number(sec, s, "record_every", default=10, integer=True)
    seed = r.number(sec, s, "seed", default=0, integer=True)
    if rec < 1:
        raise r.fail("must be a positive integer", s, "record_every")
    if t_end < h:
        raise r.fail("must be at least one step", s, "t_end")

    s = "output"
    out = r.section(s, required=False)
    out_dir = Path(out["dir"]) if "dir" in out else None
    window = r.number(out, s, "steady_window", default=0.2 * t_end, positive=True)
    tol = r.number(out, s, "steady_tol", default=1e-3, positive=True)
    figures = out.get("figures", True)
    if not isinstance(figures, bool):
        raise r.fail("expected true or false", s, "figures")
    if window >= t_end:
        raise r.fail("must be shorter than t_end", s, "steady_window")

    name = doc.get("name") or (Path(path).stem if path is not None else "scenario")
    if not isinstance(name, str):
        raise ConfigError("name must be a string", loc.line("name"), spath)
    cfg = SimConfig(G, shape, ctrl, initial, h=h, t_end=t_end, record_every=rec, seed=seed, name=name)
    return Scenario(
        name=name,
        description=str(doc.get("description", "")),
        sim=cfg,
        motion=motion,
        out_dir=out_dir,
        steady_window=window,
        steady_tol=tol,
        figures=figures,
        source=None if path is None else Path(path),
    )


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", None, str(p)) from None
    return parse_scenario(text, p)


def bundled_dir() -> Path:
    """Directory holding the scenarios shipped with the package."""
    return Path(__file__).with_name("scenarios")


def bundled(name: str) -> Path:
    p = bundled_dir() / f"{name}.toml"
    if not p.exists():
        raise ConfigError(f"no bundled scenario named {name!r}")
    return p


def resolve(spec: str | Path) -> Path:
    """A path on disk, or the name of a bundled scenario."""
    p = Path(spec)
    if p.exists():
        return p
    if p.suffix == "" and (bundled_dir() / f"{p.name}.toml").exists():
        return bundled_dir() / f"{p.name}.toml"
    raise ConfigError("scenario not found", None, str(spec))
