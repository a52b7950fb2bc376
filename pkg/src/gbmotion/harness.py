"""Experiment configuration, runners, error norms and file emission.

Every runner takes a :class:`SimulationConfig`, writes (when ``cfg.out`` is
set) snapshot CSVs, a JSONL step log, a ``manifest.json`` and an SVG of the
final curves, and returns a :class:`RunResult`.
"""

from __future__ import annotations

import configparser
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import cartesian, closed, parabolic, pdae
from .curve import GridCurve, _polyline, atomic_write_text, regrid_uniform
from .integrators import NewtonConfig, NewtonError, RunLog, backward_euler_step, forward_euler_step
from .motion import ADJUST_MODES, DEFAULT_ALPHA, MotionCoefficients, kappa_ss_identity_gap
from .quarterloop import CURVE_NAMES, DEFAULT_DOMAIN, InitialShape, write_snapshot
from .wellposedness import AngleConfig, rect_grid, wellposedness_report

FORMULATIONS = ("parabolic", "pdae", "cartesian")
INITIAL_SHAPES = ("quarterloop", "star", "circle")
SCHEMES = ("implicit", "explicit")


class ConfigError(ValueError):
    pass


class SolverFailure(RuntimeError):
    """A time step failed; ``step`` is the 1-based index of the failed step."""

    def __init__(self, msg, step=None, t=None):
        super().__init__(msg)
        self.step = step
        self.t = t


@dataclass
class SimulationConfig:
    """Flat experiment description; every field can be set from a config file or flag.

    ``N`` is one count per curve (three for the quarter loop, one for closed
    curves); when it is ``None`` the counts follow from the target spacing
    ``ds``.  ``snapshot_every = 0`` writes only the first and last states.
    """

    formulation: str = "pdae"
    m: float = 0.5
    alpha: float = DEFAULT_ALPHA
    mode: str = "fourth-order"
    tangential: str = "midpoint"
    N: tuple | None = None
    ds: float | None = 0.1
    dt: float = 1e-3
    tEnd: float = 0.02
    domain: tuple = DEFAULT_DOMAIN
    initial: str = "quarterloop"
    law: str = "sd"
    amplitude: float = 0.3
    radius: float = 1.0
    A: float = 1.0
    B: float = 1.0
    scheme: str = "implicit"
    out: str | None = None
    snapshot_every: int = 0
    tol: float = 1e-10
    max_iter: int = 30
    slope_max: float = cartesian.DEFAULT_SLOPE_MAX
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation must be one of {FORMULATIONS}")
        if self.initial not in INITIAL_SHAPES:
            raise ConfigError(f"initial must be one of {INITIAL_SHAPES}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.mode not in ADJUST_MODES:
            raise ConfigError(f"mode must be one of {ADJUST_MODES}")
        if self.law not in closed.LAWS:
            raise ConfigError(f"law must be one of {closed.LAWS}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.tEnd >= self.dt:
            raise ConfigError("tEnd must be at least dt")
        if not 0.0 < self.m < 2.0:
            raise ConfigError("m must lie in (0, 2)")
        if not (self.A > 0 and self.B > 0):
            raise ConfigError("mobilities A and B must be positive")
        if self.N is not None:
            n = (self.N,) if np.isscalar(self.N) else tuple(self.N)
            if any(int(k) < 6 for k in n):
                raise ConfigError("N must be at least 6 on every curve")
            self.N = tuple(int(k) for k in n)
        elif self.ds is None or not self.ds > 0:
            raise ConfigError("give N or a positive ds")
        if len(self.domain) != 2 or not self.domain[0] < 0 < self.domain[1]:
            raise ConfigError("domain must be (left < 0, right > 0)")
        if self.scheme == "explicit" and self.formulation != "parabolic":
            raise ConfigError("explicit stepping exists only for the parabolic formulation")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        return self

    @property
    def coeffs(self) -> MotionCoefficients:
        return MotionCoefficients(self.A, self.B)

    @property
    def newton(self) -> NewtonConfig:
        return NewtonConfig(tol=self.tol, max_iter=self.max_iter)

    def replace(self, **kw) -> "SimulationConfig":
        d = asdict(self)
        d.update(kw)
        return SimulationConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domain"] = list(self.domain)
        d["N"] = None if self.N is None else list(self.N)
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(SimulationConfig)}


def _coerce(key, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    raw = raw.strip()
    if raw.lower() in ("none", "null", ""):
        return None
    kind = _FIELD_TYPES[key]
    try:
        if key in ("N", "domain"):
            vals = [v for v in raw.replace("(", "").replace(")", "").replace("[", "").replace("]", "").split(",") if v.strip()]
            return tuple(int(v) for v in vals) if key == "N" else tuple(float(v) for v in vals)
        if "int" in kind and "float" not in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def load_config(path=None, **overrides) -> SimulationConfig:
    """Read a flat ``key = value`` file (``#`` comments), then apply overrides."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string("[simulation]\n" + p.read_text())
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        values = {k: _coerce(k, v) for k, v in parser["simulation"].items()}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SimulationConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def step_sizes(tEnd, dt):
    """Fixed steps of ``dt`` to ``tEnd``; a final shorter step absorbs any remainder."""
    n = int(math.floor(tEnd / dt + 1e-9))
    steps = [dt] * n
    rest = tEnd - n * dt
    if rest > 1e-12 * tEnd:
        steps.append(rest)
    return steps


# ------------------------------------------------------------------ norms

def _seg_distances(P, Q, chunk=512):
    """Distance from each point of P to the polyline through Q."""
    a = Q[:-1]
    ab = Q[1:] - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    L2 = np.where(L2 > 0, L2, 1.0)
    out = np.empty(len(P))
    for s in range(0, len(P), chunk):
        p = P[s:s + chunk, None, :]
        t = np.clip(np.einsum("kij,ij->ki", p - a, ab) / L2, 0.0, 1.0)
        q = a + t[..., None] * ab
        out[s:s + chunk] = np.sqrt(np.min(np.sum((p - q) ** 2, axis=-1), axis=1))
    return out


def node_distances(a: GridCurve, b: GridCurve) -> np.ndarray:
    if a.closed != b.closed:
        raise ValueError(f"topology mismatch: {a.topology} vs {b.topology}")
    return _seg_distances(a.interior, _polyline(b))


def curve_distance(a: GridCurve, b: GridCurve):
    """``(L2, Linf)`` of the distance from the nodes of ``a`` to the polyline of ``b``.

    For open curves ``b``'s polyline runs through its two end faces as well
    as its nodes, so every node of a coarser ``a`` on the same physical curve
    lies within its reach regardless of how the staggered grids line up.
    """
    d = node_distances(a, b)
    return float(np.sqrt(np.mean(d**2))), float(np.max(d))


def curves_distance(A, B):
    """Pooled ``(L2, Linf)`` over matching curves of two curve families."""
    d = np.concatenate([node_distances(a, b) for a, b in zip(A, B)])
    return float(np.sqrt(np.mean(d**2))), float(np.max(d))


# --------------------------------------------------------------- results

@dataclass
class RunResult:
    state: object
    config: SimulationConfig
    log: RunLog
    snapshots: list = field(default_factory=list)
    monitors: dict = field(default_factory=dict)
    series: list = field(default_factory=list)
    wall_time: float = 0.0
    out: Path | None = None


def versions() -> dict:
    from . import __version__
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "gbmotion": __version__}


def write_manifest(out, cfg: SimulationConfig, wall_time: float, extra=None) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"config": cfg.to_dict(), "versions": versions(), "wall_time_s": wall_time}
    doc.update(extra or {})
    atomic_write_text(out / "manifest.json", json.dumps(doc, indent=1, sort_keys=True, default=float))
    return out / "manifest.json"


def write_svg(curves, path, junction=None, size=640, pad=10.0) -> Path:
    """Static SVG: one polyline per curve, a dot at the junction."""
    polys = [c.interior if c.closed else _polyline(c) for c in curves]
    allp = np.vstack(polys)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    scale = (size - 2 * pad) / span.max()
    w, h = span * scale + 2 * pad

    def xy(p):
        return pad + (p[0] - lo[0]) * scale, pad + (hi[1] - p[1]) * scale

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:.1f}" height="{h:.1f}" '
             f'viewBox="0 0 {w:.1f} {h:.1f}">',
             f'<rect width="{w:.1f}" height="{h:.1f}" fill="white"/>']
    for k, (c, P) in enumerate(zip(curves, polys)):
        if c.closed:
            P = np.vstack([P, P[:1]])
        pts = " ".join("{:.2f},{:.2f}".format(*xy(p)) for p in P)
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{colors[k % 4]}" stroke-width="1.2"/>')
    if junction is not None:
        x, y = xy(junction)
        lines.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="black"/>')
    lines.append("</svg>")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return Path(path)


# -------------------------------------------------------- quarter loop

def _shape(cfg):
    return InitialShape(domain=tuple(cfg.domain))


def quarterloop_problem(cfg: SimulationConfig):
    """Initial state and step problem for ``cfg.formulation``."""
    shape = _shape(cfg)
    if cfg.formulation == "parabolic":
        st = parabolic.initial_state(cfg.m, ds=cfg.ds, N=cfg.N, shape=shape)
        prob = parabolic.ParabolicQuarterLoop.for_state(st, alpha=cfg.alpha, mode=cfg.mode,
                                                        coeffs=cfg.coeffs, tangential=cfg.tangential)
    elif cfg.formulation == "pdae":
        st = pdae.initial_state(cfg.m, ds=cfg.ds, N=cfg.N, shape=shape)
        prob = pdae.PdaeQuarterLoop.for_state(st, coeffs=cfg.coeffs)
    else:
        if cfg.A != 1.0 or cfg.B != 1.0:
            raise ConfigError("the height-function formulation uses unit mobilities")
        h = cfg.ds if cfg.N is None else (cfg.domain[1] / cfg.N[-1])
        st = cartesian.CartesianState.initial(cfg.m, h, shape)
        prob = cartesian.CartesianProblem.for_state(st, slope_max=cfg.slope_max)
    return st, prob


def _curves_of(state):
    if isinstance(state, cartesian.CartesianState):
        return cartesian.to_parametric(state)
    return state.curves


def _snapshot(state, cfg, out, tag, prob=None):
    if isinstance(state, cartesian.CartesianState):
        return cartesian.write_cartesian_snapshot(state, out, tag)
    extra = {"formulation": cfg.formulation}
    if cfg.formulation == "parabolic":
        extra["alpha"] = cfg.alpha
    if isinstance(state, pdae.PdaeState):
        extra["kappaGhost"] = [float(v) for v in state.kappa_ghost]
    return write_snapshot(state, out, tag, extra)


def _pdae_monitors(state):
    return {"constraint_drift": pdae.constraint_drift(state),
            "chord_spread": max(pdae.chord_spread(c) for c in state.curves)}


def run_quarterloop(cfg: SimulationConfig, state=None) -> RunResult:
    """Quarter-loop evolution from the shared initial shape (or ``state``) to ``cfg.tEnd``."""
    if cfg.initial != "quarterloop":
        raise ConfigError("run_quarterloop needs initial = quarterloop")
    st0, prob = quarterloop_problem(cfg)
    st = st0 if state is None else state
    out = Path(cfg.out) if cfg.out else None
    log = RunLog(out / "log.jsonl" if out else None)
    snaps = []
    monitors = {"max_constraint_drift": 0.0, "max_chord_spread": 0.0} if cfg.formulation == "pdae" else {}
    t0 = time.perf_counter()
    newton = cfg.newton
    if cfg.scheme == "explicit":
        st = parabolic.closure_solve(st, newton, problem=prob)
    if out:
        snaps.append(_snapshot(st, cfg, out / "snapshots", "step000000"))
    steps = step_sizes(cfg.tEnd, cfg.dt)
    for k, dt in enumerate(steps, start=1):
        try:
            if cfg.scheme == "explicit":
                st = forward_euler_step(prob, st, dt, newton)
                rep = st.extras.get("closure_report")
            else:
                st, rep = backward_euler_step(prob, st, dt, newton)
        except NewtonError as exc:
            raise SolverFailure(f"step {k} (t = {st.t:.6g}) failed: {exc}", k, st.t) from exc
        log.append(k, st.t, rep, dt)
        if monitors:
            mon = _pdae_monitors(st)
            monitors["max_constraint_drift"] = max(monitors["max_constraint_drift"], mon["constraint_drift"])
            monitors["max_chord_spread"] = max(monitors["max_chord_spread"], mon["chord_spread"])
        last = k == len(steps)
        if out and (last or (cfg.snapshot_every and k % cfg.snapshot_every == 0)):
            snaps.append(_snapshot(st, cfg, out / "snapshots", f"step{k:06d}"))
    wall = time.perf_counter() - t0
    junction = np.asarray(st.junction, dtype=float)
    monitors["junction"] = [float(v) for v in junction]
    if out:
        write_svg(_curves_of(st), out / "final.svg", junction)
        write_manifest(out, cfg, wall, {"steps": len(steps), "monitors": monitors})
    return RunResult(st, cfg, log, snaps, monitors, wall_time=wall, out=out)


# ------------------------------------------------------------ closed curves

def closed_initial(cfg: SimulationConfig) -> GridCurve:
    n = cfg.N[0] if cfg.N is not None else max(6, int(round(2 * np.pi * cfg.radius / cfg.ds)))
    if cfg.initial == "star":
        return closed.star(n, cfg.amplitude)
    if cfg.initial == "circle":
        return closed.circle(n, cfg.radius)
    raise ConfigError("closed runs need initial = star or circle")


def run_star(cfg: SimulationConfig, curve: GridCurve | None = None) -> RunResult:
    """Closed-curve evolution with a per-step area series ``(t, area, length, ratio)``."""
    if cfg.formulation == "cartesian":
        raise ConfigError("closed curves need a parametric formulation")
    c0 = closed_initial(cfg) if curve is None else curve
    st = closed.ClosedState(c0)
    prob = closed.ClosedCurveProblem(c0.N, cfg.law, cfg.formulation, cfg.coeffs,
                                     alpha=cfg.alpha if cfg.formulation == "parabolic" and cfg.law == "sd" else 0.0,
                                     mode=cfg.mode)
    out = Path(cfg.out) if cfg.out else None
    log = RunLog(out / "log.jsonl" if out else None)
    series = [(st.t, st.area, st.length, st.isoperimetric_ratio)]
    snaps = []
    snapdir = out / "snapshots" if out else None
    if out:
        snapdir.mkdir(parents=True, exist_ok=True)
        from .curve import write_curve_csv
        write_curve_csv(st.curve, snapdir / "step000000_curve.csv")
        snaps.append(snapdir / "step000000_curve.csv")
    t0 = time.perf_counter()
    steps = step_sizes(cfg.tEnd, cfg.dt)
    for k, dt in enumerate(steps, start=1):
        try:
            if cfg.scheme == "explicit":
                st, rep = forward_euler_step(prob, st, dt), None
            else:
                st, rep = backward_euler_step(prob, st, dt, cfg.newton)
        except NewtonError as exc:
            raise SolverFailure(f"step {k} (t = {st.t:.6g}) failed: {exc}", k, st.t) from exc
        if not np.all(np.isfinite(st.curve.points)):
            raise SolverFailure(f"step {k}: non-finite node positions (unstable step size?)", k, st.t)
        log.append(k, st.t, rep, dt)
        series.append((st.t, st.area, st.length, st.isoperimetric_ratio))
        last = k == len(steps)
        if out and (last or (cfg.snapshot_every and k % cfg.snapshot_every == 0)):
            from .curve import write_curve_csv
            p = snapdir / f"step{k:06d}_curve.csv"
            write_curve_csv(st.curve, p)
            snaps.append(p)
    wall = time.perf_counter() - t0
    A0 = series[0][1]
    monitors = {"area_rel_change": abs(series[-1][1] - A0) / abs(A0),
                "max_area_rel_change": max(abs(s[1] - A0) for s in series) / abs(A0),
                "isoperimetric_ratio": series[-1][3]}
    if out:
        rows = ["t,area,length,isoperimetric"] + [f"{t:.17g},{a:.17g},{l:.17g},{q:.17g}" for t, a, l, q in series]
        atomic_write_text(out / "area.csv", "\n".join(rows) + "\n")
        write_svg([st.curve], out / "final.svg")
        write_manifest(out, cfg, wall, {"steps": len(steps), "monitors": monitors})
    return RunResult(st, cfg, log, snaps, monitors, series, wall, out)


# ------------------------------------------------------------- convergence

@dataclass
class ConvergenceReport:
    """Rows ``(ds, dt, L2, Linf)`` sorted by decreasing ``ds`` plus rates between rows.

    ``reference = "successive"`` compares each level with the next finer one
    (``e_k = d(u_k, u_{k+1})``); ``"finest"`` compares every level with the
    finest.  Rates are ``log2(e_k / e_{k+1})``.
    """

    rows: list
    reference: str
    formulation: str
    rates_l2: list = field(default_factory=list)
    rates_linf: list = field(default_factory=list)
    levels_completed: int = 0
    monitors: list = field(default_factory=list)
    complete: bool = True

    def __post_init__(self):
        self.compute_rates()

    def compute_rates(self):
        r = self.rows
        self.rates_l2 = [float(np.log2(r[k][2] / r[k + 1][2])) for k in range(len(r) - 1)]
        self.rates_linf = [float(np.log2(r[k][3] / r[k + 1][3])) for k in range(len(r) - 1)]

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        lines = [f"{'ds':>8} {'dt':>10} {'L2':>12} {'rate':>7} {'Linf':>12} {'rate':>7}"]
        for k, (ds, dt, l2, li) in enumerate(self.rows):
            r2 = f"{self.rates_l2[k - 1]:7.4f}" if k else " " * 7
            ri = f"{self.rates_linf[k - 1]:7.4f}" if k else " " * 7
            lines.append(f"{ds:8.4g} {dt:10.4g} {l2:12.4e} {r2} {li:12.4e} {ri}")
        return "\n".join(lines)


class ConvergenceAborted(RuntimeError):
    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


def run_convergence(cfg: SimulationConfig, levels, reference: str = "successive") -> ConvergenceReport:
    """Self-convergence study over ``levels = [(ds, dt), ...]`` at ``cfg.tEnd``."""
    if reference not in ("successive", "finest"):
        raise ConfigError("reference must be 'successive' or 'finest'")
    levels = sorted(((float(a), float(b)) for a, b in levels), key=lambda l: -l[0])
    if len(levels) < 3:
        raise ConfigError("a convergence study needs at least 3 levels")
    finals, monitors = [], []
    out = Path(cfg.out) if cfg.out else None
    for ds, dt in levels:
        sub = cfg.replace(ds=ds, dt=dt, N=None, out=str(out / f"ds{ds:g}") if out else None)
        try:
            res = run_quarterloop(sub)
        except SolverFailure as exc:
            rep = _convergence_rows(finals, levels, reference, cfg, monitors, complete=False)
            raise ConvergenceAborted(f"level ds = {ds:g} failed: {exc}", rep) from exc
        finals.append(_curves_of(res.state))
        monitors.append(dict(res.monitors, ds=ds, dt=dt, wall_time_s=res.wall_time))
    rep = _convergence_rows(finals, levels, reference, cfg, monitors)
    if out:
        atomic_write_text(out / "convergence.json", json.dumps(rep.to_dict(), indent=1, sort_keys=True))
        atomic_write_text(out / "convergence.txt", rep.table() + "\n")
    return rep


def _convergence_rows(finals, levels, reference, cfg, monitors, complete=True):
    rows = []
    n = len(finals)
    for k in range(n - 1):
        ref = finals[k + 1] if reference == "successive" else finals[-1]
        l2, li = curves_distance(finals[k], ref)
        rows.append((levels[k][0], levels[k][1], l2, li))
    return ConvergenceReport(rows, reference, cfg.formulation, levels_completed=n,
                             monitors=monitors, complete=complete)


# ------------------------------------------------------------ well-posedness

def run_wellposedness(formulation="parabolic", m=None, angles=None, grid=None, out=None) -> dict:
    if angles is None:
        if m is None:
            raise ConfigError("give m or (theta12, theta13)")
        ang = AngleConfig.from_m(m)
    else:
        ang = AngleConfig(*angles)
    if formulation not in ("parabolic", "pdae"):
        raise ConfigError("well-posedness formulation must be parabolic or pdae")
    grid = rect_grid() if grid is None else grid
    report = wellposedness_report(formulation, ang, grid)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        atomic_write_text(Path(out) / "wellposedness.json", json.dumps(report, indent=1, sort_keys=True))
    return report


# ------------------------------------------------------------ identity sweep

def ellipse(N: int, a: float = 2.0, b: float = 1.0, fine: int = 16) -> GridCurve:
    """Ellipse ``(a cos t, b sin t)`` resampled to equal chord spacing."""
    M = fine * N
    t = 2.0 * np.pi * np.arange(M) / M
    dense = GridCurve(np.column_stack([a * np.cos(t), b * np.sin(t)]), "closed", 0)
    return regrid_uniform(dense, N)


def identity_sweep(Ns=(64, 128, 256), a=2.0, b=1.0, seed=None) -> dict:
    """Max over nodes of the fourth-derivative / ``kappa_ss`` identity gap on ellipses.

    With ``seed`` the semi-axes are drawn at random from ``[1, 3]``.
    """
    if seed is not None:
        rng = np.random.default_rng(seed)
        a, b = (float(v) for v in rng.uniform(1.0, 3.0, size=2))
    gaps = []
    for n in Ns:
        c = ellipse(int(n), a, b)
        gaps.append(max(kappa_ss_identity_gap(c, j) for j in range(1, c.N + 1)))
    slope = float(-np.polyfit(np.log(np.asarray(Ns, float)), np.log(gaps), 1)[0])
    return {"a": a, "b": b, "N": [int(n) for n in Ns], "gap": gaps, "slope": slope}


__all__ = [
    "CURVE_NAMES", "ConfigError", "ConvergenceAborted", "ConvergenceReport", "RunResult",
    "SimulationConfig", "SolverFailure", "curve_distance", "curves_distance", "ellipse",
    "identity_sweep", "load_config", "run_convergence", "run_quarterloop", "run_star",
    "run_wellposedness", "step_sizes", "write_manifest", "write_svg",
]
