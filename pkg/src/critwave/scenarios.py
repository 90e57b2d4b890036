"""Named experiments driven by JSON configurations.

Each scenario fills a :class:`Summary` with computed quantities, named
assertions (each carrying an anchor that describes the mathematical fact
being checked, and its tolerance), CSV series and SVG charts. Summaries are
serialized deterministically: sorted keys, full-precision floats, no
timings or absolute paths.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .closed_forms import (
    SolitonParams,
    eval_soliton,
    exact_quantities,
    ground_state,
    ground_state_norms,
    pde_residual,
    reduced_soliton_integrals,
    sample_soliton,
)
from .diagnostics import (
    blowup_profile_report,
    ell_from_conserved,
    energy_matched_ground_state,
    perturbation_family,
    track_modulation,
    trapping_monitor,
)
from .errors import ConfigError, InvalidInput, InvalidParameter, Undetermined, Unsupported
from .fields import conserved_quantities, hardy_integral, norms, variational_region
from .grids import BoxGrid3D, FieldState, RadialGrid, check_dim
from .identities import Cutoff, canonical_identity, identity_trace, phi_functional, pohozaev_check
from .linear import equipartition_report
from .modulation import estimate_report, fit
from .nonlinear import SolverOptions, detect_blowup, evolve, save_checkpoint
from .svg import write_chart

SCHEMA_VERSION = 1
SCENARIOS = ("soliton-check", "equipartition", "identities", "simulate", "modulate", "blowup", "report")


def jsonable(obj):
    """Plain-JSON view of results: numpy scalars/arrays unwrapped, non-finite floats named."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class RunContext:
    out: Path
    seed: int = 0
    threads: int = 1

    def rng(self, name: str) -> np.random.Generator:
        """Philox stream keyed by the run seed and a stable hash of ``name``."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode()),))
        return np.random.Generator(np.random.Philox(ss))

    def map(self, fn, items) -> list:
        items = list(items)
        if self.threads <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.threads) as ex:
            return list(ex.map(fn, items))


@dataclass
class Summary:
    scenario: str
    config: dict
    seed: int
    results: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    out: Path | None = None

    def check(self, name: str, anchor: str, value, tol, op: str = "<=", note: str = "") -> bool:
        """Record one assertion. ``op`` is one of <=, >=, <, >, in, is."""
        if value is None:
            ok = False
        elif op == "<=":
            ok = bool(value <= tol)
        elif op == ">=":
            ok = bool(value >= tol)
        elif op == "<":
            ok = bool(value < tol)
        elif op == ">":
            ok = bool(value > tol)
        elif op == "in":
            ok = bool(tol[0] <= value <= tol[1])
        elif op == "is":
            ok = bool(value is tol or value == tol)
        else:
            raise ValueError(op)
        if isinstance(value, float) and math.isnan(value):
            ok = False
        self.assertions.append(
            {"name": name, "anchor": anchor, "value": value, "tolerance": tol, "op": op, "pass": ok, "note": note}
        )
        return ok

    @property
    def passed(self) -> bool:
        return all(a["pass"] for a in self.assertions)

    def write_csv(self, name: str, header, rows) -> None:
        with open(self.out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self.artifacts.append(name)

    def write_chart(self, name: str, series: dict, **kw) -> None:
        write_chart(self.out / name, series, **kw)
        self.artifacts.append(name)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "scenario": self.scenario,
            "version": __version__,
            "backend": BACKEND,
            "seed": self.seed,
            "config": self.config,
            "results": self.results,
            "assertions": self.assertions,
            "pass": self.passed,
            "artifacts": sorted(self.artifacts + ["summary.json"]),
        }


# ---------------------------------------------------------------- parsing


def _require(cfg: dict, key: str, where: str = "config"):
    if key not in cfg:
        raise ConfigError(f"{where} is missing required key {key!r}")
    return cfg[key]


def _num(cfg: dict, key: str, default=None, kind=float):
    v = cfg.get(key, default)
    if v is None:
        return None
    try:
        if kind is int and isinstance(v, float) and not v.is_integer():
            raise ValueError
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{key!r} must be a {kind.__name__}, got {v!r}") from None


def parse_grid(spec, override: dict | None = None):
    if not isinstance(spec, dict):
        raise ConfigError("grid spec must be an object")
    spec = {**spec, **(override or {})}
    kind = spec.get("kind", "radial")
    try:
        if kind == "radial":
            return RadialGrid(_num(spec, "r_max", _require(spec, "r_max", "grid")), _num(spec, "n", _require(spec, "n", "grid"), int))
        if kind == "box":
            return BoxGrid3D(
                _num(spec, "half_width", _require(spec, "half_width", "grid")), _num(spec, "m", _require(spec, "m", "grid"), int)
            )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid grid: {exc}") from None
    raise ConfigError(f"unknown grid kind {kind!r}")


def parse_solver(spec) -> SolverOptions:
    spec = spec or {}
    if not isinstance(spec, dict):
        raise ConfigError("solver spec must be an object")
    known = {f.name for f in fields(SolverOptions)}
    extra = set(spec) - known
    if extra:
        raise ConfigError(f"unknown solver options {sorted(extra)}")
    try:
        return SolverOptions(**spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid solver options: {exc}") from None


def parse_soliton(spec, dim: int) -> SolitonParams:
    spec = dict(spec or {})
    try:
        return SolitonParams(
            ell=float(spec.get("ell", 0.0)),
            lam=float(spec.get("lam", 1.0)),
            center=spec.get("center"),
            sign=int(spec.get("sign", 1)),
            dim=dim,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid soliton params: {exc}") from None


def make_profile(spec, grid: RadialGrid, dim: int) -> np.ndarray:
    """Radial profile from a data spec: zero, bump, gaussian or ground_state."""
    r = grid.r
    if spec is None or spec == "zero":
        return np.zeros_like(r)
    if not isinstance(spec, dict):
        raise ConfigError(f"bad data spec {spec!r}")
    kind = spec.get("kind")
    if kind == "zero":
        return np.zeros_like(r)
    amp = _num(spec, "amplitude", 1.0)
    if kind == "bump":
        R = _num(spec, "radius", 1.0)
        c = _num(spec, "center", 0.0)
        p = _num(spec, "power", 4, int)
        if not R > 0:
            raise ConfigError("bump radius must be positive")
        x = np.clip(1.0 - ((r - c) / R) ** 2, 0.0, None)
        return amp * x**p
    if kind == "gaussian":
        w = _num(spec, "width", 1.0)
        c = _num(spec, "center", 0.0)
        return amp * np.exp(-(((r - c) / w) ** 2))
    if kind == "ground_state":
        lam = _num(spec, "lam", 1.0)
        return amp * lam ** (-0.5 * (dim - 2)) * ground_state(r / lam, dim)
    raise ConfigError(f"unknown data kind {kind!r}")


def _radial_state(cfg: dict, grid, dim: int, key: str = "data") -> FieldState:
    if not isinstance(grid, RadialGrid):
        raise ConfigError("this scenario needs a radial grid")
    data = cfg.get(key) or {}
    return FieldState(make_profile(data.get("u0"), grid, dim), make_profile(data.get("u1"), grid, dim), grid, dim)


def _rel(meas: float, exact: float, scale: float) -> float:
    return abs(meas - exact) / (abs(exact) if exact != 0 else scale)


# ---------------------------------------------------------------- scenarios


def _soliton_check(cfg, s: Summary, ctx: RunContext):
    dim = check_dim(_num(cfg, "dim", 3, int))
    grid = parse_grid(_require(cfg, "grid"))
    base = parse_soliton(cfg.get("soliton"), dim)
    ells = [float(v) for v in cfg.get("ells", [base.ell])]
    tol = {"grid": 1e-3, "reduced": 1e-6, "residual": 1e-10, "pohozaev": 1e-8, "velocity": 1e-3, "scale": 1e-6}
    tol.update(cfg.get("tolerances", {}))
    K = ground_state_norms(dim).K
    s.results["K"] = K

    # closed-form residual over random space-time samples
    n_samp = _num(cfg, "residual_samples", 1000, int)
    res = {}
    for d in cfg.get("residual_dims", [3, 5]):
        for ell in cfg.get("residual_ells", [0.0, 0.3, 0.7]):
            rng = ctx.rng(f"residual-{d}-{ell}")
            t = rng.uniform(-1.0, 1.0, n_samp)
            x = rng.uniform(-4.0, 4.0, (n_samp, d))
            val = float(np.max(np.abs(pde_residual(t, x, SolitonParams(ell=ell, dim=d)))))
            res[f"N={d},ell={ell}"] = val
            s.check(f"pde_residual N={d} ell={ell}", "closed-form boosted soliton solves the equation", val, tol["residual"])
    s.results["pde_residual_max"] = res

    for d in cfg.get("pohozaev_dims", [3, 4, 5]):
        v = abs(pohozaev_check(d))
        s.results.setdefault("pohozaev", {})[f"N={d}"] = v
        s.check(f"pohozaev N={d}", "Pohozaev identity for W", v, tol["pohozaev"])

    rows = []
    quantities = ("grad_sq", "dt_sq", "energy", "momentum_x1")
    for ell in ells:
        params = SolitonParams(ell=ell, lam=base.lam, center=base.center, sign=base.sign, dim=dim)
        exact = exact_quantities(ell, dim).scaled(K)
        red = reduced_soliton_integrals(ell, dim)
        entry = {"exact": exact, "reduced": {k: red[k] for k in quantities}, "ratios": exact_quantities(ell, dim).__dict__}
        meas = None
        try:
            st = sample_soliton(0.0, params, grid)
        except Unsupported:
            st = None
        if st is not None:
            cq = conserved_quantities(st, far_field=True)
            meas = {"grad_sq": cq.grad_sq, "dt_sq": cq.dt_sq, "energy": cq.E, "momentum_x1": float(cq.P[0])}
            entry["grid"] = meas
        for q in quantities:
            er = _rel(red[q], exact[q], K)
            s.check(f"reduced {q} ell={ell}", "exact norms of the boosted soliton", er, tol["reduced"])
            eg = None
            if meas is not None:
                eg = _rel(meas[q], exact[q], K)
                s.check(f"grid {q} ell={ell}", "exact norms of the boosted soliton", eg, tol["grid"])
            rows.append((ell, q, exact[q], red[q], meas[q] if meas else float("nan"), er, eg if eg is not None else float("nan")))
        if isinstance(grid, BoxGrid3D) and ell != 0.0:
            v = ell_from_conserved(st)
            err = float(np.max(np.abs(v - np.r_[ell, 0.0, 0.0])))
            g2 = BoxGrid3D(2.0 * grid.half_width, grid.m)
            st2 = sample_soliton(0.0, SolitonParams(ell=ell, lam=2.0 * base.lam, center=tuple(2.0 * c for c in base.center), sign=base.sign, dim=dim), g2)
            v2 = ell_from_conserved(st2)
            scale_err = float(np.max(np.abs(v2 - v)))
            entry["velocity_estimate"] = {"ell_hat": v, "error": err, "rescaled_ell_hat": v2, "scale_change": scale_err}
            s.check(f"velocity ell={ell}", "velocity from conserved energy and momentum", err, tol["velocity"])
            s.check(f"velocity scale invariance ell={ell}", "scale invariance of energy and momentum", scale_err, tol["scale"])
        s.results.setdefault("members", {})[f"ell={ell}"] = entry
    s.write_csv(
        "quantities.csv", ["ell", "quantity", "exact", "reduced", "grid", "rel_err_reduced", "rel_err_grid"], rows
    )
    x1 = np.linspace(-6.0, 6.0, 241)
    pts = np.zeros((x1.size, dim))
    pts[:, 0] = x1
    series = {}
    prof_rows = [[v] for v in x1]
    for ell in ells:
        u, ut = eval_soliton(0.0, pts, SolitonParams(ell=ell, dim=dim))
        series[f"ell={ell}"] = (x1, u)
        for row, a, b in zip(prof_rows, u, ut):
            row.extend([a, b])
    header = ["x1"] + [c for ell in ells for c in (f"u_ell={ell}", f"ut_ell={ell}")]
    s.write_csv("profile.csv", header, prof_rows)
    s.write_chart("profile.svg", series, title="boosted soliton along x1 at t = 0", xlabel="x1", ylabel="u")


_DEFAULT_EQUIPARTITION = [
    {"name": "u0-only", "law": "quarter_grad", "t_horizon": 4.0, "grid": {"r_max": 6.0},
     "data": {"u0": {"kind": "bump", "radius": 1.0}}},
    {"name": "u1-only", "law": "quarter_kinetic", "t_horizon": 150.0, "grid": {"r_max": 152.0},
     "data": {"u1": {"kind": "bump", "radius": 1.0}}},
    {"name": "generic", "law": "sum", "t_horizon": 16.0, "grid": {"r_max": 18.0},
     "data": {"u0": {"kind": "bump", "radius": 1.0}, "u1": {"kind": "bump", "radius": 0.8, "amplitude": 0.7}}},
]


def _equipartition_case(args):
    case, base_grid = args
    grid = parse_grid(base_grid, case.get("grid"))
    st = _radial_state(case, grid, 3)
    th = case.get("t_horizon")
    rep = equipartition_report(st, None if th is None else float(th))
    return case, grid, rep


def _equipartition(cfg, s: Summary, ctx: RunContext):
    base_grid = _require(cfg, "grid")
    if base_grid.get("kind", "radial") != "radial":
        raise ConfigError("equipartition needs a radial grid")
    if _num(cfg, "dim", 3, int) != 3:
        raise ConfigError("exact linear propagation is implemented for N = 3")
    tol = _num(cfg, "tolerance", 1e-3)
    cases = cfg.get("cases", _DEFAULT_EQUIPARTITION)
    out = ctx.map(_equipartition_case, [(c, base_grid) for c in cases])
    rows = []
    for case, grid, rep in out:
        name = case.get("name", case.get("law", "case"))
        law = case.get("law", "sum")
        e_h_plus, e_h_minus = float(rep.E_plus[-1]), float(rep.E_minus[-1])
        if law == "quarter_grad":
            value = e_h_plus / rep.grad_sq0
            limit = rep.asymptote_plus / rep.grad_sq0
            dev, dev_lim = abs(value - 0.25), abs(limit - 0.25)
            anchor = "exterior energy of (u0, 0) tends to a quarter of the gradient energy"
        elif law == "quarter_kinetic":
            value = e_h_plus / rep.dt_sq0
            limit = rep.asymptote_plus / rep.dt_sq0
            dev, dev_lim = abs(value - 0.25), abs(limit - 0.25)
            anchor = "exterior energy of (0, u1) tends to a quarter of the kinetic energy"
        elif law == "sum":
            value = (e_h_plus + e_h_minus) / rep.total
            limit = 1.0 + rep.sum_defect
            dev, dev_lim = abs(value - 1.0), abs(rep.sum_defect)
            anchor = "forward and backward exterior energies sum to the total energy"
        else:
            raise ConfigError(f"unknown law {law!r}")
        s.check(f"{name} {law} at t_horizon", anchor, dev, tol)
        s.check(f"{name} monotone forward", "exterior energy is non-increasing", bool(rep.monotone_plus), True, "is")
        s.check(f"{name} monotone backward", "exterior energy is non-increasing", bool(rep.monotone_minus), True, "is")
        s.check(f"{name} dichotomy", "one time direction keeps half the energy", bool(rep.dichotomy_ok), True, "is")
        d = rep.to_dict()
        d.update({"law": law, "value_at_horizon": value, "deviation_at_horizon": dev, "limit_from_fit": limit,
                  "deviation_of_limit": dev_lim, "grid": grid.descriptor()})
        s.results[name] = d
        rows.append((name, law, rep.t_horizon, value, limit, dev, dev_lim))
        fn = f"exterior_{name}.csv"
        s.write_csv(fn, ["t", "E_plus", "E_minus"], zip(rep.times, rep.E_plus, rep.E_minus))
        s.write_chart(
            f"exterior_{name}.svg",
            {"E_out forward": (rep.times, rep.E_plus), "E_out backward": (rep.times, rep.E_minus)},
            title=f"exterior energy, {name}",
            xlabel="t",
            ylabel="E_out",
        )
    s.write_csv("asymptotes.csv", ["case", "law", "t_horizon", "value_at_horizon", "limit_from_fit", "deviation", "deviation_of_limit"], rows)


_PRIMED_GATES = ("1'", "3'", "4'", "5")


def _identity_run(args):
    cfg, n, dim = args
    grid = parse_grid(cfg["grid"], {"n": n})
    st = _radial_state(cfg, grid, dim)
    return evolve(st, _num(cfg, "T", 1.0), parse_solver(cfg.get("solver")))


def _identities(cfg, s: Summary, ctx: RunContext):
    dim = check_dim(_num(cfg, "dim", 3, int))
    gspec = _require(cfg, "grid")
    if gspec.get("kind", "radial") != "radial":
        raise ConfigError("identity traces run on radial grids")
    n0 = _num(gspec, "n", _require(gspec, "n", "grid"), int)
    cut = cfg.get("cutoff", {"r1": 1.0, "r2": 2.5})
    try:
        cutoff = Cutoff(float(cut["r1"]), float(cut["r2"]))
    except (KeyError, TypeError, InvalidParameter) as exc:
        raise ConfigError(f"bad cutoff {cut!r}: {exc}") from None
    ids = [canonical_identity(i) for i in cfg.get("identities", ["1'", "2'", "3'", "4'", "5", "1", "2", "3", "4"])]
    gates = [canonical_identity(i) for i in cfg.get("gates", _PRIMED_GATES)]
    band = cfg.get("ratio_band", [3.2, 4.8])
    levels = [n0, 2 * (n0 - 1) + 1]  # exact halving of h; dt follows through the CFL rule
    trajs = ctx.map(_identity_run, [(cfg, n, dim) for n in levels])
    gaps = {}
    for ident in ids:
        gaps[ident] = []
        for k, tr in enumerate(trajs):
            trace = identity_trace(tr, ident, cutoff if not (ident.endswith("'") or ident == "5") else None)
            gaps[ident].append(trace.max_abs_gap)
            fn = f"identity_{ident.replace(chr(39), 'p')}_n{levels[k]}.csv"
            trace.to_csv(s.out / fn)
            s.artifacts.append(fn)
    phis = [phi_functional(tr) for tr in trajs]
    gaps["phi"] = [float(np.max(np.abs(p.corrected_gap))) for p in phis]
    table = {}
    for ident, (g1, g2) in gaps.items():
        ratio = g1 / g2 if g2 > 0 else None
        table[ident] = {"gap_coarse": g1, "gap_fine": g2, "ratio": ratio}
        if ident in gates:
            note = "" if ratio is not None else "gap vanishes identically at both resolutions; ratio undefined"
            s.check(f"identity {ident} refinement ratio", f"virial identity {ident}", ratio, band, "in", note)
    s.results["identities"] = table
    s.results["levels"] = levels
    s.results["drift"] = [tr.max_drift for tr in trajs]
    s.results["phi_energy_offset"] = phis[0].energy_offset
    tr = trajs[-1]
    if cfg.get("hardy", False):
        # optional weighted integrand int u^2/|x|^2 along the fine run; informational only
        vals = [hardy_integral(st) for st in tr.states]
        s.results["hardy"] = {"max": max(vals), "final": vals[-1]}
        s.write_csv("hardy.csv", ["t", "hardy"], zip(tr.times, vals))
    s.write_csv("phi.csv", ["t", "phi", "dl", "dphi_dt", "gap"],
                zip(phis[-1].t[1:-1], phis[-1].phi[1:-1], phis[-1].dl[1:-1], phis[-1].dphi_dt, phis[-1].corrected_gap))
    series = {}
    for ident in ids:
        trace = identity_trace(tr, ident, cutoff if not (ident.endswith("'") or ident == "5") else None)
        if trace.max_abs_gap > 0:
            series[ident] = (trace.t, np.abs(trace.gap) + 1e-300)
    s.write_chart("identity_gaps.svg", series, title="identity gaps (fine grid)", xlabel="t", ylabel="|gap|", logy=True)


def _simulate(cfg, s: Summary, ctx: RunContext):
    dim = check_dim(_num(cfg, "dim", 3, int))
    grid = parse_grid(_require(cfg, "grid"))
    st = _radial_state(cfg, grid, dim)
    T = _num(cfg, "T", 1.0)
    opts = parse_solver(cfg.get("solver"))
    tr = evolve(st, T, opts)
    e0 = conserved_quantities(st)
    s.results["initial"] = {**e0.to_dict(), "region": variational_region(st).to_dict()}
    s.results["max_drift"] = tr.max_drift
    s.results["blowup"] = tr.blowup
    s.results["events"] = tr.events
    s.results["dt"] = tr.dt
    s.results["valid_radius"] = tr.valid_radius
    if not tr.blowup:
        s.check("energy drift", "energy conservation", tr.max_drift, _num(cfg, "drift_tol", opts.drift_tol))
    if cfg.get("reversal", True) and not tr.blowup:
        back = evolve(tr.final_state, -T, opts)
        fin = back.final_state
        err = max(float(np.max(np.abs(fin.u - st.u))), float(np.max(np.abs(fin.ut - st.ut))))
        s.results["reversal_error"] = err
        s.check("forward-backward reversal", "time reversibility of the scheme", err, _num(cfg, "reversal_tol", 1e-10))
    if tr.blowup:
        try:
            est = detect_blowup(tr)
            s.results["blowup_estimate"] = est.to_dict()
        except Undetermined as exc:
            s.results["blowup_estimate"] = {"undetermined": str(exc)}
    trap = trapping_monitor(tr, 0.0, far_field=True)
    s.results["trapping"] = {k: v for k, v in trap.to_dict().items() if k not in ("t", "dl")}
    ser = tr.series()
    ser["dl"] = trap.dl if trap.applicable else [float("nan")] * len(ser["t"])
    cols = ["t", "energy", "drift", "grad_sq", "max_abs_u", "dl"]
    s.write_csv("trajectory.csv", cols, zip(*[ser[c] for c in cols]))
    s.write_chart("drift.svg", {"relative drift": (ser["t"], np.asarray(ser["drift"]) + 1e-300)},
                  title="energy drift", xlabel="t", ylabel="|E(t) - E(0)|/|E(0)|", logy=True)
    s.write_chart("amplitude.svg", {"max|u|": (ser["t"], ser["max_abs_u"])}, title="amplitude", xlabel="t", ylabel="max|u|")
    save_checkpoint(tr.final_state, s.out / "final.cwv")
    s.artifacts.append("final.cwv")


def _modulate(cfg, s: Summary, ctx: RunContext):
    _require(cfg, "grid")
    K = ground_state_norms(3).K
    C_max = _num(cfg, "band_C", 10.0)
    parts = cfg.get("parts", ["exact", "family", "track"])
    if "exact" in parts:
        ex = cfg.get("exact", {})
        grid = parse_grid(cfg["grid"], ex.get("grid"))
        if not isinstance(grid, BoxGrid3D):
            raise ConfigError("exact recovery runs on a box grid")
        center = tuple(float(c) for c in ex.get("center", [0.137, -0.211, 0.05]))
        jobs = [(lam, ell) for ell in ex.get("ells", [0.0, 0.3]) for lam in ex.get("lams", [0.5, 1.0, 1.7])]

        def one(job):
            lam, ell = job
            st = sample_soliton(0.0, SolitonParams(ell=ell, lam=lam, center=center), grid)
            return job, fit(st, ell)

        rows = []
        for (lam, ell), f in ctx.map(one, jobs):
            tag = f"lam={lam} ell={ell}"
            lam_err = abs(f.lam - lam) / lam
            c_err = float(np.max(np.abs(np.asarray(f.center) - center)))
            res = float(np.max(np.abs(f.ortho_residuals)))
            s.check(f"converged {tag}", "modulation orthogonality", f.converged, True, "is")
            s.check(f"lambda {tag}", "modulation exact recovery", lam_err, 1e-6)
            s.check(f"center {tag}", "modulation exact recovery", c_err, 1e-6)
            s.check(f"alpha {tag}", "modulation exact recovery", abs(f.alpha), 1e-6)
            s.check(f"orthogonality {tag}", "modulation orthogonality", res / K, 1e-9)
            s.results.setdefault("exact", {})[tag] = f.to_dict()
            rows.append((lam, ell, f.lam, lam_err, c_err, f.alpha, res / K, f.iterations))
        s.write_csv("exact_recovery.csv", ["lam", "ell", "lam_fit", "lam_rel_err", "center_err", "alpha", "max_residual_over_K", "iterations"], rows)
    if "family" in parts:
        fam_cfg = cfg.get("family", {})
        grid = parse_grid(fam_cfg.get("grid", {"kind": "radial", "r_max": 60.0, "n": 8192}))
        sizes = fam_cfg.get("sizes", [1e-4, 3e-4, 1e-3, 3e-3, 1e-2])
        fam = perturbation_family(grid, sizes, seed=ctx.seed)
        fits = ctx.map(lambda item: fit(item[2], 0.0), fam)
        for (eps, br, _), f in zip(fam, fits):
            s.check(f"family converged eps={eps} branch={br}", "modulation orthogonality", f.converged, True, "is")
        rep = estimate_report(fits)
        s.results["family"] = {"report": rep.to_dict(), "fits": [f.to_dict() for f in fits], "sizes": sizes}
        s.check("comparability band C", "comparability of alpha, remainder and d_ell", rep.C_required, C_max,
                note="raw ratios; |alpha|/|d_ell| tends to 1/(2K) for small perturbations")
        s.results["family"]["normalized_band_C"] = rep.C_required_normalized
        s.write_csv("family.csv", ["eps", "branch", "dl", "alpha", "grad_f", "u1_tilde", "ratio_alpha", "ratio_remainder"],
                    [(e, b, f.dl, f.alpha, f.residual_f_norm, f.u1_tilde_norm, abs(f.alpha) / abs(f.dl),
                      (f.residual_f_norm + f.u1_tilde_norm) / abs(f.dl)) for (e, b, _), f in zip(fam, fits)])
    if "track" in parts:
        tk = cfg.get("track", {})
        grid = parse_grid(tk.get("grid", {"kind": "radial", "r_max": 40.0, "n": 4097}))
        a = _num(tk, "amplitude", 1.001)
        st = energy_matched_ground_state(grid, a, make_profile(tk.get("velocity", {"kind": "gaussian"}), grid, 3))
        tr = evolve(st, _num(tk, "T", 1.0), parse_solver(tk.get("solver", {"snapshot_stride": 20})))
        track = track_modulation(tr)
        trap = trapping_monitor(tr, 0.0, far_field=True)
        s.results["track"] = track.to_dict()
        s.results["trapping"] = trap.to_dict()
        s.check("track within basin", "modulation along a trajectory", track.truncated, False, "is")
        s.check("trapping applicable", "sign persistence of d_ell", trap.applicable, True, "is")
        s.results["trapping_sign_changes"] = trap.sign_changes
        cols = zip(track.t, track.lam, track.alpha, track.dl)
        s.write_csv("track.csv", ["t", "lambda", "alpha", "dl"], cols)
        s.write_chart("track.svg", {"lambda - 1": (track.t, track.lam - 1.0), "alpha": (track.t, track.alpha)},
                      title="modulation parameters", xlabel="t", ylabel="value")


def _blowup_run(args):
    cfg, n, dim = args
    grid = parse_grid(cfg["grid"], {"n": n})
    st = _radial_state(cfg, grid, dim)
    tr = evolve(st, _num(cfg, "T", 2.0), parse_solver(cfg.get("solver", {"drift_tol": 1e-2})))
    return tr


def _blowup(cfg, s: Summary, ctx: RunContext):
    dim = check_dim(_num(cfg, "dim", 3, int))
    gspec = _require(cfg, "grid")
    n0 = _num(gspec, "n", _require(gspec, "n", "grid"), int)
    levels = [n0, 2 * (n0 - 1) + 1]
    trajs = ctx.map(_blowup_run, [(cfg, n, dim) for n in levels])
    K = ground_state_norms(dim).K
    ests = []
    for n, tr in zip(levels, trajs):
        tag = f"n={n}"
        s.check(f"blowup flag {tag}", "blow-up criterion", tr.blowup, True, "is")
        gmax = float(np.max(tr.grad_sq)) / K
        s.check(f"grad_sq exceeds 2K {tag}", "blow-up above twice the ground-state gradient", gmax, 2.0, ">")
        try:
            est = detect_blowup(tr)
        except Undetermined as exc:
            est = None
            s.results.setdefault("undetermined", {})[tag] = str(exc)
        ests.append(est)
        s.results.setdefault("runs", {})[tag] = {
            "estimate": est.to_dict() if est else None,
            "max_grad_sq_over_K": gmax,
            "dt": tr.dt,
            "t_final": float(tr.times[-1]),
            "events": tr.events,
        }
        if est is not None:
            s.check(f"drift before blow-up {tag}", "resolved approach to blow-up", est.drift_ok, True, "is")
    if all(e is not None for e in ests):
        agree = abs(ests[0].T_estimate - ests[1].T_estimate) / abs(ests[1].T_estimate)
    else:
        agree = None
    s.results["T_agreement"] = agree
    s.check("T_estimate agreement", "blow-up time reproducible under refinement", agree, _num(cfg, "T_tol", 0.05))
    fine = trajs[-1]
    prof = blowup_profile_report(fine) if ests[-1] is not None else None
    if prof is not None and not prof.empty:
        s.results["profile"] = prof.to_dict()
        s.check("ell estimate", "velocity from conserved energy and momentum", float(np.max(np.abs(prof.ell_estimate))), 1e-6)
        s.write_csv("profile.csv", ["t", "lambda", "lambda_over_remaining", "h1_distance"],
                    zip(prof.t, prof.lam, prof.lambda_over_remaining, prof.h1_distance))
        s.write_chart("lambda_over_remaining.svg", {"lambda/(T-t)": (prof.t, prof.lambda_over_remaining)},
                      title="amplitude scale over remaining time", xlabel="t", ylabel="lambda/(T - t)")
    ser = fine.series()
    s.write_csv("amplitude.csv", ["t", "max_abs_u", "grad_sq", "drift"], zip(ser["t"], ser["max_abs_u"], ser["grad_sq"], ser["drift"]))
    s.write_chart("amplitude.svg", {f"n={levels[0]}": (trajs[0].times, [np.max(np.abs(x.u)) for x in trajs[0].states]),
                                    f"n={levels[1]}": (ser["t"], ser["max_abs_u"])},
                  title="max|u| approaching blow-up", xlabel="t", ylabel="max|u|", logy=True)


_RUNNERS = {
    "soliton-check": _soliton_check,
    "equipartition": _equipartition,
    "identities": _identities,
    "simulate": _simulate,
    "modulate": _modulate,
    "blowup": _blowup,
}


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    name = cfg.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {name!r}")
    return cfg


def _report(cfg, s: Summary, ctx: RunContext):
    src = _require(cfg, "artifacts_dir")
    status, text = emit_report(src, s.out / "report.md")
    s.artifacts.append("report.md")
    s.results["report_status"] = status
    s.check("all summaries pass", "aggregate of scenario runs", status, 0, "is")


_RUNNERS["report"] = _report


def run_scenario(cfg: dict, out, seed: int | None = None, threads: int = 1) -> Summary:
    """Execute one scenario and write summary.json plus its artifacts into ``out``."""
    name = cfg.get("scenario")
    if name not in _RUNNERS:
        raise ConfigError(f"unknown scenario {name!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg.get("seed", 0)) if seed is None else int(seed)
    ctx = RunContext(out, seed, max(1, int(threads)))
    s = Summary(name, cfg, seed, out=out)
    try:
        _RUNNERS[name](cfg, s, ctx)
    except (InvalidInput, InvalidParameter, Unsupported) as exc:
        raise ConfigError(str(exc)) from exc
    (out / "summary.json").write_text(dumps(s.to_dict()), encoding="utf-8")
    return s


def emit_report(artifacts_dir, out_file=None) -> tuple[int, str]:
    """Markdown pass/fail matrix over every summary.json below ``artifacts_dir``.

    Returns (exit status, markdown). Status 2 if no summaries are found,
    1 if any is failing or unreadable, else 0.
    """
    root = Path(artifacts_dir)
    paths = sorted(root.rglob("summary.json")) if root.is_dir() else []
    if not paths:
        raise ConfigError(f"no summary.json under {artifacts_dir}")
    rows = 0
    lines = ["# critwave report", "", "| run | scenario | assertions | result |", "|---|---|---|---|"]
    failures = []
    status = 0
    for p in paths:
        rel = p.parent.relative_to(root).as_posix() or "."
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
            if isinstance(data, dict) and data.get("scenario") == "report":
                continue
            if data.get("schema") != SCHEMA_VERSION:
                raise ValueError(f"schema {data.get('schema')!r}")
            asserts = data["assertions"]
            ok = bool(data["pass"])
        except (ValueError, KeyError, TypeError) as exc:
            lines.append(f"| {rel} | ? | ? | unreadable ({type(exc).__name__}) |")
            status = 1
            continue
        rows += 1
        npass = sum(1 for a in asserts if a["pass"])
        lines.append(f"| {rel} | {data['scenario']} | {npass}/{len(asserts)} | {'PASS' if ok else 'FAIL'} |")
        if not ok:
            status = 1
            failures.extend((rel, a) for a in asserts if not a["pass"])
    if rows == 0 and status == 0:
        raise ConfigError(f"no scenario summaries under {artifacts_dir}")
    if failures:
        lines += ["", "## Failing assertions", "", "| run | assertion | anchor | value | tolerance |", "|---|---|---|---|---|"]
        for rel, a in failures:
            lines.append(f"| {rel} | {a['name']} | {a['anchor']} | {a['value']} | {a['op']} {a['tolerance']} |")
    text = "\n".join(lines) + "\n"
    if out_file is not None:
        Path(out_file).write_text(text, encoding="utf-8")
    return status, text
