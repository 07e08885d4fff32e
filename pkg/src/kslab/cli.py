"""Batch experiment runner: ``kslab run|check <config>`` and ``kslab report <summary.json>``.

Configs are flat ``dotted.key = value`` text files; ``#`` starts a comment.
Numbers may carry a pi factor (``12pi``, ``4*pi``, ``pi``) and lists are
comma-separated.  Every run writes trajectory.csv, summary.json and
config_resolved into the output directory.
"""

from __future__ import annotations

import argparse
import enum
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import blowup, inequalities
from . import functionals as fn
from .functionals import CSV_COLUMNS, ModelParams, Variant
from .grid import Grid2D, set_workers
from .solver import (
    InitPreset,
    PresetKind,
    StepControl,
    Termination,
    Trajectory,
    default_dt_min,
    run,
)

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NAN = 3
EXIT_CHECK = 4


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class ExperimentKind(enum.Enum):
    SINGLE = "Single"
    MASS_SWEEP = "MassSweep"
    INEQUALITY_SUITE = "InequalitySuite"
    VIRIAL_CHECK = "VirialCheck"
    HYPERCONTRACTIVITY = "Hypercontractivity"


# Every accepted key with its default as config text.  "auto" defers to a
# value computed from other keys when the config is resolved.
DEFAULTS: dict[str, str] = {
    "experiment": "Single",
    "experiment.masses": "",
    "experiment.zero_drift": "false",
    "output_dir": "kslab_out",
    "seed": "0",
    "model.variant": "ParabolicParabolic",
    "model.epsilon": "1",
    "model.alpha": "0",
    "model.M": "4pi",
    "model.sigma_mollify": "0",
    "grid.L": "16",
    "grid.N": "256",
    "init.kind": "Gaussian",
    "init.M": "auto",
    "init.sigma": "1",
    "init.center": "0, 0",
    "init.separation": "4",
    "init.lam": "1",
    "init.width": "0.02",
    "init.c0": "elliptic",
    "control.dt_init": "1e-3",
    "control.dt_min": "auto",
    "control.dt_max": "auto",
    "control.cfl_safety": "0.9",
    "control.t_end": "1",
    "control.record_every": "1",
    "diagnostics.equi_k1": "1",
    "diagnostics.equi_k2": "10",
    "classify.growth_window": "10",
    "classify.slope_band": "0.1",
    "classify.lp2_growth": "10",
    "classify.flat_slope": "0.01",
    "classify.C": "1",
    "hyper.p": "2, 3",
    "hyper.t_min_steps": "5",
    "hyper.refine": "true",
    "inequality.n_random": "100",
    "inequality.masses": "1, pi, 4pi",
    "inequality.family_size": "50",
    "inequality.n_identity": "20",
    "inequality.bessel_alpha": "1",
    "check.expected": "",
    "check.mass_tol": "1e-10",
    "check.energy_increment_tol": "1e-6",
    "check.moment_slack": "0.05",
    "check.slope_band": "0.1",
    "check.bound_factor": "1",
    "check.virial_rel_tol": "0.02",
    "check.hyper_stability": "0.2",
    "check.onofri_eq_tol": "1e-6",
    "check.onofri_tol": "1e-8",
    "check.hls_tol": "1e-5",
    "check.entropy_identity_tol": "1e-10",
    "check.chemical_identity_tol": "1e-8",
}

_PI_NUMBER = re.compile(r"^\s*([+-]?(?:\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?))?\s*\*?\s*pi\s*$")


# -- parsing ---------------------------------------------------------------------------


def parse_number(text: str) -> float:
    """Float literal, optionally times pi: '0.5', '12pi', '4*pi', 'pi'."""
    text = text.strip()
    m = _PI_NUMBER.match(text)
    if m:
        return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_list(text: str) -> tuple[float, ...]:
    return tuple(parse_number(t) for t in text.split(",") if t.strip())


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key = value pairs; unknown and repeated keys are errors."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def fmt(x: float) -> str:
    """17 significant digits; non-finite values spelled nan / inf / -inf."""
    return "%.17g" % x


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    grid: tuple[float, int]
    init: InitPreset
    control: StepControl
    experiment: ExperimentKind
    output_dir: Path
    seed: int
    masses: tuple[float, ...] = ()
    c0: str = "elliptic"
    zero_drift: bool = False
    resolved: tuple[tuple[str, str], ...] = ()

    @property
    def settings(self) -> dict[str, str]:
        return dict(self.resolved)

    def number(self, key: str) -> float:
        return parse_number(self.settings[key])

    def numbers(self, key: str) -> tuple[float, ...]:
        return parse_list(self.settings[key])

    def make_grid(self) -> Grid2D:
        return Grid2D(*self.grid)


def load_config(text: str, output_dir: str | None = None) -> ExperimentConfig:
    """Parse, default and validate a config; raises ConfigError."""
    given = parse_config_text(text)
    s = {**DEFAULTS, **given}
    if output_dir is not None:
        s["output_dir"] = output_dir
    try:
        exp = ExperimentKind(s["experiment"].strip())
        L = parse_number(s["grid.L"])
        N_float = parse_number(s["grid.N"])
        if N_float != int(N_float):
            raise ConfigError("grid.N must be an integer")
        N = int(N_float)
        grid = Grid2D(L, N)
        model = ModelParams(
            epsilon=parse_number(s["model.epsilon"]),
            alpha=parse_number(s["model.alpha"]),
            M=parse_number(s["model.M"]),
            sigma_mollify=parse_number(s["model.sigma_mollify"]),
            variant=Variant.parse(s["model.variant"]),
        )
        if s["init.M"] == "auto":
            s["init.M"] = fmt(model.M)
        center = parse_list(s["init.center"])
        if len(center) != 2:
            raise ConfigError("init.center needs two numbers")
        init = InitPreset(
            kind=PresetKind(s["init.kind"].strip()),
            M=parse_number(s["init.M"]),
            sigma=parse_number(s["init.sigma"]),
            center=(center[0], center[1]),
            separation=parse_number(s["init.separation"]),
            lam=parse_number(s["init.lam"]),
            width=parse_number(s["init.width"]),
        )
        c0 = s["init.c0"].strip().lower()
        if c0 not in ("elliptic", "zero"):
            raise ConfigError("init.c0 must be 'elliptic' or 'zero'")
        s["init.c0"] = c0
        dt_init = parse_number(s["control.dt_init"])
        cfl = parse_number(s["control.cfl_safety"])
        if s["control.dt_max"] == "auto":
            s["control.dt_max"] = fmt(dt_init)
        if s["control.dt_min"] == "auto":
            s["control.dt_min"] = fmt(min(default_dt_min(grid, cfl), dt_init))
        record_every = parse_number(s["control.record_every"])
        control = StepControl(
            dt_init=dt_init,
            dt_min=parse_number(s["control.dt_min"]),
            dt_max=parse_number(s["control.dt_max"]),
            cfl_safety=cfl,
            t_end=parse_number(s["control.t_end"]),
            record_every=int(record_every),
        )
        masses = parse_list(s["experiment.masses"])
        if exp is ExperimentKind.MASS_SWEEP and not masses:
            raise ConfigError("MassSweep needs experiment.masses")
        if any(m <= 0 for m in masses):
            raise ConfigError("sweep masses must be positive")
        seed = int(parse_number(s["seed"]))
        zero_drift = parse_bool(s["experiment.zero_drift"])
        parse_bool(s["hyper.refine"])
        for key in s:
            if key.startswith(("check.", "classify.", "inequality.", "diagnostics.", "hyper.")) and key not in (
                "check.expected",
                "hyper.refine",
            ):
                parse_list(s[key])
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    resolved = tuple(sorted(s.items()))
    return ExperimentConfig(
        model, (L, N), init, control, exp, Path(s["output_dir"]), seed, masses, c0, zero_drift, resolved
    )


# -- output ----------------------------------------------------------------------------------


def _json_value(x, indent: int) -> str:
    pad = "  " * indent
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f'{pad}  {_json_string(str(k))}: {_json_value(v, indent + 1)}' for k, v in sorted(x.items())]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        items = [f"{pad}  {_json_value(v, indent + 1)}" for v in x]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt(float(x)) if math.isfinite(x) else "null"
    if isinstance(x, enum.Enum):
        return _json_string(str(x.value))
    return _json_string(str(x))


def _json_string(s: str) -> str:
    import json

    return json.dumps(s, ensure_ascii=False)


def dumps_json(obj) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits, NaN/inf as null."""
    return _json_value(obj, 0) + "\n"


def write_csv(path: Path, members: list[tuple[str, Trajectory]]) -> None:
    """One row per record; a leading ``member`` column when there are several runs."""
    multi = len(members) > 1
    cols = (("member",) if multi else ()) + CSV_COLUMNS
    lines = [f"# schema_version: {SCHEMA_VERSION}", ",".join(cols)]
    for label, traj in members:
        for rec in traj.records:
            row = [fmt(v) for v in rec.row()]
            lines.append(",".join(([label] if multi else []) + row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_outputs(cfg: ExperimentConfig, summary: dict, members: list[tuple[str, Trajectory]]) -> None:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "trajectory.csv", members)
    (out / "summary.json").write_text(dumps_json(summary), encoding="utf-8", newline="\n")
    text = "".join(f"{k} = {v}\n" for k, v in cfg.resolved)
    (out / "config_resolved").write_text(f"# schema_version: {SCHEMA_VERSION}\n" + text, encoding="utf-8", newline="\n")


# -- checks ------------------------------------------------------------------------------------


def _check(name: str, value, threshold, op: str) -> dict:
    ops = {
        "<=": lambda a, b: a <= b,
        ">=": lambda a, b: a >= b,
        "<": lambda a, b: a < b,
        ">": lambda a, b: a > b,
        "==": lambda a, b: a == b,
    }
    ok = value is not None and bool(ops[op](value, threshold))
    if isinstance(value, float) and not math.isfinite(value):
        ok = False
    return {"name": name, "value": value, "op": op, "threshold": threshold, "pass": ok}


def _solver_checks(label: str, traj: Trajectory, cfg: ExperimentConfig) -> list[dict]:
    return [
        _check(f"{label}mass_drift_per_step", traj.max_step_mass_error, cfg.number("check.mass_tol"), "<="),
        _check(f"{label}min_density", traj.min_density, 0.0, ">="),
    ]


def _energy_stats(traj: Trajectory) -> dict:
    E = traj.column("free_energy")
    inc = float(np.max(np.diff(E))) if E.size > 1 else 0.0
    return {"max_increment": inc, "relative_max_increment": inc / max(1.0, abs(float(E[0])))}


def _member_summary(params: ModelParams, traj: Trajectory, grid: Grid2D, cfg: ExperimentConfig) -> dict:
    th = blowup.ClassifyThresholds(
        growth_window=int(cfg.number("classify.growth_window")),
        slope_band=cfg.number("classify.slope_band"),
        lp2_growth=cfg.number("classify.lp2_growth"),
        flat_slope=cfg.number("classify.flat_slope"),
    )
    verdict = blowup.classify(traj, params, th, C_const=cfg.number("classify.C"), grid=grid)
    t = traj.column("t")
    return {
        "M": params.M,
        "cause": traj.cause.value,
        "steps": traj.steps,
        "t_final": float(t[-1]),
        "verdict": verdict.to_dict(),
        "critical_slope": blowup.critical_slope(params.M),
        "I0": float(traj.column("moment_2")[0]),
        "max_step_mass_error": traj.max_step_mass_error,
        "min_density": traj.min_density,
        "energy": _energy_stats(traj),
        "moment_log_excess": fn.moment_log_excess(
            t, traj.column("moment_log"), traj.column("entropy_production"), params.M
        ),
    }


def _trajectory_checks(label: str, member: dict, cfg: ExperimentConfig) -> list[dict]:
    checks = []
    if member["verdict"]["classification"] == blowup.Classification.GLOBAL_LIKE.value:
        checks.append(_check(f"{label}moment_log_bound_excess", member["moment_log_excess"], cfg.number("check.moment_slack"), "<="))
    return checks


# -- experiments -------------------------------------------------------------------------------


def _simulate(cfg: ExperimentConfig, params: ModelParams, preset: InitPreset, grid: Grid2D, ctrl: StepControl) -> Trajectory:
    c0 = grid.zeros() if cfg.c0 == "zero" else None
    levels = (cfg.number("diagnostics.equi_k1"), cfg.number("diagnostics.equi_k2"))
    return run(params, preset, grid, ctrl, zero_drift=cfg.zero_drift, equi_levels=levels, c0=c0)


def _run_sweep_member(args: tuple) -> Trajectory:
    cfg, M = args
    set_workers(1)
    params = ModelParams(cfg.model.epsilon, cfg.model.alpha, M, cfg.model.sigma_mollify, cfg.model.variant)
    preset = InitPreset(cfg.init.kind, M, cfg.init.sigma, cfg.init.center, cfg.init.separation, cfg.init.lam, cfg.init.width)
    return _simulate(cfg, params, preset, cfg.make_grid(), cfg.control)


def _single(cfg: ExperimentConfig, threads: int) -> tuple[dict, list]:
    grid = cfg.make_grid()
    traj = _simulate(cfg, cfg.model, cfg.init, grid, cfg.control)
    member = _member_summary(cfg.model, traj, grid, cfg)
    checks = _solver_checks("", traj, cfg)
    checks.append(
        _check("energy_relative_max_increment", member["energy"]["relative_max_increment"], cfg.number("check.energy_increment_tol"), "<=")
    )
    checks += _trajectory_checks("", member, cfg)
    return {"members": [member], "checks": checks}, [("0", traj)]


def _mass_sweep(cfg: ExperimentConfig, threads: int) -> tuple[dict, list]:
    grid = cfg.make_grid()
    jobs = [(cfg, M) for M in cfg.masses]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            trajs = list(pool.map(_run_sweep_member, jobs))
    else:
        trajs = [_run_sweep_member(j) for j in jobs]
    set_workers(threads)
    members, checks, labelled = [], [], []
    for i, (M, traj) in enumerate(zip(cfg.masses, trajs)):
        params = ModelParams(cfg.model.epsilon, cfg.model.alpha, M, cfg.model.sigma_mollify, cfg.model.variant)
        m = _member_summary(params, traj, grid, cfg)
        members.append(m)
        labelled.append((str(i), traj))
        tag = f"M[{i}]."
        checks += _solver_checks(tag, traj, cfg)
        checks += _trajectory_checks(tag, m, cfg)
        v = m["verdict"]
        if v["classification"] == blowup.Classification.BLOWUP_LIKE.value and M > blowup.EIGHT_PI:
            ref = m["critical_slope"]
            checks.append(_check(f"{tag}virial_slope_rel_error", abs(v["virial_slope_fit"] - ref) / abs(ref), cfg.number("check.slope_band"), "<="))
            if v["threshold_ok"] and v["bound_Tstar"] is not None:
                checks.append(_check(f"{tag}t_detect_over_bound", v["t_detect"] / v["bound_Tstar"], cfg.number("check.bound_factor"), "<="))
    expected = [e.strip() for e in cfg.settings["check.expected"].split(",") if e.strip()]
    if expected:
        got = [m["verdict"]["classification"] for m in members]
        checks.append(_check("classifications", ",".join(got), ",".join(expected), "=="))
    return {"members": members, "checks": checks}, labelled


def _virial_check(cfg: ExperimentConfig, threads: int) -> tuple[dict, list]:
    grid = cfg.make_grid()
    if cfg.model.variant is not Variant.PARABOLIC_ELLIPTIC:
        raise ConfigError("VirialCheck needs model.variant = ParabolicElliptic")
    traj = _simulate(cfg, cfg.model, cfg.init, grid, cfg.control)
    member = _member_summary(cfg.model, traj, grid, cfg)
    t, I = traj.column("t"), traj.column("moment_2")
    slope, _, resid = blowup.fit_virial(t, I)
    M, alpha = cfg.model.M, cfg.model.alpha
    virial = {"slope": slope, "fit_residual": resid, "predicted": blowup.critical_slope(M)}
    checks = _solver_checks("", traj, cfg)
    if alpha == 0:
        rel = abs(slope - virial["predicted"]) / abs(virial["predicted"]) if virial["predicted"] else math.inf
        virial["relative_error"] = rel
        checks.append(_check("virial_slope_rel_error", rel, cfg.number("check.virial_rel_tol"), "<="))
    else:
        C = cfg.number("classify.C")
        excess = blowup.integral_form_violation(t, I, M, alpha, C)
        virial["integral_form_excess"] = excess
        checks.append(_check("virial_integral_form_excess", excess, cfg.number("check.virial_rel_tol"), "<="))
    return {"members": [member], "virial": virial, "checks": checks}, [("0", traj)]


def hypercontractivity_sup(traj: Trajectory, p: int, t_min: float) -> float:
    """sup over recorded t >= t_min of t^(p-1) int n^p."""
    t = traj.column("t")
    norm = traj.column(f"lp{p}")
    mask = t >= t_min
    return float(np.max(t[mask] ** (p - 1) * norm[mask] ** p)) if mask.any() else math.nan


def _hypercontractivity(cfg: ExperimentConfig, threads: int) -> tuple[dict, list]:
    ps = [int(p) for p in cfg.numbers("hyper.p")]
    if any(p not in (2, 3, 4) for p in ps):
        raise ConfigError("hyper.p entries must lie in {2, 3, 4}")
    L, N = cfg.grid
    levels = [(N, cfg.control)]
    if parse_bool(cfg.settings["hyper.refine"]):
        # diffusive scaling: time steps shrink with h^2
        c = cfg.control
        levels.append(
            (2 * N, StepControl(c.dt_init / 4, c.dt_min / 4, c.dt_max / 4, c.cfl_safety, c.t_end, c.record_every))
        )
    members, labelled, sups = [], [], []
    checks = []
    for i, (n_cells, ctrl) in enumerate(levels):
        grid = Grid2D(L, n_cells)
        traj = _simulate(cfg, cfg.model, cfg.init, grid, ctrl)
        t_min = cfg.number("hyper.t_min_steps") * ctrl.dt_init
        s = {str(p): hypercontractivity_sup(traj, p, t_min) for p in ps}
        sups.append(s)
        m = _member_summary(cfg.model, traj, grid, cfg)
        m.update({"N": n_cells, "t_min": t_min, "sup_weighted_norm": s})
        members.append(m)
        labelled.append((str(i), traj))
        checks += _solver_checks(f"N={n_cells}.", traj, cfg)
        checks.append(_check(f"N={n_cells}.reached_t_end", traj.cause.value, Termination.TIME_REACHED.value, "=="))
    out = {"members": members, "checks": checks}
    if len(sups) == 2:
        ratios = {p: sups[1][p] / sups[0][p] for p in sups[0]}
        out["refinement_ratio"] = ratios
        for p, r in ratios.items():
            checks.append(_check(f"p={p}.refinement_change", abs(r - 1.0), cfg.number("check.hyper_stability"), "<="))
    return out, labelled


def _inequality_suite(cfg: ExperimentConfig, threads: int) -> tuple[dict, list]:
    grid = cfg.make_grid()
    res = inequalities.inequality_suite(
        grid,
        seed=cfg.seed,
        n_random=int(cfg.number("inequality.n_random")),
        masses=cfg.numbers("inequality.masses"),
        family_size=int(cfg.number("inequality.family_size")),
        n_identity=int(cfg.number("inequality.n_identity")),
        bessel_alpha=cfg.number("inequality.bessel_alpha"),
    )
    on, hls, bes, ids = res["onofri"], res["log_hls"], res["bessel"], res["identities"]
    eq_tol = cfg.number("check.onofri_eq_tol")
    hls_tol = cfg.number("check.hls_tol")
    checks = [_check(f"onofri.equality[{k}]", abs(v), eq_tol, "<=") for k, v in on["equality_log_residuals"].items()]
    checks.append(_check("onofri.random_satisfied", on["random_satisfied"], on["random_count"], "=="))
    checks.append(_check("onofri.random_min_residual", on["random_min_residual"], -cfg.number("check.onofri_tol"), ">="))
    for m in hls["masses"]:
        tag = f"log_hls[M={m['M']:.6g}]"
        checks.append(_check(f"{tag}.extremal_residual", abs(m["extremal_residual"]), hls_tol, "<="))
        checks.append(_check(f"{tag}.translated_residual", abs(m["translated_residual"]), hls_tol, "<="))
        checks.append(_check(f"{tag}.calibration_rel_error", m["relative_error"], hls_tol, "<="))
    checks.append(_check("log_hls.family_satisfied", hls["family_satisfied"], hls["family_count"], "=="))
    checks.append(_check("log_hls.gaussian_residual", hls["gaussian_residual"], 0.0, ">"))
    for name in ("MH", "narrow_gaussian", "gaussian"):
        checks.append(_check(f"bessel.{name}.satisfied", bes[name]["satisfied"], True, "=="))
    checks.append(_check("bessel.lhs_decreasing_in_alpha", bes["lhs_decreasing_in_alpha"], True, "=="))
    checks.append(_check("identities.entropy_max_residual", ids["entropy_max_residual"], cfg.number("check.entropy_identity_tol"), "<="))
    checks.append(_check("identities.chemical_max_residual", ids["chemical_max_residual"], cfg.number("check.chemical_identity_tol"), "<="))
    for name, rep in res["duality"].items():
        checks.append(_check(f"duality.{name}.satisfied", rep["satisfied"], True, "=="))
    res["checks"] = checks
    return res, []


_EXPERIMENTS = {
    ExperimentKind.SINGLE: _single,
    ExperimentKind.MASS_SWEEP: _mass_sweep,
    ExperimentKind.VIRIAL_CHECK: _virial_check,
    ExperimentKind.HYPERCONTRACTIVITY: _hypercontractivity,
    ExperimentKind.INEQUALITY_SUITE: _inequality_suite,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1, check: bool = False) -> int:
    """Execute, write outputs, return the exit code."""
    set_workers(threads)
    body, members = _EXPERIMENTS[cfg.experiment](cfg, threads)
    nan = any(traj.cause is Termination.NAN_ABORT for _, traj in members)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment.value,
        "seed": cfg.seed,
        "status": "NanAbort" if nan else "ok",
        **body,
    }
    _write_outputs(cfg, summary, members)
    if nan:
        return EXIT_NAN
    if check and not all(c["pass"] for c in summary["checks"]):
        return EXIT_CHECK
    return EXIT_OK


# -- report ---------------------------------------------------------------------------------------


def emit_report(summary_path: Path) -> tuple[str, bool]:
    """Text table of the summary's checks and whether all passed; raises ConfigError if unusable."""
    import json

    try:
        text = Path(summary_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {summary_path}: {exc}") from exc
    if not text.strip():
        raise ConfigError("empty summary")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid summary: {exc}") from exc
    checks = data.get("checks") if isinstance(data, dict) else None
    if not checks:
        raise ConfigError("summary has no checks")
    width = max(len(c["name"]) for c in checks)
    lines = [f"experiment: {data.get('experiment', '?')}  status: {data.get('status', '?')}"]
    for c in checks:
        flag = "PASS" if c["pass"] else "FAIL"
        lines.append(f"{flag}  {c['name']:<{width}}  {c['value']} {c['op']} {c['threshold']}")
    ok = all(c["pass"] for c in checks)
    lines.append(f"{sum(c['pass'] for c in checks)}/{len(checks)} checks passed")
    return "\n".join(lines), ok


# -- entry point ------------------------------------------------------------------------------------


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("KSLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("KSLAB_THREADS must be an integer") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    # the global flags are accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="FFT workers and sweep processes (env KSLAB_THREADS)")
    common.add_argument("--output", default=argparse.SUPPRESS, help="output directory, overrides output_dir")
    parser = argparse.ArgumentParser(prog="kslab", description="Keller-Segel numerical laboratory", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run an experiment"), ("check", "run and exit 4 on any failed check")):
        p = sub.add_parser(name, help=helptext, parents=[common])
        p.add_argument("config")
    p = sub.add_parser("report", help="print the checks of a summary.json", parents=[common])
    p.add_argument("summary")
    p.add_argument("--check", action="store_true", help="exit 4 if any check failed")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "report":
            text, ok = emit_report(Path(args.summary))
            print(text)
            return EXIT_CHECK if args.check and not ok else EXIT_OK
        try:
            config_text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from exc
        # flags given at either level; absent ones leave no attribute
        cfg = load_config(config_text, getattr(args, "output", None))
        code = run_experiment(cfg, _threads(getattr(args, "threads", None)), check=args.command == "check")
        text, _ = emit_report(cfg.output_dir / "summary.json")
        print(text)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
