"""Experiment configuration, orchestration and artifact persistence.

An experiment is described by a JSON document::

    {
      "schema_version": 1,
      "scenario": "doubly_warped",
      "spec": {"p": 2, "eta": 2.0, "a_star": 0.1},
      "grid": {"half_width": 200.0, "points": 2048, "stretch": 5.0},
      "integrator": {"cfl_safety": 0.25},
      "analysis": {"theorem_checks": true, "blowup": true, "soliton": true},
      "output_dir": null,
      "seed": 0
    }

Missing sections take scenario defaults.  ``run_experiment`` writes one directory
holding the effective config, assumption report, checkpoints, a diagnostics CSV,
verdict JSONs and a manifest naming the operation that produced each file.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field, fields

import numpy as np

from . import assumptions as A
from . import blowup as B
from . import diagnostics as D
from . import flow as F
from . import soliton as S
from . import verify as V
from .errors import (ConfigError, FeasibilityError, InconclusiveError, NumericError, ParameterError, SchemaError,
                     SingularityImminent, SingularStateError, WarpflowError)

SCHEMA_VERSION = 1
SCENARIOS = ("cylinder", "perturbed_cylinder", "doubly_warped", "circle_fiber", "custom")
CUSTOM_BUILDERS = ("interior_minimum",)
OUTPUT_ROOT_ENV = "WARPFLOW_OUTPUT_ROOT"

SPEC_KEYS = {
    "cylinder": {"p": 2, "a_star": 1.0, "mu": 1.0},
    "perturbed_cylinder": {"p": 2, "a_star": 0.1, "mu": 1.0},
    "doubly_warped": {"p": 2, "eta": 2.0, "a_star": 0.1},
    "circle_fiber": {"p": 2, "eta": 1.0, "a_star": 0.1},
    "custom": {"builder": "interior_minimum", "p": 2, "a_star": 0.1, "far": 0.5, "dip": 0.45, "width": 1.0},
}
GRID_DEFAULTS = {
    "cylinder": {"half_width": 10.0, "points": 512, "stretch": None},
    "custom": {"half_width": 20.0, "points": 801, "stretch": None},
}
ANALYSIS_DEFAULTS = {"theorem_checks": True, "blowup": True, "soliton": True, "evolution_probe_dt": 1e-7}

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class ExperimentConfig:
    scenario: str
    spec: dict
    grid: dict
    integrator: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=lambda: dict(ANALYSIS_DEFAULTS))
    output_dir: str | None = None
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for k in d:
            if k not in known:
                raise ConfigError(k, "unknown field")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {version!r}")
        scenario = d.get("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError("scenario", f"must be one of {SCENARIOS}, got {scenario!r}")
        spec = _merge("spec", SPEC_KEYS[scenario], d.get("spec", {}))
        grid = _merge("grid", GRID_DEFAULTS.get(scenario, A.GridSpec().to_dict()), d.get("grid", {}))
        analysis = _merge("analysis", ANALYSIS_DEFAULTS, d.get("analysis", {}))
        integ = dict(d.get("integrator", {}))
        if scenario == "cylinder" and "stop_time" not in integ:
            integ["stop_time"] = 0.9 * spec["a_star"] / spec["mu"] if _is_pos(spec["a_star"]) and \
                _is_pos(spec["mu"]) else None
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed", "must be an integer")
        out = d.get("output_dir")
        if out is not None and not isinstance(out, str):
            raise ConfigError("output_dir", "must be a string or null")
        cfg = cls(scenario, spec, grid, integ, analysis, out, seed, version)
        cfg.validate()
        return cfg

    def to_dict(self):
        return {"schema_version": self.schema_version, "scenario": self.scenario, "spec": dict(self.spec),
                "grid": dict(self.grid), "integrator": self.integrator_config().to_dict(),
                "analysis": dict(self.analysis), "output_dir": self.output_dir, "seed": self.seed}

    def validate(self):
        s = self.spec
        if not (isinstance(s["p"], int) and not isinstance(s["p"], bool) and s["p"] >= 2):
            raise ConfigError("spec.p", "must be an integer >= 2")
        for key in ("a_star", "mu", "eta", "far", "width"):
            if key in s and not _is_pos(s[key]):
                raise ConfigError(f"spec.{key}", f"must be a positive number, got {s[key]!r}")
        if "dip" in s and not (_is_num(s["dip"]) and 0 <= s["dip"] < s["far"]):
            raise ConfigError("spec.dip", "must lie in [0, far)")
        if "builder" in s and s["builder"] not in CUSTOM_BUILDERS:
            raise ConfigError("spec.builder", f"must be one of {CUSTOM_BUILDERS}")
        g = self.grid
        if not _is_pos(g["half_width"]):
            raise ConfigError("grid.half_width", "must be a positive number")
        if not (isinstance(g["points"], int) and g["points"] >= 16):
            raise ConfigError("grid.points", "must be an integer >= 16")
        if g["stretch"] is not None and not _is_pos(g["stretch"]):
            raise ConfigError("grid.stretch", "must be positive or null")
        for k, v in self.analysis.items():
            if k != "evolution_probe_dt" and not isinstance(v, bool):
                raise ConfigError(f"analysis.{k}", "must be true or false")
        if not _is_pos(self.analysis["evolution_probe_dt"]):
            raise ConfigError("analysis.evolution_probe_dt", "must be positive")
        self.integrator_config()

    def integrator_config(self) -> F.IntegratorConfig:
        names = {f.name for f in fields(F.IntegratorConfig)}
        for k in self.integrator:
            if k not in names:
                raise ConfigError(f"integrator.{k}", "unknown field")
        try:
            return F.IntegratorConfig(**self.integrator)
        except (ParameterError, TypeError) as exc:
            raise ConfigError("integrator", str(exc)) from exc

    def grid_spec(self) -> A.GridSpec:
        g = self.grid
        return A.GridSpec(float(g["half_width"]), int(g["points"]),
                          None if g["stretch"] is None else float(g["stretch"]))


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and np.isfinite(x)


def _is_pos(x):
    return _is_num(x) and x > 0


def _merge(section, defaults, given):
    if not isinstance(given, dict):
        raise ConfigError(section, "must be an object")
    out = dict(defaults)
    for k, v in given.items():
        if k not in defaults:
            raise ConfigError(f"{section}.{k}", "unknown field")
        out[k] = v
    return out


def load_config(path, overrides=()) -> ExperimentConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from exc
    return ExperimentConfig.from_dict(apply_overrides(d, overrides))


def apply_overrides(d, overrides):
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
    d = copy.deepcopy(d)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "cannot descend into a non-object")
        node[parts[-1]] = val
    return d


def build_scenario(cfg: ExperimentConfig):
    s, grid = cfg.spec, cfg.grid_spec()
    try:
        if cfg.scenario == "cylinder":
            return A.build_cylinder(s["a_star"], s["mu"], s["p"], grid)
        if cfg.scenario == "perturbed_cylinder":
            return A.build_perturbed_cylinder(s["a_star"], s["p"], grid, mu=s["mu"])
        if cfg.scenario == "doubly_warped":
            return A.build_canonical_example(s["eta"], s["a_star"], s["p"], grid)
        if cfg.scenario == "circle_fiber":
            return A.build_circle_fiber(s["a_star"], s["p"], grid, s["eta"])
        return A.build_interior_minimum(s["a_star"], s["p"], grid, s["far"], s["dip"], s["width"])
    except ParameterError as exc:
        raise ConfigError("spec", str(exc)) from exc


# ---------------------------------------------------------------- serialization

def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays become Python values, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=1)
        fh.write("\n")


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def output_root():
    return os.environ.get(OUTPUT_ROOT_ENV, "warpflow_runs")


def resolve_output_dir(cfg: ExperimentConfig):
    if cfg.output_dir is not None:
        return cfg.output_dir if os.path.isabs(cfg.output_dir) else os.path.join(output_root(), cfg.output_dir)
    return os.path.join(output_root(), f"{cfg.scenario}-seed{cfg.seed}")


# ---------------------------------------------------------------- analysis

def assumptions_report(cfg, spec, state0, Gs):
    rep = A.validate_main_assumptions(spec, state0, Gs).to_dict()
    if cfg.scenario in ("perturbed_cylinder", "doubly_warped"):
        deltas = [A.inverse_square] if cfg.scenario == "perturbed_cylinder" else \
            [lambda r: cfg.spec["eta"] * A.inverse_square(r), A.inverse_square]
        ok, detail = A.admissibility_check(deltas, Gs, cfg.grid_spec(), cfg.spec["a_star"], cfg.spec["p"])
        rep["admissible"] = ok
        rep["admissibility_decays"] = detail["decays"]
    return rep


def exact_solution_verdict(traj, tol=1e-6):
    err = 0.0
    for f in traj.frames:
        err = max(err, float(np.max(np.abs(f.u - f.spec.homogeneous(f.t)[:, None]))))
    return {"max_abs_error": err, "t_end": traj.frames[-1].t, "tolerance": tol, "pass": err <= tol}


EXPECTED_SINGULARITY = {"cylinder": "degenerate", "custom": "finite_point"}


def singularity_verdict(report, traj, expected="spatial_infinity"):
    out = V.verify_corollary_shrink(report, traj)
    out["report"] = report.to_dict()
    out["expected_verdict"] = expected
    if out["verdict"] != expected:
        out["pass"] = False
    elif expected == "spatial_infinity":
        out["pass"] = bool(out["t_rel_error"] <= 0.02 and out["type_one_rel_error"] <= 0.05
                           and report.rm_argmax_outer)
    elif expected == "degenerate":
        out["pass"] = bool(out["t_rel_error"] <= 0.02)
    else:
        out["pass"] = True
    return out


def equivalence_verdict(traj, Gs, c_init):
    est = V.measure_uniform_equivalence(traj)
    centers, means, rho, decreasing = V.tail_trend(traj, est)
    out = est.to_dict()
    out.update({"tail_bin_centers": centers, "tail_bin_means": means, "tail_spearman": rho,
                "tail_strictly_decreasing": decreasing, "main_estimates": V.measure_main_estimates(traj, Gs, c_init)})
    out["pass"] = bool(np.isfinite(est.c_star_measured) and decreasing)
    return out


def stability_verdict(traj):
    st = V.verify_cylinder_stability(traj)
    out = {k: v for k, v in st.items() if k not in ("stability_sup", "ratio")}
    lo, hi = out["tail_ratio_min"], out["tail_ratio_max"]
    out["pass"] = bool(np.isfinite(lo) and 0.9 <= lo and hi <= 1.1)
    return out


def evolution_verdict(traj, cfg):
    dt = cfg.analysis["evolution_probe_dt"]
    out = {"windows": []}
    ok = True
    for frac in (0.0, 0.5):
        w = D.sample_windows(traj, [frac], dt)[0]
        r = D.check_evolution_inequalities(w)
        tol = r.identity_gamma_residual
        row = r.to_dict()
        row.update({"fraction_of_t_form": frac, "t": w[1].t, "gamma_tolerance": tol,
                    "gamma_pass": r.ineq_gamma_margin >= -tol, "rho_pass": r.rho_zero})
        ok = ok and row["gamma_pass"] and row["rho_pass"]
        out["windows"].append(row)
    out["pass"] = bool(ok)
    return out


def blowup_verdict(traj, report, eta):
    out = {}
    T = report.t_sing_est
    ns = B.build_sequence(traj, "non_soliton", T)
    ss = B.build_sequence(traj, "soliton_seeking", T)
    for name, seq in (("non_soliton", ns), ("soliton_seeking", ss)):
        ratio = B.limit_ratio(seq, traj)
        crit, crit_one = B.soliton_criterion(seq, traj)
        last = len(seq.points) - 1
        try:
            osc = B.rescale(seq, traj, last).oscillation()
        except WarpflowError:
            osc = None
        out[name] = {"sequence": seq.to_dict(), "ratio_series": B.ratio_series(seq, traj),
                     "ratio_limit": ratio, "criterion_series": B.curvature_ratio_series(seq, traj),
                     "criterion_limit": crit, "criterion_is_one": crit_one, "rescaled_oscillation": osc}
    c2 = float(np.mean([c[1] for c in ns.achieved_c]))
    expected = B.closed_form_ratio(eta, c2)
    out["closed_form_ratio"] = expected
    n, s = out["non_soliton"], out["soliton_seeking"]
    out["pass"] = bool(abs(c2 - 1) <= 0.05 and abs(n["ratio_limit"] - expected) <= 0.05 * expected
                       and n["criterion_limit"] <= 0.6 and abs(s["ratio_limit"] - 1) <= 0.02
                       and abs(s["criterion_limit"] - 1) <= 0.02 and ns.essential and ss.essential)
    return out


def soliton_verdict(cfg, blowup=None):
    p = cfg.spec["p"]
    worst = 0.0
    y = np.linspace(-3.0, 3.0, 61)
    for pp in (2, 3, 4):
        for lam in (-2.0, -1.0, -0.5):
            worst = max(worst, S.max_residual(S.constant_solution(pp, pp, lam, y)))
    c = np.sqrt(p - 1.0)
    sol = S.integrate_ivp(p, p, -1.0, 0.0, [0.0, 1.01 * c, 0.0, c, 0.0], 2.0, dy=1e-3)
    out = {"constant_residual_max": worst, "ivp_departure": S.departure(sol),
           "ivp_stopped_early": sol.stopped_early}
    if blowup is not None:
        for name in ("non_soliton", "soliton_seeking"):
            r = blowup[name]["ratio_limit"]
            out[f"{name}_is_soliton_limit"] = S.classify_blowup_limit(r, 1.0, p, p)
    out["pass"] = bool(worst <= 1e-12 and out["ivp_departure"] > 0)
    return out


# ---------------------------------------------------------------- orchestration

def _analyze(cfg, traj, report, Gs, c_init):
    """Verdicts keyed by file stem, each with a producing operation."""
    verdicts = {}
    if cfg.scenario == "cylinder":
        verdicts["exact_solution"] = ("harness.exact_solution_verdict", exact_solution_verdict(traj))
    if report.detected:
        expected = EXPECTED_SINGULARITY.get(cfg.scenario, "spatial_infinity")
        verdicts["singularity"] = ("verify.verify_corollary_shrink", singularity_verdict(report, traj, expected))
    # the estimates only apply to admissible perturbations
    if cfg.analysis["theorem_checks"] and cfg.scenario not in ("cylinder", "custom"):
        verdicts["uniform_equivalence"] = ("verify.measure_uniform_equivalence",
                                           equivalence_verdict(traj, Gs, c_init))
        if cfg.scenario == "perturbed_cylinder":
            verdicts["stability"] = ("verify.verify_cylinder_stability", stability_verdict(traj))
        if cfg.scenario == "doubly_warped":
            verdicts["evolution"] = ("diagnostics.check_evolution_inequalities", evolution_verdict(traj, cfg))
    blow = None
    if cfg.analysis["blowup"] and cfg.scenario == "doubly_warped" and report.detected:
        try:
            blow = blowup_verdict(traj, report, cfg.spec["eta"])
            verdicts["blowup"] = ("blowup.build_sequence", blow)
        except (FeasibilityError, InconclusiveError) as exc:
            verdicts["blowup"] = ("blowup.build_sequence", {"error": f"{type(exc).__name__}: {exc}", "pass": False})
    if cfg.analysis["soliton"] and cfg.scenario == "doubly_warped":
        verdicts["soliton"] = ("soliton.integrate_ivp", soliton_verdict(cfg, blow))
    for _, v in verdicts.values():
        v["seed"] = cfg.seed
    return verdicts


def run_experiment(cfg: ExperimentConfig, out_dir=None):
    """Run one experiment and write its artifact tree.  Returns ``(exit_status, out_dir)``."""
    out_dir = resolve_output_dir(cfg) if out_dir is None else out_dir
    os.makedirs(os.path.join(out_dir, "verdicts"), exist_ok=True)
    manifest = {"schema_version": SCHEMA_VERSION, "seed": cfg.seed, "scenario": cfg.scenario,
                "status": "incomplete", "files": {}}

    def emit(name, op, obj, frame=None):
        _write_json(os.path.join(out_dir, name), obj)
        manifest["files"][name] = {"operation": op, "frame": frame}

    def flush():
        _write_json(os.path.join(out_dir, "manifest.json"), manifest)

    emit("effective_config.json", "harness.ExperimentConfig.to_dict", cfg.to_dict())
    spec, state0, Gs = build_scenario(cfg)
    arep = assumptions_report(cfg, spec, state0, Gs)
    arep["seed"] = cfg.seed
    emit("assumptions.json", "assumptions.validate_main_assumptions", arep, 0)
    emit("checkpoint_initial.json", "flow.state_to_dict", F.state_to_dict(state0), 0)
    flush()
    try:
        traj, report = F.run(state0, cfg.integrator_config())
    except (NumericError, SingularityImminent, SingularStateError) as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        flush()
        return EXIT_NUMERIC, out_dir
    last = len(traj.frames) - 1
    emit("checkpoint_final.json", "flow.state_to_dict", F.state_to_dict(traj.frames[-1]), last)
    rows = D.diagnostics_rows(traj, report.t_sing_est if np.isfinite(report.t_sing_est) else np.nan, Gs)
    for r in rows:
        r["seed"] = cfg.seed
    D.write_csv(rows, os.path.join(out_dir, "diagnostics.csv"), D.CSV_FIELDS + ("seed",))
    manifest["files"]["diagnostics.csv"] = {"operation": "diagnostics.compute_frame", "frame": "all"}
    emit("singularity_report.json", "flow.singularity_report", dict(report.to_dict(), seed=cfg.seed), last)
    try:
        verdicts = _analyze(cfg, traj, report, Gs, arep["c_init"])
    except (NumericError, SingularStateError) as exc:
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        flush()
        return EXIT_NUMERIC, out_dir
    for stem, (op, v) in sorted(verdicts.items()):
        emit(f"verdicts/{stem}.json", op, v, "all")
    manifest["status"] = "complete"
    manifest["passed"] = {stem: bool(v["pass"]) for stem, (_, v) in verdicts.items()}
    flush()
    return (EXIT_OK if all(manifest["passed"].values()) else EXIT_ACCEPTANCE), out_dir


def validate_experiment(cfg: ExperimentConfig):
    spec, state0, Gs = build_scenario(cfg)
    rep = assumptions_report(cfg, spec, state0, Gs)
    rep["seed"] = cfg.seed
    return rep


def _load_manifest(d):
    path = os.path.join(d, "manifest.json")
    if not os.path.exists(path):
        raise SchemaError(f"{d} has no manifest")
    m = _read_json(path)
    if m.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{d}: schema version {m.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    return m


def analyze(out_dir):
    """Re-run the flow from the stored initial checkpoint and recompute every verdict.

    Returns the fresh verdicts and whether they match the stored files exactly.
    """
    _load_manifest(out_dir)
    cfg = ExperimentConfig.from_dict(_read_json(os.path.join(out_dir, "effective_config.json")))
    state0 = F.load_checkpoint(os.path.join(out_dir, "checkpoint_initial.json"))
    _, _, Gs = build_scenario(cfg)
    arep = _read_json(os.path.join(out_dir, "assumptions.json"))
    traj, report = F.run(state0, cfg.integrator_config())
    fresh = {k: _clean(v) for k, (_, v) in _analyze(cfg, traj, report, Gs, arep["c_init"]).items()}
    stored = {}
    vdir = os.path.join(out_dir, "verdicts")
    for name in sorted(os.listdir(vdir)):
        stored[name[:-5]] = _read_json(os.path.join(vdir, name))
    fresh = json.loads(json.dumps(fresh, sort_keys=True))
    return {"verdicts": fresh, "consistent": fresh == stored,
            "passed": {k: v["pass"] for k, v in fresh.items()}}


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
        yield prefix, float(obj)


def compare_runs(dir_a, dir_b):
    """Per-metric relative differences between two artifact trees (``seed`` fields excluded)."""
    _load_manifest(dir_a)
    _load_manifest(dir_b)
    names = ["singularity_report.json", "assumptions.json"]
    for d in (dir_a, dir_b):
        vdir = os.path.join(d, "verdicts")
        if os.path.isdir(vdir):
            names += [f"verdicts/{n}" for n in sorted(os.listdir(vdir)) if f"verdicts/{n}" not in names]
    metrics = {}
    for name in names:
        pa, pb = os.path.join(dir_a, name), os.path.join(dir_b, name)
        if not (os.path.exists(pa) and os.path.exists(pb)):
            continue
        fa, fb = dict(_flatten(_read_json(pa))), dict(_flatten(_read_json(pb)))
        for k in sorted(set(fa) & set(fb)):
            if k.split(".")[-1] == "seed":
                continue
            a, b = fa[k], fb[k]
            scale = max(abs(a), abs(b))
            metrics[f"{name}:{k}"] = {"a": a, "b": b, "rel_diff": 0.0 if scale == 0 else abs(a - b) / scale}
    worst = max((m["rel_diff"] for m in metrics.values()), default=0.0)
    return {"schema_version": SCHEMA_VERSION, "metrics": metrics, "max_rel_diff": worst}
