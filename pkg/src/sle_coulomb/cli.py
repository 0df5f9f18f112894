"""Command-line front end: enumeration, evaluation, verification suites and
simulation, each writing machine-readable artifacts.

Exit status is 0 exactly when every check of the run passed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import coulomb, hulls, loewner, operators
from .errors import SLEError
from .linkpatterns import LinkPattern, count_link_patterns, enumerate_link_patterns, parse_arcs
from .params import (INF, BoundaryConfig, lambda_excited_closed, lambda_ground_closed, make_kappa_params,
                     parse_kappa)

OUT_ENV = "SLE_COULOMB_OUT"

DEFAULT_TOLERANCES = {
    "patterns": 0.0,
    "eval": math.inf,
    "verify-nullvec": 1e-4,
    "verify-ward": 1e-4,
    "verify-cm": 1e-5,
    "verify-commutators": 1e-3,
    "verify-capacity": 0.2,
    "simulate": 1e-10,
    "report": 0.0,
}

SUBCOMMAND_KEYS = {
    "patterns": {"n", "m"},
    "eval": {"kappa", "n", "m", "pattern", "points", "u", "kind", "jobs_file"},
    "verify-nullvec": {"kappa", "n", "m", "pattern", "points", "u", "kind"},
    "verify-ward": {"kappa", "n", "m", "pattern", "points", "u", "kind", "lambda_u"},
    "verify-cm": {"kappa", "n", "trials"},
    "verify-commutators": {"kappa", "n", "m", "pattern", "points"},
    "verify-capacity": {"x", "y", "c", "eps"},
    "simulate": {"config", "kappa", "n", "m", "pattern", "points", "u", "dt", "steps", "seeds", "schedule",
                 "resolution"},
    "report": {"inputs"},
}
COMMON_KEYS = {"tol", "stencil_order", "step_scale", "jobs"}


class UsageError(SLEError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    parameters: dict
    output_path: str
    seed: int | None = None

    def __post_init__(self):
        if self.subcommand not in SUBCOMMAND_KEYS:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        allowed = SUBCOMMAND_KEYS[self.subcommand] | COMMON_KEYS
        for key in self.parameters:
            if key not in allowed:
                raise UsageError(f"unknown key {key!r} for {self.subcommand}")
        self.validate()

    def validate(self) -> None:
        """Check numeric parameters against the preconditions of the owning module."""
        p = self.parameters
        checks = {
            "kappa": lambda v: parse_kappa(v) > 0,
            "n": lambda v: int(v) >= 1,
            "m": lambda v: 0 <= 2 * int(v) <= int(p.get("n", 2 * int(v))),
            "trials": lambda v: int(v) >= 1,
            "steps": lambda v: int(v) >= 0,
            "dt": lambda v: float(v) > 0,
            "tol": lambda v: float(v) >= 0,
            "step_scale": lambda v: float(v) > 0,
            "stencil_order": lambda v: int(v) in (2, 4, 6),
            "jobs": lambda v: int(v) >= 1,
            "resolution": lambda v: int(v) >= 1,
            "c": lambda v: float(v) > 0,
        }
        for key, ok in checks.items():
            if p.get(key) is None:
                continue
            try:
                valid = ok(p[key])
            except (TypeError, ValueError, SLEError):
                valid = False
            if not valid:
                raise UsageError(f"invalid value for {key!r}: {p[key]!r}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        unknown = set(data) - {"subcommand", "parameters", "output_path", "seed"}
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    def get(self, key, default=None):
        value = self.parameters.get(key)
        return default if value is None else value

    @property
    def tol(self) -> float:
        return float(self.get("tol", DEFAULT_TOLERANCES[self.subcommand]))


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    parameters: dict = field(default_factory=dict)


@dataclass
class SuiteSummary:
    subcommand: str
    checks: list = field(default_factory=list)
    wall_time: float = 0.0
    tolerance_source: str = "default"

    @property
    def checks_run(self) -> int:
        return len(self.checks)

    @property
    def passed(self) -> int:
        return sum(1 for c in self.checks if c.passed)

    @property
    def failed(self) -> list:
        return [(c.name, c.residual, c.tolerance) for c in self.checks if not c.passed]

    def add(self, name, residual, tolerance, passed=None, **params):
        residual = float(residual)
        ok = (residual < tolerance) if passed is None else bool(passed)
        self.checks.append(CheckResult(name, residual, float(tolerance), ok, params))

    def as_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "checks_run": self.checks_run,
            "passed": self.passed,
            "failed": [{"name": n, "residual": _num(r), "tolerance": _num(t)} for n, r, t in self.failed],
            "tolerance_source": self.tolerance_source,
            "checks": [{"name": c.name, "residual": _num(c.residual), "tolerance": _num(c.tolerance),
                        "passed": c.passed, "parameters": c.parameters} for c in self.checks],
        }


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def emit_report(summaries, path, timestamp: str | None = None) -> dict:
    """Write a JSON report; keys are sorted so identical runs give identical
    files apart from the ``timestamp`` block, which also holds wall times."""
    report = {
        "timestamp": {"created_utc": timestamp or datetime.now(timezone.utc).isoformat(),
                      "wall_time_s": [s.wall_time for s in summaries]},
        "summaries": [s.as_dict() for s in summaries],
        "checks_run": sum(s.checks_run for s in summaries),
        "failed": [dict(f, subcommand=s.subcommand) for s in summaries for f in s.as_dict()["failed"]],
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


# helpers --------------------------------------------------------------------

def _points(cfg: RunConfig, n: int):
    pts = cfg.get("points")
    if pts is None:
        # irregular default spacing avoids symmetric zeros
        return tuple(j + 0.2 * j * j for j in range(n))
    if isinstance(pts, str):
        pts = [float(p) for p in pts.split(",")]
    if len(pts) != n:
        raise UsageError(f"--points needs {n} values")
    return tuple(float(p) for p in pts)


def _u(cfg: RunConfig, pts, required=False):
    u = cfg.get("u")
    if u in (None, "inf", "infinity"):
        if required:
            return pts[-1] + 1.7
        return INF
    return float(u)


def _patterns(cfg: RunConfig, n: int, m: int):
    text = cfg.get("pattern")
    if text is None:
        return enumerate_link_patterns(n, m)
    return [LinkPattern.from_text(text) if text.startswith("n=") else parse_arcs(text, n)]


def _stencil(cfg: RunConfig) -> operators.StencilSpec:
    return operators.StencilSpec(int(cfg.get("stencil_order", 4)), float(cfg.get("step_scale", 1e-2)))


def _int(cfg, key, default=None):
    v = cfg.get(key, default)
    if v is None:
        raise UsageError(f"missing required key {key!r}")
    return int(v)


def _kappa(cfg):
    v = cfg.get("kappa")
    if v is None:
        raise UsageError("missing required key 'kappa'")
    return parse_kappa(v)


def _parallel(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# subcommands ----------------------------------------------------------------

def _run_patterns(cfg: RunConfig, summary: SuiteSummary, out: Path):
    n, m = _int(cfg, "n"), _int(cfg, "m")
    pats = enumerate_link_patterns(n, m)
    for p in pats:
        print(p.to_text())
    row = count_link_patterns(n, m, detailed=True)
    print(row.as_row())
    summary.add("count-vs-ballot", abs(row.enumerated - row.ballot), 0.5, n=n, m=m)
    with open(out / "patterns.json", "w") as fh:
        json.dump({"patterns": [p.to_text() for p in pats], "counts": row.as_row()}, fh, indent=2, sort_keys=True)


def _eval_job(job):
    return coulomb.run_job(job[1], job[0])


def _run_eval(cfg: RunConfig, summary: SuiteSummary, out: Path):
    if cfg.get("jobs_file"):
        with open(cfg.get("jobs_file")) as fh:
            jobs = json.load(fh)
    else:
        n, m = _int(cfg, "n"), _int(cfg, "m")
        pts = _points(cfg, n)
        kind = cfg.get("kind", "ground")
        u = _u(cfg, pts, required=(kind == "excited"))
        jobs = [{"kappa": cfg.get("kappa"), "n": n, "m": m, "pattern": p.to_text(), "points": list(pts),
                 "u": None if math.isinf(u) else u, "kind": kind, "tol": cfg.get("tol", coulomb.DEFAULT_TOL)}
                for p in _patterns(cfg, n, m)]
    rows = _parallel(_eval_job, list(enumerate(jobs)), int(cfg.get("jobs", 1)))
    coulomb.write_results_csv(rows, out / "eval.csv")
    tables = {}
    for i, job in enumerate(jobs):
        u = job.get("u")
        u = INF if u in (None, "inf", "infinity") else float(u)
        kind = job.get("kind", "ground")
        key = f"{parse_kappa(job['kappa'])!r}/{job['n']}/{job['m']}/{kind}/{'u' if math.isfinite(u) else 'inf'}"
        if key not in tables:
            spec = coulomb.make_master_spec(make_kappa_params(job["kappa"]), BoundaryConfig(tuple(job["points"]), u),
                                            int(job["m"]), kind)
            tables[key] = coulomb.exponent_report(spec)
    with open(out / "exponents.json", "w") as fh:
        json.dump(tables, fh, indent=2, sort_keys=True)
    for r in rows:
        print(f"job {r['job_id']}: {r['re_value']:+.12e} {r['im_value']:+.12e}i  (abs_error {r['abs_error']:.1e})")
        summary.add(f"eval-{r['job_id']}", r["abs_error"], math.inf)


def _nullvec_one(args):
    kappa, pattern_text, pts, u, kind, stencil, tol = args
    params = make_kappa_params(kappa)
    pattern = LinkPattern.from_text(pattern_text)
    cfg = BoundaryConfig(pts, u)
    n, m = cfg.n, pattern.m
    lam = 0.0
    if cfg.has_finite_u:
        lam = lambda_excited_closed(kappa, n, m) if kind == "excited" else lambda_ground_closed(kappa, n, m)
    psi = coulomb.ScreeningFunction(params, pattern, kind, finite_u=cfg.has_finite_u)
    rep = operators.nullvec_residual_system(psi, cfg, kappa, lam, stencil, tol)
    return pattern_text, rep.residuals


def _run_nullvec(cfg: RunConfig, summary: SuiteSummary, out: Path):
    kappa, n, m = _kappa(cfg), _int(cfg, "n"), _int(cfg, "m")
    pts = _points(cfg, n)
    kind = cfg.get("kind", "ground")
    u = _u(cfg, pts, required=(kind == "excited"))
    tasks = [(kappa, p.to_text(), pts, u, kind, _stencil(cfg), cfg.tol) for p in _patterns(cfg, n, m)]
    rows = []
    for text, res in _parallel(_nullvec_one, tasks, int(cfg.get("jobs", 1))):
        for j, r in enumerate(res, 1):
            summary.add(f"nullvec[{text}][j={j}]", r, cfg.tol, kappa=kappa, kind=kind)
            rows.append({"check": "null-vector", "n": n, "m": m, "kappa": kappa, "pattern": text, "indices": j,
                         "residual": r, "scale": 1.0, "passed": r < cfg.tol})
            print(f"{text} j={j}: relative residual {r:.2e}")
    operators.write_operator_report(rows, out / "nullvec.csv")


def _run_ward(cfg: RunConfig, summary: SuiteSummary, out: Path):
    kappa, n, m = _kappa(cfg), _int(cfg, "n"), _int(cfg, "m")
    pts = _points(cfg, n)
    u = _u(cfg, pts, required=True)
    kind = cfg.get("kind", "excited")
    lam = cfg.get("lambda_u")
    if lam is None:
        lam = lambda_excited_closed(kappa, n, m) if kind == "excited" else lambda_ground_closed(kappa, n, m)
    params = make_kappa_params(kappa)
    at = BoundaryConfig(pts, u)
    rows = []
    for p in _patterns(cfg, n, m):
        psi = coulomb.ScreeningFunction(params, p, kind, finite_u=True)
        rep = operators.ward_residuals(psi, at, kappa, float(lam), _stencil(cfg), cfg.tol)
        for name, r in zip(("translation", "dilatation", "special-conformal"), rep.residuals):
            summary.add(f"ward-{name}[{p.to_text()}]", r, cfg.tol, kappa=kappa, kind=kind, lambda_u=float(lam))
            rows.append({"check": f"ward-{name}", "n": n, "m": m, "kappa": kappa, "pattern": p.to_text(),
                         "residual": r, "scale": rep.scale, "passed": r < cfg.tol})
            print(f"{p.to_text()} {name}: {r:.2e}")
    operators.write_operator_report(rows, out / "ward.csv")


def random_polynomial(n: int, rng: np.random.Generator, degree: int = 3):
    """Smooth test function: separable polynomial plus one coupling monomial."""
    coef = rng.normal(size=(n, degree + 1))
    mix = rng.normal()

    def g(y):
        y = np.asarray(y, dtype=float)[:n]
        return float(sum(np.polyval(coef[j], y[j]) for j in range(n)) + mix * np.prod(y))

    return g


def _run_cm(cfg: RunConfig, summary: SuiteSummary, out: Path):
    kappa, n = _kappa(cfg), _int(cfg, "n")
    trials = _int(cfg, "trials", 20)
    rng = np.random.default_rng(cfg.seed or 0)
    rows = []
    for t in range(trials):
        x = np.cumsum(np.r_[rng.uniform(-1, 1), rng.uniform(0.6, 1.5, n - 1)])
        r = operators.cm_conjugation_residual(n, kappa, random_polynomial(n, rng), x, _stencil(cfg))
        summary.add(f"cm[trial={t}]", r, cfg.tol, kappa=kappa, n=n)
        rows.append({"check": "cm-conjugation", "n": n, "kappa": kappa, "indices": t, "residual": r,
                     "scale": 1.0, "passed": r < cfg.tol})
    print(f"max residual over {trials} trials: {max(r['residual'] for r in rows):.2e}")
    operators.write_operator_report(rows, out / "cm.csv")


def _run_commutators(cfg: RunConfig, summary: SuiteSummary, out: Path):
    kappa, n, m = _kappa(cfg), _int(cfg, "n"), _int(cfg, "m")
    pts = np.array(_points(cfg, n))
    params = make_kappa_params(kappa)
    rng = np.random.default_rng(cfg.seed or 0)
    rows = []
    for p in _patterns(cfg, n, m):
        drift = operators.DriftField(coulomb.ScreeningFunction(params, p), kappa, n)
        g = random_polynomial(n, rng)
        r = operators.commutator_residual_M(drift, 0, 1, g, pts, stencil=_stencil(cfg))
        summary.add(f"M-commutator[{p.to_text()}]", r, cfg.tol, kappa=kappa)
        rows.append({"check": "M-commutator", "n": n, "m": m, "kappa": kappa, "pattern": p.to_text(),
                     "indices": "1,2", "residual": r, "scale": 1.0, "passed": r < cfg.tol})
        print(f"{p.to_text()} [M1,M2]: {r:.2e}")
    g = random_polynomial(n, rng)
    rat, trig = operators.commutator_residual_L(0, 1, g, pts, kappa, _stencil(cfg))
    summary.add("L-commutator-rational", rat, cfg.tol, kappa=kappa)
    rows.append({"check": "L-commutator-rational", "n": n, "kappa": kappa, "indices": "1,2", "residual": rat,
                 "scale": 1.0, "passed": rat < cfg.tol})
    rows.append({"check": "L-commutator-trigonometric (reported only)", "n": n, "kappa": kappa, "indices": "1,2",
                 "residual": trig, "scale": 1.0, "passed": ""})
    print(f"[L1,L2] rational: {rat:.2e}   trigonometric (not gated): {trig:.2e}")
    operators.write_operator_report(rows, out / "commutators.csv")


def _run_capacity(cfg: RunConfig, summary: SuiteSummary, out: Path):
    eps = cfg.get("eps", "1e-3,5e-4")
    eps = tuple(float(e) for e in (eps.split(",") if isinstance(eps, str) else eps))
    rep = hulls.check_capacity_corollary(float(cfg.get("x", 0.0)), float(cfg.get("y", 1.0)), eps,
                                         float(cfg.get("c", 1.0)))
    summary.add("capacity-richardson", abs(rep.richardson_ratio / 4 - 1), cfg.tol)
    with open(out / "capacity.json", "w") as fh:
        json.dump({k: list(v) if isinstance(v, tuple) else v for k, v in asdict(rep).items()}, fh, indent=2,
                  sort_keys=True)
    for e, meas, pred in zip(rep.eps, rep.measured, rep.predicted):
        print(f"eps={e:g}: measured {meas:.12f} predicted {pred:.12f}")
    print(f"defect ratio under halving: {rep.richardson_ratio:.4f}")


def _run_simulate(cfg: RunConfig, summary: SuiteSummary, out: Path):
    params = dict(cfg.parameters)
    if cfg.get("config"):
        params.update(loewner.load_evolution_config(cfg.get("config")))
    kappa = parse_kappa(params["kappa"])
    n = int(params.get("n", len(params.get("points", [0.0]))))
    pts = params.get("points") or list(_points(cfg, n))
    if isinstance(pts, str):
        pts = [float(p) for p in pts.split(",")]
    u = params.get("u")
    u = INF if u in (None, "inf") else float(u)
    dt, steps = float(params.get("dt", 1e-3)), int(params.get("steps", 100))
    seeds = params.get("seeds") or [cfg.seed or 0]
    if isinstance(seeds, (int, str)):
        seeds = [int(s) for s in str(seeds).split(",")]
    schedule = params.get("schedule")
    if isinstance(schedule, str):
        schedule = [int(s) for s in schedule.split(",")]
    drift = None
    if params.get("m"):
        m = int(params["m"])
        text = params.get("pattern")
        pattern = (LinkPattern.from_text(text) if text and text.startswith("n=")
                   else parse_arcs(text, n) if text else enumerate_link_patterns(n, m)[0])
        psi = coulomb.ScreeningFunction(make_kappa_params(kappa), pattern, finite_u=math.isfinite(u))
        drift = operators.DriftField(psi, kappa, n)
    evo = []
    for seed in seeds:
        state = loewner.evolve(pts, kappa, dt, steps, int(seed), drift, schedule, u)
        traces = loewner.sample_traces(state, int(params.get("resolution", 1)))
        loewner.write_traces_csv(traces, out / f"traces_seed{seed}.csv")
        summary.add(f"hcap-additivity[seed={seed}]", abs(state.total_hcap - 2 * state.time), cfg.tol)
        evo.append({"seed": int(seed), "time": state.time, "driving": state.driving.tolist(),
                    "marked": _num(state.marked), "hcap": state.total_hcap})
    with open(out / "evolution.json", "w") as fh:
        json.dump({"kappa": kappa, "points": list(pts), "dt": dt, "steps": steps, "runs": evo}, fh, indent=2,
                  sort_keys=True)
    print(f"simulated {len(seeds)} evolution(s); traces in {out}")


def _run_report(cfg: RunConfig, summary: SuiteSummary, out: Path):
    inputs = cfg.get("inputs") or sorted(str(p) for p in out.glob("*.summary.json"))
    if isinstance(inputs, str):
        inputs = inputs.split(",")
    for path in inputs:
        with open(path) as fh:
            data = json.load(fh)
        for s in data.get("summaries", []):
            for c in s["checks"]:
                res = float(c["residual"])
                summary.add(f"{s['subcommand']}:{c['name']}", res, float(c["tolerance"]), passed=c["passed"])


DISPATCH = {
    "patterns": _run_patterns,
    "eval": _run_eval,
    "verify-nullvec": _run_nullvec,
    "verify-ward": _run_ward,
    "verify-cm": _run_cm,
    "verify-commutators": _run_commutators,
    "verify-capacity": _run_capacity,
    "simulate": _run_simulate,
    "report": _run_report,
}


def run(config: RunConfig) -> SuiteSummary:
    """Dispatch one subcommand and write its artifacts under ``output_path``."""
    out = Path(config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    summary = SuiteSummary(config.subcommand,
                           tolerance_source=("flag --tol" if "tol" in config.parameters
                                             else f"DEFAULT_TOLERANCES['{config.subcommand}']"))
    start = time.perf_counter()
    DISPATCH[config.subcommand](config, summary, out)
    summary.wall_time = time.perf_counter() - start
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sle-coulomb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float)
    common.add_argument("--stencil-order", type=int, choices=(2, 4, 6))
    common.add_argument("--step-scale", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=os.environ.get(OUT_ENV, "sle_out"))
    spec = {
        "patterns": ["n", "m"],
        "eval": ["kappa", "n", "m", "pattern", "points", "u", "kind", "jobs-file"],
        "verify-nullvec": ["kappa", "n", "m", "pattern", "points", "u", "kind"],
        "verify-ward": ["kappa", "n", "m", "pattern", "points", "u", "kind", "lambda-u"],
        "verify-cm": ["kappa", "n", "trials"],
        "verify-commutators": ["kappa", "n", "m", "pattern", "points"],
        "verify-capacity": ["x", "y", "c", "eps"],
        "simulate": ["config", "kappa", "n", "m", "pattern", "points", "u", "dt", "steps", "seeds", "schedule",
                     "resolution"],
        "report": ["inputs"],
    }
    for name, keys in spec.items():
        p = sub.add_parser(name, parents=[common])
        for key in keys:
            p.add_argument(f"--{key}")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    skip = {"subcommand", "out", "seed"}
    params = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if params.get("jobs") == 1:
        params.pop("jobs")
    for key in ("n", "m", "trials", "steps", "resolution"):
        if key in params:
            params[key] = int(params[key])
    for key in ("x", "y", "c", "dt", "lambda_u"):
        if key in params:
            params[key] = float(params[key])
    if "kappa" in params:
        params["kappa"] = parse_kappa(params["kappa"])
    return RunConfig(args.subcommand, params, args.out, args.seed)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        summary = run(cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except SLEError as exc:
        print(f"{args.subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    emit_report([summary], Path(cfg.output_path) / f"{cfg.subcommand}.summary.json")
    print(f"{summary.passed}/{summary.checks_run} checks passed")
    return 0 if not summary.failed else 1


if __name__ == "__main__":
    sys.exit(main())
