"""Command-line front end: ``fracdyn {ml,solve,analyze,reproduce}``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from fracdyn.config import ANALYSIS_ORDER, ScenarioConfig
from fracdyn.errors import FracDynError, InputError, MLAccuracyError, NoCertificateError
from fracdyn.fields import FieldSpec, sharp_rate
from fracdyn.fraccalc import SampledFunction
from fracdyn.mlf import MLEvalRequest, ml_scalar, mittag_leffler
from fracdyn.report import SCHEMA_VERSION, Report, jsonable
from fracdyn.solver import CaputoIVP, SolverConfig, Trajectory, residual_check, solve_ivp
from fracdyn.stability import (
    admissible_radius,
    build_super_solution,
    check_certificate,
    check_no_fast_decay,
    check_separation,
    comparison_rhs,
    decade_fits,
    estimate_C_alpha_A,
    fit_decay,
    linearize,
    predicted_decay,
    sector_classify,
    verify_comparison,
)
from fracdyn.stability.sector import SectorVerdict

log = logging.getLogger("fracdyn")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ML_ACCURACY = 2
EXIT_INCOMPLETE = 3
EXIT_USAGE = 64
EXIT_BAD_CONFIG = 65

RESIDUAL_TOL = 1e-3
FAIL_VERDICTS = {"fail", "ordering_violated", "hypotheses_failed", "no_certificate"}


# {{{ helpers


def worker_count() -> int:
    """``FRACDYN_THREADS`` (0 or unset = one worker per CPU)."""
    raw = os.environ.get("FRACDYN_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"FRACDYN_THREADS must be an integer, got {raw!r}") from None
    return n if n > 0 else (os.cpu_count() or 1)


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Order-preserving map over a thread pool sized by :func:`worker_count`."""
    items = list(items)
    n = min(worker_count(), max(len(items), 1))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _meta() -> dict:
    from importlib.metadata import PackageNotFoundError, version

    try:
        v = version("artifact")
    except PackageNotFoundError:
        v = "unknown"
    return {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": v}


def write_json(path: Path, payload: dict) -> None:
    """Write *payload* with ``schema_version`` and a ``meta`` block (the only non-deterministic part)."""
    doc = {"schema_version": SCHEMA_VERSION, **jsonable(payload), "meta": _meta()}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _residuals(traj: Trajectory, p: CaputoIVP) -> dict:
    if traj.times.size < 2:
        return {"nodes_max": 0.0, "midpoints_max": 0.0}
    return {
        "nodes_max": float(residual_check(traj, p).max()),
        "midpoints_max": float(residual_check(traj, p, "midpoints").max()),
    }


# }}}


# {{{ analysis pipeline


def run_analyses(cfg: ScenarioConfig, traj: Trajectory | None = None) -> dict:
    """Run the configured analyses in pipeline order and merge the reports."""
    f = cfg.field.build()
    d = cfg.field.dim
    ops = sorted(cfg.analyses, key=lambda a: ANALYSIS_ORDER.index(a["op"]))
    reports: dict[str, dict] = {}
    state: dict = {}
    need_traj = any(a["op"] in ("comparison", "decay", "no_fast_decay") for a in ops)
    if need_traj and traj is None:
        traj = solve_ivp(cfg.problem(), cfg.solver_config())

    lin = linearize(f, np.zeros(d))
    for a in ops:
        op = a["op"]
        if op == "sector":
            rep = sector_classify(cfg.alpha, lin.A).as_report()
            state["sector"] = rep.verdict
        elif op == "constants":
            sec = sector_classify(cfg.alpha, lin.A)
            if sec.verdict is not SectorVerdict.STABLE_SECTOR:
                rep = Report("estimate_C_alpha_A", "not_applicable", warnings=[f"sector verdict {sec.verdict.value}"])
            else:
                pc = estimate_C_alpha_A(cfg.alpha, sec.eigenvalues, a.get("t_max", 1e3))
                state["constants"] = pc
                rep = pc.as_report()
        elif op == "radius":
            pc = state.get("constants")
            if pc is None:
                rep = Report("admissible_radius", "not_applicable", warnings=["needs the constants analysis"])
            else:
                try:
                    rep = admissible_radius(pc, remainder=lin.remainder, seed=cfg.seed).as_report()
                except NoCertificateError as exc:
                    rep = Report("admissible_radius", "no_certificate", warnings=[str(exc)])
        elif op == "certificate":
            cert = cfg.field.certificate()
            if cert is None:
                rep = Report("check_certificate", "not_applicable", warnings=["no certificate registered for this field"])
            else:
                rep = check_certificate(cert, f, a.get("samples", 16384), cfg.seed)
                pred = predicted_decay(cert, cfg.alpha)
                rep.constants["classification"] = pred.classification
                rep.constants["predicted_exponent"] = pred.exponent
                state["certificate"] = (cert, pred, rep.passed)
            sharp = sharp_rate(cfg.field, cfg.alpha)
            if sharp is not None:
                rep.constants["reference_sharp_rate"] = sharp
        elif op == "comparison":
            rep = _comparison(cfg, traj)
        elif op == "decay":
            rep = _decay(cfg, traj, a, state)
        elif op == "no_fast_decay":
            win = a.get("window")
            rep = check_no_fast_decay(traj, cfg.alpha, a["beta_test"], win)
        elif op == "separation":
            scfg = cfg.solver_config()
            if "n" in a:
                scfg = replace(scfg, n=a["n"])
            if d != 1:
                raise InputError("separation needs a scalar field")
            rep = check_separation(
                cfg.alpha,
                f,
                a.get("x1", cfg.x0[0] / 2),
                a.get("x2", cfg.x0[0]),
                a.get("horizon", cfg.horizon),
                scfg,
                cfg.field.exceptional_points(),
            )
        reports[op] = rep.to_dict()

    failed = sorted(op for op, r in reports.items() if r["verdict"] in FAIL_VERDICTS)
    out = {
        "config": cfg.to_dict(),
        "verdict": state.get("sector", "fail" if failed else "pass"),
        "failed": failed,
        "reports": reports,
    }
    if traj is not None:
        out["trajectory"] = {"status": traj.status.value, "nodes": int(traj.times.size), "t_end": float(traj.times[-1])}
    return out


def _comparison(cfg: ScenarioConfig, traj: Trajectory) -> Report:
    cert = cfg.field.certificate()
    if cert is None or not cert.strict:
        return Report("verify_comparison", "not_applicable", warnings=["needs a strict certificate"])
    Vt = np.array([cert.V(x) for x in traj.states])
    w = build_super_solution(float(Vt[0]), cert.A_coef, cert.p, cfg.alpha)
    rep = verify_comparison(
        SampledFunction(traj.times, w(traj.times)),
        SampledFunction(traj.times, Vt),
        comparison_rhs(cert.A_coef, cert.p),
        cfg.alpha,
    )
    rep.constants.update({"t1": w.t1, "C": w.C, "A": cert.A_coef, "p": cert.p})
    return rep


def _decay(cfg: ScenarioConfig, traj: Trajectory, a: dict, state: dict) -> Report:
    T = float(traj.times[-1])
    windows = a.get("windows") or [[100.0, T] if T >= 1e3 else [1.0, T]]
    fits = [fit_decay(traj, w) for w in windows]
    decades = decade_fits(traj, a.get("decades_from", 1.0)) if T >= 10 else []
    constants = {
        "fits": [fd.__dict__ | {"m": fd.m} for fd in fits],
        "decades": [{"t_lo": fd.t_lo, "t_hi": fd.t_hi, "gamma": fd.gamma} for fd in decades],
    }
    sharp = sharp_rate(cfg.field, cfg.alpha)
    if sharp is not None:
        constants["reference_sharp_rate"] = sharp
    verdict = "info"
    cert_state = state.get("certificate")
    if cert_state and cert_state[1].exponent is not None and cert_state[2]:
        bound = cert_state[1].exponent - 0.05
        constants["predicted_exponent"] = cert_state[1].exponent
        verdict = "pass" if all(fd.gamma >= bound for fd in fits) else "fail"
    return Report("fit_decay", verdict, inputs={"alpha": cfg.alpha}, constants=constants, grids={"windows": windows})


# }}}


# {{{ reproduce


@dataclass
class Outcome:
    checks: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)

    def check(self, label: str, ok: bool, detail: str = "") -> None:
        self.checks.append((label, bool(ok), detail))

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _geo(n: int = 4000) -> SolverConfig:
    return SolverConfig(mesh="geometric", n=n)


def _scenario(name, params, alpha, x0, horizon, analyses, mesh=None, seed=0) -> ScenarioConfig:
    mesh = mesh or {"kind": "geometric", "n": 4000}
    return ScenarioConfig.from_dict(
        {
            "field": {"name": name, "params": params},
            "alpha": alpha,
            "x0": list(x0),
            "horizon": horizon,
            "mesh": mesh,
            "analyses": [{"op": op} if isinstance(op, str) else op for op in analyses],
            "seed": seed,
        }
    )


def _decreasing_positive(traj: Trajectory) -> bool:
    x = traj.states[:, 0]
    return bool(np.all(x > 0) and np.all(np.diff(x) < 0))


def reproduce_ex1(alpha, beta, seed, out: Outcome) -> None:
    alpha = 0.6 if alpha is None else alpha
    cfg = _scenario("linear_diag", {"a1": -1.0}, alpha, [1.0], 1e4, ["sector", "decay"], seed=seed)
    p = cfg.problem()
    traj = solve_ivp(p, cfg.solver_config())
    rep = run_analyses(cfg, traj)
    out.artifacts["trajectory"] = traj
    out.artifacts["report"] = rep
    out.check("sector", rep["verdict"] == "stable_sector", rep["verdict"])
    exact = np.asarray(mittag_leffler(-(traj.times**alpha), alpha), dtype=float)
    err = float(np.max(np.abs(exact - traj.states[:, 0])))
    out.check("solver vs E_alpha(-t^alpha)", err <= 1e-3, f"max error {err:.2e}")
    g = fit_decay(traj, (1e2, 1e4)).gamma
    out.check("decay rate t^-alpha", abs(g - alpha) <= 0.05, f"gamma={g:.4f}")
    scaled = traj.times[-1] ** alpha * traj.norms()[-1] * math.gamma(1 - alpha)
    out.check("t^alpha x(T) Gamma(1-alpha) -> 1", abs(scaled - 1) <= 0.2, f"{scaled:.4f}")
    nfd = check_no_fast_decay(traj, alpha, alpha + 0.1)
    out.check("no decay faster than t^-alpha", nfd.passed, f"growth={nfd.margins['growth']:.3f}")
    res = _residuals(traj, p)["nodes_max"]
    out.check("Volterra residual", res <= RESIDUAL_TOL, f"{res:.2e}")


def reproduce_ex2(alpha, beta, seed, out: Outcome) -> None:
    alpha = 0.5 if alpha is None else alpha
    beta = 3.0 if beta is None else beta
    cfg = _scenario("power_sign", {"beta": beta}, alpha, [0.5], 1e4, ["certificate", "comparison", "decay"], seed=seed)
    traj = solve_ivp(cfg.problem(), cfg.solver_config())
    rep = run_analyses(cfg, traj)
    out.artifacts["trajectory"] = traj
    out.artifacts["report"] = rep
    cert = rep["reports"]["certificate"]
    pred = alpha / (1 + beta)
    out.check("certificate", cert["verdict"] == "pass", f"v3_min={cert['margins']['v3_min']:.2e}")
    got = cert["constants"]["predicted_exponent"]
    out.check("predicted exponent alpha/(1+beta)", got is not None and abs(got - pred) <= 1e-15, f"{got}")
    cmp_rep = rep["reports"]["comparison"]
    out.check("V(x(t)) <= w(t)", cmp_rep["verdict"] == "ordering_holds", cmp_rep["verdict"])
    g = fit_decay(traj, (1e2, 1e4)).gamma
    upper = alpha / beta + 0.05
    out.check("fitted gamma within [predicted, sharp] band", pred - 0.01 <= g <= upper, f"gamma={g:.4f} band=[{pred - 0.01:.3f}, {upper:.3f}]")
    out.check("positive and decreasing", _decreasing_positive(traj))


def _certified_decay(name, params, alpha, x0, seed, out: Outcome) -> None:
    cfg = _scenario(name, params, alpha, x0, 1e4, ["sector", "certificate", "decay"], seed=seed)
    traj = solve_ivp(cfg.problem(), cfg.solver_config())
    rep = run_analyses(cfg, traj)
    out.artifacts["trajectory"] = traj
    out.artifacts["report"] = rep
    out.check("linearization has a zero eigenvalue", rep["verdict"] == "zero_eigenvalue", rep["verdict"])
    cert = rep["reports"]["certificate"]
    out.check("certificate", cert["verdict"] == "pass", f"r={cert['inputs']['r']}")
    pred = cert["constants"]["predicted_exponent"]
    g = fit_decay(traj, (1e2, 1e4)).gamma
    out.check("fitted gamma >= predicted - 0.05", g >= pred - 0.05, f"gamma={g:.4f} predicted={pred:.4f}")


def reproduce_ex4(alpha, beta, seed, out: Outcome) -> None:
    alpha = 0.5 if alpha is None else alpha
    spec = FieldSpec("cubic_plus_g", {"k": 1.0, "n": 4.0})
    r = spec.certificate().r
    _certified_decay("cubic_plus_g", spec.params, alpha, [r / 2], seed, out)


def reproduce_ex5(alpha, beta, seed, out: Outcome) -> None:
    alpha = 0.5 if alpha is None else alpha
    _certified_decay("twodim", {}, alpha, [0.2, 0.1], seed, out)


def reproduce_ex6(alpha, beta, seed, out: Outcome) -> None:
    alpha = 0.5 if alpha is None else alpha
    beta = 0.5 if beta is None else beta
    if not 0 < beta < 1:
        raise InputError("ex6 is the non-Lipschitz case and needs 0 < beta < 1")
    cfg = _scenario("power_sign", {"beta": beta}, alpha, [1.0], 1e4, ["decay", {"op": "no_fast_decay", "beta_test": alpha + 0.2}], seed=seed)
    p = cfg.problem()
    traj = solve_ivp(p, cfg.solver_config())
    rep = run_analyses(cfg, traj)
    out.artifacts["trajectory"] = traj
    out.artifacts["report"] = rep
    gamma = alpha / beta
    g = fit_decay(traj, (1e2, 1e4)).gamma
    out.check("decay rate alpha/beta", abs(g - gamma) <= 0.1, f"gamma={g:.4f} expected {gamma:.4f}")
    out.check("positive and decreasing", _decreasing_positive(traj))
    ratio = traj.states[1:, 0] * (1 + traj.times[1:] ** gamma)
    out.check("x(t)(1+t^(alpha/beta)) stays bounded above and below", ratio.max() / ratio.min() < 10, f"[{ratio.min():.3f}, {ratio.max():.3f}]")
    nfd = rep["reports"]["no_fast_decay"]
    out.check("Lipschitz lower bound on decay does not apply", nfd["verdict"] == "fail", f"growth={nfd['margins']['growth']:.3g}")
    res = _residuals(traj, p)["nodes_max"]
    out.check("Volterra residual", res <= RESIDUAL_TOL, f"{res:.2e}")


def reproduce_ex3(alpha, beta, seed, out: Outcome) -> None:
    alpha = 0.5 if alpha is None else alpha
    cfg = _scenario("exp_reciprocal", {}, alpha, [0.5], 1e4, ["decay"], seed=seed)
    traj = solve_ivp(cfg.problem(), cfg.solver_config())
    rep = run_analyses(cfg, traj)
    out.artifacts["trajectory"] = traj
    out.artifacts["report"] = rep
    out.check("positive and strictly decreasing", _decreasing_positive(traj))
    gam = [fd.gamma for fd in decade_fits(traj, 1e2)]
    out.check(
        "decade gammas from t=100 strictly decrease",
        len(gam) >= 2 and all(b < a for a, b in zip(gam, gam[1:])),
        ", ".join(f"{g:.4f}" for g in gam),
    )


def reproduce_separation(alpha, beta, seed, out: Outcome) -> None:
    alpha = 0.5 if alpha is None else alpha
    beta = 3.0 if beta is None else beta
    f = FieldSpec("power_sign", {"beta": beta})
    rep = check_separation(alpha, f.build(), 0.1, 0.2, 100.0, SolverConfig(n=1024), f.exceptional_points())
    out.artifacts["report"] = {"reports": {"separation": rep.to_dict()}}
    out.check("trajectories do not meet", rep.passed, f"min_gap={rep.margins['min_gap']:.4g}")
    out.check("min gap stable under mesh doubling", rep.margins["resolved"], f"change={rep.margins['refinement_change']:.2e}")
    lin = check_separation(alpha, lambda x: -x, 0.5, 1.0, 10.0, SolverConfig(n=512))
    t = np.array([lin.margins["argmin_time"]])
    exact = 0.5 * float(mittag_leffler(-(t**alpha), alpha)[0])
    err = abs(lin.margins["min_gap"] - exact)
    out.check("linear gap equals 0.5 E_alpha(-t^alpha)", err <= 1e-3, f"error {err:.2e}")


SCENARIOS: dict[str, Callable] = {
    "ex1": reproduce_ex1,
    "ex2": reproduce_ex2,
    "ex4": reproduce_ex4,
    "ex5": reproduce_ex5,
    "ex6": reproduce_ex6,
    "ex3": reproduce_ex3,
    "separation": reproduce_separation,
}


def reproduce(example: str, alpha=None, beta=None, seed: int = 0) -> Outcome:
    if example not in SCENARIOS:
        raise KeyError(example)
    out = Outcome()
    SCENARIOS[example](alpha, beta, seed, out)
    return out


# }}}


# {{{ commands


def cmd_ml(args) -> int:
    try:
        z = complex(args.z.replace(" ", ""))
    except ValueError:
        print(f"error: cannot parse z={args.z!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        res = ml_scalar(MLEvalRequest(args.alpha, args.beta, z, args.tol if args.tol is not None else 1e-10))
    except MLAccuracyError as exc:
        print(_fmt(exc.value, z.imag == 0))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ML_ACCURACY
    print(_fmt(res.value, z.imag == 0))
    print(f"region={res.region.value} est_error={res.est_error:.3g}", file=sys.stderr)
    if args.out:
        value = res.value.real if z.imag == 0 else res.value
        payload = {"alpha": args.alpha, "beta": args.beta, "z": z, "value": value, "region": res.region}
        write_json(Path(args.out) / "ml.json", payload | {"est_error": res.est_error})
    return EXIT_OK


def _fmt(v: complex, real_axis: bool = False) -> str:
    # E_{alpha,beta} is real on the real axis; drop rounding residue in the imaginary part
    v = complex(v)
    return repr(v.real) if real_axis or v.imag == 0 else repr(v)


def _load(args) -> ScenarioConfig:
    if not args.config:
        raise InputError("--config is required")
    cfg = ScenarioConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_solve(args) -> int:
    cfg = _load(args)
    out = Path(args.out or ".")
    p = cfg.problem()
    traj = solve_ivp(p, cfg.solver_config())
    out.mkdir(parents=True, exist_ok=True)
    traj.to_csv(out / cfg.outputs["csv"])
    tol = args.tol if args.tol is not None else RESIDUAL_TOL
    res = _residuals(traj, p)
    write_json(
        out / "solve.json",
        {
            "config": cfg.to_dict(),
            "status": traj.status,
            "exit_time": traj.exit_time,
            "exit_state": traj.exit_state,
            "nodes": int(traj.times.size),
            "residual": res | {"tol": tol, "ok": res["nodes_max"] <= tol},
        },
    )
    print(f"{traj.status.value}: {traj.times.size} nodes, t_end={traj.times[-1]:g}, residual={res['nodes_max']:.2e}")
    return EXIT_OK if traj.completed else EXIT_INCOMPLETE


def cmd_analyze(args) -> int:
    cfg = _load(args)
    out = Path(args.out or ".")
    rep = run_analyses(cfg)
    write_json(out / cfg.outputs["report"], rep)
    print(f"verdict: {rep['verdict']}" + (f"; failed: {', '.join(rep['failed'])}" if rep["failed"] else ""))
    return EXIT_FAILED if rep["failed"] else EXIT_OK


def cmd_reproduce(args) -> int:
    if args.example not in SCENARIOS:
        print(f"error: unknown example {args.example!r}; choose from {', '.join(SCENARIOS)}", file=sys.stderr)
        return EXIT_USAGE
    outcome = reproduce(args.example, args.alpha, args.beta, args.seed or 0)
    for label, ok, detail in outcome.checks:
        print(f"{'PASS' if ok else 'FAIL'} {args.example}: {label}" + (f" ({detail})" if detail else ""))
    out = Path(args.out or "fracdyn-out") / args.example
    out.mkdir(parents=True, exist_ok=True)
    traj = outcome.artifacts.get("trajectory")
    if traj is not None:
        traj.to_csv(out / "trajectory.csv")
    payload = dict(outcome.artifacts.get("report", {}))
    payload["checks"] = [{"label": l, "pass": ok, "detail": d} for l, ok, d in outcome.checks]
    payload["passed"] = outcome.passed
    write_json(out / "report.json", payload)
    return EXIT_OK if outcome.passed else EXIT_FAILED


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with the ML accuracy code
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--tol", type=float, metavar="X")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="fracdyn", description="Caputo fractional dynamics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ml", parents=[common], help="evaluate E_{alpha,beta}(z)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--z", required=True, help="real or complex, e.g. -1 or 1+2j")
    p.set_defaults(func=cmd_ml)

    p = sub.add_parser("solve", parents=[common], help="solve a configured IVP, write CSV and residual JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("analyze", parents=[common], help="run the configured stability analyses")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reproduce", parents=[common], help="run a canned example scenario")
    p.add_argument("example", help=", ".join(SCENARIOS))
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except FracDynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


# }}}

if __name__ == "__main__":
    sys.exit(main())
