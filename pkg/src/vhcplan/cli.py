"""Command-line front end: plan, certify, stabilize, simulate, sweep.

Every command reads an optional JSON config (defaults below), applies dotted
`--set key=value` overrides, and writes its artifacts into `--out`:

  plan       trajectory.csv, report.json
  certify    certificate.json, accessibility.csv
  stabilize  plan artifacts + ltv.csv, gains.csv, spectra.json
  simulate   stabilize artifacts + simulation.csv
  sweep      psi_<value>/ subruns (stabilize each) + sweep_summary.json

plus config.resolved.json, metadata.json (the only file with timestamps) and
error.json on failure. Exit codes: 0 success, 2 a checked condition failed,
3 a numerical procedure failed, 64 usage error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    BoundaryUnreachableError,
    ConditionCheckError,
    ConvergenceError,
    DomainError,
    ModelInvariantError,
    OutsideTubeError,
    UsageError,
    VhcplanError,
)
from .feasibility import (
    accessibility_det_closed_form,
    accessibility_det_numeric,
    certify_no_regular_vhc,
)
from .io_utils import write_csv, write_json
from .mech import pvtol_model, tic_toc_reference
from .sim import run_closed_loop
from .singular_solver import lift, make_periodic, singular_acceleration, solve_boundary
from .transverse import FamilyChart, TicTocChart, gramian, linearize, monodromy, periodic_lqr
from .vhc import (
    FamilyParameters,
    check_theorem1,
    family_reduced,
    find_family_parameters,
    reduce,
    tic_toc_vhc,
)

TWO_PI = 2.0 * math.pi

EXIT_OK = 0
EXIT_CONDITION = 2
EXIT_NUMERIC = 3
EXIT_USAGE = 64

_NUMERIC_ERRORS = (BoundaryUnreachableError, ConvergenceError, ModelInvariantError,
                   DomainError, OutsideTubeError)

DEFAULTS: dict = {
    "system": {"name": "pvtol"},
    "vhc": {
        "kind": "tictoc",
        "domain": None,
        "psi_s": None,
        "k1": None,
        "k2": None,
        "k3": None,
        "theta_max": None,
    },
    "boundary": {"theta1": None, "dtheta1": 0.0, "theta2": None, "dtheta2": 0.0},
    "solver": {"n_samples": 2001, "xi_cut": 1e-6, "tol": 1e-10, "t_max": 1000.0,
               "lift_samples": 4096},
    "check": {"n_grid": 2048},
    "certify": {"n_samples": 2048, "accessibility_samples": 64},
    "stabilize": {"n_grid": 512, "rho_step": 1e-6, "w_step": 1e-4,
                  "q_weight": 1.0, "r_weight": 1.0, "fp_tol": 1e-8,
                  "max_sweeps": 50, "tube_radius": 1.0},
    "simulate": {"q0": [0.1, -0.5, 0.0], "qd0": [0.0, 0.0, 0.0], "dt": 0.01,
                 "periods": 3.0, "stage_feedback": True, "open_loop": False},
    "sweep": {"psi_values": [0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi],
              "workers": 3},
}


# -- configuration ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _merge_config(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        full = f"{path}.{key}" if path else key
        if key not in out:
            raise UsageError(f"unknown config key: {full}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise UsageError(f"config key {full} expects an object")
            out[key] = _merge_config(out[key], value, full)
        else:
            out[key] = value
    return out


def _apply_override(cfg: dict, assignment: str) -> None:
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise UsageError(f"--set expects key.path=value, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise UsageError(f"unknown config key: {key}")
        node = node[part]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise UsageError(f"unknown config key: {key}")
    if isinstance(node[leaf], dict):
        raise UsageError(f"config key {key} is an object; set one of its fields")
    node[leaf] = value


def _load_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        cfg = _merge_config(cfg, loaded)
    for assignment in args.set or []:
        _apply_override(cfg, assignment)
    if cfg["system"]["name"] != "pvtol":
        raise UsageError(f"unknown system: {cfg['system']['name']}")
    if cfg["vhc"]["kind"] not in ("tictoc", "family"):
        raise UsageError(f"vhc.kind must be 'tictoc' or 'family', got {cfg['vhc']['kind']!r}")
    dom = cfg["vhc"]["domain"]
    if dom is not None and (not isinstance(dom, list) or len(dom) != 2):
        raise UsageError("vhc.domain must be a [lo, hi] pair")
    for key in ("q0", "qd0"):
        vec = cfg["simulate"][key]
        if not isinstance(vec, list) or len(vec) != 3:
            raise UsageError(f"simulate.{key} must be a 3-vector")
    return cfg


# -- pipeline stages ---------------------------------------------------------


class _TicTocOrbit:
    """Closed-form reference maneuver exposed as a scan target."""

    t0 = -0.5 * math.pi
    period = TWO_PI

    @staticmethod
    def state_at(t: float):
        q, qd, _ = tic_toc_reference(t)
        return q, qd


def _plan_objects(cfg: dict, out: Path) -> dict:
    sys_ = pvtol_model()
    vcfg = cfg["vhc"]
    kind = vcfg["kind"]
    params: FamilyParameters | None = None
    if kind == "tictoc":
        domain = tuple(float(v) for v in (vcfg["domain"] or (-2.0, 2.0)))
        vhc = tic_toc_vhc(domain=domain)
        model = reduce(sys_, vhc, domain)
    else:
        psi_s = float(vcfg["psi_s"]) if vcfg["psi_s"] is not None else 0.5 * math.pi
        explicit = [vcfg[k] for k in ("k1", "k2", "k3", "theta_max")]
        if all(v is not None for v in explicit):
            k1, k2, k3, tmax = (float(v) for v in explicit)
            interval = (-tmax, tmax)
            model = family_reduced(psi_s, k1, k2, k3, interval)
            params = FamilyParameters(psi_s, k1, k2, k3, interval,
                                      check_theorem1(model, n_grid=cfg["check"]["n_grid"]))
        elif any(v is not None for v in explicit):
            raise UsageError("set all of vhc.k1, k2, k3, theta_max or none of them")
        else:
            params = find_family_parameters(psi_s)
            if params is None:
                raise ConditionCheckError(
                    f"no admissible family parameters found for psi_s = {psi_s}")
            model = family_reduced(psi_s, params.k1, params.k2, params.k3, params.interval)
        vhc = model.vhc
    report = check_theorem1(model, n_grid=cfg["check"]["n_grid"])
    report_json: dict = {"kind": kind, "check": report.to_json_dict()}
    if params is not None:
        report_json["family_parameters"] = params.to_json_dict()
    if not report.overall:
        write_json(out / "report.json", report_json)
        raise ConditionCheckError("existence conditions failed; see report.json")

    bcfg = cfg["boundary"]
    if kind == "tictoc":
        th1 = float(bcfg["theta1"]) if bcfg["theta1"] is not None else -1.0
        th2 = float(bcfg["theta2"]) if bcfg["theta2"] is not None else 1.0
    else:
        tmax = model.interval[1]
        th1 = float(bcfg["theta1"]) if bcfg["theta1"] is not None else -0.8 * tmax
        th2 = float(bcfg["theta2"]) if bcfg["theta2"] is not None else 0.8 * tmax
    scfg = cfg["solver"]
    sol = solve_boundary(model, report, th1, float(bcfg["dtheta1"]), th2,
                         float(bcfg["dtheta2"]), n_samples=int(scfg["n_samples"]),
                         xi_cut=float(scfg["xi_cut"]), tol=float(scfg["tol"]),
                         t_max=float(scfg["t_max"]))
    per = make_periodic(sol)
    traj = lift(vhc, per, sys_, n_samples=int(scfg["lift_samples"]))

    rows = []
    for i, t in enumerate(traj.t):
        th, dth, _ = traj.scalar.eval(float(t))
        rows.append([t, th, dth, *traj.q[i], *traj.qdot[i], *traj.u[i]])
    write_csv(out / "trajectory.csv",
              ["t", "theta", "thetadot", "x", "z", "psi",
               "xdot", "zdot", "psidot", "u1", "u2"], rows)

    report_json.update({
        "singular_acceleration": sol.a_s,
        "crossings": [{"time": c[0], "velocity": c[1], "acceleration": c[2]}
                      for c in per.crossings],
        "t1": sol.t1,
        "t2": sol.t2,
        "period": per.period,
        "boundary": {"theta1": th1, "dtheta1": float(bcfg["dtheta1"]),
                     "theta2": th2, "dtheta2": float(bcfg["dtheta2"])},
        "max_input_residual": float(np.max(traj.residuals)),
    })
    return {"sys": sys_, "vhc": vhc, "model": model, "report": report,
            "params": params, "sol": sol, "per": per, "traj": traj,
            "report_json": report_json}


def _stabilize_objects(cfg: dict, out: Path) -> dict:
    ctx = _plan_objects(cfg, out)
    kcfg = cfg["stabilize"]
    if cfg["vhc"]["kind"] == "tictoc":
        chart = TicTocChart(tube_radius=float(kcfg["tube_radius"]))
    else:
        chart = FamilyChart(ctx["traj"], ctx["params"],
                            tube_radius=float(kcfg["tube_radius"]))
    ltv = linearize(chart, ctx["sys"], ctx["traj"], n_grid=int(kcfg["n_grid"]),
                    rho_step=float(kcfg["rho_step"]), w_step=float(kcfg["w_step"]))
    write_csv(out / "ltv.csv",
              ["tau"] + [f"a{i}{j}" for i in range(1, 6) for j in range(1, 6)]
              + [f"b{i}{j}" for i in range(1, 6) for j in range(1, 3)],
              [[ltv.taus[i], *ltv.A[i].ravel(), *ltv.B[i].ravel()]
               for i in range(ltv.taus.size)])

    W = gramian(ltv)
    w_eigs = np.linalg.eigvalsh(W)
    if float(w_eigs.min()) <= 1e-6:
        raise ConvergenceError(
            f"controllability Gramian nearly singular: min eigenvalue {w_eigs.min():.3e}")

    gains = periodic_lqr(ltv, Q=float(kcfg["q_weight"]) * np.eye(5),
                         R=float(kcfg["r_weight"]) * np.eye(2),
                         fp_tol=float(kcfg["fp_tol"]), max_sweeps=int(kcfg["max_sweeps"]))
    write_csv(out / "gains.csv",
              ["tau"] + [f"k{i}{j}" for i in range(1, 3) for j in range(1, 6)],
              [[gains.taus[i], *gains.K[i].ravel()] for i in range(gains.taus.size)])

    _, eig_open = monodromy(ltv, None)
    _, eig_closed = monodromy(ltv, gains)
    closed_max = float(np.max(np.abs(eig_closed)))
    spectra = {
        "gramian_eigenvalues": sorted((float(v) for v in w_eigs), reverse=True),
        "gramian_min_eigenvalue": float(w_eigs.min()),
        "open_loop_multipliers": [[float(v.real), float(v.imag)] for v in eig_open],
        "open_loop_spectral_radius": float(np.max(np.abs(eig_open))),
        "closed_loop_multipliers": [[float(v.real), float(v.imag)] for v in eig_closed],
        "closed_loop_max_abs": closed_max,
        "riccati_sweeps": gains.sweeps,
        "riccati_fixed_point_gap": gains.fixed_point_gap,
    }
    write_json(out / "spectra.json", spectra)
    if closed_max >= 1.0:
        write_json(out / "report.json", ctx["report_json"])
        raise ConditionCheckError(
            f"closed-loop multipliers not inside the unit circle (max {closed_max:.4f})")
    ctx.update({"chart": chart, "ltv": ltv, "gramian": W, "gains": gains,
                "spectra": spectra})
    return ctx


# -- commands -----------------------------------------------------------------


def _cmd_plan(cfg: dict, out: Path) -> None:
    ctx = _plan_objects(cfg, out)
    write_json(out / "report.json", ctx["report_json"])


def _cmd_certify(cfg: dict, out: Path) -> None:
    sys_ = pvtol_model()
    if cfg["vhc"]["kind"] == "tictoc":
        orbit = _TicTocOrbit()
    else:
        orbit = _plan_objects(cfg, out)["traj"]
    cert = certify_no_regular_vhc(sys_, orbit, n_samples=int(cfg["certify"]["n_samples"]))
    write_json(out / "certificate.json", cert.to_json_dict())

    n_acc = int(cfg["certify"]["accessibility_samples"])
    rows = []
    for k in range(n_acc):
        t = orbit.t0 + orbit.period * k / n_acc
        q, qd = orbit.state_at(t)[:2]
        rows.append([t, accessibility_det_closed_form(q, qd),
                     accessibility_det_numeric(sys_, q, qd)])
    write_csv(out / "accessibility.csv", ["t", "det_closed_form", "det_numeric"], rows)
    if not cert.verdict:
        raise ConditionCheckError(cert.message)


def _cmd_stabilize(cfg: dict, out: Path) -> None:
    ctx = _stabilize_objects(cfg, out)
    write_json(out / "report.json", ctx["report_json"])


def _cmd_simulate(cfg: dict, out: Path) -> None:
    ctx = _stabilize_objects(cfg, out)
    mcfg = cfg["simulate"]
    horizon = float(mcfg["periods"]) * ctx["traj"].period
    res = run_closed_loop(ctx["sys"], ctx["chart"], ctx["gains"],
                          np.asarray(mcfg["q0"], dtype=float),
                          np.asarray(mcfg["qd0"], dtype=float),
                          dt=float(mcfg["dt"]), horizon=horizon,
                          stage_feedback=bool(mcfg["stage_feedback"]),
                          open_loop=bool(mcfg["open_loop"]))
    write_csv(out / "simulation.csv",
              ["t", "x", "z", "psi", "xdot", "zdot", "psidot", "u1", "u2",
               "tau", "rho1", "rho2", "rho3", "rho4", "rho5"],
              [[res.t[k], *res.q[k], *res.qdot[k], *res.u[k], res.tau[k], *res.rho[k]]
               for k in range(res.t.size)])
    final_error = float(np.linalg.norm(res.rho[-1]))
    ctx["report_json"]["simulation"] = {
        "final_orbit_error": final_error,
        "converged": bool(np.isfinite(final_error) and final_error < 1e-3),
        "horizon": horizon,
        "dt": float(mcfg["dt"]),
    }
    write_json(out / "report.json", ctx["report_json"])


def _cmd_sweep(cfg: dict, out: Path) -> None:
    values = list(cfg["sweep"]["psi_values"])
    if not values:
        raise UsageError("sweep.psi_values must be nonempty")
    workers = max(1, int(cfg["sweep"]["workers"]))

    def run_one(psi: float) -> dict:
        name = f"psi_{psi:.6g}"
        sub_out = out / name
        sub_out.mkdir(parents=True, exist_ok=True)
        sub_cfg = copy.deepcopy(cfg)
        sub_cfg["vhc"]["kind"] = "family"
        sub_cfg["vhc"]["psi_s"] = float(psi)
        write_json(sub_out / "config.resolved.json", sub_cfg)
        try:
            ctx = _stabilize_objects(sub_cfg, sub_out)
            write_json(sub_out / "report.json", ctx["report_json"])
            params = ctx["params"]
            return {"name": name, "psi_s": float(psi), "ok": True,
                    "parameters": {"k1": params.k1, "k2": params.k2, "k3": params.k3,
                                   "theta_max": params.interval[1]},
                    "period": ctx["traj"].period,
                    "closed_loop_max_abs": ctx["spectra"]["closed_loop_max_abs"]}
        except VhcplanError as exc:
            write_json(sub_out / "error.json",
                       {"error": type(exc).__name__, "message": str(exc)})
            return {"name": name, "psi_s": float(psi), "ok": False,
                    "error": f"{type(exc).__name__}: {exc}",
                    "exit_code": _exit_code_for(exc)}

    results = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_one, float(psi)) for psi in values]
        for fut in as_completed(futures):
            results.append(fut.result())
    results.sort(key=lambda r: r["psi_s"])
    n_failed = sum(1 for r in results if not r["ok"])
    write_json(out / "sweep_summary.json",
               {"results": results, "n_ok": len(results) - n_failed,
                "n_failed": n_failed})
    if n_failed:
        raise ConditionCheckError(f"{n_failed} of {len(results)} sweep runs failed")


_COMMANDS = {
    "plan": _cmd_plan,
    "certify": _cmd_certify,
    "stabilize": _cmd_stabilize,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
}


def _exit_code_for(err: Exception) -> int:
    if isinstance(err, UsageError):
        return EXIT_USAGE
    if isinstance(err, ConditionCheckError):
        return EXIT_CONDITION
    if isinstance(err, _NUMERIC_ERRORS):
        return EXIT_NUMERIC
    raise err


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vhcplan",
                     description="Periodic VHC motion planning and orbital stabilization")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("plan", "plan a periodic trajectory through the constraint singularity"),
        ("certify", "certify that no regular constraint reproduces the maneuver"),
        ("stabilize", "design the periodic LQR orbital feedback"),
        ("simulate", "simulate the closed loop from a perturbed state"),
        ("sweep", "stabilize a family orbit for each thrust angle in a list"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (dotted path, JSON value)")
        p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = _load_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "config.resolved.json", cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    started = datetime.now(timezone.utc)
    t_start = time.perf_counter()
    code = EXIT_OK
    err: Exception | None = None
    try:
        _COMMANDS[args.command](cfg, out)
    except VhcplanError as exc:
        err = exc
        code = _exit_code_for(exc)
    if err is not None:
        payload = {"error": type(err).__name__, "message": str(err)}
        diagnostics = getattr(err, "diagnostics", None)
        if diagnostics:
            payload["diagnostics"] = diagnostics
        write_json(out / "error.json", payload)
        print(f"error: {err}", file=sys.stderr)
    write_json(out / "metadata.json", {
        "command": args.command,
        "package_version": __version__,
        "started_at": started.isoformat(),
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "duration_s": time.perf_counter() - t_start,
        "exit_code": code,
    })
    return code


if __name__ == "__main__":
    sys.exit(main())
