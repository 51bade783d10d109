"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 certificate failure,
3 solver non-convergence, 4 decay-envelope violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__, certify, solver
from .config import build_system, load_config, quad_config, set_path, solver_settings
from .errors import CertificateInvalidError, ConfigurationError, DelayCertError, NonConvergenceError
from .models import model_info
from .semigroup import dissipativity_check

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_SOLVER, EXIT_ENVELOPE = 0, 1, 2, 3, 4

SWEEP_COLUMNS = ["value", "assumption_lhs", "passed_assumption", "passed_decay", "fitted_rate",
                 "theoretical_rate"]


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, allow_nan=True) + "\n")


def _report_ok(rep: certify.CertificateReport) -> bool:
    ok = rep.passed["assumption"] and rep.passed["contraction"]
    if rep.lipschitz < rep.omega:
        ok = ok and rep.passed["decay"]
    return ok


def _certificate_payload(cfg: dict, sys_, rep: certify.CertificateReport, seed: int) -> dict:
    return {"version": __version__, "model": model_info(sys_),
            "dissipativity": dissipativity_check(sys_.generator, seed=seed),
            "report": rep.to_dict(), "ok": _report_ok(rep)}


# ------------------------------------------------------------------ subcommands

def run_check(cfg: dict, out: Path, seed: int):
    sys_ = build_system(cfg).validate(cfg.get("certificate", {}).get("horizon", 20.0), seed=seed)
    rep = certify.build_report(sys_, quad_config(cfg))
    _write_json(out / "certificate.json", _certificate_payload(cfg, sys_, rep, seed))
    return sys_, rep


def run_simulate(cfg: dict, out: Path, sys_=None, envelope_rep=None):
    st = solver_settings(cfg)
    if sys_ is None:
        sys_ = build_system(cfg)
    res = solver.picard_solve(sys_, st.T, st.dt, tol=st.tol, max_iter=st.max_iter, initial=st.initial,
                              omega_prime=st.omega_prime, raise_on_failure=False)
    env = None if envelope_rep is None else certify.decay_envelope(envelope_rep, res.trajectory.grid)
    solver.write_trajectory_csv(out / "trajectory.csv", res.trajectory, env)
    _write_json(out / "solve.json", {"version": __version__, **res.to_dict()})
    return res


def cmd_check(cfg: dict, out: Path, seed: int) -> int:
    _, rep = run_check(cfg, out, seed)
    return EXIT_OK if _report_ok(rep) else EXIT_CERT


def cmd_simulate(cfg: dict, out: Path, seed: int) -> int:
    res = run_simulate(cfg, out)
    return EXIT_OK if res.converged else EXIT_SOLVER


def cmd_certify_decay(cfg: dict, out: Path, seed: int) -> int:
    sys_, rep = run_check(cfg, out, seed)
    if not (_report_ok(rep) and rep.passed["decay"]):
        print("decay certificate not established; not simulating", file=sys.stderr)
        return EXIT_CERT
    res = run_simulate(cfg, out, sys_, rep)
    if not res.converged:
        return EXIT_SOLVER
    chk = solver.verify_envelope(res, rep)
    _write_json(out / "decay.json", {"version": __version__, "envelope": chk.to_dict(),
                                     "alpha_tilde": rep.alpha_tilde, "envelope_rate": rep.envelope_rate,
                                     "solve": res.to_dict()})
    return EXIT_OK if chk.passed else EXIT_ENVELOPE


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    return format(float(x), ".17g")


def sweep_row(cfg: dict, param: str, value: float, seed: int) -> list:
    """One sweep row; any failure to certify or simulate shows up as flags or NaN, not as an exception."""
    row_cfg = set_path(cfg, param, value)
    sys_ = build_system(row_cfg).validate(row_cfg.get("certificate", {}).get("horizon", 20.0), seed=seed)
    rep = certify.build_report(sys_, quad_config(row_cfg))
    st = solver_settings(row_cfg)
    try:
        res = solver.picard_solve(sys_, st.T, st.dt, tol=st.tol, max_iter=st.max_iter, initial=st.initial,
                                  omega_prime=st.omega_prime, raise_on_failure=False)
        slope, _ = solver.fit_decay_rate(res.trajectory, st.fit_window)
        fitted = -slope
    except DelayCertError:
        fitted = math.nan
    return [value, rep.assumption_lhs, rep.passed["assumption"], rep.passed["decay"], fitted,
            rep.envelope_rate]


def _sweep_row_args(args):
    return sweep_row(*args)


def cmd_sweep(cfg: dict, out: Path, seed: int, param: Optional[str], values: Optional[List[float]],
              workers: int = 1) -> int:
    spec = cfg.get("sweep", {})
    param = param or spec.get("param")
    values = values if values is not None else spec.get("values", [])
    if not param:
        raise ConfigurationError("sweep needs a parameter path (--param or config 'sweep.param')")
    # fail fast on a bad path before any row runs
    set_path(cfg, param, 0.0 if not values else values[0])
    jobs = [(cfg, param, float(v), seed) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row_args, jobs))
    else:
        rows = [sweep_row(*job) for job in jobs]
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return EXIT_OK


def cmd_model_info(cfg: dict, out: Path, seed: int) -> int:
    sys_ = build_system(cfg)
    info = {"version": __version__, **model_info(sys_),
            "dissipativity": dissipativity_check(sys_.generator, seed=seed)}
    _write_json(out / "model_info.json", info)
    print(json.dumps(info, indent=2))
    return EXIT_OK


# ------------------------------------------------------------------ argument handling

def _values(text: str) -> List[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--values must be comma-separated numbers: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delaycert", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"check": "evaluate the smallness condition and write certificate.json",
             "simulate": "run the Picard solver and write trajectory.csv and solve.json",
             "certify-decay": "check, simulate, and verify the decay envelope (decay.json)",
             "sweep": "vary one numeric config field and write sweep.csv",
             "model-info": "print the model summary"}
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="path to the JSON run configuration")
        sp.add_argument("--out", help="output directory (default: config 'output_dir' or ./out)")
        sp.add_argument("--seed", type=int, help="seed for randomized checks (default: config 'seed' or 0)")
        if name == "sweep":
            sp.add_argument("--param", help="dotted config path, e.g. channels.0.kernel.k0")
            sp.add_argument("--values", type=_values, help="comma-separated values")
            sp.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out = Path(args.out or cfg.get("output_dir", "out"))
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "check":
            return cmd_check(cfg, out, seed)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, seed)
        if args.command == "certify-decay":
            return cmd_certify_decay(cfg, out, seed)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, seed, args.param, args.values, max(1, args.workers))
        return cmd_model_info(cfg, out, seed)
    except CertificateInvalidError as exc:
        print(f"certificate error: {exc}", file=sys.stderr)
        return EXIT_CERT
    except NonConvergenceError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DelayCertError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
