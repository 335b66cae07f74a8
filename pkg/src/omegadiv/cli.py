"""Command-line front end.

    omegadiv solve|optimize|value|simulate|sweep-beta --config run.json --out DIR

Exit codes: 0 success, 1 configuration error, 2 numerical-quality failure,
3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import errors
from .config import load_config
from .montecarlo import DISCOUNT_WEIGHT, KILLING_CLOCK, simulate_value
from .omega import build_table, read_csv, write_csv
from .optimizer import g0, g1, optimize, sweep_beta
from .policy import value_table, verify

log = logging.getLogger("omegadiv")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _table(cfg, check=False):
    return build_table(cfg.levy_model(), cfg.q, cfg.bankruptcy_rate(), cfg.grid.x_max, cfg.grid.h, check)


def _meta(cfg):
    return {"config_hash": cfg.config_hash()}


def cmd_solve(cfg, out):
    t0 = time.perf_counter()
    table = _table(cfg, check=True)
    elapsed = time.perf_counter() - t0
    table.to_csv(out / "omega_scale.csv")
    passed = table.residual_sup < cfg.residual_tol
    _write_json(out / "solve_report.json", {
        "residual_sup": table.residual_sup,
        "residual_tol": cfg.residual_tol,
        "passed": passed,
        "h": table.h,
        "x_max": table.x_max,
        "n_nodes": len(table.grid),
        "timing_s": elapsed,
        **_meta(cfg),
    })
    return EXIT_OK if passed else EXIT_NUMERIC


def _curve(path, header, xs, fn, table, meta):
    rows = [(x, fn(x), float(table.dH(x))) for x in xs]
    write_csv(path, header, np.array(rows, dtype=float).reshape(-1, 3), meta)


def cmd_optimize(cfg, out):
    table = _table(cfg)
    pair, diag = optimize(table, cfg.beta)
    _write_json(out / "optimum.json", {"beta": cfg.beta, **diag.to_dict(), **_meta(cfg)})
    meta = {**_meta(cfg), "beta": cfg.beta}
    if diag.c1_max > 0:
        eps = diag.c1_max * 1e-6
        xs = np.linspace(eps, diag.c1_max - eps, 400)
        _curve(out / "g1_curve.csv", ["c1", "g1", "Hprime"], xs,
               lambda c: float(g1(table, c, cfg.beta, diag.a_star)), table, meta)
    hi = min(table.x_max, 3 * max(pair.c2, 1.0))
    xs = np.linspace(cfg.beta + (pair.c2 - cfg.beta) * 0.02, hi, 400)
    _curve(out / "g0_curve.csv", ["c2", "g0", "Hprime"], xs, lambda c: float(g0(table, c, cfg.beta)), table, meta)
    return EXIT_OK


def cmd_value(cfg, out):
    table = _table(cfg)
    pair, diag = optimize(table, cfg.beta)
    vt = value_table(table, pair, cfg.q)
    checks = verify(cfg.levy_model(), cfg.bankruptcy_rate(), cfg.q, vt,
                    cfg.verification.num_pairs, cfg.verification.seed)
    vt.to_csv(out / "value.csv", _meta(cfg))
    _write_json(out / "value_report.json", {"c1": pair.c1, "c2": pair.c2, "beta": pair.beta,
                                            "case": diag.case, "checks": checks, **_meta(cfg)})
    return EXIT_OK if checks["passed"] else EXIT_VERIFY


def _analytic_from_csv(path):
    if not path.exists():
        return None
    _, _, data = read_csv(path)
    return lambda x: float(np.interp(x, data[:, 0], data[:, 1]))


def cmd_simulate(cfg, out):
    from .config import SimulationSpec

    sim = cfg.simulation or SimulationSpec()
    table = _table(cfg)
    pair, _ = optimize(table, cfg.beta)
    model, omega = cfg.levy_model(), cfg.bankruptcy_rate()
    x0s = sim.x0 or [omega.a / 2, 0.0, pair.c1, 0.5 * (pair.c1 + pair.c2), pair.c2 + 1.0]
    analytic = _analytic_from_csv(out / "value.csv")
    results = []
    ok = True
    for x0 in x0s:
        runs = {m: simulate_value(model, omega, cfg.q, pair, x0, sim.build(m)).to_dict()
                for m in (KILLING_CLOCK, DISCOUNT_WEIGHT)}
        k, w = runs[KILLING_CLOCK], runs[DISCOUNT_WEIGHT]
        mode_z = (k["estimate"] - w["estimate"]) / math.hypot(k["stderr"], w["stderr"])
        entry = {"x0": x0, "runs": runs, "mode_z": mode_z}
        ok &= abs(mode_z) < 3
        if analytic is not None:
            v = analytic(x0)
            entry["analytic"] = v
            entry["z"] = {m: (r["estimate"] - v) / r["stderr"] for m, r in runs.items()}
            ok &= all(abs(z) < 3 for z in entry["z"].values())
        results.append(entry)
    _write_json(out / "mc_report.json", {
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "c1": pair.c1, "c2": pair.c2, "beta": pair.beta,
        "results": results, "passed": ok, **_meta(cfg),
    })
    return EXIT_OK if ok else EXIT_VERIFY


def _parse_betas(text):
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        n = int(round((hi - lo) / step))
        return [round(lo + i * step, 12) for i in range(n + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


def cmd_sweep_beta(cfg, out, betas=None):
    betas = betas or cfg.sweep_betas or _parse_betas("0.001:0.02:0.001")
    table = _table(cfg)
    rows = sweep_beta(table, betas)
    _, diag = optimize(table, betas[0])
    with open(out / "beta_sweep.csv", "w", newline="") as fh:
        fh.write(f"# config_hash={cfg.config_hash()}\n")
        fh.write(f"# beta_max={diag.beta_max!r}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["beta", "c1", "c2", "case"])
        for b, c1, c2, case in rows:
            wr.writerow(["%.17g" % b, "%.17g" % c1, "%.17g" % c2, case])
    first_zero = next((b for b, c1, _, _ in rows if c1 == 0.0), None)
    last_pos = max((b for b, c1, _, _ in rows if c1 > 0.0), default=None)
    _write_json(out / "beta_sweep.json", {
        "beta_max": diag.beta_max,
        "last_beta_interior": last_pos,
        "first_beta_corner": first_zero,
        **_meta(cfg),
    })
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "optimize": cmd_optimize,
    "value": cmd_value,
    "simulate": cmd_simulate,
    "sweep-beta": cmd_sweep_beta,
}

_NUMERIC = (errors.GridTooCoarseError, errors.XMaxTooSmallError, errors.UnimodalityError,
            errors.OptimizationError, errors.DegenerateSpectrumError, errors.DomainError)
_VERIFY = (errors.VerificationError, errors.SimulationFault)


def build_parser():
    ap = argparse.ArgumentParser(prog="omegadiv", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--h", type=float)
    ap.add_argument("--beta", type=float)
    ap.add_argument("--betas", help="sweep list 'b1,b2,...' or 'start:stop:step'")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _fail(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    overrides = {"beta": args.beta, "grid.h": args.h}
    if args.seed is not None or args.paths is not None:
        overrides.update({"simulation.seed": args.seed, "simulation.n_paths": args.paths})
    try:
        cfg = load_config(args.config, overrides)
        out = Path(args.out or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sweep-beta":
            return cmd_sweep_beta(cfg, out, _parse_betas(args.betas) if args.betas else None)
        return COMMANDS[args.command](cfg, out)
    except errors.ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except _VERIFY as exc:
        return _fail(exc, EXIT_VERIFY)
    except _NUMERIC as exc:
        return _fail(exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
