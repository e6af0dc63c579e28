"""Command-line entry point: ``weakmass <subcommand> ...``.

Tables go to ``<out-dir>/<name>.csv`` with a ``<name>.json`` summary beside
them. Without ``--out-dir`` the CSV is written to stdout and the summary to
stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import validation
from .kd import KDParams, bessel_spectrum
from .pipeline import EXIT_BREAKDOWN, EXIT_CONFIG, EXIT_OK, ConfigError, RunConfig, run_pipeline


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("WEAKMASS_THREADS", "1")))
    except ValueError:
        return 1


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _emit(args, name: str, header: list[str], rows, summary: dict) -> None:
    text = _csv_text(header, rows)
    js = json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n"
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.csv").write_text(text)
        (out / f"{name}.json").write_text(js)
    else:
        sys.stdout.write(text)
        sys.stderr.write(js)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(type(v))


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


# config handling shared by simulate / sweep / noise-mc

_CONFIG_FLAGS = {
    "preset": str,
    "t_coupling": float,
    "g0": float,
    "omega_k_t": float,
    "eta": float,
    "n_max": int,
    "alpha": float,
    "beta": float,
    "theta": float,
    "omega_t": float,
    "aw_target": float,
    "aw_real": float,
    "aw_imag": float,
    "p_s0": float,
    "n_points": int,
    "delta": float,
    "trials": int,
    "n_atoms": float,
    "xi_s": float,
    "xi_d": float,
    "dark_rate": float,
    "seed": int,
    "classes": str,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value run configuration file")
    for name, typ in _CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    p.add_argument("--grid-check", action="store_true", default=None,
                   help="also evaluate P_n with the wave-packet grid pipeline")
    p.add_argument("--no-shot-noise", dest="shot_noise", action="store_false", default=None)
    p.add_argument("--write-config", help="write the resolved configuration to this path")


def _build_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for name in list(_CONFIG_FLAGS) + ["grid_check", "shot_noise"]:
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if cfg.preset is None and cfg.g0 is None and cfg.omega_k_t is None:
        cfg.preset = "calcium"
    return cfg


def _sim_table(result):
    header = ["n", "P_n_first_order", "P_n_exact", "relative_shift"]
    if result.rows and "P_n_grid" in result.rows[0]:
        header.append("P_n_grid")
    return header, [[r[h] for h in header] for r in result.rows]


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    cfg.validate()
    if args.write_config:
        Path(args.write_config).write_text(cfg.serialize())
    result = run_pipeline(cfg)
    header, rows = _sim_table(result)
    _emit(args, "simulate", header, rows, result.summary())
    if result.exit_code == EXIT_BREAKDOWN:
        neg = [r["n"] for r in result.rows if r["P_n_first_order"] < 0]
        print(f"perturbative breakdown: first-order P_n < 0 for classes {neg}", file=sys.stderr)
    return result.exit_code


def cmd_noise_mc(args) -> int:
    cfg = _build_config(args)
    if cfg.trials <= 0:
        cfg.trials = 1000
    if cfg.aw_target is None and cfg.omega_t is None and cfg.aw_real is None and cfg.aw_imag is None:
        cfg.aw_target = 1e4
    cfg.validate()
    result = run_pipeline(cfg)
    rows = []
    for trial in range(cfg.trials):
        for rec in result.counts:
            rows.append([trial, rec.detector_n, rec.counts[trial]])
    summary = result.summary()
    summary["g0_true"] = result.g0
    summary["trials"] = cfg.trials
    _emit(args, "noise_mc", ["trial", "n", "counts"], rows, summary)
    return result.exit_code


def _sweep_point(cfg: RunConfig, param: str, value: float, probe_n: int) -> dict:
    res = run_pipeline(dataclasses.replace(cfg, **{param: value}))
    shift = next((r["relative_shift"] for r in res.rows if r["n"] == probe_n), math.nan)
    return {
        "value": value,
        "aw_real": res.a_w.re,
        "aw_imag": res.a_w.im,
        "p_s0": res.a_w.p_s0,
        "p_s_first_order": res.p_s_first_order,
        "p_s_exact": res.p_s_exact,
        "relative_shift": shift,
        "breakdown": res.exit_code == EXIT_BREAKDOWN,
    }


def cmd_sweep(args) -> int:
    cfg = _build_config(args)
    param = args.param.replace("-", "_")
    if param not in _CONFIG_FLAGS or _CONFIG_FLAGS[param] is not float:
        raise ConfigError(f"cannot sweep {args.param!r}")
    values = _floats(args.values)
    dataclasses.replace(cfg, **{param: values[0]}).validate()
    with ThreadPoolExecutor(worker_count()) as pool:
        # map preserves input order, whatever the completion order
        points = list(pool.map(lambda v: _sweep_point(cfg, param, v, args.probe_n), values))
    header = ["index", param, "aw_real", "aw_imag", "p_s0", "p_s_first_order",
              "p_s_exact", f"relative_shift_n{args.probe_n}", "breakdown"]
    rows = [[i, p["value"], p["aw_real"], p["aw_imag"], p["p_s0"], p["p_s_first_order"],
             p["p_s_exact"], p["relative_shift"], p["breakdown"]] for i, p in enumerate(points)]
    summary = {"param": param, "points": len(values), "probe_n": args.probe_n,
               "breakdown_points": [i for i, p in enumerate(points) if p["breakdown"]]}
    _emit(args, "sweep", header, rows, summary)
    return EXIT_OK


def cmd_kd_spectrum(args) -> int:
    spec = bessel_spectrum(KDParams(args.eta, 1.0, args.n_max))
    rows = [[int(n), c.real, c.imag, abs(c) ** 2] for n, c in zip(spec.orders, spec.coeffs)]
    summary = {
        "eta": args.eta,
        "n_max": spec.n_max,
        "norm": float(spec.probabilities.sum()),
        "theta_moment": float(np.sum(spec.orders.astype(float) ** 2 * spec.probabilities)),
    }
    _emit(args, "kd_spectrum", ["n", "re_phi", "im_phi", "abs_phi_sq"], rows, summary)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.what == "dyson":
        g0_list = _floats(args.g0_list) if args.g0_list else [1e-2, 1e-3, 1e-4]
        res = validation.dyson_convergence(g0_list, n_steps=args.n_steps)
        rows = [[g, e] for g, e in zip(res.g0, res.errors)]
        _emit(args, "validate_dyson", ["g0", "L2_error"], rows, {"slope": res.slope})
    elif args.what == "bch":
        res = validation.bch_check()
        summary = {
            "max_deviation": res.max_deviation,
            "n_steps": res.n_steps,
            "halving_change": res.halving_change,
            "triple_commutator": res.triple_commutator,
        }
        _emit(args, "validate_bch", ["n_steps", "max_deviation"], [[res.n_steps, res.max_deviation]], summary)
    else:
        g0_list = _floats(args.g0_list) if args.g0_list else [1e-6, 1e-5, 1e-4, 1e-3, 1e-2]
        conv = validation.oracle_convergence(g0_list=g0_list)
        rows = []
        for n, (resid, _) in conv.items():
            rows.extend([n, g, r] for g, r in zip(g0_list, resid))
        summary = {
            "slopes": {str(n): s for n, (_, s) in conv.items()},
            "grid_max_deviation": validation.grid_vs_oracle(),
        }
        _emit(args, "validate_oracle", ["n", "g0", "abs_residual"], rows, summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="directory for CSV and JSON outputs")
    parser = argparse.ArgumentParser(prog="weakmass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="per-class probabilities for one configuration")
    _add_config_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="scan one float parameter")
    _add_config_flags(p)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--probe-n", type=int, default=10)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("kd-spectrum", parents=[common], help="Bessel amplitudes of the KD momentum classes")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--n-max", type=int, default=None)
    p.set_defaults(func=cmd_kd_spectrum)

    p = sub.add_parser("validate", parents=[common], help="numerical cross-checks")
    p.add_argument("what", choices=["dyson", "bch", "oracle"])
    p.add_argument("--g0-list", default=None, help="comma-separated g0 values")
    p.add_argument("--n-steps", type=int, default=1000)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("noise-mc", parents=[common], help="Monte Carlo detector counts and g0 recovery")
    _add_config_flags(p)
    p.set_defaults(func=cmd_noise_mc)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
