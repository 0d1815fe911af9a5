"""Command-line experiment runner.

``python -m duospin <subcommand> [flags]`` with subcommands

* ``simulate`` — finite-N trajectories (CSV per replica); with ``--oracle``
  (N = 2, fixed environment (+1, -1)) cross-checks the replica ensemble
  against the 16-state matrix-exponential law and prints the max
  total-variation distance.
* ``ode``      — integrate the 7-moment limit system to CSV plus a
  stationarity report.
* ``phase``    — phase-diagram scan over a (gamma, h) grid: CSV of phase
  indices plus boundary-curve JSON.
* ``clt``      — propagate the fluctuation covariance (CSV); with
  ``--replicas`` > 0 also runs the finite-N covariance comparison report.
* ``critical`` — the critical-scaling experiments (per-N CSVs + summary
  JSON); ``--mode inhomogeneous`` or ``--mode homogeneous``.

Configuration: every subcommand accepts ``--config PATH`` (a JSON object);
explicit flags override config fields, built-in defaults fill the rest, and
the merged effective config (plus the package version) is always written
next to the outputs as ``<subcommand>_config.json``.  Exit codes: 0 success,
1 runtime failure (machine-readable JSON on stderr), 2 usage error.

Determinism: for a fixed effective config (seed included) every output file
is byte-for-byte reproducible, independent of ``--threads``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .equilibria import phase_diagram_scan, write_curves_json, write_phase_csv
from .fluctuations import (
    FluctuationModel,
    clt_experiment,
    propagate_clt,
    write_covariance_csv,
)
from .limit import integrate, mkv_rhs
from .model import MOMENT_NAMES, ModelParams, MomentVector
from .critical import (
    run_homogeneous_critical,
    run_inhomogeneous_critical,
    write_homogeneous_csv,
    write_inhomogeneous_csv,
    write_summary_json,
)
from .oracle import (
    total_variation,
    two_site_initial_distribution,
    two_site_state_index,
    two_site_transient,
)
from .simulate import run_replicas, simulate, write_trajectory_csv

__all__ = ["main"]


# ---------------------------------------------------------------------------
# Defaults (the full parameter block of each subcommand)
# ---------------------------------------------------------------------------

_DEFAULTS: Dict[str, Dict[str, object]] = {
    "simulate": {
        "beta": 1.0,
        "gamma": 1.0,
        "h": 0.2,
        "n": 1000,
        "t_end": 10.0,
        "sample_dt": 0.1,
        "eta_mode": "iid-symmetric",
        "law": [0.25, 0.25, 0.25, 0.25],
        "replicas": 1,
        "oracle": False,
        "oracle_replicas": 100_000,
        "seed": 0,
        "threads": 1,
        "out": ".",
    },
    "ode": {
        "beta": 1.0,
        "gamma": 1.0,
        "h": 0.2,
        "m0": [0.0] * 7,
        "t_end": 10.0,
        "sample_dt": 0.1,
        "rel_tol": 1e-10,
        "abs_tol": 1e-12,
        "seed": 0,
        "threads": 1,
        "out": ".",
    },
    "phase": {
        "beta": 1.0,
        "gamma_min": 0.5,
        "gamma_max": 4.0,
        "h_min": 0.0,
        "h_max": 0.6,
        "resolution": 50,
        "seed": 0,
        "threads": 1,
        "out": ".",
    },
    "clt": {
        "beta": 1.0,
        "gamma": 1.0,
        "h": 0.2,
        "n": 10_000,
        "lambda_moments": [0.0] * 7,
        "h_realization": 0.0,
        "t_end": 2.0,
        "sample_dt": 0.1,
        "replicas": 0,
        "seed": 0,
        "threads": 1,
        "out": ".",
    },
    "critical": {
        "mode": "inhomogeneous",
        "beta": 1.0,
        "h": 0.3,
        "n_values": [1000, 4000, 16000],
        "t_end": None,
        "sample_dt": None,
        "replicas": None,
        "oracle_replicas": None,
        "oracle_dt": None,
        "seed": 0,
        "threads": 1,
        "out": ".",
    },
}


def _floats(text: str) -> List[float]:
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def _ints(text: str) -> List[int]:
    return [int(tok) for tok in text.split(",") if tok.strip() != ""]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duospin",
        description="Simulation and limit-theorem toolkit for a mean-field "
        "spin-flip model with a quenched binary environment.",
    )
    parser.add_argument("--version", action="version", version=f"duospin {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file; explicit flags override its fields")
        p.add_argument("--seed", type=int, default=None, help="base RNG seed")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for replica batches")
        p.add_argument("--out", type=str, default=None, help="output directory")

    p_sim = sub.add_parser("simulate", help="finite-N trajectories")
    common(p_sim)
    p_sim.add_argument("--beta", type=float, default=None)
    p_sim.add_argument("--gamma", type=float, default=None)
    p_sim.add_argument("--h", type=float, default=None)
    p_sim.add_argument("--n", type=int, default=None, help="population size")
    p_sim.add_argument("--t-end", type=float, default=None)
    p_sim.add_argument("--sample-dt", type=float, default=None)
    p_sim.add_argument("--eta-mode", type=str, default=None,
                       choices=["iid-symmetric", "fixed-array", "zero", "joint"])
    p_sim.add_argument("--law", type=_floats, default=None,
                       help="comma-separated initial law: 4 probabilities over "
                            "(sigma, omega) or 8 over (sigma, omega, eta)")
    p_sim.add_argument("--replicas", type=int, default=None)
    p_sim.add_argument("--oracle", action="store_true", default=None,
                       help="N=2 matrix-exponential cross-check (prints max TV)")
    p_sim.add_argument("--oracle-replicas", type=int, default=None)

    p_ode = sub.add_parser("ode", help="limit moment ODE")
    common(p_ode)
    p_ode.add_argument("--beta", type=float, default=None)
    p_ode.add_argument("--gamma", type=float, default=None)
    p_ode.add_argument("--h", type=float, default=None)
    p_ode.add_argument("--m0", type=_floats, default=None,
                       help="comma-separated 7 initial moments")
    p_ode.add_argument("--t-end", type=float, default=None)
    p_ode.add_argument("--sample-dt", type=float, default=None)
    p_ode.add_argument("--rel-tol", type=float, default=None)
    p_ode.add_argument("--abs-tol", type=float, default=None)

    p_phase = sub.add_parser("phase", help="phase-diagram scan")
    common(p_phase)
    p_phase.add_argument("--beta", type=float, default=None)
    p_phase.add_argument("--gamma-min", type=float, default=None)
    p_phase.add_argument("--gamma-max", type=float, default=None)
    p_phase.add_argument("--h-min", type=float, default=None)
    p_phase.add_argument("--h-max", type=float, default=None)
    p_phase.add_argument("--resolution", type=int, default=None)

    p_clt = sub.add_parser("clt", help="fluctuation covariance propagation")
    common(p_clt)
    p_clt.add_argument("--beta", type=float, default=None)
    p_clt.add_argument("--gamma", type=float, default=None)
    p_clt.add_argument("--h", type=float, default=None)
    p_clt.add_argument("--n", type=int, default=None)
    p_clt.add_argument("--lambda-moments", type=_floats, default=None,
                       help="comma-separated 7 initial-law moments "
                            "(environment entries must be 0)")
    p_clt.add_argument("--h-realization", type=float, default=None)
    p_clt.add_argument("--t-end", type=float, default=None)
    p_clt.add_argument("--sample-dt", type=float, default=None)
    p_clt.add_argument("--replicas", type=int, default=None,
                       help="if > 0, also run the finite-N covariance report")

    p_crit = sub.add_parser("critical", help="critical-scaling experiments")
    common(p_crit)
    p_crit.add_argument("--mode", type=str, default=None,
                        choices=["inhomogeneous", "homogeneous"])
    p_crit.add_argument("--beta", type=float, default=None)
    p_crit.add_argument("--h", type=float, default=None)
    p_crit.add_argument("--n-values", type=_ints, default=None,
                        help="comma-separated population sizes")
    p_crit.add_argument("--t-end", type=float, default=None,
                        help="horizon on the rescaled clock")
    p_crit.add_argument("--sample-dt", type=float, default=None)
    p_crit.add_argument("--replicas", type=int, default=None)
    p_crit.add_argument("--oracle-replicas", type=int, default=None,
                        help="diffusion-oracle path count (homogeneous mode)")
    p_crit.add_argument("--oracle-dt", type=float, default=None,
                        help="diffusion-oracle step size (homogeneous mode)")
    return parser


def _merge_config(sub: str, args: argparse.Namespace) -> Dict[str, object]:
    """defaults <- config file <- explicit flags (later wins)."""
    cfg = dict(_DEFAULTS[sub])
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {args.config} must hold a JSON object")
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ValueError(f"unknown config fields for {sub!r}: {unknown}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _write_effective_config(cfg: Dict[str, object], sub: str, out_dir: str) -> None:
    payload = dict(cfg)
    payload["subcommand"] = sub
    payload["version"] = __version__
    with open(os.path.join(out_dir, f"{sub}_config.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_simulate(cfg: Dict[str, object], out_dir: str) -> int:
    params = ModelParams(cfg["beta"], cfg["gamma"], cfg["h"], int(cfg["n"]))
    law = np.asarray(cfg["law"], dtype=np.float64)
    if cfg["oracle"]:
        return _simulate_oracle(cfg, params, out_dir)
    replicas = int(cfg["replicas"])
    if replicas == 1:
        rec = simulate(
            params, law, cfg["t_end"], cfg["sample_dt"], int(cfg["seed"]),
            eta_mode=str(cfg["eta_mode"]),
        )
        write_trajectory_csv(rec, os.path.join(out_dir, "trajectory.csv"))
    else:
        records = run_replicas(
            params, law, cfg["t_end"], cfg["sample_dt"], replicas,
            int(cfg["seed"]), eta_mode=str(cfg["eta_mode"]),
            threads=int(cfg["threads"]),
        )
        for r, rec in enumerate(records):
            write_trajectory_csv(
                rec, os.path.join(out_dir, f"trajectory_{r:04d}.csv")
            )
    return 0


def _simulate_oracle(cfg: Dict[str, object], params: ModelParams, out_dir: str) -> int:
    """N=2 fixed-environment ensemble vs the matrix-exponential law."""
    if params.n != 2:
        raise ValueError(f"--oracle requires --n 2, got n={params.n}")
    eta = np.array([1, -1], dtype=np.int8)
    law = np.asarray(cfg["law"], dtype=np.float64)
    if law.shape != (4,):
        raise ValueError("--oracle requires a 4-entry (sigma, omega) law")
    replicas = int(cfg["oracle_replicas"])
    t_end = float(cfg["t_end"])
    counts = np.zeros(16, dtype=np.int64)
    # run_replicas has no eta-array passthrough; loop explicitly so every
    # replica shares the frozen environment (+1, -1).
    for r in range(replicas):
        rec = simulate(
            params, law, t_end, t_end, (int(cfg["seed"]), r),
            eta_mode="fixed-array", eta=eta,
        )
        counts[two_site_state_index(rec.moments[-1])] += 1
    empirical = counts / replicas
    p0 = two_site_initial_distribution(law)
    exact = two_site_transient(params, eta, p0, t_end)
    tv = total_variation(empirical, exact)
    stderr = np.sqrt(exact * (1.0 - exact) / replicas)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(stderr > 0, np.abs(empirical - exact) / stderr, 0.0)
    report = {
        "replicas": replicas,
        "t_end": t_end,
        "eta": [1, -1],
        "max_tv": float(tv),
        "max_z": float(np.max(z)),
        "empirical": empirical.tolist(),
        "exact": exact.tolist(),
    }
    with open(os.path.join(out_dir, "oracle.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"max_tv": report["max_tv"], "max_z": report["max_z"]}))
    return 0


def _cmd_ode(cfg: Dict[str, object], out_dir: str) -> int:
    params = ModelParams(cfg["beta"], cfg["gamma"], cfg["h"])
    m0 = MomentVector.from_array(np.asarray(cfg["m0"], dtype=np.float64))
    path = integrate(
        m0, params, cfg["t_end"], rel_tol=cfg["rel_tol"], abs_tol=cfg["abs_tol"]
    )
    times = np.arange(0.0, cfg["t_end"] + 0.5 * cfg["sample_dt"], cfg["sample_dt"])
    times = np.minimum(times, path.t_end)
    values = path.at(times)
    csv_path = os.path.join(out_dir, "ode.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(MOMENT_NAMES) + "\n")
        for t, row in zip(times, values):
            fh.write("%.17g," % t + ",".join("%.17g" % v for v in row) + "\n")
    final = values[-1]
    residual = np.max(np.abs(mkv_rhs(final, params)))
    report = {
        "t_end": float(cfg["t_end"]),
        "final_moments": {k: float(v) for k, v in zip(MOMENT_NAMES, final)},
        "stationarity_residual": float(residual),
    }
    with open(os.path.join(out_dir, "ode_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_phase(cfg: Dict[str, object], out_dir: str) -> int:
    diagram = phase_diagram_scan(
        cfg["beta"],
        (cfg["gamma_min"], cfg["gamma_max"]),
        (cfg["h_min"], cfg["h_max"]),
        int(cfg["resolution"]),
    )
    write_phase_csv(diagram, os.path.join(out_dir, "phase.csv"))
    write_curves_json(diagram, os.path.join(out_dir, "curves.json"))
    return 0


def _cmd_clt(cfg: Dict[str, object], out_dir: str) -> int:
    params = ModelParams(cfg["beta"], cfg["gamma"], cfg["h"], int(cfg["n"]))
    lam = MomentVector.from_array(np.asarray(cfg["lambda_moments"], dtype=np.float64))
    model = FluctuationModel(params, lam)
    m0 = MomentVector.from_array(
        np.concatenate([[0.0], lam.as_array()[1:]])
    )
    path = integrate(m0, params, cfg["t_end"])
    times = np.arange(0.0, cfg["t_end"] + 0.5 * cfg["sample_dt"], cfg["sample_dt"])
    times = np.minimum(times, path.t_end)
    prop = propagate_clt(model, path, float(cfg["h_realization"]), times=times)
    write_covariance_csv(prop, os.path.join(out_dir, "clt_cov.csv"))
    if int(cfg["replicas"]) > 0:
        report = clt_experiment(
            params, lam, cfg["t_end"], int(cfg["replicas"]), int(cfg["seed"]),
            threads=int(cfg["threads"]),
        )
        with open(os.path.join(out_dir, "clt_report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(json.dumps({
            "frobenius_rel": report.frobenius_rel,
            "normality_ok": report.normality_ok(),
        }))
    return 0


def _cmd_critical(cfg: Dict[str, object], out_dir: str) -> int:
    mode = str(cfg["mode"])
    n_values = [int(v) for v in cfg["n_values"]]
    if mode == "inhomogeneous":
        result = run_inhomogeneous_critical(
            cfg["beta"], cfg["h"], n_values,
            t_end=cfg["t_end"] if cfg["t_end"] is not None else 6.0,
            replicas=int(cfg["replicas"]) if cfg["replicas"] is not None else 200,
            base_seed=int(cfg["seed"]),
            sample_dt=cfg["sample_dt"] if cfg["sample_dt"] is not None else 0.02,
            threads=int(cfg["threads"]),
        )
        for n in result.n_values:
            write_inhomogeneous_csv(
                result, n, os.path.join(out_dir, f"critical_inhom_n{n}.csv")
            )
    elif mode == "homogeneous":
        kwargs = {}
        if cfg["oracle_replicas"] is not None:
            kwargs["oracle_replicas"] = int(cfg["oracle_replicas"])
        if cfg["oracle_dt"] is not None:
            kwargs["oracle_dt"] = float(cfg["oracle_dt"])
        result = run_homogeneous_critical(
            cfg["beta"], n_values,
            t_end=cfg["t_end"] if cfg["t_end"] is not None else 1.5,
            replicas=int(cfg["replicas"]) if cfg["replicas"] is not None else 600,
            base_seed=int(cfg["seed"]),
            sample_dt=cfg["sample_dt"] if cfg["sample_dt"] is not None else 0.05,
            threads=int(cfg["threads"]),
            **kwargs,
        )
        for n in result.n_values:
            write_homogeneous_csv(
                result, n, os.path.join(out_dir, f"critical_homog_n{n}.csv")
            )
    else:
        raise ValueError(f"unknown critical mode {mode!r}")
    write_summary_json(result, os.path.join(out_dir, "critical_summary.json"))
    print(json.dumps({str(n): result.summary[n] for n in result.n_values}))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ode": _cmd_ode,
    "phase": _cmd_phase,
    "clt": _cmd_clt,
    "critical": _cmd_critical,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    sub = args.subcommand
    try:
        cfg = _merge_config(sub, args)
        out_dir = str(cfg["out"])
        os.makedirs(out_dir, exist_ok=True)
        _write_effective_config(cfg, sub, out_dir)
        return _COMMANDS[sub](cfg, out_dir)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1
