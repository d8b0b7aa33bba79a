"""The ``weakcrit`` command line: deterministic CSV/JSON protocol artifacts.

Subcommands: sweep, trajectory, relaxation, fit, critical-angles,
oracle-check. Configuration comes from a flat JSON file (--config) with CLI
flags overriding individual fields; identical configuration and package
version produce byte-identical output. Data goes to --out (or standard
output); every error path writes a single JSON object to standard error and
exits nonzero: 2 usage/config, 3 fit failure, 4 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .bipartite import bipartite_run, bipartite_step
from .config import CONFIG_VERSION, RunConfig
from .criticality import (
    ABOVE,
    BELOW,
    default_offsets,
    fit_exponent,
    relaxation_profile,
    relaxation_time,
    sweep_phi,
)
from .dynamics import iterate_matrix
from .errors import ConfigError, PoorFit, WeakcritError, WindowContainsCriticalPoint
from .linalg import trace_distance
from .protocol import (
    ALL_CRITICAL,
    CouplingSpec,
    MeterObservable,
    PostSelection,
    SystemPreparation,
    kraus_exact_qubit,
    kraus_first_order,
    overlap,
    weak_value,
)
from .states import MeterState


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (JSON on stderr)."""

    def error(self, message):
        raise ConfigError(message)


def _fmt(x) -> str:
    """Shortest round-trip decimal; empty cell for missing or infinite."""
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return ""
    return repr(x)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_json(payload: dict, out: str | None) -> None:
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)


def _json_error(kind: str, message: str, **extra) -> None:
    payload = {"error": {"type": kind, "message": message, **extra}}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


# --------------------------------------------------------------------- parse

def _split_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None


def _parse_phi_grid(text: str) -> dict:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--phi-grid wants start:stop:points")
    return {
        "phi_start_rad": parts[0],
        "phi_stop_rad": parts[1],
        "phi_points": int(parts[2]),
    }


def _parse_window(text: str) -> dict:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--window wants lo:hi:per-decade")
    return {
        "window_lo": float(parts[0]),
        "window_hi": float(parts[1]),
        "window_per_decade": int(parts[2]),
    }


def _build_parser() -> _Parser:
    parser = _Parser(prog="weakcrit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: _Parser) -> None:
        p.add_argument("--config", default=None, help="flat JSON config file")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--theta", default=None, help="preparation angle (radians or pi-expression)")
        p.add_argument("--alpha", default=None, help="post-selection phase (radians or pi-expression)")
        p.add_argument("--gamma", type=float, default=None, help="coupling strength (inverse time)")
        p.add_argument("--t", type=float, default=None, help="interaction duration")
        p.add_argument("--form", choices=["exact_qubit", "first_order"], default=None)
        p.add_argument("--phi", default=None, help="single post-selection angle (trajectory)")
        p.add_argument("--phi-grid", default=None, metavar="START:STOP:POINTS")
        p.add_argument("--n", default=None, help="comma list of iteration counts")
        p.add_argument("--steps", type=int, default=None, help="trajectory length")
        p.add_argument("--meter-dim", type=int, default=None)
        p.add_argument("--meter-obs", default=None, help='"sigma_x" or comma list of diagonal entries')
        p.add_argument("--initial", default=None, help="rx,ry,rz (qubit) or amplitude list")
        p.add_argument("--window", default=None, metavar="LO:HI:PER-DECADE")
        p.add_argument("--jobs", type=int, default=None, help="worker pool size (default: available parallelism)")
        p.add_argument("--seed", type=int, default=None, help="randomized suites only")
        p.add_argument("--trials", type=int, default=None, help="oracle-check trial count")
        p.add_argument("--debug-flip-d", action="store_const", const=True, default=None,
                       help="negative control: deliberately flip the sign of d")

    for name, fn in (
        ("sweep", cmd_sweep),
        ("trajectory", cmd_trajectory),
        ("relaxation", cmd_relaxation),
        ("fit", cmd_fit),
        ("critical-angles", cmd_critical_angles),
        ("oracle-check", cmd_oracle_check),
    ):
        p = sub.add_parser(name)
        add_common(p)
        p.set_defaults(func=fn)
    return parser


def _config_from_args(args) -> RunConfig:
    overrides: dict = {
        "theta_rad": args.theta,
        "alpha_rad": args.alpha,
        "gamma_inv_time": args.gamma,
        "t_time": args.t,
        "form": args.form,
        "phi_rad": args.phi,
        "steps": args.steps,
        "meter_dim": args.meter_dim,
        "jobs": args.jobs,
        "seed": args.seed,
        "trials": args.trials,
        "debug_flip_d": args.debug_flip_d,
        "out": args.out,
    }
    if args.phi_grid is not None:
        overrides.update(_parse_phi_grid(args.phi_grid))
    if args.window is not None:
        overrides.update(_parse_window(args.window))
    if args.n is not None:
        overrides["n_list"] = [int(x) for x in args.n.split(",") if x.strip() != ""]
    if args.meter_obs is not None:
        text = args.meter_obs
        overrides["meter_obs"] = _split_floats(text) if "," in text else text
    if args.initial is not None:
        overrides["initial_state"] = _split_floats(args.initial)
    return RunConfig.load(args.config, overrides)


# ------------------------------------------------------------------ commands

def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    result = sweep_phi(
        cfg.protocol(),
        cfg.initial_meter(),
        cfg.phi_grid(),
        cfg.n_list,
        jobs=cfg.resolved_jobs(),
        tol=cfg.tolerance_set(),
    )
    header = (
        "phi,n,"
        + ",".join(f"exp_{name}" for name in result.observable_names)
        + ",abs_lambda_1,abs_lambda_2,im_weak_value,tau"
    )
    lines = [header]
    for row in result.rows:
        cells = [_fmt(row.phi), str(row.n)]
        cells += [_fmt(e) for e in row.expectations]
        cells += [_fmt(row.abs_lambda_1), _fmt(row.abs_lambda_2)]
        cells += [_fmt(row.im_weak_value), _fmt(row.tau)]
        lines.append(",".join(cells))
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def cmd_trajectory(args) -> int:
    cfg = _config_from_args(args)
    if int(cfg.meter_dim) != 2:
        raise ConfigError("trajectory CSV is Bloch-based; needs meter_dim = 2")
    protocol = cfg.protocol()
    k = protocol.kraus(cfg.trajectory_phi())
    record = iterate_matrix(
        k, cfg.initial_meter(), cfg.trajectory_steps(), tol=cfg.tolerance_set()
    )
    lines = ["step,rx,ry,rz,purity"]
    for step, state in enumerate(record.steps):
        b = state.bloch()
        lines.append(
            f"{step},{_fmt(b.rx)},{_fmt(b.ry)},{_fmt(b.rz)},{_fmt(state.purity())}"
        )
    _emit("\n".join(lines) + "\n", cfg.out)
    if cfg.out is not None:
        sidecar = {
            "package_version": __version__,
            "config_version": CONFIG_VERSION,
            "phi_rad": cfg.trajectory_phi(),
            "steps": cfg.trajectory_steps(),
            "converged_at": record.converged_at,
        }
        with open(cfg.out + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_relaxation(args) -> int:
    cfg = _config_from_args(args)
    profile = relaxation_profile(
        cfg.protocol(), cfg.phi_grid(), jobs=cfg.resolved_jobs(), tol=cfg.tolerance_set()
    )
    lines = ["phi,tau,is_infinite"]
    for phi, tau in profile.samples:
        if tau is not None and math.isinf(tau):
            lines.append(f"{_fmt(phi)},,1")
        else:
            lines.append(f"{_fmt(phi)},{_fmt(tau)},0")
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def cmd_fit(args) -> int:
    cfg = _config_from_args(args)
    protocol = cfg.protocol()
    tol = cfg.tolerance_set()
    angles = protocol.critical_angles()
    if angles is ALL_CRITICAL:
        raise PoorFit("the weak value is purely real: every angle is critical")
    if not angles:
        raise PoorFit("no critical angles found for this configuration")
    offsets = default_offsets(cfg.window_lo, cfg.window_hi, cfg.window_per_decade)

    def tau_fn(phi: float) -> float:
        return relaxation_time(protocol.kraus(phi), tol)

    records = []
    for phi_c in angles:
        sides = []
        if phi_c > 1e-9:
            sides.append(BELOW)
        if phi_c < math.pi - 1e-9:
            sides.append(ABOVE)
        for side in sides:
            fit = fit_exponent(tau_fn, phi_c, side, offsets, tol)
            records.append(
                {
                    "phi_c_rad": fit.phi_c,
                    "side": fit.side,
                    "slope": fit.slope,
                    "intercept": fit.intercept,
                    "r_squared": fit.r_squared,
                    "nu": fit.nu,
                    "window": {
                        "lo": cfg.window_lo,
                        "hi": cfg.window_hi,
                        "per_decade": cfg.window_per_decade,
                    },
                    "points": [
                        [off, tau] for off, tau in zip(fit.offsets, fit.taus)
                    ],
                }
            )
    _emit_json(
        {
            "package_version": __version__,
            "config_version": CONFIG_VERSION,
            "fits": records,
        },
        cfg.out,
    )
    return 0


def cmd_critical_angles(args) -> int:
    cfg = _config_from_args(args)
    angles = cfg.protocol().critical_angles()
    payload = {
        "package_version": __version__,
        "config_version": CONFIG_VERSION,
        "theta_rad": float(cfg.theta_rad),
        "alpha_rad": float(cfg.alpha_rad),
        "all_critical": angles is ALL_CRITICAL,
        "critical_angles_rad": [] if angles is ALL_CRITICAL else list(angles),
    }
    _emit_json(payload, cfg.out)
    return 0


def cmd_oracle_check(args) -> int:
    cfg = _config_from_args(args)
    tol = cfg.tolerance_set()
    rng = np.random.default_rng(int(cfg.seed))
    trials = int(cfg.trials)

    def sample_selection():
        while True:
            theta = float(rng.uniform(0.05, math.pi / 2 - 0.05))
            phi = float(rng.uniform(0.05, math.pi - 0.05))
            alpha = float(rng.uniform(0.0, 2.0 * math.pi))
            prep = SystemPreparation(theta)
            post = PostSelection(phi=phi, alpha=alpha)
            if abs(overlap(prep, post)) >= 0.05:
                return theta, phi, alpha, prep, post

    def random_pure() -> MeterState:
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        return MeterState.pure(v)

    exact_tol = 1e-12
    worst_exact = 0.0
    worst_config = None
    protocol_template = cfg.protocol()
    for _trial in range(trials):
        theta, phi, alpha, prep, post = sample_selection()
        gt = float(rng.uniform(0.01, 0.5))
        n = int(rng.integers(1, 101))
        initial = random_pure()
        k = kraus_exact_qubit(
            prep, post, CouplingSpec.from_gt(gt), flip_d=protocol_template.flip_d
        )
        kraus_traj = iterate_matrix(k, initial, n, tol=tol)
        oracle_traj = bipartite_run(theta, phi, alpha, gt, initial, n, tol=tol)
        dist = max(
            float(trace_distance(a, b))
            for a, b in zip(kraus_traj.steps, oracle_traj.steps)
        )
        if dist > worst_exact:
            worst_exact = dist
            worst_config = {
                "theta": theta, "phi": phi, "alpha": alpha, "gt": gt, "n": n,
            }
    exact_passed = bool(worst_exact <= exact_tol)

    gt_fo = 1e-3
    fo_tol = 10.0 * gt_fo**2
    worst_fo = 0.0
    sigma_x_obs = MeterObservable.sigma_x(tol)
    for _trial in range(trials):
        theta, phi, alpha, prep, post = sample_selection()
        initial = random_pure()
        ov = overlap(prep, post)
        wv = weak_value(prep, post, tol=tol)
        k = kraus_first_order(ov, wv, CouplingSpec.from_gt(gt_fo), sigma_x_obs, tol)
        kraus_state = iterate_matrix(k, initial, 1, tol=tol).final
        oracle_state, _prob = bipartite_step(theta, phi, alpha, gt_fo, initial, tol=tol)
        worst_fo = max(worst_fo, float(trace_distance(kraus_state, oracle_state)))
    fo_passed = bool(worst_fo <= fo_tol)

    passed = exact_passed and fo_passed
    report = {
        "package_version": __version__,
        "config_version": CONFIG_VERSION,
        "seed": int(cfg.seed),
        "debug_flip_d": bool(cfg.debug_flip_d),
        "exact_qubit": {
            "trials": trials,
            "max_trace_distance": worst_exact,
            "tolerance": exact_tol,
            "passed": exact_passed,
        },
        "first_order": {
            "trials": trials,
            "gt": gt_fo,
            "max_trace_distance": worst_fo,
            "tolerance": fo_tol,
            "passed": fo_passed,
        },
        "worst_config": worst_config,
        "passed": passed,
    }
    _emit_json(report, cfg.out)
    if not passed:
        _json_error(
            "oracle_mismatch",
            f"max exact distance {worst_exact:.3e} (tol {exact_tol:.0e}), "
            f"max first-order distance {worst_fo:.3e} (tol {fo_tol:.0e})",
            worst_config=worst_config,
        )
        return 4
    return 0


# ---------------------------------------------------------------------- main

def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        _json_error("config", str(exc))
        return 2
    except WindowContainsCriticalPoint as exc:
        _json_error("fit", str(exc))
        return 3
    except PoorFit as exc:
        extra = {}
        if exc.fit is not None:
            extra = {
                "phi_c_rad": exc.fit.phi_c,
                "side": exc.fit.side,
                "r_squared": exc.fit.r_squared,
                "nu": exc.fit.nu,
            }
        _json_error("fit", str(exc), **extra)
        return 3
    except WeakcritError as exc:
        _json_error(type(exc).__name__, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
