"""Experiment orchestration: configured runs, sweeps, verification suites.

One JSON config describes a run end to end; every output file embeds the
config hash and the artifact version, and identical config + seed produces
byte-identical files (no timestamps, sorted keys, repr-stable floats).

Exit codes: 0 pass, 1 invariant failure, 2 config error, 3 solver blow-up.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .diagnostics import diagnose_trajectory, smallness_condition, theta_envelope
from .grid import Field, GridError, make_grid
from .solver import (
    BlowupError,
    PerturbedRun,
    SolverError,
    SystemParams,
    Trajectory,
    g_linear,
    g_tanh_blend,
    g_zero,
    l2_spacetime_diff,
    solve_perturbed,
)
from .verify import run_suite

ARTIFACT_VERSION = "fswl-0.1.0"
TRAJECTORY_SCHEMA = 1


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

_G_REGISTRY = {
    "zero": lambda spec: g_zero(),
    "linear": lambda spec: g_linear(float(spec.get("c", 1.0))),
    "tanh_blend": lambda spec: g_tanh_blend(float(spec.get("m", 0.2)), float(spec.get("M", 1.0))),
}


def canonical_config() -> dict:
    """The bundled default configuration (the repository's regression run)."""
    path = Path(__file__).parent / "configs" / "canonical.json"
    return json.loads(path.read_text())


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _initial_field(grid, spec: dict, flavor: str) -> Field:
    kind = spec.get("kind", "gaussian")
    amp = float(spec.get("amplitude", 0.0))
    if kind == "zero" or amp == 0.0:
        return Field.zero(grid, flavor=flavor)
    center = float(spec.get("center", 0.0))
    if kind == "gaussian":
        width = float(spec.get("width", 1.0))
        mode = int(spec.get("mode", 0))
        kappa = np.pi * mode / grid.half_length
        if flavor == "real":
            fn = lambda x: amp * np.exp(-(((x - center) / width) ** 2))
        else:
            fn = lambda x: amp * np.exp(-(((x - center) / width) ** 2)) * np.exp(1j * kappa * x)
        return Field.from_function(grid, fn, flavor=flavor)
    if kind == "mode":
        mode = int(spec.get("mode", 1))
        kappa = np.pi * mode / grid.half_length
        if flavor == "real":
            return Field.from_function(grid, lambda x: amp * np.cos(kappa * x), flavor="real")
        return Field.from_function(grid, lambda x: amp * np.exp(1j * kappa * x))
    raise ConfigError(f"unknown initial-data kind {kind!r}")


def parse_config(config: dict):
    """Validate a config dict; returns (grid, params, run, u0, v0, extras)."""
    try:
        gspec = config["grid"]
        grid = make_grid(float(gspec["L"]), int(gspec["N"]))
    except GridError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"grid section invalid: {exc}") from exc

    try:
        sy = config["system"]
        g_spec = sy.get("g", {"kind": "zero"})
        kind = g_spec.get("kind", "zero")
        if kind not in _G_REGISTRY:
            raise ConfigError(
                f"unknown nonlinearity kind {kind!r}; choose from {sorted(_G_REGISTRY)}"
            )
        g = _G_REGISTRY[kind](g_spec)
        params = SystemParams(
            alpha=float(sy["alpha"]),
            beta=float(sy["beta"]),
            s=float(sy["s"]),
            g=g,
            gamma=float(sy.get("gamma", 1.0)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"system section invalid: {exc}") from exc

    try:
        pe = config.get("perturbation", {})
        tm = config["time"]
        dg = config.get("diagnostics", {})
        run = PerturbedRun(
            eps=float(pe.get("eps", 0.1)),
            a=int(pe.get("a", 4)),
            b=int(pe.get("b", 7)),
            T=float(tm["T"]),
            dt=float(tm["dt"]),
            picard_tol=float(tm.get("picard_tol", 1e-10)),
            picard_max_iter=int(tm.get("picard_max_iter", 50)),
            store_every=int(dg.get("store_every", 1)),
            blowup_factor=float(dg.get("blowup_factor", 1e6)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"time/perturbation section invalid: {exc}") from exc

    init = config.get("initial", {})
    u0 = _initial_field(grid, init.get("u0", {"kind": "zero"}), "complex")
    v0 = _initial_field(grid, init.get("v0", {"kind": "zero"}), "real")
    extras = {
        "mass_rtol": float(dg.get("mass_rtol", 1e-8)),
        "sup_tol": float(dg.get("sup_tol", 1e-8)),
        "seed": int(config.get("seed", 1234)),
        "eps_ladder": config.get("sweep", {}).get("eps_ladder"),
        "alpha_grid": config.get("sweep", {}).get("alpha_grid"),
    }
    return grid, params, run, u0, v0, extras


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _complex_rows(arr: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in arr]


def write_trajectory(path: Path, traj: Trajectory, chash: str) -> None:
    """JSON-lines: a self-describing header row, then one row per sample."""
    with path.open("w") as fh:
        header = {
            "artifact_version": ARTIFACT_VERSION,
            "config_hash": chash,
            "schema": TRAJECTORY_SCHEMA,
            "kind": "trajectory_header",
            "grid": {"L": traj.grid.half_length, "N": traj.grid.n_points},
            "eps": traj.run.eps,
            "n_samples": len(traj),
            "spectra_layout": "fft_order_complex_pairs",
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i in range(len(traj)):
            row = {
                "kind": "sample",
                "t": float(traj.times[i]),
                "u_spec": _complex_rows(traj.u_specs[i]),
                "v_spec": _complex_rows(traj.v_specs[i]),
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_trajectory(path: Path, params: SystemParams, run: PerturbedRun) -> Trajectory:
    with path.open() as fh:
        header = json.loads(fh.readline())
        grid = make_grid(header["grid"]["L"], header["grid"]["N"])
        times, us, vs = [], [], []
        for line in fh:
            row = json.loads(line)
            times.append(row["t"])
            us.append([complex(a, b) for a, b in row["u_spec"]])
            vs.append([complex(a, b) for a, b in row["v_spec"]])
    return Trajectory(
        grid=grid, params=params, run=run,
        times=np.array(times), u_specs=np.array(us), v_specs=np.array(vs),
    )


def _write_timeseries_csv(path: Path, recs, chash: str) -> None:
    cols = [
        "t", "mass", "energy", "v_l2", "v_sup",
        "energy_balance_residual", "v_balance_residual",
        "theta", "H_bound", "dtu_hminus1", "dtv_hminus1",
    ]
    lines = [f"# artifact_version={ARTIFACT_VERSION} config_hash={chash}", ",".join(cols)]
    for r in recs:
        lines.append(",".join(repr(getattr(r, c)) for c in cols))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Verbs
# ---------------------------------------------------------------------------

def do_run(config: dict, out_dir: Path) -> int:
    grid, params, run, u0, v0, extras = parse_config(config)
    chash = config_hash(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(out_dir / "config.json",
               {"artifact_version": ARTIFACT_VERSION, "config_hash": chash,
                "config": config})
    try:
        traj = solve_perturbed(u0, v0, params, run)
    except SolverError as exc:
        status = "blowup" if isinstance(exc, BlowupError) else "solver_failure"
        _dump_json(out_dir / "summary.json",
                   {"artifact_version": ARTIFACT_VERSION, "config_hash": chash,
                    "status": status, "detail": str(exc)})
        print(f"{status}: {exc}", file=sys.stderr)
        return 3

    recs = diagnose_trajectory(traj)
    env = theta_envelope(traj, params, run)
    small = smallness_condition(params, u0, v0, run.T, run.eps, a=run.a, b=run.b)

    mass0 = recs[0].mass
    mass_drift = max(abs(r.mass - mass0) for r in recs) / max(mass0, 1e-300)
    sup0 = recs[0].v_sup
    sup_excess = max(r.v_sup for r in recs) - sup0

    checks = {
        "mass_conservation": bool(mass_drift <= extras["mass_rtol"]),
        "max_principle": bool(sup_excess <= extras["sup_tol"]),
    }
    # the envelope bounds are guaranteed only under the smallness condition;
    # outside it they are reported, not asserted
    if small.satisfied:
        checks["theta_envelope"] = env.theta_ok
        checks["H_envelope"] = env.H_ok

    summary = {
        "artifact_version": ARTIFACT_VERSION,
        "config_hash": chash,
        "status": "completed",
        "mass_drift_rel": mass_drift,
        "v_sup_initial": sup0,
        "v_sup_excess": sup_excess,
        "theta_margin_min": env.theta_margin_min,
        "H_margin_min": env.H_margin_min,
        "smallness": json.loads(small.to_json()),
        "checks": checks,
        "passed": all(checks.values()),
    }
    write_trajectory(out_dir / "trajectory.jsonl", traj, chash)
    with (out_dir / "diagnostics.jsonl").open("w") as fh:
        fh.write(json.dumps({"artifact_version": ARTIFACT_VERSION,
                             "config_hash": chash, "kind": "diagnostics_header"},
                            sort_keys=True) + "\n")
        for r in recs:
            fh.write(r.to_json() + "\n")
    _write_timeseries_csv(out_dir / "timeseries.csv", recs, chash)
    _dump_json(out_dir / "summary.json", summary)

    for name, ok in sorted(checks.items()):
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if summary["passed"] else 1


def _sweep_worker(args):
    """Run one rung; ships back plain arrays so results pickle cleanly."""
    config, key = args
    grid, params, run, u0, v0, extras = parse_config(config)
    try:
        traj = solve_perturbed(u0, v0, params, run)
        return key, "completed", (traj.times, traj.u_specs, traj.v_specs)
    except BlowupError as exc:
        return key, f"blowup: {exc}", None
    except SolverError as exc:
        return key, f"failed: {exc}", None


def do_sweep(config: dict, out_dir: Path, workers: int = 1) -> int:
    grid, params, run, u0, v0, extras = parse_config(config)
    chash = config_hash(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    ladder = extras["eps_ladder"]
    alpha_grid = extras["alpha_grid"]
    if not ladder and not alpha_grid:
        raise ConfigError("sweep needs sweep.eps_ladder or sweep.alpha_grid")

    jobs = []
    if ladder:
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError("sweep.eps_ladder must be strictly decreasing")
        for eps in ladder:
            cfg = json.loads(json.dumps(config))
            cfg.setdefault("perturbation", {})["eps"] = eps
            cfg.pop("sweep", None)
            jobs.append((cfg, ("eps", eps)))
    if alpha_grid:
        for alpha in alpha_grid:
            cfg = json.loads(json.dumps(config))
            cfg["system"]["alpha"] = alpha
            cfg.pop("sweep", None)
            jobs.append((cfg, ("alpha", alpha)))

    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            results = pool.map(_sweep_worker, jobs)
    else:
        results = [_sweep_worker(j) for j in jobs]

    def _rebuild(key, payload):
        if payload is None:
            return None
        times, us, vs = payload
        kind, value = key
        rn = replace(run, eps=float(value)) if kind == "eps" else run
        pm = replace(params, alpha=float(value)) if kind == "alpha" else params
        return Trajectory(grid=grid, params=pm, run=rn,
                          times=times, u_specs=us, v_specs=vs)

    by_key = {key: (status, _rebuild(key, payload)) for key, status, payload in results}

    report = {"artifact_version": ARTIFACT_VERSION, "config_hash": chash}
    failures = 0

    if ladder:
        rows = []
        for (e1, e2) in zip(ladder, ladder[1:]):
            s1, t1 = by_key[("eps", e1)]
            s2, t2 = by_key[("eps", e2)]
            if t1 is None or t2 is None:
                rows.append({"eps_coarse": e1, "eps_fine": e2,
                             "status": f"{s1} / {s2}"})
                failures += 1
                continue
            du, dv = l2_spacetime_diff(t1, t2)
            rows.append({"eps_coarse": e1, "eps_fine": e2,
                         "u_l2_diff": du, "v_l2_diff": dv, "status": "ok"})
        report["viscosity_table"] = rows
        u_seq = [r["u_l2_diff"] for r in rows if "u_l2_diff" in r]
        v_seq = [r["v_l2_diff"] for r in rows if "v_l2_diff" in r]
        report["u_diffs_decreasing"] = all(b < a for a, b in zip(u_seq, u_seq[1:]))
        report["v_diffs_decreasing"] = all(b < a for a, b in zip(v_seq, v_seq[1:]))

    if alpha_grid:
        cells = []
        for alpha in alpha_grid:
            status, traj = by_key[("alpha", alpha)]
            sp = replace(params, alpha=float(alpha))
            small = smallness_condition(sp, u0, v0, run.T, run.eps, a=run.a, b=run.b)
            cells.append({
                "alpha": alpha,
                "status": status if traj is None else "completed",
                "blowup": traj is None and status.startswith("blowup"),
                "smallness_satisfied": small.satisfied,
                "smallness_lhs": small.lhs,
            })
        report["stability_map"] = cells
        report["no_blowup_inside_frontier"] = all(
            not c["blowup"] for c in cells if c["smallness_satisfied"]
        )

    _dump_json(out_dir / "sweep_report.json", report)
    for key, status, _ in sorted(results, key=lambda r: repr(r[0])):
        print(f"{key}: {status}")
    return 0 if failures == 0 else 1


def do_verify(suite: str, seed: int, out_dir: Path | None) -> int:
    try:
        report = run_suite(suite, seed=seed)
    except KeyError as exc:
        print(exc, file=sys.stderr)
        return 2
    for row in report["checks"]:
        print(f"{'PASS' if row['passed'] else 'FAIL'} {row['name']}")
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _dump_json(out_dir / f"verify_{suite}.json", report)
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fswl",
        description="Spectral solver and verification suite for the coupled "
                    "fractional short-wave/long-wave system.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("--config", type=Path, default=None,
                       help="JSON config (defaults to the bundled canonical run)")
    p_run.add_argument("--out", type=Path, required=True)
    p_run.add_argument("--seed", type=int, default=None)

    p_sweep = sub.add_parser("sweep", help="eps-ladder and/or alpha-grid fan-out")
    p_sweep.add_argument("--config", type=Path, default=None)
    p_sweep.add_argument("--out", type=Path, required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--workers", type=int, default=1)

    p_ver = sub.add_parser("verify", help="run a property suite")
    p_ver.add_argument("--suite", required=True,
                       help="operators|inequalities|propagators|gronwall|entropy|weakform|all")
    p_ver.add_argument("--seed", type=int, default=1234)
    p_ver.add_argument("--out", type=Path, default=None)

    args = parser.parse_args(argv)
    try:
        if args.verb in ("run", "sweep"):
            config = canonical_config() if args.config is None else json.loads(
                Path(args.config).read_text()
            )
            if args.seed is not None:
                config["seed"] = args.seed
            if args.verb == "run":
                return do_run(config, args.out)
            return do_sweep(config, args.out, workers=args.workers)
        return do_verify(args.suite, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlowupError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
