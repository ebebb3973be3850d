"""Command line front end: one experiment per invocation, driven by a flat
JSON config, emitting a deterministic CSV plus a JSON meta file.

Numbers in the CSV use '.' as the decimal separator and 17 significant
digits, so parsing them back reproduces the float64 values exactly.  Wall
time lives only in the meta file; CSV bytes depend on nothing but the
resolved config, so echoing the config and re-running reproduces the CSV
byte for byte at any worker count.

Exit codes: 0 success, 2 for a completed run whose assertion-style check
failed (floor not cleared, audit missed, consistency violated), 1 for
config or runtime errors.  SVSMOOTH_BUDGET_SECONDS soft-caps trial loops;
a truncated run flags truncated: true in the meta and still exits 0.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy

import svsmooth
from svsmooth.arithmetic import (CompressibilityParams, LCDParams,
                                 classify_vector, lcd, sparsity_distance)
from svsmooth.counterexample import (CounterexampleConfig,
                                     counterexample_tail_sweep,
                                     event_E_frequency, pick_gate_constant)
from svsmooth.ensembles import (EnsembleSpec, ShiftMatrix, parse_distribution)
from svsmooth.lattice_geometry import (Ellipsoid, Parallelepiped, build_sd_net,
                                       count_lattice_points, cover_audit,
                                       cover_ellipsoid, net_size_bound)
from svsmooth.tail_lab import (invertibility_distance_check, opnorm_quantile,
                               sweep_tail_curve)

__all__ = ["main", "run", "validate"]

BUDGET_ENV = "SVSMOOTH_BUDGET_SECONDS"


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (_is_int(v) or isinstance(v, float)) and math.isfinite(v)


def _is_numlist(v) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(_is_num(x) for x in v)


def _is_matrix(v) -> bool:
    return (isinstance(v, list) and len(v) > 0 and all(_is_numlist(r) for r in v)
            and len({len(r) for r in v}) == 1)


def _is_str(v) -> bool:
    return isinstance(v, str)


def _is_bool(v) -> bool:
    return isinstance(v, bool)


_CHECK_NAMES = {
    _is_int: "an integer",
    _is_num: "a finite number",
    _is_numlist: "a list of numbers",
    _is_matrix: "a rectangular list of number lists",
    _is_str: "a string",
    _is_bool: "a boolean",
}

# command -> (required {key: check}, optional {key: (default, check)})
_SCHEMAS: Dict[str, Tuple[dict, dict]] = {
    "tail-sweep": (
        {"n": _is_int, "distribution": _is_str, "epsilons": _is_numlist,
         "trials": _is_int},
        {"shift": (None, lambda v: v is None or v == "zero" or _is_numlist(v)),
         "confidence": (0.99, _is_num), "master_seed": (0, _is_int),
         "output_path": (None, _is_str)},
    ),
    "lcd": (
        {"vector": _is_numlist, "gamma": _is_num, "alpha": _is_num},
        {"theta_max": (None, _is_num), "grid_step": (1e-3, _is_num),
         "refine_tol": (1e-9, _is_num), "normalize": (True, _is_bool),
         "output_path": (None, _is_str)},
    ),
    "classify": (
        {"vector": _is_numlist, "delta": _is_num, "rho": _is_num},
        {"normalize": (True, _is_bool), "output_path": (None, _is_str)},
    ),
    "counterexample": (
        {"n": _is_int, "t": _is_int, "trials": _is_int},
        {"C": (2.0, lambda v: _is_num(v) or _is_numlist(v)),
         "K": (None, _is_num), "L": (None, _is_num),
         "gate_trials": (2000, _is_int), "confidence": (0.99, _is_num),
         "master_seed": (0, _is_int), "output_path": (None, _is_str)},
    ),
    "event-e": (
        {"n": _is_int, "t": _is_int, "trials": _is_int},
        {"distribution": ("lazy_rademacher", _is_str),
         "K_gate": (None, _is_num), "C": (2.0, _is_num), "L": (None, _is_num),
         "equality_only": (False, _is_bool), "gate_trials": (2000, _is_int),
         "confidence": (0.99, _is_num), "master_seed": (0, _is_int),
         "output_path": (None, _is_str)},
    ),
    "lattice": (
        {"center": _is_numlist, "widths": _is_numlist},
        {"axes": (None, _is_matrix), "budget": (100_000_000, _is_int),
         "output_path": (None, _is_str)},
    ),
    "cover": (
        {"semiaxes": _is_numlist},
        {"center": (None, _is_numlist), "axes": (None, _is_matrix),
         "audit_samples": (100_000, _is_int), "master_seed": (0, _is_int),
         "output_path": (None, _is_str)},
    ),
    "net": (
        {"n": _is_int, "D": _is_num, "mu": _is_num, "gamma": _is_num},
        {"sample_budget": (10_000, _is_int), "eta": (1.0, _is_num),
         "C_lemma": (10.0, _is_num), "grid_step": (1e-3, _is_num),
         "refine_tol": (1e-9, _is_num), "master_seed": (0, _is_int),
         "output_path": (None, _is_str)},
    ),
    "opnorm-quantile": (
        {"n": _is_int, "distribution": _is_str, "q": _is_num, "trials": _is_int},
        {"master_seed": (0, _is_int), "output_path": (None, _is_str)},
    ),
    "distance-check": (
        {"n": _is_int, "distribution": _is_str, "delta": _is_num,
         "rho": _is_num, "epsilon": _is_num, "trials": _is_int},
        {"shift": (None, lambda v: v is None or v == "zero" or _is_numlist(v)),
         "confidence": (0.99, _is_num), "master_seed": (0, _is_int),
         "output_path": (None, _is_str)},
    ),
}


def validate(config) -> List[str]:
    """Diagnostics for a config dict; empty means runnable."""
    if not isinstance(config, dict):
        return ["config must be a JSON object"]
    command = config.get("command")
    if command is None:
        return ["missing key: command"]
    if command not in _SCHEMAS:
        return [f"unknown command {command!r}; expected one of "
                + ", ".join(sorted(_SCHEMAS))]
    required, optional = _SCHEMAS[command]
    diags = []
    known = {"command"} | set(required) | set(optional)
    for key in sorted(set(config) - known):
        diags.append(f"unknown key for {command}: {key!r}")
    for key, check in required.items():
        if key not in config:
            diags.append(f"missing key: {key}")
        elif not check(config[key]):
            diags.append(f"bad value for {key}: expected "
                         f"{_CHECK_NAMES.get(check, 'a valid value')}")
    for key, (_, check) in optional.items():
        if key in config and config[key] is not None and not check(config[key]):
            diags.append(f"bad value for {key}: expected "
                         f"{_CHECK_NAMES.get(check, 'a valid value')}")
    if diags:
        return diags

    if "trials" in required and config["trials"] < 1:
        diags.append("trials must be >= 1")
    if "n" in required and config["n"] < 1:
        diags.append("n must be >= 1")
    if config.get("confidence") is not None and not (0.0 < config.get("confidence", 0.99) < 1.0):
        diags.append("confidence must be in (0,1)")
    if command == "counterexample":
        n, K, L = config["n"], config.get("K"), config.get("L")
        if K is not None and L is not None and L < 2.0 * K * math.sqrt(n):
            diags.append(
                f"counterexample requires L >= 2*K*sqrt(n) = "
                f"{2.0 * K * math.sqrt(n)!r}, got L = {L!r}")
        if config["t"] < 1:
            diags.append("t must be >= 1")
    if command == "event-e" and config["t"] < 1:
        diags.append("t must be >= 1")
    if command == "tail-sweep" and any(e < 0 for e in config["epsilons"]):
        diags.append("epsilons must be nonnegative")
    if command in ("classify", "distance-check"):
        if not (0.0 < config["delta"] < 1.0):
            diags.append("delta must be in (0,1)")
        if not (0.0 < config["rho"] < 1.0):
            diags.append("rho must be in (0,1)")
    if command in ("lcd", "net") and not (0.0 < config["gamma"] < 1.0):
        diags.append("gamma must be in (0,1)")
    if command == "opnorm-quantile" and not (0.0 < config["q"] < 1.0):
        diags.append("q must be in (0,1)")
    return diags


def _resolve(config: dict, seed_override: Optional[int]) -> dict:
    command = config["command"]
    _, optional = _SCHEMAS[command]
    resolved = dict(config)
    for key, (default, _) in optional.items():
        if resolved.get(key) is None:
            resolved[key] = default
    if seed_override is not None and "master_seed" in optional:
        resolved["master_seed"] = seed_override
    if resolved.get("output_path") is None:
        resolved["output_path"] = command
    return resolved


def _shift_from_config(value, n: int) -> ShiftMatrix:
    if value is None or value == "zero":
        return ShiftMatrix.zero(n)
    if len(value) != n:
        raise ValueError(f"shift diagonal has length {len(value)}, n = {n}")
    return ShiftMatrix.from_diagonal(value)


def _maybe_normalize(vec, normalize: bool) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if normalize:
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        v = v / nrm
    return v


Rows = List[List]
Handler = Tuple[List[str], Rows, dict, bool, bool]  # cols, rows, meta, failed, truncated


def _run_tail_sweep(cfg, workers, deadline) -> Handler:
    spec = EnsembleSpec(cfg["n"], parse_distribution(cfg["distribution"]),
                        cfg["master_seed"])
    shift = _shift_from_config(cfg["shift"], cfg["n"])
    curve = sweep_tail_curve(shift, spec, cfg["epsilons"], cfg["trials"],
                             cfg["confidence"], workers, deadline)
    cols = ["epsilon", "trials", "successes", "p_hat", "ci_low", "ci_high"]
    rows = [[r.epsilon, r.trials, r.successes, r.p_hat, r.ci_low, r.ci_high]
            for r in curve.rows]
    return cols, rows, {"curve": curve.meta}, False, bool(curve.meta["truncated"])


def _run_lcd(cfg, workers, deadline) -> Handler:
    v = _maybe_normalize(cfg["vector"], cfg["normalize"])
    theta_max = cfg["theta_max"]
    if theta_max is None:
        theta_max = 8.0 * math.sqrt(v.size)
    params = LCDParams(alpha=cfg["alpha"], gamma=cfg["gamma"],
                       theta_max=theta_max, grid_step=cfg["grid_step"],
                       refine_tol=cfg["refine_tol"])
    res = lcd(v, params)
    cols = ["status", "value", "witness_theta", "witness_dist"]
    return cols, [[res.status, res.value, res.witness_theta,
                   res.witness_dist]], {"theta_max": theta_max}, False, False


def _run_classify(cfg, workers, deadline) -> Handler:
    v = _maybe_normalize(cfg["vector"], cfg["normalize"])
    params = CompressibilityParams(cfg["delta"], cfg["rho"])
    dist = sparsity_distance(v, params.delta)
    label = classify_vector(v, params).value
    return (["sparsity_distance", "classification"], [[dist, label]], {},
            False, False)


def _run_counterexample(cfg, workers, deadline) -> Handler:
    n, t = cfg["n"], cfg["t"]
    K = cfg["K"]
    if K is None:
        gate_spec = EnsembleSpec(n, parse_distribution("lazy_rademacher"),
                                 cfg["master_seed"] + 1)
        K = pick_gate_constant(gate_spec, cfg["gate_trials"], workers)
        cfg["K"] = K
    L = cfg["L"]
    if L is None:
        L = 2.0 * K * math.sqrt(n)
        cfg["L"] = L
    c_values = cfg["C"] if isinstance(cfg["C"], list) else [cfg["C"]]
    conf = CounterexampleConfig(n=n, t=t, L=L, K=K, C=float(c_values[0]),
                                trials=cfg["trials"], seed=cfg["master_seed"])
    outcomes = counterexample_tail_sweep(conf, [float(c) for c in c_values],
                                         cfg["confidence"], workers, deadline)
    cols = ["C", "threshold", "trials", "successes", "p_hat", "ci_low",
            "ci_high", "floor", "clears_floor"]
    rows = []
    for c, out in zip(c_values, outcomes):
        f = out.frequency
        rows.append([float(c), out.threshold, f.trials, f.successes, f.p_hat,
                     f.ci_low, f.ci_high, out.floor, out.clears_floor])
    any_clears = any(out.clears_floor for out in outcomes)
    truncated = any(out.truncated for out in outcomes)
    return cols, rows, {"K": K, "L": L}, not any_clears, truncated


def _run_event_e(cfg, workers, deadline) -> Handler:
    n, t = cfg["n"], cfg["t"]
    dist = parse_distribution(cfg["distribution"])
    spec = EnsembleSpec(n, dist, cfg["master_seed"])
    K_gate = cfg["K_gate"]
    if K_gate is None:
        gate_spec = EnsembleSpec(n, dist, cfg["master_seed"] + 1)
        K_gate = pick_gate_constant(gate_spec, cfg["gate_trials"], workers)
        cfg["K_gate"] = K_gate
    L = cfg["L"]
    if L is None:
        L = 2.0 * K_gate * math.sqrt(n)
        cfg["L"] = L
    freq = event_E_frequency(spec, t, cfg["trials"], K_gate, cfg["C"], L,
                             cfg["equality_only"], cfg["confidence"], workers,
                             deadline)
    cols = ["n", "t", "equality_only", "K_gate", "C", "L", "trials",
            "successes", "p_hat", "ci_low", "ci_high"]
    rows = [[n, t, cfg["equality_only"], K_gate, cfg["C"], L, freq.trials,
             freq.successes, freq.p_hat, freq.ci_low, freq.ci_high]]
    return cols, rows, {}, False, freq.trials < cfg["trials"]


def _run_lattice(cfg, workers, deadline) -> Handler:
    center = np.asarray(cfg["center"], dtype=np.float64)
    axes = (np.eye(center.size) if cfg["axes"] is None
            else np.asarray(cfg["axes"], dtype=np.float64))
    box = Parallelepiped(center, axes, np.asarray(cfg["widths"], dtype=np.float64))
    count = count_lattice_points(box, cfg["budget"])
    return ["count"], [[count]], {}, False, False


def _run_cover(cfg, workers, deadline) -> Handler:
    semiaxes = np.asarray(cfg["semiaxes"], dtype=np.float64)
    n = semiaxes.size
    center = (np.zeros(n) if cfg["center"] is None
              else np.asarray(cfg["center"], dtype=np.float64))
    axes = (np.eye(n) if cfg["axes"] is None
            else np.asarray(cfg["axes"], dtype=np.float64))
    e = Ellipsoid(center, axes, semiaxes)
    boxes = cover_ellipsoid(e)
    misses = cover_audit(e, boxes, cfg["audit_samples"], cfg["master_seed"])
    cols = ["n", "boxes", "audit_samples", "misses"]
    return cols, [[n, len(boxes), cfg["audit_samples"], misses]], {}, misses > 0, False


def _run_net(cfg, workers, deadline) -> Handler:
    params = LCDParams(alpha=cfg["mu"] * math.sqrt(cfg["n"]),
                       gamma=cfg["gamma"],
                       theta_max=2.0 * cfg["D"] + 1.0,
                       grid_step=cfg["grid_step"],
                       refine_tol=cfg["refine_tol"])
    res = build_sd_net(cfg["n"], cfg["D"], cfg["mu"], cfg["gamma"],
                       cfg["sample_budget"], params, cfg["master_seed"])
    bound = net_size_bound(cfg["n"], cfg["D"], cfg["mu"], cfg["eta"],
                           cfg["C_lemma"])
    cols = ["n", "D", "net_size", "gap_bound", "audit_members",
            "audit_max_gap", "size_bound"]
    gap_ok = res.audit_members == 0 or res.audit_max_gap <= res.gap_bound
    rows = [[cfg["n"], cfg["D"], res.net.shape[0], res.gap_bound,
             res.audit_members, res.audit_max_gap, bound]]
    return cols, rows, {}, not gap_ok, False


def _run_opnorm_quantile(cfg, workers, deadline) -> Handler:
    spec = EnsembleSpec(cfg["n"], parse_distribution(cfg["distribution"]),
                        cfg["master_seed"])
    value = opnorm_quantile(spec, cfg["trials"], cfg["q"], workers, deadline)
    return (["q", "trials", "value"], [[cfg["q"], cfg["trials"], value]], {},
            False, False)


def _run_distance_check(cfg, workers, deadline) -> Handler:
    spec = EnsembleSpec(cfg["n"], parse_distribution(cfg["distribution"]),
                        cfg["master_seed"])
    shift = _shift_from_config(cfg["shift"], cfg["n"])
    params = CompressibilityParams(cfg["delta"], cfg["rho"])
    res = invertibility_distance_check(spec, shift, params, cfg["epsilon"],
                                       cfg["trials"], cfg["confidence"],
                                       workers)
    cols = ["epsilon", "lhs_threshold", "trials", "lhs_successes", "lhs_p_hat",
            "lhs_ci_low", "lhs_ci_high", "rhs", "rhs_ci_high", "holds"]
    rows = [[res.epsilon, res.lhs_threshold, res.lhs.trials,
             res.lhs.successes, res.lhs.p_hat, res.lhs.ci_low,
             res.lhs.ci_high, res.rhs, res.rhs_ci_high, res.holds]]
    return cols, rows, {}, not res.holds, False


_HANDLERS: Dict[str, Callable[..., Handler]] = {
    "tail-sweep": _run_tail_sweep,
    "lcd": _run_lcd,
    "classify": _run_classify,
    "counterexample": _run_counterexample,
    "event-e": _run_event_e,
    "lattice": _run_lattice,
    "cover": _run_cover,
    "net": _run_net,
    "opnorm-quantile": _run_opnorm_quantile,
    "distance-check": _run_distance_check,
}


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _write_csv(path: str, cols: List[str], rows: Rows) -> None:
    lines = [",".join(cols)]
    lines.extend(",".join(_format_cell(v) for v in row) for row in rows)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def run(config: dict, workers: int = 1, out_dir: str = ".",
        seed_override: Optional[int] = None) -> int:
    """Validate, execute, and write outputs; returns the exit code."""
    diags = validate(config)
    if diags:
        for d in diags:
            print(f"config error: {d}", file=sys.stderr)
        return 1
    cfg = _resolve(config, seed_override)
    deadline = None
    budget = os.environ.get(BUDGET_ENV)
    if budget:
        try:
            seconds = float(budget)
        except ValueError:
            print(f"config error: {BUDGET_ENV}={budget!r} is not a number",
                  file=sys.stderr)
            return 1
        if seconds > 0:
            deadline = time.monotonic() + seconds

    started = time.monotonic()
    try:
        cols, rows, extra, failed, truncated = _HANDLERS[cfg["command"]](
            cfg, max(1, workers), deadline)
    except Exception as exc:  # noqa: BLE001 - boundary of the CLI
        print(f"error: {exc}", file=sys.stderr)
        return 1
    wall = time.monotonic() - started

    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, cfg["output_path"])
    _write_csv(base + ".csv", cols, rows)
    meta = {
        "command": cfg["command"],
        "config": cfg,
        "seed": cfg.get("master_seed"),
        "versions": {
            "svsmooth": svsmooth.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_seconds": wall,
        "truncated": truncated,
        "check_failed": failed,
        "outputs": {"csv": os.path.basename(base) + ".csv"},
    }
    with open(base + ".meta.json", "w") as fh:
        json.dump({**meta, **extra}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 2 if failed else 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="svsmooth",
        description="smallest-singular-value tail experiments")
    parser.add_argument("--config", required=True, help="JSON config path")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override master_seed")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    return run(config, args.workers, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
