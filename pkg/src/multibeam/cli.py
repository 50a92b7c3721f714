"""Command-line front end: figure tables, inequality audits, POVM optimization.

Subcommands
-----------
figure          theta scan table (V, analytic D, optional numeric D columns)
lambda-example  fringe contrasts of the three-beam lambda family, before and
                after an environment marks the third beam
check           randomized audit of every inequality plus the measurement chains
optimize        maximize a which-way knowledge measure from a JSON config

Data goes to stdout (or --out), diagnostics to stderr.  Exit codes:
0 success, 1 computational failure or violated bound, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import beams, detector, inequalities, numerics, optimizer
from .errors import InfeasibleStart, MultibeamError


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_table(header: list[str], rows: list[list], fmt: str, out_path: str | None) -> None:
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        _emit(json.dumps(payload, indent=2) + "\n", out_path)
        return
    lines = [",".join(header)]
    lines += [",".join(_fmt(cell) for cell in row) for row in rows]
    _emit("\n".join(lines) + "\n", out_path)


# ---------------------------------------------------------------------------
# figure
# ---------------------------------------------------------------------------

def cmd_figure(args) -> int:
    rng = numerics.Rng(args.seed)
    try:
        rows = optimizer.theta_scan(
            grid=args.grid,
            optimize=not args.no_optimize,
            rng=rng,
            restarts=args.restarts,
            max_elements=args.max_elements,
            include_tilde=args.tilde,
        )
    except MultibeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    header = ["theta", "V", "D_analytic"]
    if not args.no_optimize:
        header.append("D_numeric")
        if args.tilde:
            header.append("D_tilde")
    header.append("duality_sum")
    table = []
    for r in rows:
        row = [r.theta, r.visibility, r.d_analytic]
        if not args.no_optimize:
            row.append(r.d_numeric)
            if args.tilde:
                row.append(r.d_tilde)
        row.append(r.duality_sum)
        table.append(row)
    _emit_table(header, table, args.format, args.out)
    return 0


# ---------------------------------------------------------------------------
# lambda-example
# ---------------------------------------------------------------------------

def cmd_lambda_example(args) -> int:
    lam = args.lam
    if not 0.0 <= lam < 1.0:
        print(f"error: lambda must be in [0, 1), got {lam}", file=sys.stderr)
        return 2
    state = beams.lambda_example(lam)
    marked = beams.lambda_decohered(lam)
    v_trad = beams.traditional_visibility(state).value
    v_trad_after = beams.traditional_visibility(marked).value
    header = [
        "lambda",
        "V_trad",
        "V_trad_decohered",
        "V_gen",
        "V_gen_decohered",
        "predictability",
        "V_trad_increased",
    ]
    row = [
        lam,
        v_trad,
        v_trad_after,
        beams.generalized_visibility(state),
        beams.generalized_visibility(marked),
        beams.generalized_predictability(state),
        int(v_trad_after > v_trad),
    ]
    _emit_table(header, [row], args.format, args.out)
    return 0


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _chain_audit(n: int, trials: int, rng: numerics.Rng) -> tuple[float, int]:
    """Random (joint, PVM) chain checks; returns (min slack, count)."""
    min_slack = math.inf
    count = 0
    for t in range(trials):
        child = rng.derive(1_000_000 + t)
        rank = 1 if t % 2 == 0 else n
        beam = beams.BeamState(numerics.random_density(n, rank, child))
        dirs = child.normal(size=(n, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        joint = detector.JointState(beam, detector.DetectorStates.from_bloch(dirs))
        obs = child.complex_normal((2, 2))
        povm = detector.pvm_from_observable(obs + obs.conj().T)
        for rep in detector.chain_check(joint, povm):
            count += 1
            min_slack = min(min_slack, rep.slack)
    return float(min_slack), count


def cmd_check(args) -> int:
    rng = numerics.Rng(args.seed)
    audit = inequalities.audit_random(args.n, args.trials, rng)
    chain_min, chain_count = _chain_audit(args.n, args.trials, rng)
    min_slack = min(audit.min_slack, chain_min)
    if args.inject_invalid:
        # harness self-test hook: force a visible violation
        min_slack = min(min_slack, -1.0)
    violation = max(0.0, -min_slack)
    header = ["key", "value"]
    rows = [
        ["beams", args.n],
        ["trials", args.trials],
        ["state_checks", audit.checks_run],
        ["state_min_slack", audit.min_slack],
        ["chain_checks", chain_count],
        ["chain_min_slack", chain_min],
        ["saturations", sum(audit.saturations.values())],
        ["max_violation", violation],
    ]
    if args.format == "json":
        payload = {str(k): v for k, v in rows}
        payload["saturations_by_check"] = audit.saturations
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        _emit_table(header, rows, "csv", args.out)
    if violation > inequalities.SATURATION_TOL:
        print(f"violation beyond tolerance: {violation:.3e}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

@dataclass
class OptimizeConfig:
    beam: beams.BeamState
    det: detector.DetectorStates
    measure: str
    max_elements: int
    restarts: int


def _complex_entry(pair) -> complex:
    if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
        raise ValueError(f"complex entries are [re, im] pairs, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ValueError(f"unknown keys in {where}: {sorted(unknown)}")


def parse_optimize_config(raw: dict) -> OptimizeConfig:
    _reject_unknown(raw, {"beam", "detector", "measure", "max_elements", "restarts"}, "config")
    beam_cfg = raw.get("beam")
    det_cfg = raw.get("detector")
    if not isinstance(beam_cfg, dict) or not isinstance(det_cfg, dict):
        raise ValueError("config needs 'beam' and 'detector' objects")
    _reject_unknown(beam_cfg, {"rho"}, "beam")
    _reject_unknown(det_cfg, {"bloch", "vectors"}, "detector")
    rho = np.array([[_complex_entry(c) for c in row] for row in beam_cfg["rho"]])
    beam = beams.new_beam_state(rho)
    if "bloch" in det_cfg:
        det = detector.DetectorStates.from_bloch(np.asarray(det_cfg["bloch"], dtype=float))
    elif "vectors" in det_cfg:
        vecs = np.array([[_complex_entry(c) for c in v] for v in det_cfg["vectors"]])
        det = detector.DetectorStates(vecs)
    else:
        raise ValueError("detector needs 'bloch' or 'vectors'")
    measure = raw.get("measure", "K")
    if measure not in ("K", "Ktilde"):
        raise ValueError(f"measure must be 'K' or 'Ktilde', got {measure!r}")
    return OptimizeConfig(
        beam=beam,
        det=det,
        measure=measure,
        max_elements=int(raw.get("max_elements", 4)),
        restarts=int(raw.get("restarts", 32)),
    )


def _povm_bloch_pairs(povm: detector.Povm) -> list[dict]:
    pairs = []
    for a in povm.elements:
        weight = float(np.trace(a).real) / 2.0
        if weight <= 1e-14:
            pairs.append({"alpha": weight, "bloch": [0.0, 0.0, 0.0]})
            continue
        v = [float(np.trace(a @ s).real) / (2.0 * weight) for s in detector.PAULI]
        pairs.append({"alpha": weight, "bloch": v})
    return pairs


def cmd_optimize(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        cfg = parse_optimize_config(raw)
    except (OSError, ValueError, MultibeamError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2
    joint = detector.JointState(cfg.beam, cfg.det)
    try:
        result = optimizer.distinguishability_numeric(
            joint,
            cfg.measure,
            max_elements=cfg.max_elements,
            restarts=cfg.restarts,
            rng=numerics.Rng(args.seed),
        )
    except InfeasibleStart as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    payload = {
        "measure": result.measure,
        "value": result.value,
        "converged": result.converged,
        "restarts_used": result.restarts_used,
        "history": result.history,
        "elements": _povm_bloch_pairs(result.best_povm),
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multibeam",
        description="Multibeam fringe visibility and which-way knowledge toolkit",
    )
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    fig = sub.add_parser("figure", help="theta scan of V and D")
    fig.add_argument("--grid", type=int, default=200)
    fig.add_argument("--no-optimize", action="store_true", help="closed forms only")
    fig.add_argument("--tilde", action="store_true", help="add numeric Dtilde column")
    fig.add_argument("--restarts", type=int, default=8)
    fig.add_argument("--max-elements", type=int, default=4)
    fig.set_defaults(func=cmd_figure)

    lam = sub.add_parser("lambda-example", help="three-beam decoherence contrasts")
    lam.add_argument("--lam", type=float, required=True, help="family parameter in [0, 1)")
    lam.set_defaults(func=cmd_lambda_example)

    chk = sub.add_parser("check", help="randomized inequality audit")
    chk.add_argument("--n", type=int, default=3, help="beam count")
    chk.add_argument("--trials", type=int, default=100)
    chk.add_argument(
        "--inject-invalid",
        action="store_true",
        help="self-test hook: force a violation and a nonzero exit",
    )
    chk.set_defaults(func=cmd_check)

    opt = sub.add_parser("optimize", help="maximize a which-way knowledge measure")
    opt.add_argument("config", help="JSON config path")
    opt.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except MultibeamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
