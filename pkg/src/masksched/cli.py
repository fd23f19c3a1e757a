"""Command-line entry points.

Exit codes: 0 success, 1 invariant or acceptance failure, 2 usage error,
3 external-denoiser protocol error.
"""

from __future__ import annotations

import argparse
import sys

from .denoise import OracleParams
from .errors import DomainError, MaskschedError, ProtocolError
from .harness import ExperimentSpec, gen_task, make_session, run_experiment
from .metrics import accounting, annotate_mhco, mhco_per_step, mhco_run, verify_trace
from .sched import ScheduleConfig, run_decode
from .traceio import read_trace, write_trace

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_PROTOCOL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="masksched")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one decode and write its trace")
    run_p.add_argument("--strategy", choices=["standard", "block", "wavefront"], required=True)
    run_p.add_argument("--n", type=int, default=128)
    run_p.add_argument("--t", type=int, default=32)
    run_p.add_argument("--f", type=int, default=8)
    run_p.add_argument("--r", type=int, default=2)
    run_p.add_argument("--b", type=int, default=8)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--denoiser", choices=["oracle", "uniform", "external"], default="oracle")
    run_p.add_argument("--external-cmd", default=None, help="adapter command for --denoiser external")
    run_p.add_argument("--trace", required=True, help="output trace path")
    run_p.add_argument("--variant-expand", choices=["setdef", "incremental"], default="setdef")
    run_p.add_argument("--variant-nout", choices=["prestep", "poststep"], default="poststep")
    run_p.add_argument("--full-scores", action="store_true")
    run_p.add_argument("--vocab", type=int, default=64)
    run_p.add_argument("--seg-min", type=int, default=None,
                       help="default: min(3, n)")
    run_p.add_argument("--seg-max", type=int, default=None,
                       help="default: min(20, n)")
    run_p.add_argument("--oracle-base", type=float, default=0.1)
    run_p.add_argument("--oracle-gain", type=float, default=0.8)
    run_p.add_argument("--oracle-window", type=int, default=2)
    run_p.add_argument("--oracle-noise", type=float, default=0.05)
    run_p.add_argument("--oracle-discount", type=float, default=0.25)

    sweep_p = sub.add_parser("sweep", help="run an experiment grid from a JSON spec")
    sweep_p.add_argument("--spec", required=True)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--workers", type=int, default=1)

    mhco_p = sub.add_parser("mhco", help="print per-step and mean priority violations")
    mhco_p.add_argument("--trace", required=True)
    mhco_p.add_argument("--r", type=int, default=None,
                        help="override the radius recorded in the trace")
    mhco_p.add_argument("--variant", choices=["prestep", "poststep"], default=None,
                        help="override the neighborhood variant recorded in the trace")

    verify_p = sub.add_parser("verify", help="replay a trace and report invariant violations")
    verify_p.add_argument("--trace", required=True)
    return parser


def _cmd_run(args) -> int:
    cfg = ScheduleConfig(
        n=args.n,
        steps=args.t,
        f=args.f,
        r=args.r,
        b=args.b,
        strategy=args.strategy,
        seed=args.seed,
        expand_variant=args.variant_expand,
        nout_variant=args.variant_nout,
        full_scores=args.full_scores,
    )
    cfg.validate()
    seg_max = min(20, args.n) if args.seg_max is None else args.seg_max
    seg_min = min(3, seg_max) if args.seg_min is None else args.seg_min
    task = gen_task(args.n, args.vocab, seg_min, seg_max, args.seed)
    params = OracleParams(
        base=args.oracle_base,
        gain=args.oracle_gain,
        window=args.oracle_window,
        noise_amp=args.oracle_noise,
        segment_discount=args.oracle_discount,
    )
    session = make_session(
        args.denoiser, args.seed, args.vocab, task, params, args.external_cmd
    )
    try:
        trace = run_decode(cfg, session)
    finally:
        session.close()
    if args.denoiser == "oracle":
        trace.task = task.to_dict()
    annotate_mhco(trace)
    write_trace(trace, args.trace)
    metric = accounting(trace)
    print(
        f"status={trace.status} passes={metric.forward_passes} "
        f"updates={metric.token_updates} "
        f"mean_mhco={metric.mean_mhco} exact_match={metric.exact_match}"
    )
    if trace.status == "aborted":
        print(f"aborted: {trace.error}", file=sys.stderr)
        return EXIT_PROTOCOL
    return EXIT_VIOLATION if metric.violations else EXIT_OK


def _cmd_sweep(args) -> int:
    spec = ExperimentSpec.from_json_file(args.spec)
    rows, _ = run_experiment(spec, out_dir=args.out, workers=args.workers)
    bad = [row for row in rows if row.violations or row.status not in ("completed",)]
    print(f"{len(rows)} runs, {len(bad)} with violations or failures; results in {args.out}")
    return EXIT_VIOLATION if bad else EXIT_OK


def _cmd_mhco(args) -> int:
    trace = read_trace(args.trace)
    for step, value in mhco_per_step(trace, r=args.r, variant=args.variant):
        print(f"step {step}: {value:.6f}")
    print(f"mean: {mhco_run(trace, r=args.r, variant=args.variant):.6f}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    trace = read_trace(args.trace)
    problems = verify_trace(trace)
    for problem in problems:
        print(problem)
    if problems:
        print(f"{len(problems)} invariant violation(s)")
        return EXIT_VIOLATION
    print("ok")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "mhco": _cmd_mhco,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (DomainError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaskschedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
