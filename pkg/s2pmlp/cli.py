import argparse
import sys
import time
from typing import List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from s2pmlp import config
from s2pmlp.bench import BENCHES, DEFAULT_DELTAS, run_bench, run_precision_sweep, run_scaling
from s2pmlp.errors import S2PError
from s2pmlp.logging import get_logger, init_logging
from s2pmlp.netsim import frozen_clock
from s2pmlp.reporting import canonical_json, emit_report
from s2pmlp.trainer import run_predict, run_train

logger = get_logger("cli")

# Summaries go to stderr so a report on stdout stays parseable
CONSOLE = Console(stderr=True)


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")


def _name_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_split_options(parser: argparse.ArgumentParser):
    parser.add_argument("--rho", type=int, default=config.DEFAULT_RHO, help="split parameter")
    parser.add_argument("--verify-rounds", type=int, default=config.DEFAULT_VERIFY_ROUNDS,
                        help="verification repetitions per masked product")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    parser.add_argument("--mask-scale", type=float, default=config.DEFAULT_MASK_SCALE,
                        help="half-width of the uniform masks")
    parser.add_argument("--wall-clock", action="store_true",
                        help="measure phase times (reports are no longer byte-identical)")


def _add_output(parser: argparse.ArgumentParser):
    parser.add_argument("--out", default=None, help="report path; stdout when omitted")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="s2pmlp", description="Secure two-party MLP toolkit")
    parser.add_argument("--log-level", default=None, help="overrides S2PMLP_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="benchmark one protocol against its plaintext oracle")
    bench.add_argument("--protocol", required=True, choices=sorted(BENCHES))
    bench.add_argument("--dim", type=int, default=10)
    bench.add_argument("--delta", type=int, default=4, help="exponent range of the inputs")
    bench.add_argument("--net", choices=["lan", "wan"], default="lan")
    _add_split_options(bench)
    _add_output(bench)

    sweep = sub.add_parser("sweep", help="precision sweep over exponent ranges")
    sweep.add_argument("--protocol", required=True, choices=sorted(BENCHES))
    sweep.add_argument("--dim", type=int, default=50)
    sweep.add_argument("--deltas", type=_int_list, default=list(DEFAULT_DELTAS))
    _add_split_options(sweep)
    _add_output(sweep)

    scale = sub.add_parser("scale", help="fit traffic against matrix area")
    scale.add_argument("--protocol", required=True, choices=sorted(BENCHES))
    scale.add_argument("--dims", type=_int_list, default=[10, 20, 30, 40, 50])
    _add_split_options(scale)
    _add_output(scale)

    train = sub.add_parser("train", help="secure training next to the plaintext reference")
    train.add_argument("--data", required=True)
    train.add_argument("--label-col", required=True)
    train.add_argument("--hidden", type=int, default=16)
    train.add_argument("--batch", type=int, default=16)
    train.add_argument("--lr", type=float, default=0.1)
    train.add_argument("--epochs", type=int, default=5)
    train.add_argument("--test-size", type=float, default=0.2)
    train.add_argument("--shuffle", action="store_true")
    train.add_argument("--large", action="store_true", help="hidden 128, batch 128, lr 0.01")
    train.add_argument("--out", default=None, help="directory for report.json and model shares")
    _add_split_options(train)

    predict = sub.add_parser("predict", help="secure inference from saved model shares")
    predict.add_argument("--data", required=True)
    predict.add_argument("--label-col", default=None,
                         help="label column; accuracy is skipped when omitted")
    predict.add_argument("--classes", type=_name_list, default=None,
                         help="comma separated class names in model output order")
    predict.add_argument("--model-a", required=True)
    predict.add_argument("--model-b", required=True)
    _add_split_options(predict)
    _add_output(predict)

    serve = sub.add_parser("serve", help="run the client node service")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _split_kwargs(args) -> dict:
    return {
        "rho": args.rho,
        "verify_rounds": args.verify_rounds,
        "seed": args.seed,
        "mask_scale": args.mask_scale,
        "clock": time.perf_counter if args.wall_clock else frozen_clock,
    }


def _write(report, path: Optional[str]):
    if path is None:
        sys.stdout.write(canonical_json(report))
    else:
        emit_report(report, path)


def _bench_command(args):
    report = run_bench(args.protocol, args.dim, delta=args.delta, **_split_kwargs(args))
    table = Table(title=f"{report.protocol} {args.dim}x{args.dim}")
    for column in ("rounds", "bytes", "analytic bytes", f"{args.net} seconds", "mre"):
        table.add_column(column)
    table.add_row(
        str(report.metrics.rounds),
        str(report.metrics.bytes_sent),
        str(report.analytic.bytes),
        f"{report.simulated[args.net]:.6f}",
        f"{report.mre:.3e}",
    )
    CONSOLE.print(table)
    _write(report, args.out)


def _sweep_command(args):
    reports = run_precision_sweep(args.protocol, args.dim, args.deltas, **_split_kwargs(args))
    table = Table(title=f"{args.protocol} precision")
    table.add_column("delta")
    table.add_column("mre")
    table.add_column("nre")
    for report in reports:
        table.add_row(str(report.delta), f"{report.mre:.3e}", f"{report.nre:.3e}")
    CONSOLE.print(table)
    _write(reports, args.out)


def _scale_command(args):
    report = run_scaling(args.protocol, args.dims, **_split_kwargs(args))
    CONSOLE.print(f"[bold]{report.protocol}[/] bytes ≈ {report.slope:.1f}·area + {report.intercept:.1f} "
                  f"(R² = {report.r_squared:.6f})")
    _write(report, args.out)


def _train_command(args):
    report = run_train(
        args.data,
        args.label_col,
        hidden=args.hidden,
        batch=args.batch,
        lr=args.lr,
        epochs=args.epochs,
        out_dir=args.out,
        test_size=args.test_size,
        shuffle=args.shuffle,
        large=args.large,
        **_split_kwargs(args),
    )
    table = Table(title=f"training on {report.dataset}")
    for column in ("epoch", "loss", "plain loss", "divergence", "rounds", "bytes"):
        table.add_column(column)
    for epoch in report.history:
        table.add_row(
            str(epoch.epoch),
            f"{epoch.loss:.6f}",
            f"{epoch.plain_loss:.6f}",
            f"{epoch.divergence:.3e}",
            str(epoch.metrics.rounds),
            str(epoch.metrics.bytes_sent),
        )
    CONSOLE.print(table)
    CONSOLE.print(f"[bold]Secure accuracy:[/] {report.secure_accuracy:.4f}")
    CONSOLE.print(f"[bold]Plaintext accuracy:[/] {report.plain_accuracy:.4f}")
    _write(report, None if args.out is None else f"{args.out}/report.json")


def _predict_command(args):
    report = run_predict(
        args.data, args.label_col, args.model_a, args.model_b, classes=args.classes, **_split_kwargs(args)
    )
    accuracy = "n/a" if report.accuracy is None else f"{report.accuracy:.4f}"
    CONSOLE.print(f"[bold]Rows:[/] {report.rows}  [bold]Accuracy:[/] {accuracy}")
    _write(report, args.out)


def _serve_command(args):
    import uvicorn

    uvicorn.run("s2pmlp.main:app", host=args.host, port=args.port)


COMMANDS = {
    "bench": _bench_command,
    "sweep": _sweep_command,
    "scale": _scale_command,
    "train": _train_command,
    "predict": _predict_command,
    "serve": _serve_command,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    init_logging(args.log_level, stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except (S2PError, ValidationError) as exc:
        logger.error("command_failed", command=args.command, error=str(exc), error_type=type(exc).__name__)
        CONSOLE.print(f"[bold red]error:[/] {exc}")
        return 2
    return 0
