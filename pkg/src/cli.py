import argparse
import logging
import sys
from pathlib import Path

import pandas as pd
from pydantic import ValidationError

from src.conf.config import config
from src.entity.models import Analysis, BoundaryCondition, Estimate, MatrixTarget
from src.repository import reports as repository_reports
from src.schemas.sweep import SweepSpec, parse_config
from src.services import harness, newmark, spectra
from src.services.exceptions import IgaSpectraError

logger = logging.getLogger("iga_spectra")

EXIT_ERROR = 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _selector(text: str) -> int | str:
    return text if text in ("min", "max", "all") else int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iga-spectra",
                                     description="Spectral study of IGA collocation for the acoustic wave equation")
    parser.add_argument("--log-level", default=config.LOG_LEVEL, help="Logging level (default from LOG_LEVEL)")
    parser.add_argument("-q", "--quiet", action="store_true", help="Hide progress bars")
    commands = parser.add_subparsers(dest="command", required=True)

    sweep = commands.add_parser("sweep", help="Run a sweep described by a JSON file")
    sweep.add_argument("config", type=Path)
    sweep.add_argument("--workers", type=int, default=None, help="Worker processes (default IGA_SPECTRA_THREADS)")
    sweep.add_argument("--out", default=None, help="Output directory, overrides out_dir of the file")

    single = commands.add_parser("single", help="Run one configuration")
    single.add_argument("--target", choices=[t.value for t in MatrixTarget], default=MatrixTarget.stiffness.value)
    single.add_argument("--bc", choices=[b.value for b in BoundaryCondition], default=BoundaryCondition.dirichlet.value)
    single.add_argument("--p", type=int, required=True)
    single.add_argument("--h-den", type=int, required=True)
    single.add_argument("--k", type=_selector, default="min")
    single.add_argument("--dt", type=float, default=0.1)
    single.add_argument("--beta", type=float, default=0.0)
    single.add_argument("--gamma", type=float, default=config.DEFAULT_GAMMA)
    single.add_argument("--c0", type=float, default=config.DEFAULT_C0)
    single.add_argument("--analyses", default="cond", help="Comma separated subset of cond,eig,spy")
    single.add_argument("--out", default=config.OUTPUT_DIR)

    converge = commands.add_parser("converge", help="Time-step convergence on the standing wave")
    converge.add_argument("--p", type=int, required=True)
    converge.add_argument("--h-den", type=int, required=True)
    converge.add_argument("--k", type=_selector, default="max")
    converge.add_argument("--dt-seq", type=_floats, required=True)
    converge.add_argument("--T", type=float, default=1.0)
    converge.add_argument("--beta", type=float, default=0.25)
    converge.add_argument("--gamma", type=float, default=config.DEFAULT_GAMMA)
    converge.add_argument("--c0", type=float, default=config.DEFAULT_C0)
    converge.add_argument("--out", default=None, help="Directory for convergence.csv and trajectories")

    bounds = commands.add_parser("bounds", help="Evaluate Galerkin condition number bounds")
    bounds.add_argument("--estimate", choices=[e.value for e in Estimate], required=True)
    bounds.add_argument("--p", type=_ints, required=True)
    bounds.add_argument("--h-den", type=_ints, required=True)

    serve = commands.add_parser("serve", help="Start the HTTP API")
    serve.add_argument("--host", default=config.API_HOST)
    serve.add_argument("--port", type=int, default=config.API_PORT)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def cmd_sweep(args) -> int:
    spec = parse_config(args.config)
    if args.out:
        spec = spec.model_copy(update={"out_dir": args.out})
    ledger = harness.run_sweep(spec, workers=args.workers, progress=not args.quiet)
    bundle = harness.emit_report(ledger, spec)
    if bundle.summary:
        print(bundle.summary)
    return 0


def cmd_single(args) -> int:
    spec = SweepSpec(p=[args.p], h_den=[args.h_den], k=[args.k], dt=[args.dt], beta=[args.beta],
                     gamma=args.gamma, c0=args.c0, bc=[args.bc], target=[args.target],
                     analyses=[Analysis(a) for a in args.analyses.split(",") if a], out_dir=args.out)
    ledger = harness.run_sweep(spec, workers=1, progress=False)
    for entry in ledger.entries:
        print(f"{entry.label}: {entry.status}" + (f" ({entry.error})" if entry.error else ""))
    print(f"report written to {ledger.csv_path}")
    return EXIT_ERROR if ledger.failed else 0


def cmd_converge(args) -> int:
    k = args.k if isinstance(args.k, int) else {"min": 1, "max": args.p - 1}.get(args.k, args.p - 1)
    records = newmark.convergence_study(args.p, args.h_den, k, args.dt_seq, T=args.T, beta=args.beta,
                                        gamma=args.gamma, c0=args.c0, trajectory_dir=args.out)
    frame = pd.DataFrame([vars(r) for r in records])
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.6e}"))
    if args.out:
        repository_reports.write_bundle(Path(args.out) / "convergence.csv", frame)
    return 0


def cmd_bounds(args) -> int:
    curves = spectra.bound_series(args.estimate, args.p, [1.0 / n for n in args.h_den])
    frame = pd.DataFrame([{"estimate": c.estimate.value, "p": c.p, "h_den": round(1.0 / c.h), "value": c.value,
                           "regime": c.regime} for c in curves])
    print(frame.to_csv(index=False, float_format=config.CSV_FLOAT_FORMAT, lineterminator="\n"), end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("main:app", host=args.host, port=args.port, log_level=config.LOG_LEVEL.lower())
    return 0


COMMANDS = {"sweep": cmd_sweep, "single": cmd_single, "converge": cmd_converge, "bounds": cmd_bounds,
            "serve": cmd_serve}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (IgaSpectraError, ValidationError) as err:
        logger.error("%s", err)
        return EXIT_ERROR


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
