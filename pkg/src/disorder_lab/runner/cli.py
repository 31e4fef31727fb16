"""``disorder-lab <experiment> --config FILE`` command line entry point."""

from __future__ import annotations

import argparse
import sys

from ..errors import CalibrationError, IntegrityError, LabError, SingularityError
from .config import FORMATS, load_config
from .experiments import REGISTRY, lookup, run_experiment
from .report import emit_report

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INTEGRITY = 0, 1, 2, 3


def build_parser():
    ap = argparse.ArgumentParser(
        prog="disorder-lab",
        description="Run one named experiment and write its report.",
        epilog="experiments: " + ", ".join(sorted(REGISTRY)),
    )
    ap.add_argument("experiment")
    ap.add_argument("--config", required=True, metavar="FILE", help="flat key = value parameter file")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--out", metavar="PATH", help="report destination (default: stdout)")
    ap.add_argument("--format", choices=FORMATS, help="report format (default: json)")
    ap.add_argument("--threads", type=int, help="worker threads for prime-sum grids")
    ap.add_argument("--phase-guard-bits", type=int, dest="phase_guard_bits", help="extra phase precision bits")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        exp = lookup(args.experiment)
        config = load_config(
            args.config, args.experiment, exp.schema, seed=args.seed, output_path=args.out, format=args.format,
            threads=args.threads, phase_guard_bits=args.phase_guard_bits,
        )
        report = run_experiment(config)
        data = emit_report(report, config.format)
        if config.output_path:
            with open(config.output_path, "wb") as fh:
                fh.write(data)
        else:
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
    except (IntegrityError, CalibrationError, SingularityError) as exc:
        print(f"disorder-lab: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (LabError, OSError) as exc:
        print(f"disorder-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    failed = [r.label for r in report.records if not r.passed]
    status = "all checks passed" if not failed else f"{len(failed)} check(s) failed: {'; '.join(failed)}"
    print(f"disorder-lab {config.experiment}: {status} ({report.runtime_seconds:.1f} s)", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
