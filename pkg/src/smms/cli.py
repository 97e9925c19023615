"""Command line front end: smms <scenario> --config <path>.

SMMS_THREADS is honored before the numerics stack loads, so BLAS
thread pools get capped too.  Exit codes: 0 all verdicts hold, 1
runtime failure, 2 a verdict failed, 3 hypothesis certification
failed, 4 configuration error.
"""

import argparse
import os
import sys


def _cap_threads():
    env = os.environ.get("SMMS_THREADS", "").strip()
    if not env:
        return
    try:
        threads = str(max(1, int(env)))
    except ValueError:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, threads)


def _build_parser(scenarios, formats):
    parser = argparse.ArgumentParser(
        prog="smms",
        description="verification scenarios for weighted-volume and "
                    "boundary-curvature inequalities")
    parser.add_argument("scenario", choices=list(scenarios),
                        help="scenario to run; must match the config's "
                             "scenario field when that is set")
    parser.add_argument("--config", required=True,
                        help="path to a JSON scenario config")
    parser.add_argument("--strict", action="store_true",
                        help="escalate hypothesis and resolution warnings "
                             "to failing exit codes")
    parser.add_argument("--permissive", action="store_true",
                        help="ignore unknown config keys instead of "
                             "rejecting them")
    parser.add_argument("--out", default=None,
                        help="write the report here instead of stdout")
    parser.add_argument("--format", default=None, choices=list(formats),
                        help="report format (default: the config's "
                             "output.format, else json)")
    return parser


def main(argv=None):
    _cap_threads()
    from .config import FORMATS, SCENARIOS, ConfigError, load_config
    from .runner import ScenarioError, emit_report, exit_code, run_scenario

    parser = _build_parser(SCENARIOS, FORMATS)
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, strict=not args.permissive,
                             scenario=args.scenario)
    except ConfigError as e:
        print(f"smms: {e}", file=sys.stderr)
        return 4
    try:
        report = run_scenario(config)
    except ScenarioError as e:
        print(f"smms: {e}", file=sys.stderr)
        return 1

    fmt = args.format or config.output_format
    payload = emit_report(report, format=fmt)
    out_path = args.out or config.output_path
    if out_path:
        try:
            with open(out_path, "wb") as fh:
                fh.write(payload)
        except OSError as e:
            print(f"smms: cannot write report: {e}", file=sys.stderr)
            return 1
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()

    code = exit_code(report, strict=args.strict)
    if code != 0:
        reason = "hypothesis certification failed" if code == 3 \
            else "a verdict failed"
        print(f"smms: {reason} (exit {code})", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
