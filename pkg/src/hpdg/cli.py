"""Command-line interface: ``solve``, ``study`` and ``verify``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from hpdg.errors import InvalidArgument
from hpdg.export import write_samples_csv, write_solution_csv, write_solution_json
from hpdg.harness import StudyConfig, run_single, run_study
from hpdg.problem import FIELD_CATALOG
from hpdg.report import write_report
from hpdg.solutions import SOLUTION_CATALOG
from hpdg.verification import run_verification_suite

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("hpdg")


def parse_int_list(text: str) -> tuple[int, ...]:
    """Accept ``a..b`` (inclusive), ``a,b,c`` or a single integer."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise InvalidArgument(f"empty range {text!r}")
            return tuple(range(lo, hi + 1))
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise InvalidArgument(f"cannot parse integer list {text!r}") from None


def load_config_file(path) -> dict:
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    elif path.suffix.lower() == ".json":
        raw = json.loads(path.read_text(encoding="utf-8"))
    else:
        raise InvalidArgument(f"config must be .toml or .json, got {path.name!r}")
    # allow a [study] table or a flat file
    raw = raw.get("study", raw)
    for key in ("degrees", "meshes"):
        if isinstance(raw.get(key), str):
            raw[key] = parse_int_list(raw[key])
    return raw


_OVERRIDES = ("dim", "field", "solution", "refine", "degrees", "meshes", "gamma", "x0",
              "wavenumber", "quad_offset", "out")


def build_config(args: argparse.Namespace) -> StudyConfig:
    """File values first, then any flag given on the command line."""
    values = load_config_file(args.config) if args.config else {}
    for key in _OVERRIDES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    values.setdefault("refine", "h")
    if values["refine"] == "p":
        values.setdefault("solution", "singular-gamma")
        values.setdefault("degrees", tuple(range(1, 9)))
        values.setdefault("meshes", (4,) if values.get("dim", 1) == 1 else (2,))
    return StudyConfig.from_mapping(values).validate()


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML or JSON file mirroring the study configuration")
    parser.add_argument("--dim", type=int)
    parser.add_argument("--field", choices=sorted(FIELD_CATALOG))
    parser.add_argument("--solution", choices=list(SOLUTION_CATALOG))
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--x0", type=float)
    parser.add_argument("--wavenumber", type=float)
    parser.add_argument("--quad-offset", dest="quad_offset", type=int)
    parser.add_argument("--out")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hpdg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="single solve; exports the solution")
    _common(solve)
    solve.add_argument("--degree", type=int, default=None)
    solve.add_argument("--cells", type=parse_int_list, default=None, help="cells per axis, e.g. 8 or 8,4")
    solve.add_argument("--format", choices=("json", "csv"), default="json")
    solve.add_argument("--samples", type=int, default=33, help="grid points per axis for the sample export")

    study = sub.add_parser("study", help="h- or p-convergence study")
    _common(study)
    study.add_argument("--refine", choices=("h", "p"))
    study.add_argument("--degrees", type=parse_int_list)
    study.add_argument("--meshes", type=parse_int_list)

    verify = sub.add_parser("verify", help="run the verification suite")
    verify.add_argument("--degrees", type=parse_int_list, default=(1, 2, 3))
    verify.add_argument("--inverse-degrees", dest="inverse_degrees", type=parse_int_list, default=None)
    verify.add_argument("--field", choices=sorted(FIELD_CATALOG), default="constant")
    verify.add_argument("--quad-offset", dest="quad_offset", type=int, default=2)
    verify.add_argument("--out", help="write the JSON summary here")
    return parser


def _cmd_solve(args) -> int:
    args.refine, args.degrees, args.meshes = "h", None, None
    config = build_config(args)
    p = args.degree if args.degree is not None else config.degrees[0]
    cells = args.cells if args.cells else config.meshes[0]
    if isinstance(cells, tuple) and len(cells) == 1:
        cells = cells[0]
    u_n, err, _ = run_single(config, p, cells)
    out = Path(config.out or "solution")
    stem = out.with_suffix("") if out.suffix else out / "solution"
    meta = {"field": config.field, "solution": config.solution, "quad_offset": config.quad_offset,
            "dg_error": err.dg_error, "l2_error": err.l2}
    if args.format == "json":
        path = write_solution_json(u_n, stem.with_suffix(".json"), **meta)
    else:
        path = write_solution_csv(u_n, stem.with_suffix(".csv"))
    samples = write_samples_csv(u_n, stem.parent / (stem.name + "_samples.csv"), args.samples)
    print(f"dg_error={err.dg_error:.6e} l2_error={err.l2:.6e}")
    print(f"wrote {path} and {samples}")
    return 0


def _cmd_study(args) -> int:
    config = build_config(args)
    report = run_study(config)
    for r in report.rows:
        rate = r.rate if isinstance(r.rate, str) or r.rate is None else f"{r.rate:.3f}"
        print(f"{r.param:.6g}\tdg={r.dg_error:.4e}\tl2={r.l2_error:.4e}\trate={rate}")
    if report.slope is not None:
        print(f"fitted slope vs (p+1): {report.slope:.3f}  predictions: {report.predictions}")
    if config.out:
        csv_path, json_path = write_report(report, config.out)
        print(f"wrote {csv_path} and {json_path}")
    if report.failure:
        print(f"study aborted: {report.failure}", file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args) -> int:
    report = run_verification_suite(degrees=args.degrees, field_name=args.field, quad_offset=args.quad_offset,
                                    inverse_degrees=args.inverse_degrees)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<40} {c.value:.3e}  ({c.tolerance})")
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    return 0 if report.passed else 1


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    handlers = {"solve": _cmd_solve, "study": _cmd_study, "verify": _cmd_verify}
    try:
        return handlers[args.command](args)
    except (InvalidArgument, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
