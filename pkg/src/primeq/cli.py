"""Command-line entry point: ``primeq <command> ...``.

Failures print one line ``error: <kind>: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

__all__ = ["main", "build_parser"]

log = logging.getLogger("primeq")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _positive_int(text):
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    from .verification import SUITES

    p = _Parser(prog="primeq", description="Primitive-equations simulator and verification suite.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("run", help="integrate a run described by a TOML or JSON config")
    r.add_argument("config")
    r.add_argument("--out", default="out")

    s = sub.add_parser("spectrum", help="smallest eigenvalues of the hydrostatic Stokes operator")
    s.add_argument("--bc", default="neumann")
    s.add_argument("--h", type=float, default=1.0)
    s.add_argument("--count", type=_positive_int, default=10)
    s.add_argument("--res", type=_positive_int, default=16)
    s.add_argument("--out", default=None)

    pr = sub.add_parser("project", help="apply the hydrostatic Helmholtz projection to a snapshot")
    pr.add_argument("input")
    pr.add_argument("output")

    n = sub.add_parser("norms", help="evaluate norms of a snapshot")
    n.add_argument("input")
    n.add_argument("--norm", action="append", required=True,
                   help="e.g. lp:p=4, sobolev:s=1, besov:s=0.5,p=4,q=4 (repeatable)")
    n.add_argument("--out", default=None)

    v = sub.add_parser("verify", help="run a named verification suite")
    v.add_argument("suite", choices=sorted(SUITES))
    v.add_argument("--res", type=_positive_int, default=None)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", default=None)

    g = sub.add_parser("roughdata", help="write seeded rough Besov-critical initial data")
    g.add_argument("--p", type=float, default=4.0)
    g.add_argument("--q", type=float, default=4.0)
    g.add_argument("--theta", type=float, default=0.25)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--res", type=_positive_int, default=16)
    g.add_argument("--bc", default="neumann")
    g.add_argument("--h", type=float, default=1.0)
    g.add_argument("--out", default="out")
    return p


def _spec(bc, h, res):
    from .domain import BCVariant, DomainSpec

    try:
        return DomainSpec(h=h, nx=res, ny=res, nz=res, bc=BCVariant.parse(bc))
    except ValueError as exc:
        raise CliError("argument", str(exc)) from None


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in r))
    return "\n".join(lines) + "\n"


def _emit(text: str, out_dir, name: str):
    if out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    print(out / name)


def _load_field(path):
    from .fields import VelocityField
    from .domain import make_domain
    from .io import SnapshotError, read_snapshot

    try:
        header, values = read_snapshot(path)
    except FileNotFoundError:
        raise CliError("io", f"snapshot not found: {path}") from None
    except SnapshotError as exc:
        raise CliError("snapshot", str(exc)) from None
    return header, VelocityField.from_grid(make_domain(header.spec), values)


def cmd_run(args) -> int:
    from .config import ConfigError, load_config
    from .stepper import BlowupError, run

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise CliError("config", str(exc)) from None
    try:
        rec = run(cfg, out_dir=args.out)
    except BlowupError as exc:
        raise CliError("blowup", str(exc)) from None
    except ValueError as exc:
        raise CliError("config", str(exc)) from None
    e = rec.series("energy")
    print(f"ok t_end={rec.times[-1]:g} snapshots={len(rec.snapshots)} energy0={e[0]:.6g} energy={e[-1]:.6g}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .hydrostatic import spectrum
    from .domain import make_domain

    d = make_domain(_spec(args.bc, args.h, args.res))
    try:
        rep = spectrum(d, args.count)
    except ValueError as exc:
        raise CliError("argument", str(exc)) from None
    _emit(rep.to_csv(), args.out, "spectrum.csv")
    return EXIT_OK


def cmd_project(args) -> int:
    from .hydrostatic import divergence_defect, project
    from .io import write_snapshot

    header, v = _load_field(args.input)
    pv = project(v)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    write_snapshot(args.output, header, pv.grid)
    print(f"ok defect_before={divergence_defect(v):.3e} defect_after={divergence_defect(pv):.3e}")
    return EXIT_OK


def cmd_norms(args) -> int:
    from .norms import NormSpec, UnsupportedNormError, norm

    _, v = _load_field(args.input)
    rows = []
    for text in args.norm:
        try:
            spec = NormSpec.parse(text)
            rows.append((spec.label, float(norm(v, spec))))
        except UnsupportedNormError as exc:
            raise CliError("unsupported", str(exc)) from None
        except ValueError as exc:
            raise CliError("argument", f"{text}: {exc}") from None
    _emit(_csv_text(["norm", "value"], rows), args.out, "norms.csv")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_suite

    checks, elapsed = run_suite(args.suite, args.res, args.seed)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"suite={args.suite} checks={len(checks)} failed={len(failed)} seconds={elapsed:.1f}")
    if args.out is not None:
        rows = [(c.name, float(c.value), c.target, int(c.passed)) for c in checks]
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{args.suite}.csv").write_text(_csv_text(["check", "value", "target", "passed"], rows))
    return EXIT_FAILED if failed else EXIT_OK


def cmd_roughdata(args) -> int:
    from .analysis import generate_rough_data
    from .domain import make_domain
    from .io import SnapshotHeader, write_snapshot

    if not 0 < args.theta <= 1:
        raise CliError("argument", "theta must lie in (0, 1]")
    if args.p <= 1 or args.q <= 1:
        raise CliError("argument", "p and q must exceed 1")
    d = make_domain(_spec(args.bc, args.h, args.res))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        v = generate_rough_data(d, args.p, args.q, args.theta, args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra = {"p": args.p, "q": args.q, "theta": args.theta, "seed": args.seed}
    path = out / f"rough_p{args.p:g}_q{args.q:g}_theta{args.theta:g}_seed{args.seed}.hydro"
    write_snapshot(path, SnapshotHeader(d.spec, extra=extra), v.grid)
    print(path)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "spectrum": cmd_spectrum,
    "project": cmd_project,
    "norms": cmd_norms,
    "verify": cmd_verify,
    "roughdata": cmd_roughdata,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise CliError("usage", "missing command; choose from " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
