"""Command-line front end.

Commands: entropy, markov-check, normalize, approx, verify, reduce,
phi, flatten, plot.  Exit codes: 0 success (all verifications within
tolerance), 2 parse error, 3 precondition violation, 4 non-convergence
or exhausted budget, 5 verification failure.  All numeric rendering is
fixed at 15 significant digits, so identical inputs produce
byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import approximation, coding, graphmap, normalform
from .entropy import entropy as compute_entropy
from .errors import (
    BudgetExceeded,
    FormatError,
    NonConvergence,
    PreconditionError,
    SlopeforgeError,
    VerificationError,
)
from .markov import is_markov, markov_closure
from .numeric import format_decimal, format_rational, parse_rational
from .pwmap import PwaMap, laps, parse_pwa, serialize_pwa
from .semiconjugacy import psi_from_tsv, psi_to_tsv

SIG = 15


@dataclass
class CommandResult:
    exit_code: int = 0
    artifacts: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _load_map(path: str) -> PwaMap:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}")
    return parse_pwa(text)


def _write(path: str, text: str, result: CommandResult) -> None:
    Path(path).write_text(text)
    result.artifacts.append(path)


def _serialize_decimal(f: PwaMap, sig: int = SIG) -> str:
    """PWA v1 with decimal literals (inexact rendering of the nodes)."""
    a, b = f.domain
    out = ["pwa 1", f"domain {format_rational(a)} {format_rational(b)}",
           f"nodes {len(f.nodes)}"]
    for n in f.nodes:
        def render(v):
            if v is None:
                return "-"
            if v.denominator == 1:
                return str(v.numerator)
            return format_decimal(v, sig)
        out.append(f"{format_decimal(n.x, sig) if n.x.denominator != 1 else n.x.numerator}"
                   f" {render(n.y_left)} {render(n.y_right)}")
    return "\n".join(str(x) for x in out) + "\n"


# -- commands ----------------------------------------------------------------

def cmd_entropy(args) -> CommandResult:
    f = _load_map(args.file)
    rep = compute_entropy(f, depth=args.depth,
                          markov_points=args.markov_points)
    res = CommandResult()
    res.summary["h_est"] = format_decimal(rep.h_est, SIG)
    if rep.spectral is not None:
        res.summary["h_spectral"] = format_decimal(rep.spectral, SIG)
        res.summary["agreed"] = "true" if rep.agreed else "false"
    res.summary["positive"] = "true" if rep.positive else "false"
    if rep.note:
        res.summary["note"] = rep.note
    if args.out:
        _write(args.out, rep.to_tsv(SIG), res)
    return res


def cmd_markov_check(args) -> CommandResult:
    f = _load_map(args.file)
    res = CommandResult()
    if args.points:
        pts = [parse_rational(tok) for tok in args.points.split(",")]
        chk = is_markov(f, sorted(pts))
        res.summary["markov"] = "true" if chk.ok else "false"
        if not chk.ok:
            res.summary["reason"] = chk.reason
            res.summary["witness"] = repr(chk.witness)
        return res
    try:
        s = markov_closure(f, max_points=args.budget)
    except BudgetExceeded:
        res.summary["markov"] = "false"
        res.summary["reason"] = f"closure exceeded {args.budget} points"
        return res
    res.summary["markov"] = "true"
    res.summary["points"] = ",".join(format_rational(p) for p in s.points)
    res.summary["beta"] = format_decimal(float(s.beta), SIG)
    return res


def cmd_normalize(args) -> CommandResult:
    f = _load_map(args.file)
    schedule = None
    if args.schedule:
        schedule = [int(t) for t in args.schedule.split(",")]
    trace = approximation.normalize(f, target=args.tol, schedule=schedule,
                                    grid_points=args.grid)
    res = CommandResult()
    psi = trace.final_psi
    strictly = all(psi.ys[i + 1] > psi.ys[i] for i in range(len(psi.ys) - 1))
    conjugacy = strictly and not psi.collapse_intervals and trace.converged
    res.summary["beta"] = format_decimal(trace.gamma, SIG)
    res.summary["residual"] = format_decimal(trace.residual.residual, SIG)
    res.summary["conjugacy"] = "true" if conjugacy else "false"
    res.summary["converged"] = "true" if trace.converged else "false"
    res.summary["markov_exact"] = "true" if trace.markov_exact else "false"
    res.summary["g_exact"] = "false"
    if args.out:
        _write(args.out, _serialize_decimal(trace.final_g.map), res)
    if args.psi:
        _write(args.psi, psi_to_tsv(psi, SIG), res)
    if args.trace:
        _write(args.trace, trace.to_tsv(SIG), res)
    if not trace.converged:
        res.exit_code = NonConvergence.exit_code
        res.summary["error"] = "cauchy criterion not met by schedule end"
    return res


def cmd_approx(args) -> CommandResult:
    f = _load_map(args.file)
    g, cfg = approximation.markov_approx(f, args.index,
                                         shadow_depth=args.shadow_depth)
    res = CommandResult()
    res.summary["index"] = str(cfg.n)
    res.summary["distance"] = format_rational(cfg.distance)
    res.summary["bound"] = format_rational(Fraction(1, cfg.n))
    res.summary["points"] = str(len(cfg.points))
    if args.out:
        _write(args.out, serialize_pwa(g), res)
    return res


def cmd_verify(args) -> CommandResult:
    f = _load_map(args.f)
    g = _load_map(args.g)
    psi = psi_from_tsv(Path(args.psi).read_text())
    rep = approximation.verify_semiconjugacy(f, g, psi,
                                             grid_points=args.grid,
                                             snap_to_table=True)
    res = CommandResult()
    res.summary["residual"] = format_decimal(rep.residual, SIG)
    res.summary["grid"] = str(rep.grid_points)
    res.summary["tolerance"] = format_decimal(args.tol, SIG)
    if rep.residual > args.tol:
        res.exit_code = VerificationError.exit_code
        res.summary["error"] = "residual above tolerance"
    return res


def cmd_reduce(args) -> CommandResult:
    f = _load_map(args.file)
    q = coding.psm_reduce(f, depth=args.depth)
    res = CommandResult()
    res.summary["collapse_count"] = str(len(q.collapse_intervals))
    res.summary["leak_count"] = str(q.leak_plateau_count)
    res.summary["depth"] = str(q.depth)
    if args.out:
        _write(args.out, serialize_pwa(q.fhat), res)
    if args.psi0:
        _write(args.psi0, serialize_pwa(q.psi0), res)
    if args.collapse:
        _write(args.collapse, q.to_tsv(), res)
    return res


def cmd_phi(args) -> CommandResult:
    f = _load_map(args.file)
    nf = normalform.normal_form(f, target=args.tol)
    res = CommandResult()
    res.summary["beta"] = format_decimal(nf.g.slope, SIG)
    res.summary["conjugacy"] = "true" if nf.conjugacy else "false"
    res.summary["evidence"] = nf.transitivity_evidence
    res.summary["residual"] = format_decimal(nf.residual.residual, SIG)
    res.summary["modality_in"] = str(nf.modality_in)
    res.summary["modality_out"] = str(nf.modality_out)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write(str(outdir / "g.pwa"), _serialize_decimal(nf.g.map), res)
    _write(str(outdir / "psi.tsv"), psi_to_tsv(nf.psi, SIG), res)
    evidence = [
        f"conjugacy={res.summary['conjugacy']}",
        f"evidence={nf.transitivity_evidence}",
        f"beta={res.summary['beta']}",
        f"residual={res.summary['residual']}",
        f"modality_in={nf.modality_in}",
        f"modality_out={nf.modality_out}",
    ]
    _write(str(outdir / "evidence.txt"), "\n".join(evidence) + "\n", res)
    return res


def cmd_flatten(args) -> CommandResult:
    gm = graphmap.parse_graph(Path(args.file).read_text())
    flat, chart = graphmap.flatten(gm)
    res = CommandResult()
    a, b = flat.domain
    res.summary["domain"] = f"{format_rational(a)}..{format_rational(b)}"
    res.summary["laps"] = str(len(laps(flat)))
    res.summary["edges"] = ",".join(chart.ordering)
    if args.out:
        _write(args.out, serialize_pwa(flat), res)
    return res


def cmd_plot(args) -> CommandResult:
    f = _load_map(args.file)
    a, b = f.domain
    width = b - a
    res = CommandResult()
    lines = []
    for k in range(args.samples + 1):
        x = a + width * Fraction(k, args.samples)
        i = f.node_index(x)
        if i >= 0:
            n = f.nodes[i]
            vals = [v for v in (n.y_left, n.y_right) if v is not None]
            if len(vals) == 2 and vals[0] == vals[1]:
                vals = vals[:1]
        else:
            vals = [f.eval(x)]
        for v in vals:
            lines.append(f"{format_decimal(x, SIG)}\t{format_decimal(v, SIG)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(args.out, text, res)
    else:
        res.summary["_stdout"] = text
    return res


# -- driver --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="slopeforge",
        description="Constant-slope normal forms for piecewise monotone "
                    "interval and graph maps",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("entropy", help="lap-count and spectral entropy report")
    sp.add_argument("file")
    sp.add_argument("--depth", type=int, default=12)
    sp.add_argument("--markov-points", type=int, default=512)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("markov-check", help="validate or search a Markov point set")
    sp.add_argument("file")
    sp.add_argument("--points", help="comma-separated rationals")
    sp.add_argument("--budget", type=int, default=4096)
    sp.set_defaults(func=cmd_markov_check)

    sp = sub.add_parser("normalize", help="semiconjugate to constant slope")
    sp.add_argument("file")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--schedule", help="comma-separated approximation indices")
    sp.add_argument("--grid", type=int, default=4096)
    sp.add_argument("--out")
    sp.add_argument("--psi")
    sp.add_argument("--trace")
    sp.set_defaults(func=cmd_normalize)

    sp = sub.add_parser("approx", help="Markov approximation within 1/n")
    sp.add_argument("file")
    sp.add_argument("--index", type=int, required=True)
    sp.add_argument("--shadow-depth", type=int, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("verify", help="check psi(f(x)) = g(psi(x)) from files")
    sp.add_argument("f")
    sp.add_argument("g")
    sp.add_argument("psi")
    sp.add_argument("--grid", type=int, default=4096)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("reduce", help="collapse equal-code intervals (PM to PSM)")
    sp.add_argument("file")
    sp.add_argument("--depth", type=int, default=16)
    sp.add_argument("--out")
    sp.add_argument("--psi0")
    sp.add_argument("--collapse")
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("phi", help="constant-slope normal form bundle")
    sp.add_argument("file")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--out-dir", default=".")
    sp.set_defaults(func=cmd_phi)

    sp = sub.add_parser("flatten", help="flatten a graph map to an interval map")
    sp.add_argument("file")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_flatten)

    sp = sub.add_parser("plot", help="sampled x, f(x) TSV with one-sided jumps")
    sp.add_argument("file")
    sp.add_argument("--samples", type=int, default=256)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plot)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except FormatError as exc:
        print(f"error=parse message={str(exc)!r}")
        return FormatError.exit_code
    except PreconditionError as exc:
        print(f"error=precondition message={str(exc)!r}")
        return PreconditionError.exit_code
    except (BudgetExceeded, NonConvergence) as exc:
        print(f"error=non-convergence message={str(exc)!r}")
        return BudgetExceeded.exit_code
    except VerificationError as exc:
        print(f"error=verification message={str(exc)!r}")
        return VerificationError.exit_code
    except SlopeforgeError as exc:
        print(f"error=failure message={str(exc)!r}")
        return SlopeforgeError.exit_code
    stdout_payload = result.summary.pop("_stdout", None)
    for key, value in result.summary.items():
        print(f"{key}={value}")
    for path in result.artifacts:
        print(f"artifact={path}")
    if stdout_payload is not None:
        sys.stdout.write(stdout_payload)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
