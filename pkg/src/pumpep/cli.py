"""Command-line front end: ``pumpep {spectrum,ep,dst,oracle,audit}``.

Exit codes: 0 success, 2 usage, 3 numerical failure, 4 no exceptional point,
5 oracle mismatch.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import io
import json
import math
import os
import re
import sys
import tempfile
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from pumpep import __version__
from pumpep.core import (
    ModelParams,
    derive_rates,
    load_config,
    default_params,
    stationary_exact,
    stationary_closed_form,
    stationary_residuals,
)
from pumpep.errors import DomainError, NoEPError, RankDeficiencyError, SingularSystemError, StepUnderflowError
from pumpep.svgplot import line_plot

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_NO_EP, EXIT_ORACLE = 0, 2, 3, 4, 5

_NUMERIC_ERRORS = (
    ArithmeticError,
    FloatingPointError,
    StepUnderflowError,
    SingularSystemError,
    RankDeficiencyError,
    np.linalg.LinAlgError,
)


def parse_range(spec: str) -> np.ndarray:
    """``lo:hi:count`` with inclusive endpoints and count >= 1."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"range must be lo:hi:count, got {spec!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {spec!r}: {exc}") from None
    if count < 1:
        raise argparse.ArgumentTypeError("range count must be >= 1")
    if count == 1:
        if lo != hi:
            raise argparse.ArgumentTypeError("a single-point range needs lo == hi")
        return np.array([lo])
    return np.linspace(lo, hi, count)


def _interval(spec: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in spec.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"interval must be lo:hi, got {spec!r}") from None
    return lo, hi


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def csv_text(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(out: Path, args: argparse.Namespace, params: ModelParams, grids: dict, outputs: list[str]) -> None:
    manifest = {
        "subcommand": args.command,
        "params": asdict(params),
        "grids": grids,
        "outputs": outputs,
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    atomic_write(Path(str(out) + ".manifest.json"), json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def emit_csv(args, params: ModelParams, header: str, rows, grids: dict, out_path=None) -> None:
    text = csv_text(header, rows)
    out_path = out_path or args.out
    if out_path:
        atomic_write(out_path, text)
        outputs = [str(out_path)] + ([args.svg] if getattr(args, "svg", None) else [])
        write_manifest(Path(out_path), args, params, grids, outputs)
    else:
        sys.stdout.write(text)


def resolve_params(args: argparse.Namespace) -> ModelParams:
    """Built-in defaults, then the config file, then explicit flags."""
    p = default_params()
    if args.config:
        p = load_config(args.config, p)
    overrides = {
        "gamma_a": args.gamma_a,
        "gamma_ph": args.gamma_ph,
        "gamma_D": args.gamma_d,
        "gamma_P": args.gamma_p,
        "gamma_cor": args.gamma_cor,
        "omega_R": args.omega_r,
        "n_mol": args.n_mol,
        "source": args.source,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(p, **overrides)


def _add_model_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("model parameters (units of omega)")
    g.add_argument("--config", help="flat key = value parameter file")
    g.add_argument("--gamma-a", type=float)
    g.add_argument("--gamma-ph", type=float)
    g.add_argument("--gamma-d", type=float)
    g.add_argument("--gamma-p", type=float)
    g.add_argument("--gamma-cor", type=float)
    g.add_argument("--omega-r", type=float)
    g.add_argument("--n-mol", type=int)
    g.add_argument("--source", choices=("unscaled", "collective"), help="spontaneous source scaling")


def _add_output_flags(sp: argparse.ArgumentParser, svg: bool = True) -> None:
    sp.add_argument("--out", help="CSV output path (default: standard output)")
    if svg:
        sp.add_argument("--svg", help="also render a line plot to this SVG file")


def cmd_spectrum(args) -> int:
    from pumpep.spectrum import SPECTRUM_HEADER, spectrum_rows, spectrum_sweep, track_branches

    p = resolve_params(args)
    grid = args.d0
    tracked = track_branches(spectrum_sweep(p, grid, args.pump_mode))
    rows = spectrum_rows(tracked)
    emit_csv(args, p, SPECTRUM_HEADER, rows, {"d0": _grid_desc(grid), "pump_mode": args.pump_mode})
    if args.svg:
        d = tracked.d0
        series = [(f"Re lambda{k}", d, tracked.branch(k).real) for k in (1, 2, 3)]
        series += [(f"Im lambda{k}", d, tracked.branch(k).imag) for k in (1, 2, 3)]
        atomic_write(args.svg, line_plot(series, f"spectrum, gamma_cor={p.gamma_cor:g}", "D0", "lambda / omega"))
    n_amb = sum(tracked.ambiguous)
    if n_amb:
        print(f"note: {n_amb} grid interval(s) with tied branch assignment", file=sys.stderr)
    return EXIT_OK


def cmd_ep(args) -> int:
    from pumpep.ep import LOCUS_HEADER, SPLITTING_HEADER, ep_locus, locate_ep, splitting_curve

    p = resolve_params(args)
    search = args.search
    if args.splitting is not None:
        rows = splitting_curve(p, args.splitting, args.pump_mode)
        emit_csv(args, p, SPLITTING_HEADER, [(r.d0, r.dim, r.dre) for r in rows],
                 {"d0": _grid_desc(args.splitting), "pump_mode": args.pump_mode})
        if args.svg:
            d = [r.d0 for r in rows]
            atomic_write(args.svg, line_plot(
                [("|Im l2 - Im l3|", d, [r.dim for r in rows]), ("|Re l2 - Re l3|", d, [r.dre for r in rows])],
                "branch 2/3 splitting", "D0", "splitting / omega"))
        return EXIT_OK
    if args.locus is not None:
        rows = ep_locus(p, args.locus, search, args.pump_mode)
        emit_csv(args, p, LOCUS_HEADER,
                 [(r.gamma_cor, r.d0_ep, r.gamma_p_ep, r.overlap_ep, r.bracket_width) for r in rows],
                 {"gamma_cor": _grid_desc(args.locus), "search": list(search), "pump_mode": args.pump_mode})
        for r in rows:
            if r.status != "ep":
                print(f"warning: gamma_cor={r.gamma_cor!r}: {r.status}", file=sys.stderr)
        if args.svg:
            atomic_write(args.svg, line_plot(
                [("D0 at EP", [r.gamma_cor for r in rows], [r.d0_ep for r in rows])],
                "exceptional-point locus", "gamma_cor / omega", "D0_ep"))
        return EXIT_OK
    try:
        r = locate_ep(p, search, args.pump_mode)
    except NoEPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_EP
    lines = [
        f"gamma_cor    {p.gamma_cor!r}",
        f"d0_ep        {r.d0_ep!r}",
        f"gamma_p_ep   {r.gamma_p_ep!r}",
        f"lambda_ep    {r.lambda_ep.real!r}{r.lambda_ep.imag:+.3e}j",
        f"overlap_ep   {r.overlap_ep!r}",
        f"splitting    {r.splitting!r}",
        f"bracket      {r.bracket_width!r}",
        f"status       {r.status}",
    ]
    print("\n".join(lines))
    if not r.is_ep:
        print(f"error: eigenvalues coalesce at D0={r.d0_ep!r} but overlap {r.overlap_ep:.6f} < 0.999 "
              f"(diabolic-suspect) in [{search[0]!r}, {search[1]!r}]", file=sys.stderr)
        return EXIT_NO_EP
    return EXIT_OK


def cmd_dst(args) -> int:
    from pumpep.integrator import dst_curve

    p = resolve_params(args)
    rows = dst_curve(p, args.ratio)
    emit_csv(args, p, "pump_ratio,D_st,D_0,converged",
             [(r.pump_ratio, r.d_st, r.d0, r.converged) for r in rows], {"pump_ratio": _grid_desc(args.ratio)})
    for r in rows:
        if not r.converged:
            print(f"warning: pump_ratio={r.pump_ratio!r} did not converge (residual {r.residual:.3e})",
                  file=sys.stderr)
    if args.svg:
        x = [r.pump_ratio for r in rows]
        atomic_write(args.svg, line_plot([("D_st", x, [r.d_st for r in rows]), ("D_0", x, [r.d0 for r in rows])],
                                         "stationary inversion", "gamma_P / gamma_D", "D"))
    return EXIT_OK


def cmd_oracle(args) -> int:
    from pumpep.oracle import REPORT_HEADER, canonical_dissipator, isolated_params, verify_dissipator

    name = canonical_dissipator(args.dissipator)
    p = isolated_params(name, args.rate)
    rep = verify_dissipator(p, name, n_max=args.n_max)
    rows = [(c.dissipator, c.observable, c.fitted_rate, c.analytic_rate, c.rel_err) for c in rep.rows()]
    text = REPORT_HEADER + "\n" + "".join(
        f"{d},{o},{_fmt(f)},{_fmt(a)},{_fmt(e)}\n" for d, o, f, a, e in rows
    )
    if args.out:
        atomic_write(args.out, text)
        write_manifest(Path(args.out), args, p, {"n_max": args.n_max, "dissipator": name}, [args.out])
    else:
        sys.stdout.write(text)
    print(rep.summary(), file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_ORACLE


AUDIT_HEADER = "d0,source,n_st,phi_st,s_st,res_n,res_phi,res_s,phi_relation,s_relation"


def audit_rows(p: ModelParams, d0_values) -> list[tuple]:
    """Closed-form and exact stationary triples with residuals and forced-relation errors.

    Relation columns are relative deviations of phi_st from
    gamma_a n_st / (sqrt(N) Omega_R) and of s_st from
    2 gamma_a D0 n_st / (2 gamma_sigma + gamma_cor).
    """
    rows = []
    for d0 in d0_values:
        q = p.with_d0(float(d0))
        gs = derive_rates(q).gamma_sigma
        triples = []
        try:
            triples.append(stationary_closed_form(q, d0))
        except ZeroDivisionError:
            pass
        triples.append(stationary_exact(q, d0))
        for t in triples:
            res = stationary_residuals(q, t, d0)
            phi_ref = q.gamma_a * t.n_st / q.collective_coupling if q.collective_coupling else 0.0
            s_ref = 2 * q.gamma_a * d0 * t.n_st / (2 * gs + q.gamma_cor)
            rows.append((float(d0), t.source, t.n_st, t.phi_st, t.s_st, *res,
                         _rel(t.phi_st, phi_ref), _rel(t.s_st, s_ref)))
    return rows


def _rel(x: float, ref: float) -> float:
    if x == ref:
        return 0.0
    return abs(x - ref) / max(abs(x), abs(ref))


def cmd_audit(args) -> int:
    p = resolve_params(args)
    d0_values = args.d0 if args.d0 is not None else [derive_rates(p).d0]
    rows = audit_rows(p, d0_values)
    emit_csv(args, p, AUDIT_HEADER, rows, {"d0": _grid_desc(d0_values)})
    print(f"stationary audit (source={p.source}, gamma_cor={p.gamma_cor!r})", file=sys.stderr)
    for r in rows:
        print(f"  D0={r[0]!r:<22} {r[1]:<15} n={r[2]:.6e} phi={r[3]:.6e} s={r[4]:.6e} "
              f"|res|={math.hypot(*r[5:8]):.3e} rel(phi)={r[8]:.2e} rel(s)={r[9]:.2e}", file=sys.stderr)
    return EXIT_OK


def _grid_desc(grid) -> dict:
    g = [float(v) for v in grid]
    return {"lo": g[0], "hi": g[-1], "count": len(g)}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pumpep", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="branch-tracked eigenvalue sweep over D0")
    _add_model_flags(sp)
    sp.add_argument("--d0", type=parse_range, default=parse_range("-1:0:2001"), help="lo:hi:count")
    sp.add_argument("--pump-mode", choices=("coupled", "frozen"), default="coupled")
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("ep", help="locate the exceptional point, its locus, or the splitting curve")
    _add_model_flags(sp)
    sp.add_argument("--locus", type=parse_range, help="gamma_cor grid lo:hi:count")
    sp.add_argument("--splitting", type=parse_range, help="D0 grid lo:hi:count")
    sp.add_argument("--search", type=_interval, default=(-1 + 1e-6, -1e-6), help="D0 interval lo:hi")
    sp.add_argument("--pump-mode", choices=("coupled", "frozen"), default="coupled")
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_ep)

    sp = sub.add_parser("dst", help="stationary inversion versus pump ratio")
    _add_model_flags(sp)
    sp.add_argument("--ratio", type=parse_range, default=parse_range("0:2:41"), help="gamma_P/gamma_D lo:hi:count")
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_dst)

    sp = sub.add_parser("oracle", help="verify one dissipator against its analytic rates")
    sp.add_argument("--dissipator", required=True, help="cavity|ph|decay|pump|cor")
    sp.add_argument("--rate", type=float, required=True)
    sp.add_argument("--n-max", type=int, default=3)
    _add_output_flags(sp, svg=False)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("audit", help="closed-form versus exact stationary values")
    _add_model_flags(sp)
    sp.add_argument("--d0", type=parse_range, help="D0 grid lo:hi:count (default: D0 of the parameters)")
    _add_output_flags(sp, svg=False)
    sp.set_defaults(func=cmd_audit)
    return ap


_NEG_VALUE = re.compile(r"^-[\d.]")


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse takes "-1:0:11" for an option; rewrite "--opt -1:0:11" as "--opt=-1:0:11"
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEG_VALUE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = ap.parse_args(_glue_negative_values(argv))
    try:
        return args.func(args)
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
