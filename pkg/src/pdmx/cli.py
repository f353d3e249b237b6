"""Command-line interface: ``pdmx <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import analytic, expr, io, lienard, numeric, plotting, problem
from .massmap import (
    DomainError,
    NumericError,
    PositivityError,
    admissibility,
    admissible_exponent,
    class_parameters,
    pct_map,
    residual,
)
from .ordering import (
    OrderingError,
    effective_potential,
    hermitize,
    is_hermitian,
    parse_scheme,
    validate,
)
from .quadrature import QuadratureError

log = logging.getLogger("pdmx")

EXIT_USAGE, EXIT_INCOMPATIBLE, EXIT_NUMERIC, EXIT_CHECK_FAILED = 1, 2, 3, 4

DEFAULTS = {
    "scheme": "case1",
    "mass": "const:m0=1",
    "potential": "harmonic:lambda1=0.5",
    "domain": "-12,12",
    "grid": "4096",
    "hbar": "1",
    "levels": "6",
    "format": "json",
}


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key = value")
                k, v = line.split("=", 1)
                out[k.strip().replace("-", "_")] = v.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    return out


def _settings(args):
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    merged = dict(DEFAULTS)
    merged.update(cfg)
    for k, v in vars(args).items():
        if v is not None:
            merged[k] = v
    return merged


def _run_config(s) -> problem.RunConfig:
    dom = problem.parse_domain(s["domain"])
    try:
        return problem.RunConfig(
            scheme=s["scheme"] if isinstance(s["scheme"], str) else s["scheme"][0],
            mass=s["mass"],
            potential=s["potential"],
            domain=(dom.lo, dom.hi),
            grid=int(s["grid"]),
            hbar=float(s["hbar"]),
            levels=int(s["levels"]),
            extrapolate=not s.get("no_extrapolate", False),
        )
    except ValueError as exc:
        if isinstance(exc, problem.ConfigError):
            raise
        raise problem.ConfigError(str(exc)) from None


def _emit(s, payload, table=None):
    """Write JSON (or CSV when requested and a table exists) to --out or stdout."""
    if s.get("format") == "csv" and table is not None:
        text = io.csv_text(*table)
    else:
        text = io.dumps(payload)
    out = s.get("out")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plot_dir(s):
    return s.get("plot")


# --- commands -----------------------------------------------------------------------


def cmd_ordering(s):
    try:
        sch = parse_scheme(s["scheme"])
    except OrderingError as exc:
        raise UsageError(str(exc)) from None
    problems = validate(sch)
    if problems:
        raise UsageError("; ".join(problems))
    mo = sch.moments
    her = hermitize(sch)
    payload = {
        "scheme": sch.to_json(),
        "moments": mo.as_dict(),
        "hermitian": is_hermitian(sch),
        "coefficients": {
            "hermitian": effective_potential(mo, "hermitian").as_dict(),
            "nonhermitian": effective_potential(mo, "nonhermitian").as_dict(),
        },
        "hermitization": {
            "eta": her.eta,
            "description": her.description,
            "scheme": her.scheme.to_json() if her.scheme else None,
        },
        "admissible_exponent": admissible_exponent(mo),
    }
    rows = [(k, v) for k, v in mo.as_dict().items()] + [("hermitian", payload["hermitian"])]
    _emit(s, payload, (["quantity", "value"], rows))
    return 0


def cmd_map(s):
    mass = problem.parse_mass(s["mass"])
    x0 = float(s["x0"]) if s.get("x0") is not None else None
    pmap = pct_map(mass, x0=x0, g0=float(s.get("g0") or 0.0))
    dom = problem.parse_domain(s["domain"])
    lo, hi = max(dom.lo, mass.domain.lo), min(dom.hi, mass.domain.hi)
    x = np.linspace(lo, hi, int(s.get("samples") or 201))
    x = x[(x > mass.domain.lo) & (x < mass.domain.hi)]
    g = pmap.g(x)
    g1, g2, g3 = pmap.derivatives(x)
    payload = {
        "mass": getattr(mass, "label", "custom"),
        "kind": mass.kind,
        "image": [pmap.image.lo, pmap.image.hi],
        "x0": pmap.x0,
        "g0": pmap.g0,
    }
    try:
        s_, C1, C2, C3 = class_parameters(mass, pmap)
        payload["class"] = {"s": s_, "C1": C1, "C2": C2, "C3": C3}
    except ValueError:
        payload["class"] = None
    if s.get("scheme_given"):
        sch = parse_scheme(s["scheme"])
        mo = sch.moments
        r = residual(mo, pmap, x)
        payload["reduction"] = {"scheme": sch.label or s["scheme"], "max_residual": float(np.max(np.abs(r)))}
        if payload["class"] is not None:
            adm = admissibility(mo, payload["class"]["s"])
            payload["reduction"].update(admissible=adm.admissible, r=adm.r)
    payload["samples"] = {"x": x, "g": g}
    _emit(s, payload, (["x", "g", "gprime", "gsecond", "gthird"], zip(x, g, g1, g2, g3)))
    if _plot_dir(s):
        plotting.plot_states(_plot_dir(s), "map", x, {"g": g}, title=payload["mass"])
    return 0


def cmd_solve_analytic(s):
    cfg = _run_config(s)
    prob = problem.build(cfg)
    sol = problem.solve_analytic(prob)
    rows = []
    for lv in sol.levels:
        row = lv.to_row()
        if lv.l_plus_half_integer is not None:
            row["l_plus_half_integer"] = lv.l_plus_half_integer
        rows.append(row)
    x = sol.x
    psis = [st.psi(x) for st in sol.states]
    payload = {
        "config": cfg.as_dict(),
        "levels": rows,
        "eigenfunction_kind": sol.states[0].kind,
        "weight_exponent": sol.states[0].weight_exponent,
        "reduction_residual": sol.reduction_residual,
        "exact": sol.reduction_residual <= 1e-8,
        "samples": {"x": x, "g": prob.pmap.g(x), "psi": psis},
    }
    header = ["x", "g", "weight"] + [f"psi_{lv.n}" for lv in sol.levels]
    table = zip(x, prob.pmap.g(x), sol.states[0].weight(x), *psis)
    _emit(s, payload, (header, table))
    if _plot_dir(s):
        plotting.plot_states(_plot_dir(s), "analytic", x, {f"psi_{lv.n}": p for lv, p in zip(sol.levels, psis)},
                             energies=[lv.energy for lv in sol.levels], potential=prob.V(x),
                             title=f"{prob.potential.label}, {cfg.mass}")
    if not payload["exact"]:
        log.warning("scheme does not reduce exactly on this mass (residual %.3e)", sol.reduction_residual)
    return 0


def cmd_solve_numeric(s):
    cfg = _run_config(s)
    prob = problem.build(cfg)
    res = problem.solve_numeric(prob)
    payload = {"config": cfg.as_dict(), "eigenvalues": res.eigenvalues, "diagnostics": res.diagnostics,
               "grid": res.meta.get("grid")}
    header = ["x"] + [f"psi_{n}" for n in range(len(res.eigenvalues))]
    _emit(s, payload, (header, zip(res.x, *res.eigenvectors)))
    if _plot_dir(s):
        step = max(1, res.x.size // 2000)
        xs = res.x[::step]
        plotting.plot_states(_plot_dir(s), "numeric", xs,
                             {f"psi_{n}": v[::step] for n, v in enumerate(res.eigenvectors)},
                             energies=list(res.eigenvalues), potential=prob.V(xs),
                             title=f"{prob.scheme.label}, {cfg.mass}")
    if not res.reliable:
        log.warning("boundary leakage above %.0e: enlarge the domain", numeric.LEAKAGE_TOL)
    return 0


def cmd_verify(s):
    schemes = s["scheme"] if isinstance(s["scheme"], list) else [x for x in s["scheme"].split(";") if x]
    cfg = _run_config({**s, "scheme": schemes[0]})
    report = problem.verify(cfg, schemes, float(s.get("rel_tol") or 1e-4))
    rows = []
    for r in report["schemes"]:
        for n, d in enumerate(r["vs_first"]["rel_diffs"]):
            a = r.get("vs_analytic", {}).get("rel_diffs", [None] * (n + 1))[n]
            rows.append((r["scheme"], n, r["eigenvalues"][n], d, "" if a is None else a))
    _emit(s, report, (["scheme", "n", "energy", "rel_diff_vs_first", "rel_diff_vs_analytic"], rows))
    if _plot_dir(s):
        plotting.plot_differences(_plot_dir(s), "verify", report["schemes"],
                                  "vs_analytic" if report["analytic"] is not None else "vs_first")
    return 0 if report["pass"] else EXIT_CHECK_FAILED


def cmd_lienard(s):
    dom = problem.parse_domain(s["domain"])
    try:
        sys_ = lienard.from_exprs(s["f"], s["h"], dom)
    except expr.ExprError as exc:
        raise UsageError(str(exc)) from None
    x0 = float(s.get("x0") or 0.0)
    d = lienard.build(sys_, x0=x0, g0=float(s.get("g0") or 0.0))
    c = lienard.classify(d)
    iso = {}
    fam_params = c.params if c.family != "generic" else {}
    iso["eight_param"] = lienard.isochronicity_check(
        sys_, "eight_param", {"lambda1": fam_params.get("lambda1", 0.0)}, d).max_residual
    if c.family == "V2":
        iso["three_param"] = lienard.isochronicity_check(sys_, "three_param", fam_params, d).max_residual
    payload = {
        "f": s["f"],
        "h": s["h"],
        "domain": [dom.lo, dom.hi],
        "x0": x0,
        "mass_params": lienard.mass_parameters(sys_, x0),
        **c.as_dict(),
        "isochronicity_residuals": iso,
    }
    rows = [("family", c.family)] + list(c.params.items()) + [("constant", c.constant)]
    _emit(s, payload, (["quantity", "value"], rows))
    if _plot_dir(s):
        x = np.linspace(dom.lo, dom.hi, 401)[1:-1]
        plotting.plot_states(_plot_dir(s), "lienard", x, {"m": d.mass(x), "V": d.V(x)}, title=f"f={s['f']}, h={s['h']}")
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; command-line flags take precedence")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--plot", metavar="DIR", help="also write PNG figures and .dat plot data to DIR")
    common.add_argument("-v", "--verbose", action="store_true")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--mass", help="const:m0=.. | exp:a1=..,a2=.. | powerlaw:b1=..,b2=..,C=.. | "
                                    "class:s=..,C1=..,C2=..,C3=.. | step:left=..,right=..,at=.. | expression in x")
    run.add_argument("--potential", help="harmonic:lambda1=..,lambda2=.. | isotonic:lambda1=..,lambda3=.. | custom:<expr in g>")
    run.add_argument("--domain", help="lo,hi")
    run.add_argument("--grid", type=int, help="grid points (default 4096)")
    run.add_argument("--hbar", type=float)
    run.add_argument("--levels", type=int, help="number of levels (default 6)")

    p = Parser(prog="pdmx", description="Position-dependent-mass Schroedinger solver and checker.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    a = sub.add_parser("ordering", parents=[common], help="moments and coefficients of an ordering scheme")
    a.add_argument("--scheme", help="catalog name, name:k=v,..., inline JSON or a JSON file")

    a = sub.add_parser("map", parents=[common], help="coordinate map g(x) of a mass")
    a.add_argument("--mass")
    a.add_argument("--domain")
    a.add_argument("--scheme", help="also report the reduction residual for this scheme")
    a.add_argument("--x0", type=float, help="anchor with g(x0) = g0 (default: natural antiderivative)")
    a.add_argument("--g0", type=float)
    a.add_argument("--samples", type=int)

    for name, helptext in (("solve-analytic", "closed-form levels and eigenfunctions"),
                           ("solve-numeric", "finite-difference levels with diagnostics")):
        a = sub.add_parser(name, parents=[common, run], help=helptext)
        a.add_argument("--scheme")
        if name == "solve-numeric":
            a.add_argument("--no-extrapolate", action="store_true", default=None,
                           help="report raw eigenvalues instead of the h, h/2 extrapolation")

    a = sub.add_parser("verify", parents=[common, run], help="compare spectra across schemes")
    a.add_argument("--scheme", action="append", help="repeat for each scheme to compare")
    a.add_argument("--rel-tol", type=float)
    a.add_argument("--no-extrapolate", action="store_true", default=None)

    a = sub.add_parser("lienard", parents=[common], help="classify a quadratic Lienard system")
    a.add_argument("--f", required=True, help="f(x) expression")
    a.add_argument("--h", required=True, help="h(x) expression")
    a.add_argument("--domain")
    a.add_argument("--x0", type=float)
    a.add_argument("--g0", type=float)
    return p


COMMANDS = {
    "ordering": cmd_ordering,
    "map": cmd_map,
    "solve-analytic": cmd_solve_analytic,
    "solve-numeric": cmd_solve_numeric,
    "verify": cmd_verify,
    "lienard": cmd_lienard,
}


def _glue_values(argv):
    # let "--domain -2,2" through: argparse would read "-2,2" as an option
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--domain", "--x0", "--g0"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_glue_values(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="pdmx: %(levelname)s: %(message)s")
    try:
        s = _settings(args)
        s["scheme_given"] = getattr(args, "scheme", None) is not None
        return COMMANDS[args.command](s)
    except (UsageError, OrderingError, expr.ExprError) as exc:
        _fail(exc)
        return EXIT_USAGE
    except (problem.IncompatibleError, analytic.CompatibilityError, PositivityError, DomainError,
            analytic.SpectrumError) as exc:
        _fail(exc)
        return EXIT_INCOMPATIBLE
    except problem.ConfigError as exc:
        _fail(exc)
        return EXIT_USAGE
    except (NumericError, QuadratureError, np.linalg.LinAlgError) as exc:
        _fail(exc)
        return EXIT_NUMERIC


def _fail(exc):
    print(f"pdmx: error: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
