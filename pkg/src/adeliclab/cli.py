"""Batch front end: one executable, subcommands per experiment.

Every command reads its knobs from flags (or a JSON config file that
flags override), prints either a single value or CSV rows to stdout,
and with --out writes PREFIX.csv, PREFIX.json, and for the report-style
commands PREFIX.png.  Errors of any kind leave a machine-readable JSON
object on stdout and exit status 2; reruns with equal configuration
reproduce the CSV output byte for byte.
"""

import argparse
import json
import math
import re
import sys
from fractions import Fraction

import numpy as np

from .bundles import GramNorm
from .chivol import (
    chi_volume_closed_form,
    chi_volume_error_trace,
    concave_transform,
    gateaux_derivative,
    gateaux_fd,
)
from .curves import FqTCurve, QCurve, curve_from_json
from .dynamics import (
    Endomorphism,
    canonical_height,
    canonical_metric_family,
    tate_grid_potentials,
    tate_local_potential,
)
from .equidist import (
    convergence_report,
    essential_minimum_estimate,
    small_sequence_generate,
)
from .families import (
    lipschitz_test_bank,
    named_family,
    radon_example,
    random_test_family,
)
from .measures import radon_nikodym_check
from .metrics import GridSpec, fs_envelope_table, fs_quotient
from .utils import dump_json, format_rational, parse_rational

_DEFAULT_SEED = 20260818


class CLIError(Exception):
    """Configuration problem surfaced as an error JSON, exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


_TOKEN = re.compile(r"\s*(\d+|[A-Za-z]+|\^|\*|\+|\-|/)")


def parse_poly(text: str, var: str = "z"):
    """Ascending coefficients of a sparse polynomial like '-z^3+2*z-1/2'.

    Terms are separated by single +/- signs; a term is an optional
    rational coefficient, an optional '*', and an optional power of the
    variable.  Exact rationals only, no parentheses, no floats.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip():
                raise ValueError(
                    f"could not read a polynomial near {text[pos:][:12]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    if not tokens:
        raise ValueError("empty polynomial")
    n = len(tokens)

    def fail():
        raise ValueError(f"could not parse the polynomial {text!r}")

    def term(j):
        coeff = None
        power = 0
        if j < n and tokens[j].isdigit():
            value = int(tokens[j])
            j += 1
            if j < n and tokens[j] == "/":
                if j + 1 < n and tokens[j + 1].isdigit() and int(tokens[j + 1]):
                    coeff = Fraction(value, int(tokens[j + 1]))
                    j += 2
                else:
                    fail()
            else:
                coeff = Fraction(value)
            if j < n and tokens[j] == "*":
                j += 1
                if not (j < n and tokens[j].isalpha()):
                    fail()
        if j < n and tokens[j].isalpha():
            if tokens[j] != var:
                fail()
            j += 1
            power = 1
            if j < n and tokens[j] == "^":
                if j + 1 < n and tokens[j + 1].isdigit():
                    power = int(tokens[j + 1])
                    j += 2
                else:
                    fail()
        if coeff is None and power == 0:
            fail()
        return j, (Fraction(1) if coeff is None else coeff), power

    coeffs = {}
    i = 0
    first = True
    while i < n:
        sign = 1
        if tokens[i] in "+-":
            if not first and tokens[i] == "+":
                pass
            sign = -1 if tokens[i] == "-" else 1
            i += 1
        elif not first:
            fail()
        if i < n and tokens[i] in "+-":
            fail()
        i, c, p = term(i)
        coeffs[p] = coeffs.get(p, Fraction(0)) + sign * c
        first = False
    degree = max(coeffs)
    out = [coeffs.get(k, Fraction(0)) for k in range(degree + 1)]
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    if out == [Fraction(0)]:
        raise ValueError("the polynomial is zero")
    return out


def _int_coeffs(coeffs, what):
    for c in coeffs:
        if c.denominator != 1:
            raise CLIError(f"{what} needs integer coefficients")
    return [int(c) for c in coeffs]


def _parse_curve(text):
    if text in (None, "Q"):
        return QCurve()
    return curve_from_json(json.loads(text))


def _parse_grid(text):
    if text is None:
        return None
    parts = text.split("x")
    if len(parts) != 3:
        raise CLIError("grid spec looks like 64x64x4")
    return GridSpec(int(parts[0]), int(parts[1]), float(parts[2]))


def _parse_places(text):
    if text is None:
        return None
    keys = {k.strip() for k in text.split(",") if k.strip()}
    if not keys:
        raise CLIError("empty place list")
    return lambda place: place.key in keys


def _parse_map(args) -> Endomorphism:
    if args.map is None:
        raise CLIError("this command needs --map")
    num = parse_poly(args.map)
    den = parse_poly(args.den) if args.den else [Fraction(1)]
    alpha = parse_rational(args.alpha) if args.alpha else 1
    return Endomorphism(num, den, alpha_scale=alpha)


def _seed(args) -> int:
    return _DEFAULT_SEED if args.seed is None else args.seed


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit(args, header, rows, summary, figure=None, lead: str = ""):
    """CSV/JSON/figure plumbing shared by the table-producing commands."""
    text = ",".join(header) + "\n"
    text += "".join(",".join(_cell(v) for v in row) + "\n" for row in rows)
    if not args.out:
        return lead + text
    with open(args.out + ".csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    dump_json(summary, args.out + ".json")
    if figure is not None and not args.no_figures:
        from . import plots

        getattr(plots, figure)(rows, args.out + ".png")
    return lead


def cmd_product_formula(args) -> str:
    curve = _parse_curve(args.curve)
    if args.value is None:
        raise CLIError("product-formula needs --value")
    if isinstance(curve, FqTCurve):
        num = _int_coeffs(parse_poly(args.value, var="T"), "a function-field value")
        den = _int_coeffs(parse_poly(args.den, var="T"), "a function-field value") \
            if args.den else None
        element = curve.element(num, den)
        defect = curve.product_formula_defect(element)
    else:
        defect = curve.product_formula_defect(parse_rational(args.value))
    if abs(defect) < 1e-12:
        defect = 0.0
    return f"{defect:.15g}\n"


def cmd_canonical_height(args) -> str:
    f = _parse_map(args)
    if args.point is None:
        raise CLIError("canonical-height needs --point")
    h = canonical_height(f, parse_rational(args.point))
    return f"{h:.15g}\n"


def cmd_tate_iterate(args) -> str:
    f = _parse_map(args)
    n_max = 20 if args.N is None else args.N
    grid = _parse_grid(args.grid)
    table = tate_grid_potentials(f, n_max, grid=grid)
    lam = tate_local_potential(f, QCurve().arch_place(), 1, grid=grid).lambda_sup
    d = f.degree
    rows = []
    worst = 0.0
    for n in range(n_max):
        sup = float(np.max(np.abs(table[n + 1] - table[n])))
        bound = lam / d ** (n + 1)
        if bound > 0:
            worst = max(worst, sup / bound)
        rows.append((n, sup, bound))
    summary = {"lambda_sup": lam, "degree": d, "max_ratio": worst}
    return _emit(args, ("n", "sup_delta", "bound"), rows, summary,
                 figure="tate_contraction")


def cmd_chi_volume(args) -> str:
    phi = named_family(args.metric or "tent", _parse_curve(args.curve),
                       level=args.level or 1)
    closed = chi_volume_closed_form(phi)
    levels = tuple(int(v) for v in (args.levels or "5,10,25,50").split(","))
    rows = chi_volume_error_trace(phi, levels, grid=_parse_grid(args.grid))
    summary = {
        "closed_form": closed,
        "estimates": {str(n): est for n, est, _, _ in rows},
    }
    return _emit(args, ("n", "estimate", "closed_form", "abs_error"), rows,
                 summary, figure="chi_error", lead=f"{closed:.15g}\n")


def cmd_concave_transform(args) -> str:
    phi = named_family(args.metric or "tent", _parse_curve(args.curve),
                       level=args.level or 1)
    ct = concave_transform(phi, n_max=8 if args.N is None else args.N)
    rows = [(format_rational(x), v) for x, v in ct.roof.points]
    summary = ct.to_json()
    summary["staircase_gap"] = ct.staircase_gap()
    summary["max_value"] = ct.max_value()
    return _emit(args, ("x", "G"), rows, summary, figure="transform_roof")


def cmd_gateaux_check(args) -> str:
    curve = _parse_curve(args.curve)
    phi = named_family(args.metric or "tent", curve, level=args.level or 1)
    rng = np.random.default_rng(_seed(args))
    f = random_test_family(rng, [curve.arch_place(), curve.prime_place(2)])
    closed = gateaux_derivative(phi, f)
    fd = gateaux_fd(phi, f, h=1e-3)
    return dump_json({
        "closed_form": closed,
        "finite_difference": fd,
        "gap": abs(closed - fd),
        "seed": _seed(args),
    })


def _fs_bump(z) -> float:
    return 0.8 * math.exp(-abs(complex(z) - 0.3) ** 2 / 0.6)


def cmd_fs_envelope(args) -> str:
    n_max = 64 if args.N is None else args.N
    phi = fs_quotient(GramNorm([[1, 0], [0, 1]]), QCurve().arch_place())
    radii = np.exp(np.linspace(-1.0, 1.0, 10))
    angles = np.exp(2j * np.pi * np.arange(10) / 10)
    xs = (radii[:, None] * angles[None, :]).ravel()
    table = fs_envelope_table(phi, _fs_bump, xs, range(1, n_max + 1),
                              grid=_parse_grid(args.grid))
    top = np.array([_fs_bump(x) for x in xs])
    rows = []
    for i in range(n_max):
        step = 0.0 if i == 0 else float(np.min(table[i] - table[i - 1]))
        rows.append((i + 1, step, float(np.max(top - table[i]))))
    summary = {"final_deficit": rows[-1][2], "samples": len(xs)}
    return _emit(args, ("n", "min_step", "max_deficit"), rows, summary,
                 figure="envelope_deficit")


def cmd_equidistribute(args) -> str:
    f = _parse_map(args)
    if args.target is None:
        raise CLIError("equidistribute needs --target")
    curve = _parse_curve(args.curve)
    seq = small_sequence_generate(f, parse_rational(args.target),
                                  10 if args.N is None else args.N)
    phi = canonical_metric_family(f, curve=curve)
    report = convergence_report(seq, phi, lipschitz_test_bank(curve),
                                places=_parse_places(args.places),
                                budget=args.budget or 2048)
    rows = [
        (r["n"], r["f_id"], r["delta_n"], r["delta_x"], r["gap"], r["height"])
        for r in report["rows"]
    ]
    summary = {
        "seq": report["descriptor"],
        "trend": report["trend"],
        "summaries": report["summaries"],
    }
    return _emit(args, ("n", "f_id", "delta_n", "delta_x", "gap", "height"),
                 rows, summary, figure="equi_gaps")


def cmd_ess_min(args) -> str:
    phi = named_family(args.metric or "flat", _parse_curve(args.curve),
                       level=args.level or 1)
    lower, upper = essential_minimum_estimate(
        phi,
        degree_bound=4 if args.degree_bound is None else args.degree_bound,
        height_budget=args.budget or 8,
    )
    return dump_json({"lower": lower, "upper": upper})


def cmd_rn_check(args) -> str:
    if args.case is None:
        raise CLIError("rn-check needs --case")
    density, eta = radon_example(args.case)
    out = radon_nikodym_check(density, eta,
                              tol=1e-9 if args.tol is None else args.tol)
    return dump_json(out)


_DISPATCH = {
    "product-formula": cmd_product_formula,
    "canonical-height": cmd_canonical_height,
    "tate-iterate": cmd_tate_iterate,
    "chi-volume": cmd_chi_volume,
    "concave-transform": cmd_concave_transform,
    "gateaux-check": cmd_gateaux_check,
    "fs-envelope": cmd_fs_envelope,
    "equidistribute": cmd_equidistribute,
    "ess-min": cmd_ess_min,
    "rn-check": cmd_rn_check,
}


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flag values; flags override")
    common.add_argument("--curve", help='curve descriptor, e.g. Q or {"base":"FqT","q":3}')
    common.add_argument("--out", help="output prefix for PREFIX.csv/.json/.png")
    common.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--grid", help="grid spec n_theta x n_radial x t_max")
    common.add_argument("--level", type=int)
    common.add_argument("--map", help="polynomial in z, e.g. z^2-1")
    common.add_argument("--den", help="denominator polynomial")
    common.add_argument("--alpha", help="lift scaling factor")
    common.add_argument("--point", help="rational point")
    common.add_argument("--value", help="field element")
    common.add_argument("--target", help="rational preimage target")
    common.add_argument("--N", type=int, help="length / depth / level count")
    common.add_argument("--places", help="comma list of place keys, e.g. inf,2")
    common.add_argument("--budget", type=int)
    common.add_argument("--metric", help="metric family: flat, tent, tilt, shift:R")
    common.add_argument("--levels", help="comma list of lattice levels")
    common.add_argument("--degree-bound", dest="degree_bound", type=int)
    common.add_argument("--case", help="density example: constant, bump, ghost")
    top = _Parser(prog="adeliclab",
                  description="desk experiments on the adelic projective line")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)
    for name in _DISPATCH:
        sub.add_parser(name, parents=[common])
    return top


def _apply_config(args):
    if not args.config:
        return
    with open(args.config, encoding="utf-8") as fh:
        blob = json.load(fh)
    if not isinstance(blob, dict):
        raise CLIError("config must be a JSON object")
    for key, value in blob.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("command", "config"):
            raise CLIError(f"unknown config key {key!r}")
        if getattr(args, attr) in (None, False):
            setattr(args, attr, value)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = argv[0] if argv and not argv[0].startswith("-") else ""
    try:
        args = _build_parser().parse_args(argv)
        if args.command is None:
            raise CLIError("pick a command: " + ", ".join(sorted(_DISPATCH)))
        _apply_config(args)
        sys.stdout.write(_DISPATCH[args.command](args))
        return 0
    except Exception as exc:
        sys.stdout.write(dump_json({"error": str(exc), "command": command}))
        return 2


if __name__ == "__main__":
    sys.exit(main())
