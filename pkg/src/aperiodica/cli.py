"""Command-line entry point: ``aperiodica <subcommand> <rule> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .inflation import (
    RuleError,
    detect_bar_swap,
    displacement_sets,
    load_rule,
    perron_data,
    substitution_matrix,
)
from .quadratic import QuadElement
from .renorm import InconsistencyError, format_rows, solve_correlations

EXIT_OK, EXIT_INVALID, EXIT_INCONSISTENT = 0, 1, 2


def _num(v):
    if isinstance(v, (QuadElement, Fraction)):
        return {"exact": str(v), "float": float(v)}
    return {"float": float(v)}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _exact_ok(rule, mode: str) -> None:
    if mode == "exact" and not perron_data(rule).exact:
        raise RuleError(f"exact mode needs a rational or quadratic multiplier for {rule.name!r}; "
                        f"use --mode float")


def _rows_csv_or_json(rows, fmt: str) -> str:
    if fmt == "csv":
        return format_rows(rows)
    out = []
    for a, b, z, v in rows:
        out.append({"alpha": a, "beta": b, "z": _num(z), "nu": _num(v)})
    return _dump(out)


def cmd_analyze(rule, args) -> str:
    pf = perron_data(rule)
    disp = displacement_sets(rule)
    m = substitution_matrix(rule)
    bar = detect_bar_swap(rule)
    data = {
        "rule": rule.name,
        "letters": list(rule.alphabet),
        "images": {x: list(rule.images[x]) for x in rule.alphabet},
        "substitution_matrix": m.tolist(),
        "multiplier": _num(pf.lam_exact if pf.exact else pf.lam),
        "lengths": {x: _num(pf.lengths[x]) for x in rule.alphabet},
        "frequencies": {x: _num(pf.frequencies[x]) for x in rule.alphabet},
        "bar_swap": bar,
        "displacements": {
            f"{a},{b}": [_num(t)["exact"] if pf.exact else float(t) for t in sorted(disp.T[a, b], key=float)]
            for a in rule.alphabet for b in rule.alphabet
        },
    }
    return _dump(data)


def cmd_correl(rule, args) -> str:
    _exact_ok(rule, args.mode)
    kw = {"support_mode": args.support, "symmetric": not args.no_symmetry, "seed": args.seed}
    table = solve_correlations(rule, mode=args.mode, **kw)
    if not table.system.exact:
        table.use_harvested_support(args.radius, args.seed)
    return _rows_csv_or_json(table.rows(args.radius), args.format)


def cmd_oracle(rule, args) -> str:
    from .patch import empirical_correlations, generate_patch

    patch = generate_patch(rule, args.seed, args.steps)
    table = empirical_correlations(patch, args.radius)
    rows = []
    for a, b, z, _ in table.items():
        count = table.counts[a, b][z]
        rows.append((a, b, z, Fraction(count, table.n_points)))
    return _rows_csv_or_json(rows, args.format)


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    for chunk in text.replace(";", " ").split():
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ValueError(f"bad k index {chunk!r}; expected m,n")
        pairs.append((int(parts[0]), int(parts[1])))
    return pairs


def cmd_diffract(rule, args) -> str:
    from .modelset import fibonacci_intensities, fourier_module_element

    fib = load_rule("fibonacci")
    if rule.alphabet != fib.alphabet or rule.images != fib.images:
        raise RuleError("diffraction intensities are available for the Fibonacci rule only")
    if args.k_grid is not None:
        g = args.k_grid
        ks = [(m, n) for m in range(-g, g + 1) for n in range(-g, g + 1)]
    else:
        ks = _parse_pairs(args.k_list or "0,0")
    out = []
    for m, n in ks:
        k = fourier_module_element(m, n)
        im = fibonacci_intensities(k)
        out.append({
            "m": m,
            "n": n,
            "k": _num(k),
            "letters": list(im.letters),
            "intensity": [[[z.real, z.imag] for z in row] for row in im.matrix.tolist()],
            "total": im.total().real,
        })
    return _dump(out)


def cmd_ida(rule, args) -> str:
    from .ida import ida_report

    return _dump(ida_report(rule, displacement_sets(rule)))


def cmd_spectype(rule, args) -> str:
    from .spectral import spectral_report

    return _dump(spectral_report(rule).as_dict())


COMMANDS = {
    "analyze": cmd_analyze,
    "correl": cmd_correl,
    "diffract": cmd_diffract,
    "ida": cmd_ida,
    "oracle": cmd_oracle,
    "spectype": cmd_spectype,
}


def _positive(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("radius must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aperiodica", description="Pair correlations and spectra of inflation rules.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("rule", help="bundled rule name or path to a rule file")
        s.add_argument("--output", "-o")
        if name in ("correl", "oracle"):
            s.add_argument("--radius", type=_positive, default=5.0)
            s.add_argument("--format", choices=("csv", "json"), default="csv")
            s.add_argument("--seed", help="legal two-letter seed such as a|b")
        if name == "correl":
            s.add_argument("--mode", choices=("exact", "float"), default="exact")
            s.add_argument("--support", choices=("pairwise", "common", "free"), default="pairwise")
            s.add_argument("--no-symmetry", action="store_true")
        if name == "oracle":
            s.add_argument("--steps", type=int, default=8)
        if name == "diffract":
            g = s.add_mutually_exclusive_group()
            g.add_argument("--k-list", help="wave numbers as m,n pairs, k = (m + n tau)/sqrt 5")
            g.add_argument("--k-grid", type=int, help="all m, n with |m|, |n| <= K")
    return p


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; keep 2 for internal inconsistency
        return EXIT_OK if not exc.code else EXIT_INVALID
    try:
        rule = load_rule(args.rule)
        text = COMMANDS[args.command](rule, args)
    except InconsistencyError as exc:
        print(f"error: internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (RuleError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    _emit(text, args.output)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
