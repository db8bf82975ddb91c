"""Command-line front end.

Every run prints its fully resolved configuration first (field modulus,
seed, budget) so that output can be reproduced byte for byte.  Exit
status: 0 when an answer was computed, 1 on usage errors, 2 when the
exact engines exceed the budget outside the certified regimes.
"""

from __future__ import annotations

import argparse
import json
import sys

from .charsum import weil_audit
from .counting import (BRUTE_CAP, InstanceTooLarge, MomentTarget, StateSpaceTooLarge,
                       count_brute, count_exact_dp, reachable, reduce_targets)
from .evalsets import (EvalSetDesc, EvalSetError, enumerated_preimage_count, image_set,
                       preimage_count, value_set_size)
from .field import FieldCtx, FieldError, parse_field
from .regimes import BudgetExceeded, decide, default_budget

EXIT_OK, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2


class UsageError(ValueError):
    pass


def _fail(kind: str, text: str, pos: int, msg: str) -> UsageError:
    return UsageError(f"{kind} {text!r}: {msg} at position {pos}\n  {text}\n  {' ' * pos}^")


def parse_element(ctx: FieldCtx, token: str, kind: str = "element", text: str | None = None,
                  offset: int = 0) -> int:
    """Integer encoding, or ``poly:c0/c1/...`` (coefficients low to high)."""
    text = token if text is None else text
    if token.startswith("poly:"):
        parts = token[5:].split("/")
        pos = offset + 5
        coeffs = []
        for part in parts:
            if not part.isdigit():
                raise _fail(kind, text, pos, "expected a coefficient")
            c = int(part)
            if c >= ctx.p:
                raise _fail(kind, text, pos, f"coefficient {c} not below p={ctx.p}")
            coeffs.append(c)
            pos += len(part) + 1
        if len(coeffs) > ctx.s:
            raise _fail(kind, text, offset, f"more than s={ctx.s} coefficients")
        return ctx.from_digits(coeffs + [0] * (ctx.s - len(coeffs)))
    if not token.isdigit():
        raise _fail(kind, text, offset, "expected a non-negative integer or poly:c0/c1/...")
    value = int(token)
    if value >= ctx.q:
        raise _fail(kind, text, offset, f"element {value} not below q={ctx.q}")
    return value


def parse_element_list(ctx: FieldCtx, text: str, kind: str, offset: int = 0,
                       full: str | None = None) -> list[int]:
    full = text if full is None else full
    out, pos = [], offset
    for token in text.split(","):
        out.append(parse_element(ctx, token.strip(), kind, full, pos))
        pos += len(token) + 1
    return out


def _parse_int(kind: str, text: str, value: str, pos: int) -> int:
    if not value.isdigit():
        raise _fail(kind, text, pos, "expected a positive integer")
    return int(value)


def parse_set(ctx: FieldCtx, text: str, allow_complete: bool = False) -> EvalSetDesc | None:
    """Parse ``monomial:n=N``, ``dickson:n=N,a=A`` or ``explicit:e1,e2,...``."""
    kind = "set descriptor"
    if allow_complete and text == "complete":
        return None
    head, sep, rest = text.partition(":")
    if not sep:
        raise _fail(kind, text, len(text), "expected ':' after the set kind")
    start = len(head) + 1
    if head == "explicit":
        if not rest:
            raise _fail(kind, text, start, "expected at least one element")
        desc = EvalSetDesc.explicit(parse_element_list(ctx, rest, kind, start, text))
    elif head in ("monomial", "dickson"):
        fields, pos = {}, start
        for part in rest.split(","):
            key, eq, value = part.partition("=")
            if not eq:
                raise _fail(kind, text, pos, "expected key=value")
            if key == "n":
                fields["n"] = _parse_int(kind, text, value, pos + 2)
            elif key == "a" and head == "dickson":
                fields["a"] = parse_element(ctx, value, kind, text, pos + 2)
            else:
                raise _fail(kind, text, pos, f"unexpected key {key!r}")
            pos += len(part) + 1
        if "n" not in fields:
            raise _fail(kind, text, start, "missing n=")
        if head == "dickson":
            if "a" not in fields:
                raise _fail(kind, text, len(text), "missing a=")
            desc = EvalSetDesc.dickson(fields["n"], fields["a"])
        else:
            desc = EvalSetDesc.monomial(fields["n"])
    else:
        raise _fail(kind, text, 0, "unknown set kind (monomial, dickson, explicit)")
    try:
        desc.validate(ctx)
    except (EvalSetError, FieldError) as exc:
        raise UsageError(f"{kind} {text!r}: {exc}") from None
    return desc


# -- output --------------------------------------------------------------------------

def _config(args, ctx: FieldCtx | None) -> dict:
    cfg = {"subcommand": args.command}
    if ctx is not None:
        cfg["field"] = {"p": ctx.p, "s": ctx.s, "q": ctx.q, "modulus": list(ctx.modulus)}
    for key in ("set", "m", "b", "k", "engine", "budget", "seed", "coverage", "count",
                "keep", "threads", "x0"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    return cfg


def _emit(args, out, config: dict, result: dict, text_lines: list[str]) -> None:
    if args.format == "text":
        out.write("# config " + json.dumps(config, sort_keys=True) + "\n")
        for line in text_lines:
            out.write(line + "\n")
    else:
        out.write(json.dumps({"config": config, "result": result}, sort_keys=True) + "\n")


# -- subcommands -----------------------------------------------------------------------

def _target(ctx, args) -> MomentTarget:
    b = parse_element_list(ctx, args.b, "target list")
    if len(b) != args.m:
        raise UsageError(f"target list {args.b!r}: expected {args.m} values for m={args.m}, "
                         f"got {len(b)}")
    return MomentTarget(args.m, tuple(b))


def cmd_decide(args, ctx, out) -> int:
    desc = parse_set(ctx, args.set)
    target = _target(ctx, args)
    try:
        outcome = decide(ctx, desc, target, args.k, budget=args.budget)
    except BudgetExceeded as exc:
        result = {"error": "budget-exceeded", "message": str(exc),
                  "hypotheses": [h.__dict__ for h in exc.hypotheses]}
        _emit(args, out, _config(args, ctx), result, [f"BUDGET EXCEEDED: {exc}"])
        return EXIT_BUDGET
    cert = outcome.to_json()
    lines = [f"answer: {cert['answer']}", f"regime: {cert['regime']}",
             f"duality_applied: {str(cert['duality_applied']).lower()}"]
    if cert["witness"] is not None:
        lines.append("witness: " + " ".join(map(str, cert["witness"])))
    if cert["count"] is not None:
        lines.append(f"count: {cert['count']}")
    for h in cert["hypotheses"]:
        mark = "ok" if h["holds"] else "fails"
        lines.append(f"hypothesis {h['name']}: {h['lhs']} vs {h['rhs']} ({mark})")
    _emit(args, out, _config(args, ctx), cert, lines)
    return EXIT_OK


def cmd_count(args, ctx, out) -> int:
    desc = parse_set(ctx, args.set)
    D = image_set(ctx, desc)
    rt = reduce_targets(ctx, _target(ctx, args))
    try:
        if args.engine == "dp":
            value = count_exact_dp(ctx, D, rt, args.k).value
        elif args.engine == "brute":
            value = count_brute(ctx, D, rt, args.k, BRUTE_CAP).value
        else:
            value = reachable(ctx, D, rt, args.k)
    except (StateSpaceTooLarge, InstanceTooLarge) as exc:
        _emit(args, out, _config(args, ctx), {"error": "budget-exceeded", "message": str(exc)},
              [f"BUDGET EXCEEDED: {exc}"])
        return EXIT_BUDGET
    if args.engine == "bool":
        result, line = {"reachable": value}, "yes" if value else "no"
    else:
        result, line = {"N_k": value}, str(value)
    result["consistent"] = rt.consistent
    _emit(args, out, _config(args, ctx), result, [line])
    return EXIT_OK


def cmd_valueset(args, ctx, out) -> int:
    desc = parse_set(ctx, args.set)
    D = image_set(ctx, desc)
    size, method = value_set_size(ctx, desc) if desc.symbolic else (D.d, "enumerated")
    result = {"size": size, "method": method, "enumerated_size": D.d, "elements": list(D.elements)}
    lines = [f"size: {size} ({method})", "elements: " + " ".join(map(str, D.elements))]
    if size != D.d:
        lines.append(f"MISMATCH: enumeration gives {D.d}")
    _emit(args, out, _config(args, ctx), result, lines)
    return EXIT_OK


def cmd_preimage(args, ctx, out) -> int:
    desc = parse_set(ctx, args.set)
    if desc is None or desc.kind != "dickson":
        raise UsageError("preimage needs a dickson:n=N,a=A set")
    x0 = parse_element(ctx, args.x0, "x0")
    try:
        formula = preimage_count(ctx, desc.n, desc.a, x0)
    except EvalSetError as exc:
        raise UsageError(str(exc)) from None
    enumerated = enumerated_preimage_count(ctx, desc.n, desc.a, x0)
    result = {"formula": str(formula), "enumerated": enumerated, "match": formula == enumerated}
    lines = [f"formula: {formula}", f"enumerated: {enumerated}",
             "match" if formula == enumerated else "MISMATCH"]
    _emit(args, out, _config(args, ctx), result, lines)
    return EXIT_OK


def cmd_audit(args, ctx, out) -> int:
    desc = parse_set(ctx, args.set, allow_complete=True)
    coverage = "exhaustive" if args.coverage == "exhaustive" else ("sample", args.count, args.seed)
    reports = weil_audit(ctx, desc, args.m, coverage, keep=args.keep, threads=args.threads)
    config = _config(args, ctx)
    if args.format == "text":
        out.write("# config " + json.dumps(config, sort_keys=True) + "\n")
        for r in reports:
            rec = r.record()
            out.write(f"{rec['family']} coeffs={rec['coeffs']} |sum|={rec['abs_sum']:.9f} "
                      f"bound={rec['bound']:.9f} margin={rec['margin']:.9f} "
                      f"{'pass' if rec['passed'] else 'FAIL'}\n")
    else:
        out.write(json.dumps({"config": config}, sort_keys=True) + "\n")
        for r in reports:
            out.write(json.dumps(r.record(), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_selftest(args, ctx, out) -> int:
    from .selftest import run_selftest
    results = run_selftest()
    config = _config(args, None)
    ok = all(passed for _, passed, _ in results)
    lines = [f"{'PASS' if passed else 'FAIL'} {name}: {detail}" for name, passed, detail in results]
    _emit(args, out, config, {"checks": [{"name": n, "passed": p, "detail": d}
                                         for n, p, d in results]}, lines)
    return EXIT_OK if ok else 3


# -- argument parsing --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentsum",
        description="Moment subset-sum decisions and counts over finite fields.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt="text", choices=("text", "json")):
        p.add_argument("--field", required=True, help="'p^s', 'q' or 'p^s:modulus=c0,c1,...'")
        p.add_argument("--format", choices=choices, default=fmt)
        p.add_argument("--threads", type=int, default=1)

    def target(p):
        p.add_argument("--set", required=True,
                       help="monomial:n=N | dickson:n=N,a=A | explicit:e1,e2,...")
        p.add_argument("--m", type=int, required=True)
        p.add_argument("--b", required=True, help="comma-separated targets b_1,...,b_m")
        p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("decide", help="decide whether a k-subset with the given moments exists")
    common(p)
    target(p)
    p.add_argument("--budget", type=int, default=None,
                   help="exact-engine budget (default: MSS_BUDGET or 10^9)")
    p.add_argument("--json", action="store_const", const="json", dest="format")

    p = sub.add_parser("count", help="count k-subsets with the given moments")
    common(p)
    target(p)
    p.add_argument("--engine", choices=("dp", "brute", "bool"), default="dp")

    p = sub.add_parser("valueset", help="value-set size by formula and by enumeration")
    common(p)
    p.add_argument("--set", required=True)

    p = sub.add_parser("preimage", help="Dickson fiber size by formula and by enumeration")
    common(p)
    p.add_argument("--set", required=True, help="dickson:n=N,a=A")
    p.add_argument("--x0", required=True)

    p = sub.add_parser("audit", help="audit character-sum bounds (one record per test)")
    common(p, fmt="ldjson", choices=("text", "ldjson"))
    p.add_argument("--set", required=True, help="a set descriptor or 'complete'")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--coverage", choices=("exhaustive", "sample"), default="exhaustive")
    p.add_argument("--count", type=int, default=100, help="samples for --coverage sample")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keep", choices=("all", "worst"), default="all")

    p = sub.add_parser("selftest", help="run the small-instance oracle suites")
    p.add_argument("--format", choices=("text", "json"), default="text")
    return parser


def run(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "budget", None) is None and args.command == "decide":
        args.budget = default_budget()
    try:
        if args.command == "selftest":
            return cmd_selftest(args, None, out)
        if getattr(args, "m", 1) < 1:
            raise UsageError("--m must be positive")
        if getattr(args, "k", 0) is not None and getattr(args, "k", 0) < 0:
            raise UsageError("--k must be non-negative")
        ctx = parse_field(args.field)
        handler = {"decide": cmd_decide, "count": cmd_count, "valueset": cmd_valueset,
                   "preimage": cmd_preimage, "audit": cmd_audit}[args.command]
        return handler(args, ctx, out)
    except (UsageError, FieldError, EvalSetError, ValueError) as exc:
        print(f"momentsum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
