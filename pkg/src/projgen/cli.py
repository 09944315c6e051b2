"""Command line surface: construct | verify | closure | sweep | pgen.

Matrices travel as JSON with complex entries encoded as [re, im] pairs;
sweeps emit CSV.  Reports written to stdout are byte-stable for identical
inputs and flags; wall time goes to stderr.  Exit codes: 0 pass,
1 verification failure, 2 parse error, 3 precondition violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from .algebra import GeneratorSet, star_closure
from .construction import (
    BlockPerturbation,
    ProjectionFamily,
    admissible_epsilon,
    assemble_perturbation,
    build_projections,
    default_epsilon,
    delta,
    diagonal_units,
    family_pipeline,
    hermitian_norm,
    min_amplification,
    normalize,
    pack,
    unitize,
    verify_family,
)
from .errors import ClosureCapError, PreconditionError, VerificationError
from .linalg import frobenius, matrix_power_half, residuals
from .pgen import SupernaturalNumber, min_coprime, pgen_bound_report

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3


class ParseError(ValueError):
    """Input file or query does not match the documented format."""


# ---------------------------------------------------------------- matrix I/O


def decode_matrix(obj, dim: int, where: str) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != dim:
        raise ParseError(f"{where}: expected {dim} rows")
    out = np.zeros((dim, dim), dtype=np.complex128)
    for r, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != dim:
            raise ParseError(f"{where}: row {r} must have {dim} entries")
        for c, entry in enumerate(row):
            if (
                not isinstance(entry, list)
                or len(entry) != 2
                or not all(isinstance(x, (int, float)) for x in entry)
            ):
                raise ParseError(f"{where}: entry ({r},{c}) must be a [re, im] pair")
            re, im = float(entry[0]), float(entry[1])
            if not (math.isfinite(re) and math.isfinite(im)):
                raise ParseError(f"{where}: entry ({r},{c}) is not finite")
            out[r, c] = complex(re, im)
    return out


def encode_matrix(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


@dataclass
class InputDocument:
    dimension: int
    generators: list
    options: dict
    digest: str


def load_input_document(path: str) -> InputDocument:
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("input document must be a JSON object")
    dim = doc.get("dimension")
    if not isinstance(dim, int) or dim < 1:
        raise ParseError("'dimension' must be a natural number >= 1")
    gens_obj = doc.get("generators")
    if not isinstance(gens_obj, list):
        raise ParseError("'generators' must be a list of matrices")
    gens = [
        decode_matrix(g, dim, f"generators[{idx}]") for idx, g in enumerate(gens_obj)
    ]
    options = doc.get("options", {})
    if options is None:
        options = {}
    if not isinstance(options, dict):
        raise ParseError("'options' must be an object")
    digest = "sha256:" + hashlib.sha256(raw).hexdigest()
    return InputDocument(dimension=dim, generators=gens, options=options, digest=digest)


def load_family_document(path: str) -> dict:
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    for key in ("k", "epsilon", "eta", "block_dim", "block_operator", "projections"):
        if key not in doc:
            raise ParseError(f"family document is missing {key!r}")
    k, d = doc["k"], doc["block_dim"]
    if not (isinstance(k, int) and k >= 2 and isinstance(d, int) and d >= 1):
        raise ParseError("'k' and 'block_dim' must be natural numbers")
    ambient = k * d
    matrix = decode_matrix(doc["block_operator"], ambient, "block_operator")
    if not isinstance(doc["projections"], list) or len(doc["projections"]) != k:
        raise ParseError(f"'projections' must list exactly k={k} matrices")
    projections = [
        decode_matrix(p, ambient, f"projections[{i}]")
        for i, p in enumerate(doc["projections"])
    ]
    return {
        "k": k,
        "epsilon": float(doc["epsilon"]),
        "eta": float(doc["eta"]),
        "block_dim": d,
        "matrix": matrix,
        "projections": projections,
        "digest": "sha256:" + hashlib.sha256(raw).hexdigest(),
    }


# ---------------------------------------------------------------- reporting


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _flatten(prefix: str, value, lines: list) -> None:
    if isinstance(value, dict):
        for k in value:
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], lines)
    elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
        lines.append((prefix, json.dumps(value)))
    else:
        lines.append((prefix, value))


def emit_report(report: dict, mode: str) -> None:
    report = _jsonable(report)
    if mode == "json":
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n")
        return
    lines: list = []
    _flatten("", report, lines)
    width = max(len(k) for k, _ in lines)
    for key, value in lines:
        if isinstance(value, float):
            value = repr(value)
        elif isinstance(value, list):
            value = json.dumps(value)
        sys.stdout.write(f"{key:<{width}}  {value}\n")


def _bounds_dict(bounds) -> dict:
    return {
        "eta": bounds.eta,
        "predicted_interval": list(bounds.predicted_interval),
        "spectrum": list(bounds.spectrum),
        "norm_T_minus_1": bounds.norm_t_minus_1,
        "norm_invsqrt_minus_1": bounds.norm_invsqrt_minus_1,
        "max_pairwise_product": bounds.max_pairwise_product,
        "max_distance_to_units": bounds.max_distance_to_units,
        "pairwise_products": bounds.pairwise_products,
        "distances_to_units": bounds.distances_to_units,
        "bound_16": bounds.bound_16,
        "bound_8": bounds.bound_8,
        "all_pass": bounds.all_pass,
        "failures": bounds.failures,
    }


# ---------------------------------------------------------------- commands


def _resolve(flag, options: dict, key: str, fallback):
    if flag is not None:
        return flag
    if key in options:
        return options[key]
    return fallback


def cmd_construct(args) -> int:
    doc = load_input_document(args.input)
    g = GeneratorSet(doc.dimension, doc.generators)
    k = _resolve(args.k, doc.options, "k", None)
    epsilon = _resolve(args.epsilon, doc.options, "epsilon", None)
    proj_tol = _resolve(args.tol_proj, doc.options, "tol_proj", 1e-9)
    rank_tol = _resolve(args.tol_rank, doc.options, "tol_rank", 1e-9)
    res = family_pipeline(
        g,
        k=k,
        epsilon=epsilon,
        proj_tol=float(proj_tol),
        rank_tol=float(rank_tol),
        dim_cap=args.max_dim,
    )
    cert = res.certificate
    report = {
        "command": "construct",
        "input_digest": doc.digest,
        "dimension": doc.dimension,
        "generator_count": len(doc.generators),
        "delta_n": res.delta_n,
        "k": res.k,
        "epsilon": res.epsilon,
        "eta": res.perturbation.eta,
        "certificate": {
            "passed": cert.passed,
            "diagonally_dominant": cert.diagonally_dominant,
            "lambda_min": cert.lambda_min,
            "lambda_max": cert.lambda_max,
            "norm_T_minus_1": cert.norm_t_minus_1,
            "norm_invsqrt_minus_1": cert.norm_invsqrt_minus_1,
            "failures": cert.failures,
        },
        "bounds": _bounds_dict(res.bounds),
        "closure": {
            "source_dimension": res.generation.source_dimension,
            "family_dimension": res.generation.family_dimension,
            "expected_family_dimension": res.generation.expected_dimension,
            "dimension_match": res.generation.dimension_match,
        },
        "generation": {
            "passed": res.generation.passed,
            "max_membership_residual": res.generation.max_membership_residual,
        },
        "verdict": "pass" if res.passed else "fail",
    }
    emit_report(report, args.report)
    if args.out:
        bp = res.perturbation
        famdoc = {
            "kind": "projection_family",
            "k": bp.k,
            "epsilon": bp.epsilon,
            "eta": bp.eta,
            "block_dim": bp.block_dim,
            "dimension": bp.k * bp.block_dim,
            "block_operator": encode_matrix(bp.matrix),
            "projections": [encode_matrix(p) for p in res.family.projections],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(famdoc), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return EXIT_PASS if res.passed else EXIT_FAIL


def cmd_verify(args) -> int:
    doc = load_family_document(args.input)
    tol = args.tol_proj if args.tol_proj is not None else 1e-9
    k, d = doc["k"], doc["block_dim"]
    failures = []
    for idx, p in enumerate(doc["projections"]):
        sa, idem = residuals(p)
        if sa > tol or idem > tol:
            failures.append(
                f"projection {idx + 1} residuals ({sa:.3e}, {idem:.3e}) exceed {tol:.1e}"
            )
    total = sum(doc["projections"])
    sum_defect = frobenius(total - doc["matrix"])
    if sum_defect > 1e-8:
        failures.append(f"sum of projections deviates from the operator by {sum_defect:.3e}")
    bounds_dict = None
    try:
        bp = BlockPerturbation(
            k=k,
            epsilon=doc["epsilon"],
            eta=doc["eta"],
            block_dim=d,
            matrix=doc["matrix"],
            sqrt=matrix_power_half(doc["matrix"], +1),
            inv_sqrt=matrix_power_half(doc["matrix"], -1),
        )
        fam = ProjectionFamily(
            k=k,
            projections=doc["projections"],
            diagonal_units=diagonal_units(k, d),
            source=bp,
        )
        bounds = verify_family(fam)
        bounds_dict = _bounds_dict(bounds)
        failures.extend(bounds.failures)
    except PreconditionError as exc:
        failures.append(f"operator rejected: {exc}")
    verdict = "pass" if not failures else "fail"
    report = {
        "command": "verify",
        "input_digest": doc["digest"],
        "k": k,
        "epsilon": doc["epsilon"],
        "eta": doc["eta"],
        "projection_sum_defect": sum_defect,
        "bounds": bounds_dict,
        "failures": failures,
        "verdict": verdict,
    }
    emit_report(report, args.report)
    return EXIT_PASS if verdict == "pass" else EXIT_FAIL


def cmd_closure(args) -> int:
    doc = load_input_document(args.input)
    rank_tol = _resolve(args.tol_rank, doc.options, "tol_rank", 1e-9)
    cl = star_closure(doc.generators, dim_cap=args.max_dim, rank_tol=float(rank_tol))
    report = {
        "command": "closure",
        "input_digest": doc.digest,
        "dimension": doc.dimension,
        "generator_count": len(doc.generators),
        "closure_dimension": cl.dimension,
        "full_matrix_algebra": cl.dimension == doc.dimension**2,
        "saturated": cl.saturated,
    }
    emit_report(report, args.report)
    return EXIT_PASS if cl.saturated else EXIT_FAIL


def parse_grid(spec: str) -> list:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ParseError(f"grid must look like a:b:n, got {spec!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ParseError(f"grid must look like a:b:n, got {spec!r}") from exc
    if n < 0:
        raise ParseError("grid point count must be >= 0")
    if n == 0:
        return []
    return [float(x) for x in np.linspace(a, b, n)]


SWEEP_COLUMNS = [
    "epsilon",
    "eta",
    "lambda_min",
    "max_pairwise_product",
    "max_distance_to_units",
    "bound_16",
    "bound_8",
    "all_pass",
]


def cmd_sweep(args) -> int:
    doc = load_input_document(args.input)
    g = GeneratorSet(doc.dimension, doc.generators)
    gn = normalize(g)
    gu = unitize(gn)
    k = _resolve(args.k, doc.options, "k", None)
    from .algebra import is_identity  # local import to keep module surface tidy

    n_eff = max(1, sum(1 for m in gu.generators if not is_identity(m)))
    kk = delta(n_eff) if k is None else int(k)
    grid = parse_grid(args.grid)
    limit = admissible_epsilon(kk)
    for eps in grid:
        if not (0.0 < eps < limit):
            raise PreconditionError(
                f"grid point {eps!r} outside the admissible interval (0, {limit!r})"
            )
    plan = pack(gu, kk)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    all_rows_pass = True
    for eps in grid:
        bp = assemble_perturbation(plan, gu, eps)
        fam = build_projections(bp)
        bounds = verify_family(fam)
        all_rows_pass = all_rows_pass and bounds.all_pass
        writer.writerow(
            [
                repr(eps),
                repr(bp.eta),
                repr(bounds.spectrum[0]),
                repr(bounds.max_pairwise_product),
                repr(bounds.max_distance_to_units),
                repr(bounds.bound_16),
                repr(bounds.bound_8),
                str(bounds.all_pass).lower(),
            ]
        )
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_PASS if all_rows_pass else EXIT_FAIL


def _parse_pgen_int(token: str, what: str) -> int:
    if not token.isdigit():
        raise ParseError(f"{what} must be a natural number, got {token!r}")
    return int(token)


def cmd_pgen(args) -> int:
    tokens = args.query
    if not tokens:
        raise ParseError("pgen needs a query, e.g. 'cuntz 211' or 'uhf 2^inf'")
    kind = tokens[0].lower()
    if len(tokens) != 2:
        raise ParseError(f"pgen {kind} takes exactly one argument")
    arg = tokens[1]
    if kind == "cuntz":
        n = math.inf if arg.lower() in ("inf", "infinity") else _parse_pgen_int(arg, "n")
        rep = pgen_bound_report("cuntz", n)
    elif kind == "uhf":
        try:
            q = SupernaturalNumber.parse(arg)
        except PreconditionError as exc:
            raise ParseError(str(exc)) from exc
        rep = pgen_bound_report("uhf", q)
    elif kind == "torsion":
        rep = pgen_bound_report("torsion", _parse_pgen_int(arg, "m"))
    elif kind == "delta":
        value = delta(_parse_pgen_int(arg, "n"))
        emit_report(
            {"command": "pgen", "query": f"delta {arg}", "value": value,
             "formula": "min{k : (k-1)(k-2) >= 2n}"},
            args.report,
        )
        return EXIT_PASS
    elif kind == "coprime":
        value = min_coprime(_parse_pgen_int(arg, "m"))
        emit_report(
            {"command": "pgen", "query": f"coprime {arg}", "value": value,
             "formula": "min{k >= 3 : gcd(k, m) = 1}"},
            args.report,
        )
        return EXIT_PASS
    elif kind == "amplification":
        value = min_amplification(_parse_pgen_int(arg, "n"))
        emit_report(
            {"command": "pgen", "query": f"amplification {arg}", "value": value,
             "formula": "min{l >= 1 : l^2 + 1 >= n}"},
            args.report,
        )
        return EXIT_PASS
    else:
        raise ParseError(
            f"unknown pgen query {kind!r}; expected cuntz|uhf|torsion|delta|coprime|amplification"
        )
    report = {
        "command": "pgen",
        "query": f"{kind} {arg}",
        "family": rep.family,
        "parameter": rep.parameter,
        "lower": rep.lower,
        "upper": rep.upper,
        "exact": rep.exact,
        "formula": rep.formula,
        "notes": rep.notes,
    }
    emit_report(report, args.report)
    return EXIT_PASS


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projgen",
        description=(
            "Construct and certify families of almost mutually orthogonal, "
            "mutually unitarily equivalent projections generating matrix "
            "amplifications of finite-dimensional *-algebras."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="run the full pipeline on a generator document")
    p.add_argument("input", help="JSON input document")
    p.add_argument("--k", type=int, default=None, help="amplification size (>= delta(n))")
    p.add_argument("--epsilon", type=float, default=None, help="perturbation scale in (0, 1/(8(k-1)))")
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.add_argument("--out", default=None, help="write the projection family document here")
    p.add_argument("--tol-proj", dest="tol_proj", type=float, default=None)
    p.add_argument("--tol-rank", dest="tol_rank", type=float, default=None)
    p.add_argument("--max-dim", dest="max_dim", type=int, default=None)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="re-verify a projection family document")
    p.add_argument("input", help="projection family JSON document")
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.add_argument("--tol-proj", dest="tol_proj", type=float, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("closure", help="compute the *-algebra closure of the generators")
    p.add_argument("input", help="JSON input document")
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.add_argument("--tol-rank", dest="tol_rank", type=float, default=None)
    p.add_argument("--max-dim", dest="max_dim", type=int, default=None)
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("sweep", help="measure the family bounds over an epsilon grid")
    p.add_argument("input", help="JSON input document")
    p.add_argument("--grid", required=True, help="epsilon grid a:b:n (n linspace points)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pgen", help="projection-generation arithmetic queries")
    p.add_argument("query", nargs="+", help="cuntz N | uhf Q | torsion M | delta N | coprime M")
    p.add_argument("--report", choices=("json", "text"), default="text")
    p.set_defaults(func=cmd_pgen)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        code = EXIT_PARSE
    except PreconditionError as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        code = EXIT_PRECONDITION
    except ClosureCapError as exc:
        print(f"precondition error: {exc}", file=sys.stderr)
        code = EXIT_PRECONDITION
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        code = EXIT_FAIL
    finally:
        elapsed = time.perf_counter() - start
        print(f"elapsed {elapsed:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
