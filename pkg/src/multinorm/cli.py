"""Command-line front end.

Every input and output is JSON.  Floats are written with Python's shortest
round-tripping repr, so re-reading an output reproduces the same doubles.

Exit codes: 0 pass, 1 a check ran and failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._exact import exact_equal
from ._parallel import set_threads
from .experiments import SCENARIOS, ScenarioConfig, run_scenario
from .free_objects import build_free_space, canonical_pi
from .lspace_core import (
    ambient_norm,
    check_contractibility,
    instance_from_json,
    paving_from_json,
)
from .morphisms import (
    LiftError,
    coisometry_check,
    lb_norm,
    lb_norm_by_level,
    lift,
    operator_from_json,
    operator_to_json,
)
from .normed_core import (
    NormSpecError,
    auerbach_basis,
    dualize,
    eval_norm,
    spec_from_json,
    spec_to_json,
    vector_from_json,
)
from .tensor_core import NormEstimate, TensorElement, injective_norm

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
U64 = 2**64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(obj):
    return json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False)


def load_json(path):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _field(obj, key, path):
    if not isinstance(obj, dict) or key not in obj:
        raise NormSpecError(f"{path}: missing field '{key}'")
    return obj[key]


def _unwrap(obj, key):
    """Accept either a bare object or one wrapped under ``key`` (as written by this tool)."""
    return obj[key] if isinstance(obj, dict) and key in obj else obj


def _load_spec(path):
    return spec_from_json(_unwrap(load_json(path), "spec"), path)


def _load_space(path):
    obj = load_json(path)
    if isinstance(obj, dict) and "space" in obj and "paving" not in obj:
        obj = obj["space"]
    return instance_from_json(obj, path)


def _load_tensor(path):
    return TensorElement.from_json(_unwrap(load_json(path), "tensor"), path)


def _load_vector(path):
    obj = load_json(path)
    if isinstance(obj, dict):
        obj = _field(obj, "vector", path)
    if not isinstance(obj, list):
        raise NormSpecError(f"{path}: expected a list of numbers")
    return vector_from_json(obj, path)


def _load_operator(path):
    obj = load_json(path)
    if isinstance(obj, dict) and "operator" in obj:
        obj = obj["operator"]
    return operator_from_json(obj, path)


def _emit(args, obj):
    text = dumps(obj) + "\n"
    if getattr(args, "output", None):
        try:
            Path(args.output).write_text(text)
        except OSError as exc:
            raise UsageError(f"{args.output}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _seed(text):
    try:
        s = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= s < U64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return s


def _positive(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return n


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_norm(args):
    obj = load_json(args.space)
    if isinstance(obj, dict) and ("paving" in obj or "space" in obj):
        E = _load_space(args.space)
        U = _load_tensor(args.input).coeffs
        if args.level is None:
            est = ambient_norm(E, U)
        else:
            if not 0 <= args.level < len(E.paving.levels):
                raise NormSpecError(f"level {args.level} out of range")
            est = E.levels[args.level].evaluate(U)
        _emit(args, est.to_json())
    else:
        spec = _load_spec(args.space)
        val = eval_norm(spec, _load_vector(args.input))
        _emit(args, NormEstimate.exact_value(val).to_json())
    return EXIT_PASS


def cmd_dual(args):
    spec = _load_spec(args.spec)
    d = dualize(spec)
    out = {"spec": spec_to_json(d)}
    if args.vector:
        out["norm"] = NormEstimate.exact_value(eval_norm(d, _load_vector(args.vector))).to_json()
    _emit(args, out)
    return EXIT_PASS


def cmd_auerbach(args):
    spec = _load_spec(args.spec)
    B = auerbach_basis(spec, max_sweeps=args.max_sweeps)
    err = B.biorthogonality_error()
    primal_norms = [eval_norm(spec, B.primal[:, k]) for k in range(spec.dim)]
    dual_norms = [eval_norm(dualize(spec), B.dual[k]) for k in range(spec.dim)]
    ok = B.converged and err <= 1e-9 and max(abs(np.array(primal_norms) - 1)) <= 1e-9 \
        and max(dual_norms) <= 1 + 1e-9
    _emit(args, {"primal": B.primal.T.tolist(), "dual": B.dual.tolist(), "determinant": B.determinant,
                 "sweeps": B.sweeps, "converged": B.converged, "biorthogonality_error": err,
                 "primal_norms": primal_norms, "dual_norms": dual_norms, "passed": ok})
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_inj_norm(args):
    l_spec, e_spec = _load_spec(args.l_spec), _load_spec(args.e_spec)
    est = injective_norm(l_spec, e_spec, _load_tensor(args.tensor), method=args.method)
    _emit(args, est.to_json())
    return EXIT_PASS


def cmd_lb_norm(args):
    phi = _load_operator(args.operator)
    if args.by_level:
        ests = lb_norm_by_level(phi, method=args.method)
        _emit(args, {"lb_norm": lb_norm(phi, method=args.method).to_json(),
                     "levels": [e.to_json() for e in ests]})
    else:
        _emit(args, lb_norm(phi, method=args.method).to_json())
    return EXIT_PASS


def cmd_check(args):
    if args.contractibility:
        E = _load_space(args.target)
        rep = check_contractibility(E, samples=args.samples, seed=args.seed)
        _emit(args, {"check": "contractibility", "seed": args.seed, "passed": rep.passed, **rep.to_json()})
        return EXIT_PASS if rep.passed else EXIT_FAIL
    tau = _load_operator(args.target)
    verdict = coisometry_check(tau, args.coisometry, samples=args.samples, seed=args.seed)
    _emit(args, {"check": "coisometry", "mode": args.coisometry, "seed": args.seed, "passed": verdict.passed,
                 **verdict.to_json(lb_norm(tau))})
    return EXIT_PASS if verdict.passed else EXIT_FAIL


def _labels(text):
    if text.isdigit():
        return list(range(int(text)))
    return [t for t in text.split(",") if t]


def cmd_free(args):
    P = paving_from_json(_unwrap(load_json(args.paving), "paving"), args.paving)
    F = build_free_space(P, _labels(args.labels))
    _emit(args, {"dim": F.e_dim, **F.to_json()})
    return EXIT_PASS


def cmd_lift(args):
    tau, phi = _load_operator(args.tau), _load_operator(args.phi)
    need = "strict" if args.mode == "metric" else "open"
    verdict = coisometry_check(tau, need, samples=args.samples, seed=args.seed or 0)
    try:
        psi = lift(tau, phi, args.mode, eps=args.eps, verdict=verdict)
    except LiftError as exc:
        _emit(args, {"passed": False, "error": str(exc), "tau": verdict.to_json()})
        return EXIT_FAIL
    _emit(args, {"passed": True, "psi": operator_to_json(psi), "certificates": psi.meta,
                 "tau": verdict.to_json()})
    return EXIT_PASS


def cmd_pi(args):
    E = _load_space(args.space)
    obj = load_json(args.rows)
    if isinstance(obj, dict):
        obj = _field(obj, "rows", args.rows)
    sample = []
    for i, ent in enumerate(obj):
        rows = _field(ent, "rows", f"{args.rows}[{i}]")
        sample.append({int(k): TensorElement.from_json(v, f"{args.rows}[{i}].rows.{k}").coeffs
                       for k, v in rows.items()})
    cp = canonical_pi(E, sample)
    checks, ok = [], True
    for t, z in enumerate(sample):
        v = cp.preimage(t)
        img = cp.image_of(v)
        exact = all(exact_equal(img[nu], z[nu]) for nu in z)
        norms = [cp.free.instance.levels[nu].evaluate(v[nu]).upper for nu in v]
        good = exact and max(norms) <= 1 + 1e-9
        ok &= good
        checks.append({"t": t, "exact_image": exact, "max_preimage_norm": max(norms), "passed": good})
    _emit(args, {"passed": ok, "free": cp.free.to_json(), "pi": operator_to_json(cp.pi), "rows": checks})
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_scenario(args):
    kw = {"scenario": args.name, "seed": args.seed}
    for key in ("m", "vertices", "trials", "instances"):
        if getattr(args, key) is not None:
            kw[key] = getattr(args, key)
    if args.ks is not None:
        kw["ks"] = args.ks
    if args.blocks is not None:
        kw["blocks"] = args.blocks
    try:
        cfg = ScenarioConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rep = run_scenario(cfg)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / rep.filename(cfg)
        path.write_text(rep.dumps() + "\n")
        stem = path.with_suffix("")
        for name, text in rep.csv_tables().items():
            Path(f"{stem}-{name}.csv").write_text(text)
    except OSError as exc:
        raise UsageError(f"{out_dir}: {exc.strerror}") from None
    for c in rep.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}  ({c['value']!r} {c['relation']} {c['bound']!r})")
    print(f"report: {path}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def _threads_default():
    env = os.environ.get("MULTINORM_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=_positive, default=None,
                        help="worker threads for enumeration loops (default: $MULTINORM_THREADS or 1)")
    common.add_argument("-o", "--output", help="write JSON here instead of stdout")

    parser = _Parser(prog="multinorm", description="Norms, liftings and checks for finite L-spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("norm", parents=[common], help="norm of a vector or of a tensor in an L-space")
    p.add_argument("space", help="norm spec JSON, or L-space JSON")
    p.add_argument("input", help="vector JSON for a norm spec, tensor JSON for an L-space")
    p.add_argument("--level", type=int, help="evaluate the level norm on this level instead of the ambient norm")
    p.set_defaults(fn=cmd_norm)

    p = sub.add_parser("dual", parents=[common], help="dual norm spec")
    p.add_argument("spec")
    p.add_argument("--vector", help="also evaluate the dual norm at this vector")
    p.set_defaults(fn=cmd_dual)

    p = sub.add_parser("auerbach", parents=[common], help="Auerbach basis of a norm")
    p.add_argument("spec")
    p.add_argument("--max-sweeps", type=_positive, default=200)
    p.set_defaults(fn=cmd_auerbach)

    p = sub.add_parser("inj-norm", parents=[common], help="injective tensor norm")
    p.add_argument("l_spec")
    p.add_argument("e_spec")
    p.add_argument("tensor")
    p.add_argument("--method", choices=("auto", "enumerate", "ascent"), default="auto")
    p.set_defaults(fn=cmd_inj_norm)

    p = sub.add_parser("lb-norm", parents=[common], help="Lb-norm of an operator")
    p.add_argument("operator")
    p.add_argument("--method", choices=("auto", "primal", "dual", "enumerate"), default="auto")
    p.add_argument("--by-level", action="store_true", help="also report each level's operator norm")
    p.set_defaults(fn=cmd_lb_norm)

    p = sub.add_parser("check", parents=[common], help="contractibility or coisometry check")
    p.add_argument("target", help="L-space JSON (--contractibility) or operator JSON (--coisometry)")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--contractibility", action="store_true")
    g.add_argument("--coisometry", choices=("strict", "open"))
    p.add_argument("--samples", type=_positive, default=1000)
    p.add_argument("--seed", type=_seed, required=True)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("free", parents=[common], help="build the free space F(M)")
    p.add_argument("--paving", required=True, help="paving JSON")
    p.add_argument("--labels", required=True, help="a count n (labels 0..n-1) or comma-separated labels")
    p.set_defaults(fn=cmd_free)

    p = sub.add_parser("lift", parents=[common], help="lift phi through a coisometry tau")
    p.add_argument("tau")
    p.add_argument("phi")
    p.add_argument("--mode", choices=("metric", "extreme"), default="metric")
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--samples", type=_positive, default=64, help="probes for non-polyhedral levels")
    p.add_argument("--seed", type=_seed, default=None,
                   help="seed for probing non-polyhedral levels (required when they occur)")
    p.set_defaults(fn=cmd_lift)

    p = sub.add_parser("pi", parents=[common], help="canonical pi: F(M) -> E over sampled rows")
    p.add_argument("space", help="L-space JSON")
    p.add_argument("rows", help='JSON list of {"t": ..., "rows": {level: tensor}}')
    p.set_defaults(fn=cmd_pi)

    p = sub.add_parser("scenario", parents=[common], help="run an experiment and write its report")
    p.add_argument("name", choices=SCENARIOS)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--out-dir", default="reports")
    p.add_argument("--m", type=_positive)
    p.add_argument("--ks", type=_int_list, help="comma-separated k values for circle-lifting")
    p.add_argument("--vertices", type=_positive)
    p.add_argument("--blocks", type=_int_list, help="comma-separated block dimensions for polygon-gap")
    p.add_argument("--trials", type=_positive)
    p.add_argument("--instances", type=_positive)
    p.set_defaults(fn=cmd_scenario)
    return parser


def _needs_seed(args):
    """Lifting through non-polyhedral codomain levels samples; insist on an explicit seed."""
    if args.command != "lift" or args.seed is not None:
        return False
    tau = _load_operator(args.tau)
    return any(lv.primal_count() is None for lv in tau.cod.levels)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        set_threads(args.threads if args.threads is not None else _threads_default())
        if _needs_seed(args):
            raise UsageError("lift: --seed is required when the codomain has non-polyhedral levels")
        return args.fn(args)
    except UsageError as exc:
        print(f"multinorm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (NormSpecError, ValueError, KeyError, TypeError) as exc:
        print(f"multinorm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
