"""Command-line entry point: one JSON document (or CSV) per run on stdout."""

from __future__ import annotations

import argparse
import csv
import io as _io
import os
import sys
from typing import List, Optional

from . import __version__
from .errors import CheckFailed, InputError
from .io import dumps, load_box, load_json
from .scalar import parse_scalar, to_json

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class _Result:
    def __init__(self, doc: dict, ok: bool = True, rows: Optional[List[dict]] = None):
        self.doc = doc
        self.ok = ok
        self.rows = rows


def _workers(args) -> Optional[int]:
    if getattr(args, "workers", None) is not None:
        return args.workers
    env = os.environ.get("BELLPA_WORKERS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"BELLPA_WORKERS must be an integer, got {env!r}")
    return None


def _box(args):
    box = load_box(args.box)
    if args.mode == "float":
        box = box.to_float()
    return box


def _hash(args, n_r: Optional[int] = None):
    from .hashing import hash_from_seed
    from .io import hash_from_dict

    if args.hash is not None:
        h = hash_from_dict(load_json(args.hash))
        if n_r is not None and h.n_r != n_r:
            raise InputError(f"hash takes {h.n_r} bits, expected {n_r}")
        return h, {"source": "file"}
    nr = args.nr if n_r is None else n_r
    if nr is None:
        raise InputError("--nr is required with --seed")
    return hash_from_seed(nr, args.ns, args.nc, args.seed), {"source": "seed", "seed": args.seed}


def _sweep_spec(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"sweep must look like lo:hi:n, got {text!r}")
    try:
        n = int(parts[2])
    except ValueError:
        raise InputError(f"sweep point count must be an integer, got {parts[2]!r}")
    return parse_scalar(parts[0]), parse_scalar(parts[1]), n


# -- subcommands ----------------------------------------------------------------

def cmd_validate(args) -> _Result:
    from .box import is_local, nosignaling_check, validate_box

    box = _box(args)
    invalid = validate_box(box, args.tol)
    signaling = nosignaling_check(box, args.tol)
    local = None
    if box.shape.is_binary and box.pairs == 1 and not invalid and not signaling:
        local = is_local(box)[0]
    ok = not invalid and not signaling
    return _Result({
        "command": "validate",
        "valid": not invalid,
        "nonsignaling": not signaling,
        "local": local,
        "violations": [v.to_dict() for v in invalid + signaling],
        "pass": ok,
    }, ok)


def cmd_bell_eval(args) -> _Result:
    from .bell import evaluate, functional

    f = functional(args.functional, args.m)
    box = _box(args)
    value = evaluate(f, box)
    local = f.local_bound ** box.pairs
    return _Result({
        "command": "bell eval",
        "functional": f.kind,
        "m": f.m,
        "pairs": box.pairs,
        "value": to_json(value),
        "local_bound": to_json(local),
        "below_local_bound": bool(value < local),
    })


def cmd_bell_dump(args) -> _Result:
    from .bell import functional

    doc = {"command": "bell dump"}
    doc.update(functional(args.functional, args.m).to_dict())
    return _Result(doc)


def cmd_lemma1(args) -> _Result:
    from .gamma import lemma1_check

    report = lemma1_check(_box(args))
    doc = {"command": "lemma1"}
    doc.update(report.to_dict())
    return _Result(doc, report.passed)


def cmd_lemma2(args) -> _Result:
    from .hashing import lemma2_check

    h, source = _hash(args)
    report = lemma2_check(h, workers=_workers(args))
    doc = {"command": "lemma2", "hash": dict(source, nr=h.n_r, ns=h.n_s, nc=h.n_c)}
    doc.update(report.to_dict())
    return _Result(doc, report.passed)


def cmd_bound(args) -> _Result:
    from .security import comm_bound_rhs, main_bound_rhs, smooth_bound

    value = parse_scalar(args.value)
    if args.nc:
        rhs, kind = comm_bound_rhs(args.ns, args.nc, args.nr, value), "communication"
    else:
        rhs, kind = main_bound_rhs(args.ns, args.nr, value), "main"
    eps = parse_scalar(args.eps)
    smoothed = smooth_bound(rhs, eps)
    return _Result({
        "command": "bound",
        "bound": kind,
        "nr": args.nr,
        "ns": args.ns,
        "nc": args.nc,
        "value": to_json(value),
        "epsilon": to_json(eps),
        "rhs": to_json(smoothed),
    })


def cmd_rate(args) -> _Result:
    from .security import key_rate

    rate = key_rate(args.value, args.nr, args.nc, args.functional)
    doc = {"command": "rate", "nr": args.nr, "nc": args.nc, "value": to_json(parse_scalar(args.value))}
    doc.update(rate.to_dict())
    return _Result(doc)


def cmd_attack_optimize(args) -> _Result:
    from .adversary import attack_sweep, optimize_vertex_attack

    if args.sweep:
        lo, hi, n = _sweep_spec(args.sweep)
        rows = [
            {"chsh": float(o.target), "d_max": float(o.d_max), "bound": float(o.bound)}
            for o in attack_sweep(lo, hi, n)
        ]
        ok = all(r["d_max"] <= r["bound"] for r in rows)
        return _Result({"command": "attack optimize", "sweep": rows, "pass": ok}, ok, rows)
    if args.chsh is None:
        raise InputError("give --chsh C or --sweep lo:hi:n")
    opt = optimize_vertex_attack(args.chsh)
    doc = {"command": "attack optimize"}
    doc.update(opt.to_dict())
    return _Result(doc)


def cmd_attack_check(args) -> _Result:
    from .adversary import bound_chain_check, ensemble_to_joint, main_bound_holds
    from .io import ensemble_from_dict

    att = ensemble_from_dict(load_json(args.ensemble))
    h, source = _hash(args, att.pairs)
    lhs, rhs, holds = main_bound_holds(att, h)
    chain = bound_chain_check(ensemble_to_joint(att), h)
    ok = chain.passed and (holds or not chain.lemma2_passed)
    return _Result({
        "command": "attack check",
        "hash": dict(source, nr=h.n_r, ns=h.n_s, nc=h.n_c),
        "lhs": to_json(lhs),
        "rhs": to_json(rhs),
        "bound_holds": holds,
        "chain": chain.to_dict(),
        "pass": ok,
    }, ok)


def cmd_security(args) -> _Result:
    from .io import joint_from_dict
    from .security import security_report

    joint = joint_from_dict(load_json(args.joint))
    h, source = _hash(args, joint.pairs)
    report = security_report(joint, h, args.eps)
    doc = {"command": "security", "hash": dict(source, nr=h.n_r, ns=h.n_s, nc=h.n_c)}
    doc.update(report.to_dict())
    return _Result(doc, report.passed)


def cmd_bhk(args) -> _Result:
    from .quantum import bhk_sweep, key_agreement

    if args.sweep:
        try:
            lo, hi = (int(t) for t in args.sweep.split(":"))
        except ValueError:
            raise InputError(f"bhk sweep must look like lo:hi, got {args.sweep!r}")
        if lo < 2 or hi < lo:
            raise InputError("bhk sweep needs 2 <= lo <= hi")
        rows = bhk_sweep(range(lo, hi + 1), args.nc, args.nr)
        return _Result({"command": "bhk", "sweep": rows}, True, rows)
    if args.m is None:
        raise InputError("give --m M or --sweep lo:hi")
    if args.m < 2:
        raise InputError("m must be at least 2")
    row = bhk_sweep([args.m], args.nc, args.nr)[0]
    doc = {"command": "bhk", "key_agreement": key_agreement(args.m)}
    doc.update(row)
    return _Result(doc, True, [row])


def cmd_hash(args) -> _Result:
    from .hashing import hash_from_seed

    h = hash_from_seed(args.nr, args.ns, args.nc, args.seed)
    doc = {"command": "hash", "seed": args.seed}
    doc.update(h.to_dict())
    return _Result(doc)


# -- parser ------------------------------------------------------------------------

def _add_box(p):
    p.add_argument("box", help="box JSON file")
    p.add_argument("--mode", choices=("exact", "float"), default="exact",
                   help="exact keeps rational entries exact; float converts first")


def _add_hash(p, need_nr=True):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--seed", type=int, help="seed for the pseudorandom hash table")
    src.add_argument("--hash", help="hash JSON file")
    if need_nr:
        p.add_argument("--nr", type=int, help="raw-key bits")
    p.add_argument("--ns", type=int, default=1, help="key bits (default 1)")
    p.add_argument("--nc", type=int, default=0, help="public communication bits (default 0)")


def _add_csv(p):
    p.add_argument("--csv", action="store_true", default=argparse.SUPPRESS, help="CSV output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellpa", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--csv", action="store_true", help="CSV output for sweeps")
    parser.add_argument("--workers", type=int, help="worker threads (overrides BELLPA_WORKERS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check normalisation, positivity and no-signaling")
    _add_box(p)
    p.add_argument("--tol", type=float, help="tolerance (default 0 exact, 1e-9 float)")
    p.set_defaults(func=cmd_validate)

    bell = sub.add_parser("bell", help="Bell functionals").add_subparsers(dest="bell_command", required=True)
    for name, func in (("eval", cmd_bell_eval), ("dump", cmd_bell_dump)):
        p = bell.add_parser(name)
        p.add_argument("--functional", choices=("chsh", "bc", "bc-mod"), default="chsh")
        p.add_argument("--m", type=int, default=2, help="settings per side for chained functionals")
        if name == "eval":
            _add_box(p)
        p.set_defaults(func=func)

    p = sub.add_parser("lemma1", help="marginal identity for the dual vectors")
    _add_box(p)
    p.set_defaults(func=cmd_lemma1)

    p = sub.add_parser("lemma2", help="entry-wise hashing bound")
    _add_hash(p)
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="worker threads")
    p.set_defaults(func=cmd_lemma2)

    p = sub.add_parser("bound", help="right-hand side of the security bound")
    p.add_argument("--nr", type=int, required=True)
    p.add_argument("--ns", type=int, required=True)
    p.add_argument("--nc", type=int, default=0)
    p.add_argument("--value", required=True, help="functional value, e.g. 1/sqrt(2)")
    p.add_argument("--eps", default="0", help="distance to the measured distribution")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("rate", help="leading-order key length")
    p.add_argument("--functional", choices=("chsh", "bc", "bc-mod"), default="chsh")
    p.add_argument("--value", required=True)
    p.add_argument("--nr", type=int, required=True)
    p.add_argument("--nc", type=int, default=0)
    p.set_defaults(func=cmd_rate)

    attack = sub.add_parser("attack", help="vertex attacks").add_subparsers(dest="attack_command", required=True)
    p = attack.add_parser("optimize")
    p.add_argument("--chsh", help="target CHSH value")
    p.add_argument("--sweep", help="lo:hi:n grid of CHSH values")
    _add_csv(p)
    p.set_defaults(func=cmd_attack_optimize)
    p = attack.add_parser("check")
    p.add_argument("ensemble", help="ensemble JSON file")
    _add_hash(p, need_nr=False)
    p.set_defaults(func=cmd_attack_check)

    p = sub.add_parser("security", help="distinguishing quantity of a joint distribution")
    p.add_argument("joint", help="joint JSON file")
    _add_hash(p, need_nr=False)
    p.add_argument("--eps", default="0")
    p.set_defaults(func=cmd_security)

    p = sub.add_parser("bhk", help="singlet values and rates for chained functionals")
    p.add_argument("--m", type=int)
    p.add_argument("--sweep", help="lo:hi range of m")
    _add_csv(p)
    p.add_argument("--nc", type=float, default=0)
    p.add_argument("--nr", type=int, default=1)
    p.set_defaults(func=cmd_bhk)

    p = sub.add_parser("hash", help="print a seeded hash table")
    p.add_argument("--nr", type=int, required=True)
    p.add_argument("--ns", type=int, default=1)
    p.add_argument("--nc", type=int, default=0)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_hash)
    return parser


def _emit_csv(rows: List[dict], out) -> None:
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    out.write(buf.getvalue())


def _error_doc(exc: Exception) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc)}
    diags = getattr(exc, "diagnostics", None)
    if diags:
        err["diagnostics"] = [d.to_dict() if hasattr(d, "to_dict") else str(d) for d in diags]
    return {"error": err}


def run(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except (InputError, CheckFailed) as exc:
        stdout.write(dumps(_error_doc(exc)) + "\n")
        stderr.write(f"bellpa: {exc}\n")
        return EXIT_INPUT if isinstance(exc, InputError) else EXIT_FAIL
    if args.csv and result.rows:
        _emit_csv(result.rows, stdout)
    else:
        stdout.write(dumps(result.doc) + "\n")
    if not result.ok:
        stderr.write(f"bellpa: {args.command} check failed\n")
    return EXIT_OK if result.ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())
