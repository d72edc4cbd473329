"""``pmo`` command line: ``solve``, ``audit`` and ``certify``.

Exit codes: 0 ok, 1 bad input, 2 solver failure, 3 no convergence by
``--kmax``, 4 infeasible audit point, 5 no certificate found.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from pmo.hierarchy import HierarchyOptions, run
from pmo.io import ProblemFileError, dumps_report, load_problem
from pmo.optimality import InfeasiblePoint, audit
from pmo.schemas import validate
from pmo.sdp import OPTIMAL, NotCertified, SolveOptions, certify_qm_membership
from pmo.sosconvex import is_sos_convex_negG, is_sos_convex_poly, solve_convex

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_NOCONV, EXIT_INFEASIBLE, EXIT_NOCERT = range(6)

log = logging.getLogger("pmo")


def _g(v) -> str:
    return "n/a" if v is None else "%.12g" % v


def _emit(report: dict, args, text: str) -> None:
    validate(json.loads(dumps_report(report)), "report")
    out = dumps_report(report)
    if getattr(args, "out", None) and args.command != "certify":
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    if args.json:
        print(out)
    else:
        print(text)


def _load(path):
    try:
        return load_problem(path), None
    except OSError as e:
        return None, f"cannot read {path}: {e.strerror}"
    except ProblemFileError as e:
        return None, f"{path}: {e}"


def cmd_solve(args) -> int:
    prob, err = _load(args.path)
    if err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    kmin = None if args.kmin == "auto" else int(args.kmin)
    opts = HierarchyOptions(k_min=kmin, k_max=args.kmax, tol=args.tol, rank_tol=args.rank_tol,
                            seed=args.seed, backend=args.backend)
    if args.convex_auto:
        so = opts.solve_options()
        if is_sos_convex_poly(prob.f, so)[0] and is_sos_convex_negG(prob.G, so)[0]:
            return _solve_convex(prob, so, args)
        log.info("convex path not certified; running the hierarchy")
    res = run(prob.f, prob.G, opts)
    orders = [{"k": o.k, "mom": o.mom, "sos": o.sos, "status": o.mom_status} for o in res.orders]
    if not any(o.mom_status == OPTIMAL for o in res.orders):
        status, code = "solver_failure", EXIT_SOLVER
    elif res.converged:
        status, code = "converged", EXIT_OK
    else:
        status, code = "not_converged", EXIT_NOCONV
    report = {"command": "solve", "status": status, "converged": res.converged, "orders": orders,
              "value": res.value, "minimizers": res.minimizers.tolist(),
              "weights": res.measure.weights.tolist() if res.measure is not None else [],
              "flat": res.flat.to_json() if res.flat is not None else None,
              "message": res.message}
    if res.certificate is not None:
        report["certificate"] = res.certificate.to_json()
    lines = [f"status: {status}"]
    lines += [f"  k={o['k']}: mom {_g(o['mom'])}  sos {_g(o['sos'])}  ({o['status']})" for o in orders]
    lines.append(f"value: {_g(res.value)}")
    for u, w in zip(res.minimizers, report["weights"]):
        lines.append(f"minimizer: ({', '.join(_g(v) for v in u)})  weight {_g(w)}")
    if res.flat is not None:
        lines.append(f"flat truncation at t={res.flat.t}, rank {res.flat.rank}")
    if res.message:
        lines.append(f"note: {res.message}")
    _emit(report, args, "\n".join(lines))
    return code


def _solve_convex(prob, so, args) -> int:
    res = solve_convex(prob.f, prob.G, so, check=False)
    if res.status != OPTIMAL:
        status, code = "solver_failure", EXIT_SOLVER
    elif res.valid:
        status, code = "converged", EXIT_OK
    else:
        status, code = "not_converged", EXIT_NOCONV
    mins = [res.minimizer.tolist()] if np.all(np.isfinite(res.minimizer)) else []
    report = {"command": "solve", "status": status, "converged": bool(res.valid),
              "orders": [{"k": res.order, "mom": res.value, "sos": None, "status": res.status}],
              "value": res.value, "minimizers": mins, "weights": [1.0] if mins else [],
              "flat": None, "message": "sos-convex path" + (f"; {res.message}" if res.message else "")}
    text = [f"status: {status} (sos-convex path, order {res.order})", f"value: {_g(res.value)}"]
    if mins:
        text.append(f"minimizer: ({', '.join(_g(v) for v in mins[0])})")
    if res.message:
        text.append(f"note: {res.message}")
    _emit(report, args, "\n".join(text))
    return code


def _parse_point(text: str):
    try:
        return np.array([float(s) for s in text.split(",")], dtype=float)
    except ValueError:
        raise ProblemFileError(f"cannot parse point {text!r}; expected x1,...,xn") from None


def cmd_audit(args) -> int:
    prob, err = _load(args.path)
    if err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    try:
        u = _parse_point(args.point)
        if u.size != prob.nvars:
            raise ProblemFileError(f"point has {u.size} coordinates, problem has {prob.nvars} variables")
    except ProblemFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    try:
        rep = audit(prob.f, prob.G, u, rank_tol=args.rank_tol)
    except InfeasiblePoint as e:
        print(f"error: infeasible point: {e}", file=sys.stderr)
        if args.json:
            print(dumps_report({"command": "audit", "status": "infeasible_point", "message": str(e)}))
        return EXIT_INFEASIBLE
    body = rep.to_json()
    report = {"command": "audit", "status": "ok", "audit": body, "message": ""}

    def word(v):
        return "-" if v is None else str(v).lower()

    ndc, scc, sosc = rep.verdicts
    text = "\n".join([
        f"point: ({', '.join(_g(v) for v in rep.point)})",
        f"rank G(u): {rep.rank}",
        f"NDC: {word(ndc)}  (rank {body['ndc_rank']} of {body['ndc_required_rank']})",
        f"SCC: {word(scc)}  (rank multiplier {rep.rank_Lambda})",
        f"SOSC: {word(sosc)}  (min eigenvalue {_g(body['sosc_min_eig'])})",
        f"stationarity residual: {_g(rep.stationarity_residual)}",
    ])
    _emit(report, args, text)
    return EXIT_OK


def cmd_certify(args) -> int:
    prob, err = _load(args.path)
    if err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PARSE
    so = SolveOptions(backend=args.backend)
    try:
        cert = certify_qm_membership(prob.f, args.gamma, prob.G, args.order, tol=args.tol, opts=so)
    except NotCertified as e:
        print(f"not certified: {e}", file=sys.stderr)
        if args.json:
            print(dumps_report({"command": "certify", "status": "not_certified", "message": str(e)}))
        return EXIT_NOCERT
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    body = cert.to_json()
    text = dumps_report(body)
    validate(json.loads(text), "certificate")
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    report = {"command": "certify", "status": "certified", "certificate": body,
              "message": f"written to {args.out}" if args.out else ""}
    summary = (f"certified: f - {_g(args.gamma)} in QM[G] at order {args.order}\n"
               f"residual {_g(cert.residual)}, margin {_g(cert.margin)}")
    if args.out:
        summary += f"\ncertificate written to {args.out}"
    elif not args.json:
        summary += "\n" + text
    _emit(report, args, summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pmo", description="Moment-SOS hierarchy for polynomial matrix optimization.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the hierarchy")
    s.add_argument("path")
    s.add_argument("--kmin", default="auto")
    s.add_argument("--kmax", type=int, default=6)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--rank-tol", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--convex-auto", action="store_true",
                   help="use the lowest order when f and -G are certified SOS-convex")
    s.add_argument("--backend", default=None)
    s.add_argument("--json", action="store_true")
    s.add_argument("--out", default=None, help="also write the JSON report here")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("audit", help="check NDC, SCC and SOSC at a point")
    a.add_argument("path")
    a.add_argument("--point", required=True)
    a.add_argument("--rank-tol", type=float, default=1e-6)
    a.add_argument("--json", action="store_true")
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_audit)

    c = sub.add_parser("certify", help="search a certificate for f - gamma in QM[G]_2k")
    c.add_argument("path")
    c.add_argument("--gamma", type=float, required=True)
    c.add_argument("--order", type=int, required=True)
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--backend", default=None)
    c.add_argument("--json", action="store_true")
    c.add_argument("--out", default=None, help="certificate file")
    c.set_defaults(func=cmd_certify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kmin = getattr(args, "kmin", "auto")
    if kmin != "auto" and not str(kmin).isdigit():
        print(f"error: --kmin must be 'auto' or a nonnegative integer, got {kmin!r}", file=sys.stderr)
        return EXIT_PARSE
    try:
        return args.func(args)
    except jsonschema.ValidationError as e:
        print(f"error: report failed schema validation: {e.message}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
