"""Command-line front end.

Exit codes: 0 ok, 1 input error, 2 verification failure, 3 precondition
failure (not dissipative in K), 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import __version__
from .documents import (
    DocumentError,
    decode_complex,
    decode_matrix,
    digest,
    dump,
    encode_complex,
    encode_matrix,
    load_operator,
    operator_to_document,
    parse_json,
)
from .errors import (
    ConvergenceError,
    DegenerateSelectionError,
    IllConditionedShiftError,
    KreinError,
    PreconditionError,
    SingularShiftError,
)
from .krein import TOL_DISSIPATIVE, BlockOperator, dissipativity_defect
from .model import ModelProblem, discretize_model, potential
from .pipeline import TOL_CERT_INVARIANCE, TOL_CERT_NORM, certificates, run_pipeline
from .riccati import SolverOptions, graph_invariance_residual
from .spectral import TOL_HALFPLANE, default_t_max, t_alpha
from .transfer import (
    default_shift,
    frobenius_schur_residual,
    g_norm,
    quadratic_form_residual,
    quadratic_form_scale,
    transfer_data,
)

log = logging.getLogger("krein_invariant")

EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_PRECONDITION, EXIT_CONVERGENCE = 0, 1, 2, 3, 4

TOL_FACTORIZATION = 1e-12
TOL_QUADRATIC_FORM = 1e-12
N_PROBES = 8


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def parse_mu(text: str | None) -> complex | None:
    if text is None:
        return None
    try:
        re_, im_ = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--mu expects RE,IM, got {text!r}") from exc
    return complex(re_, im_)


def parse_grid(text: str) -> np.ndarray:
    """``a,b,c`` or ``log:start:stop:num`` or ``lin:start:stop:num``."""
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            grid = np.geomspace(a, b, n) if kind == "log" else np.linspace(a, b, n)
        else:
            grid = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}: {exc}") from exc
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise UsageError(f"bad --grid {text!r}")
    return grid


def _fmt(x) -> str:
    return "" if x is None else f"{float(x):.17g}"


def _float(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _emit(args, payload: dict, out) -> None:
    if getattr(args, "output", "json") == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _flatten(payload):
            w.writerow([k, v])
    else:
        out.write(dump(payload))


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, "" if obj is None else (_fmt(obj) if isinstance(obj, float) else obj)


def _options(args) -> SolverOptions:
    kw = {}
    if getattr(args, "tol", None) is not None:
        kw["tol_residual"] = args.tol
    if getattr(args, "max_iterations", None) is not None:
        kw["max_iterations"] = args.max_iterations
    if getattr(args, "relaxation", None) is not None:
        kw["relaxation"] = args.relaxation
    return SolverOptions(**kw)


# ---------------------------------------------------------------------------
# reports


def _pipeline_report(command: list[str], A: BlockOperator, args) -> tuple[dict, int]:
    out = run_pipeline(
        A,
        mu=parse_mu(args.mu),
        method=args.method,
        steps=args.steps,
        opts=_options(args),
        t_max=args.tmax,
    )
    sol, rep = out.solve, out.report
    report = {
        "command": command,
        "input_digest": digest(A),
        "n_plus": A.n_plus,
        "n_minus": A.n_minus,
        "mu": encode_complex(sol.mu),
        "method": sol.method,
        "fallback": sol.fallback,
        "iterations": sol.iterations,
        "K": encode_matrix(sol.K.K),
        "residuals": {
            "riccati": _float(sol.riccati_residual),
            "pontryagin": _float(sol.pontryagin_residual),
            "invariance": _float(sol.invariance_residual),
        },
        "oracle_gap": _float(sol.oracle_gap),
        "k_norm": _float(sol.K.norm),
        "eigenvalues": [encode_complex(z) for z in rep.eigenvalues],
        "halfplane_margin": _float(rep.halfplane_margin),
        "growth_bound": _float(rep.growth_bound),
        "sector_margin": _float(rep.sector_margin),
        "defect": _float(out.defect),
        "certificates": out.certificates,
        "thresholds": {
            "k_norm": 1 + TOL_CERT_NORM,
            "invariance": TOL_CERT_INVARIANCE,
            "halfplane": -TOL_HALFPLANE,
        },
        "notes": list(sol.notes),
    }
    return report, EXIT_OK


def cmd_verify(args, command) -> int:
    A, _ = load_operator(args.input)
    mu = parse_mu(args.mu)
    if mu is None:
        try:
            mu = default_shift(A)
        except PreconditionError:
            mu = 1j * (1 + A.norm)
    td = transfer_data(A, mu)
    fs = frobenius_schur_residual(A, td)
    rng = np.random.default_rng(args.seed)
    probes = (rng.standard_normal((N_PROBES, A.n_plus)) + 1j * rng.standard_normal((N_PROBES, A.n_plus)))
    qf = [quadratic_form_residual(A, td, x) / quadratic_form_scale(A, td, x) for x in probes]
    defect = dissipativity_defect(A)
    checks = {
        "factorization": fs < TOL_FACTORIZATION,
        "quadratic_form": max(qf) < TOL_QUADRATIC_FORM,
    }
    report = {
        "command": command,
        "input_digest": digest(A),
        "mu": encode_complex(mu),
        "factorization_residual": _float(fs),
        "quadratic_form_residuals": [_float(v) for v in qf],
        "quadratic_form_max": _float(max(qf)),
        "defect": _float(defect),
        "dissipative": defect >= -TOL_DISSIPATIVE,
        "checks": checks,
        "tolerances": {"factorization": TOL_FACTORIZATION, "quadratic_form": TOL_QUADRATIC_FORM},
    }
    _emit(args, report, sys.stdout)
    return EXIT_OK if all(checks.values()) else EXIT_VERIFY


def cmd_solve(args, command) -> int:
    A, _ = load_operator(args.input)
    report, code = _pipeline_report(command, A, args)
    _maybe_time(args, report)
    _emit(args, report, sys.stdout)
    return code


def _load_potential(text: str, n: int) -> ModelProblem:
    if not text.startswith("file:"):
        return potential(text, n)
    path = Path(text[5:])
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"cannot read potential file {path}: {exc}") from exc
    stripped = text.strip()
    if stripped.startswith("["):
        raw = parse_json(stripped, str(path))
        if not isinstance(raw, list):
            raise DocumentError(f"{path}: expected a JSON list of samples")
        vals = [
            decode_complex(v, f"{path}[{k}]") if isinstance(v, list) else _real(v, f"{path}[{k}]")
            for k, v in enumerate(raw)
        ]
    else:
        vals = []
        for lineno, line in enumerate(stripped.splitlines(), start=1):
            for tok in line.split():
                try:
                    vals.append(float(tok))
                except ValueError as exc:
                    raise DocumentError(f"{path}:{lineno}: not a number: {tok!r}") from exc
    if len(vals) != n:
        raise DocumentError(f"{path}: expected {n} samples, got {len(vals)}")
    return ModelProblem(n, np.array(vals))


def _real(v, where) -> float:
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise DocumentError(f"{where}: expected a number, got {v!r}")
    return float(v)


def cmd_model(args, command) -> int:
    if args.n < 3:
        raise UsageError(f"--n must be at least 3, got {args.n}")
    problem = _load_potential(args.u, args.n)
    A = discretize_model(problem)
    if args.emit_operator:
        Path(args.emit_operator).write_text(
            dump(operator_to_document(A, name=f"model n={args.n} u={args.u}")), encoding="utf-8"
        )
    report, code = _pipeline_report(command, A, args)
    report["model"] = {"n": problem.n, "h": problem.h, "u": args.u}
    _maybe_time(args, report)
    _emit(args, report, sys.stdout)
    return code


def cmd_sweep(args, command) -> int:
    A, _ = load_operator(args.input)
    what = args.what
    rows: list[list] = []
    if what == "gnorm":
        grid = parse_grid(args.grid or "1,10,100,1000")
        header = ["tau", "mu_re", "mu_im", "g_norm", "status"]
        for tau in grid:
            mu = 1j * tau
            try:
                rows.append([tau, mu.real, mu.imag, g_norm(A, mu), "ok"])
            except IllConditionedShiftError:
                rows.append([tau, mu.real, mu.imag, None, "singular"])
    else:
        out = run_pipeline(A, mu=parse_mu(args.mu), method=args.method, opts=_options(args), t_max=args.tmax)
        K, mu = out.solve.K, out.solve.mu
        if what == "talpha":
            grid = parse_grid(args.grid or "1,10,100,1000")
            header = ["tau", "alpha_re", "alpha_im", "t_norm", "status"]
            for tau in grid:
                alpha = -1j * tau
                try:
                    T = t_alpha(A, K, mu, alpha)
                    rows.append([tau, alpha.real, alpha.imag, np.linalg.norm(T, 2), "ok"])
                except (SingularShiftError, PreconditionError):
                    rows.append([tau, alpha.real, alpha.imag, None, "singular"])
        else:
            t_max = args.tmax if args.tmax is not None else default_t_max(out.restricted)
            grid = parse_grid(args.grid or f"lin:0:{t_max!r}:200")
            header = ["t", "norm", "log_norm", "status"]
            gen = 1j * np.asarray(out.restricted.matrix)
            for t in grid:
                nrm = float(np.linalg.norm(sla.expm(t * gen), 2))
                rows.append([t, nrm, np.log(nrm) if nrm > 0 else None, "ok"])
    if args.output == "json":
        payload = {
            "command": command,
            "input_digest": digest(A),
            "what": what,
            "columns": header,
            "rows": [[_float(v) if isinstance(v, (float, np.floating)) else v for v in r] for r in rows],
        }
        sys.stdout.write(dump(payload))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
        sys.stdout.write(buf.getvalue())
    if rows and all(r[-1] != "ok" for r in rows):
        return EXIT_VERIFY
    return EXIT_OK


def recheck_report(report: dict, A: BlockOperator) -> dict:
    """Recompute the certificates of a solve report from its emitted ``K``."""
    if report.get("input_digest") != digest(A):
        raise DocumentError("report was produced for a different operator (digest mismatch)")
    K = decode_matrix(report.get("K"), A.n_minus, A.n_plus, "K")
    k_norm = float(np.linalg.norm(K, 2))
    inv = graph_invariance_residual(A, K)
    eig = np.linalg.eigvals(A.A11 + A.A12 @ K)
    margin = float(eig.imag.min())
    defect = dissipativity_defect(A)
    growth = report.get("growth_bound")
    recomputed = certificates(k_norm, inv, margin, np.inf if growth is None else growth, defect)
    claimed = report.get("certificates", {})
    # a claimed certificate must be confirmed; an unclaimed one is never unsound
    sound = all(recomputed[k] or not claimed.get(k, False) for k in ("a", "b"))
    return {
        "input_digest": report["input_digest"],
        "k_norm": k_norm,
        "invariance": inv,
        "halfplane_margin": margin,
        "claimed": claimed,
        "recomputed": recomputed,
        "sound": bool(sound),
    }


def cmd_report(args, command) -> int:
    A, _ = load_operator(args.operator)
    text = Path(args.report).read_text(encoding="utf-8")
    report = parse_json(text, args.report)
    if not isinstance(report, dict):
        raise DocumentError(f"{args.report}: expected a JSON object")
    result = recheck_report(report, A)
    result["command"] = command
    _emit(args, result, sys.stdout)
    return EXIT_OK if result["sound"] else EXIT_VERIFY


def _maybe_time(args, report: dict) -> None:
    if getattr(args, "timing", False):
        report["wall_time_s"] = time.perf_counter() - args._t0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="krein-invariant",
        description="Invariant maximal nonnegative subspaces of operators dissipative in a Krein space.",
    )
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solver=True):
        sp.add_argument("--output", choices=("json", "csv"), default="json")
        if solver:
            sp.add_argument("--mu", help="shift as RE,IM (default: smallest i*2^k with ||G|| < 1/2)")
            sp.add_argument("--method", choices=("fixed_point", "spectral", "galerkin"), default="fixed_point")
            sp.add_argument("--steps", type=int, help="number of Galerkin stages")
            sp.add_argument("--tol", type=float, help="Riccati residual tolerance (default 1e-10)")
            sp.add_argument("--max-iterations", type=int, help="fixed-point iteration budget (default 500)")
            sp.add_argument("--relaxation", type=float, help="fixed-point relaxation in (0, 1] (default 1)")
            sp.add_argument("--tmax", type=float, help="semigroup horizon (default 20/max(1, ||A+||))")
            sp.add_argument("--timing", action="store_true", help="add wall time to the report")

    sp = sub.add_parser("verify", help="factorisation and quadratic-form identities, dissipativity defect")
    sp.add_argument("input", help="operator JSON document ('-' for stdin)")
    sp.add_argument("--mu", help="shift as RE,IM")
    sp.add_argument("--seed", type=int, default=0, help="seed for the random probe vectors")
    common(sp, solver=False)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("solve", help="angle operator, residuals and certificates")
    sp.add_argument("input", help="operator JSON document ('-' for stdin)")
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("model", help="discretised model operator on [0, 1]")
    sp.add_argument("--n", type=int, required=True, help="interior grid points (>= 3)")
    sp.add_argument("--u", default="zero", help="zero | const:C | sin | x | file:PATH")
    sp.add_argument("--emit-operator", metavar="PATH", help="also write the assembled operator document")
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=cmd_model)

    sp = sub.add_parser("sweep", help="CSV sweeps of ||G(i tau)||, ||T(-i tau)|| or ||exp(i t A+)||")
    sp.add_argument("input", help="operator JSON document ('-' for stdin)")
    sp.add_argument("--what", choices=("gnorm", "talpha", "semigroup"), required=True)
    sp.add_argument("--grid", help="a,b,c | log:START:STOP:NUM | lin:START:STOP:NUM")
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(output="csv", func=cmd_sweep)

    sp = sub.add_parser("report", help="re-check the certificates of a solve report")
    sp.add_argument("report", help="report JSON produced by 'solve' or 'model'")
    sp.add_argument("--operator", required=True, help="operator document the report refers to")
    common(sp, solver=False)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    args._t0 = time.perf_counter()
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    command = [args.command] + [a for a in argv if a != args.command]
    try:
        return args.func(args, command)
    except (UsageError, DocumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (ConvergenceError, DegenerateSelectionError) as exc:
        residual = getattr(exc, "residual", None)
        extra = f" (last residual {residual:.3e})" if residual is not None else ""
        print(f"error: solver did not converge: {exc}{extra}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except KreinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
