"""Command line entry point.

Every subcommand writes its result (JSON or CSV) and exits with status 0
only if all of its checks passed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import bound_report, tv_curve_colouring, tv_curve_indep_sum
from .dnormal import dn_build
from .lattice import LatticePmf, read_csv, write_csv
from .models import build_colouring_model, build_sum_model, regular_graph
from .models.colouring import colouring_jump_law, diagnose_colouring_mc
from .pairs import _jsonable, diagnose_exact, lyapunov_identity_residual
from .stein import condition3_suite, lemma21_report, lemma22_suite

log = logging.getLogger("dnstein")


# ---------------------------------------------------------------------------
# model spec files

def parse_spec(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    spec = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: cannot parse line {raw!r}")
        k, v = (x.strip() for x in line.split("=", 1))
        spec[k.lower()] = v
    spec["_dir"] = str(Path(path).resolve().parent)
    if spec.get("model") not in ("colouring", "indep_sum"):
        raise ValueError(f"{path}: model must be colouring or indep_sum")
    return spec


def _floats(text):
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _matrix(text):
    """``"1,0;0,4"`` -> 2x2 array."""
    return np.array([[float(x) for x in row.split(",")] for row in text.split(";")])


def _summands(spec):
    """Summand pmfs from ``summands = a.csv, b.csv`` (paths relative to the
    spec file) or ``uniform = -1;0;1`` (points separated by ';', coordinates
    by ',')."""
    if "summands" in spec:
        base = Path(spec["_dir"])
        return [read_csv(base / f.strip()) for f in spec["summands"].split(",") if f.strip()]
    if "uniform" in spec:
        pts = np.array([[int(c) for c in pt.split(",")] for pt in spec["uniform"].split(";")])
        return [LatticePmf.uniform(pts)]
    raise ValueError("indep_sum model needs 'summands' or 'uniform'")


def _colouring(spec, seed, n=None, mode=None):
    m = int(spec["m"])
    p = _floats(spec["p"]) if "p" in spec else None
    n = int(spec["n"]) if n is None else n
    seed = int(spec.get("seed", seed))
    g = regular_graph(n, int(spec["r"]), spec.get("kind", "circulant"), seed)
    return build_colouring_model(g, m, p, seed=seed, mode=mode)


def _sum_model(spec):
    ys = _summands(spec)
    m = int(spec.get("m", len(ys)))
    if len(ys) == 1:
        ys = ys * m
    elif len(ys) != m:
        raise ValueError("m does not match the number of summand files")
    return build_sum_model(ys)


def _dump(obj, path):
    text = json.dumps(_jsonable(obj), indent=2)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands

def cmd_build_dn(a):
    if a.sigma_file:
        Sigma = np.atleast_2d(np.loadtxt(a.sigma_file, delimiter=None))
    elif a.sigma:
        Sigma = _matrix(a.sigma)
    else:
        Sigma = np.eye(a.dim)
    d = Sigma.shape[0]
    if a.dim is not None and a.dim != d:
        raise ValueError(f"--dim {a.dim} does not match a {d}x{d} Sigma")
    c = np.array(_floats(a.c)) if a.c else np.zeros(d)
    dn = dn_build(a.n, c, Sigma, tail_tol=a.tail_tol, renormalize=a.renormalize)
    if a.out:
        write_csv(dn.pmf, a.out)
    checks = [{"name": "discarded mass <= tail_tol", "lhs": dn.discarded_mass, "rhs": a.tail_tol,
               "ok": dn.discarded_mass <= a.tail_tol}]
    if a.check:
        rep = lemma21_report(dn)
        checks += [ln.as_dict() for ln in rep.lines]
    ok = all(ch.get("ok", True) for ch in checks)
    _dump({"dim": d, "n": a.n, "support": dn.pmf.size, "mass": dn.pmf.mass,
           "discarded_mass": dn.discarded_mass, "radius": dn.radius,
           "quadrature_order": dn.quadrature_order, "checks": checks, "ok": ok}, a.report)
    return ok


def cmd_verify_lemma(a):
    dims = tuple(_ints(a.dim))
    ns = tuple(_ints(a.n)) if a.n else None
    deltas = tuple(_floats(a.delta))
    if a.lemma == "2.1":
        res = lemma21_report_grid(dims, ns or (4, 16, 64))
    elif a.lemma in ("2.2a", "2.2b", "2.2c"):
        res = [(cfg, chk.as_dict()) for cfg, chk in lemma22_suite(
            dims, ns or (64, 256), deltas, parts=(a.lemma[-1],), trials=a.trials, seed=a.seed)]
    else:
        res = [(cfg, {"lhs": c.lhs, "lhs_err": c.lhs_err, "bracket": c.bracket, "ratio": c.ratio,
                      "ok": bool(np.isfinite(c.ratio))})
               for cfg, c in condition3_suite(dims, ns or (16, 64, 256), deltas[0], a.trials, a.seed)]
    rows, ok, skipped = [], True, 0
    for cfg, r in res:
        if "threshold_met" in r:
            r["ok"] = bool(r["margin"] >= 0) if r["threshold_met"] else True
            skipped += not r["threshold_met"]
        ok &= bool(r.get("ok", True))
        rows.append({"config": cfg, **r})
    _dump({"lemma": a.lemma, "cases": len(rows), "skipped": skipped, "ok": ok, "results": rows}, a.out)
    return ok


def lemma21_report_grid(dims, ns):
    from .stein import lemma21_suite

    out = []
    for cfg, rep in lemma21_suite(dims, ns):
        for ln in rep.lines:
            out.append((cfg, ln.as_dict()))
    return out


def cmd_diagnose(a):
    spec = parse_spec(a.model)
    if spec["model"] == "colouring":
        model = _colouring(spec, a.seed, mode="mc" if a.mode == "mc" else None)
        if model.mode == "mc":
            rep = diagnose_colouring_mc(model, a.samples, a.seed, a.threads)
        else:
            rep = diagnose_exact(model.pair, model.n, model.A)
    else:
        if a.mode == "mc":
            raise ValueError("independent sums are always computed exactly")
        model = _sum_model(spec)
        rep = diagnose_exact(model.pair, model.n, model.A)
    _dump(rep.as_dict(), a.out)
    return rep.ok


def cmd_colouring(a):
    p = _floats(a.p) if a.p else None
    g = regular_graph(a.n, a.r, a.kind, a.seed)
    model = build_colouring_model(g, a.m, p, seed=a.seed)
    A = model.A
    out = {"n": model.n, "r": model.r, "m": model.m, "p": model.p, "mode": model.mode,
           "mean": model.mean, "covariance": model.covariance, "sigma2": model.sigma2, "A": A,
           "A_eigenvalues": np.sort(np.linalg.eigvals(A).real),
           "jump_law": colouring_jump_law(model.m, model.r, model.p).as_dict()}
    out["jump_law"] = {str(k): v for k, v in out["jump_law"].items()}
    checks = []
    if model.pair is not None:
        law = model.law_W()
        x = law.points.astype(float)
        mu = law.probs @ x
        cov = ((x - mu) * law.probs[:, None]).T @ (x - mu)
        s2 = np.einsum("m,mi,mj->ij", model.pair.q, model.pair.jumps, model.pair.jumps)
        checks = [
            {"name": "mean formula", "lhs": float(np.abs(mu - model.mean).max()), "rhs": 1e-12},
            {"name": "covariance formula", "lhs": float(np.abs(cov - model.covariance).max()), "rhs": 1e-12},
            {"name": "sigma2 formula", "lhs": float(np.abs(s2 - model.sigma2).max()), "rhs": 1e-12},
            {"name": "Lyapunov identity", "lhs": float(np.abs(lyapunov_identity_residual(
                model.pair, model.n, A)).max()), "rhs": 1e-10},
        ]
        for ch in checks:
            ch["ok"] = ch["lhs"] <= ch["rhs"]
    out["checks"] = checks
    out["ok"] = all(ch["ok"] for ch in checks)
    _dump(out, a.out)
    return out["ok"]


def _write_plot(curve_or_report, prefix, kind):
    from . import plotting

    if kind == "curve":
        plotting.write_curve_dat(curve_or_report, f"{prefix}.dat")
        plotting.plot_curve(curve_or_report, f"{prefix}.png")
    else:
        plotting.write_report_dat(curve_or_report, f"{prefix}.dat")
        plotting.plot_bound_report(curve_or_report, f"{prefix}.png")


def cmd_tv_curve(a):
    spec = parse_spec(a.model)
    sizes = _ints(a.sizes)
    if spec["model"] == "indep_sum":
        ys = _summands(spec)
        if len(ys) != 1:
            raise ValueError("tv-curve needs a single iid summand")
        curve = tv_curve_indep_sum(ys[0], sizes, a.tail_tol, a.threads)
    else:
        p = _floats(spec["p"]) if "p" in spec else None
        curve = tv_curve_colouring(int(spec["r"]), int(spec["m"]), sizes, p, a.mode, a.reduced,
                                   seed=a.seed, samples=a.samples, threads=a.threads)
    if a.out:
        curve.write_csv(a.out)
    else:
        for r in curve.rows:
            print(f"{r.size},{r.tv!r},{r.err!r},{r.slack!r},{r.seconds:.3f}")
    if a.plot:
        _write_plot(curve, a.plot, "curve")
    for f in curve.flags + curve.notes:
        log.warning(f)
    ok = not curve.flags
    if a.expect_ratio:
        lo, hi = _floats(a.expect_ratio)
        for s in sizes:
            if 4 * s in sizes:
                ratio = curve.ratio(s, 4 * s)
                good = lo <= ratio <= hi
                log.info("tv(%d)/tv(%d) = %.4f %s", s, 4 * s, ratio, "ok" if good else "outside band")
                ok &= good
    return ok


def cmd_bound_report(a):
    spec = parse_spec(a.model)
    if spec["model"] == "colouring":
        model = _colouring(spec, a.seed, mode="mc" if a.mode == "mc" else None)
        if model.mode == "mc":
            diag, law = diagnose_colouring_mc(model, a.samples, a.seed, a.threads), None
        else:
            diag, law = diagnose_exact(model.pair, model.n, model.A), model.law_W()
    else:
        model = _sum_model(spec)
        diag, law = diagnose_exact(model.pair, model.n, model.A), model.W
    rep = bound_report(diag, law, Path(a.model).stem)
    text = rep.to_json(a.out)
    if not a.out:
        print(text)
    if a.plot:
        _write_plot(rep, a.plot, "report")
    return rep.ok


# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    ap = argparse.ArgumentParser(prog="dnstein", parents=[common],
                                 description="Discrete normal approximation via Stein's method")
    ap.add_argument("--version", action="version", version=f"dnstein {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-dn", parents=[common], help="tabulate DN_d(nc, n Sigma)")
    s.add_argument("--dim", type=int)
    s.add_argument("--n", type=float, required=True)
    s.add_argument("--c", help="comma separated centre (default 0)")
    s.add_argument("--sigma-file", help="whitespace separated Sigma matrix")
    s.add_argument("--sigma", help="inline Sigma, rows separated by ';'")
    s.add_argument("--tail-tol", type=float, default=1e-10)
    s.add_argument("--renormalize", action="store_true")
    s.add_argument("--check", action="store_true", help="also run the moment inequalities")
    s.add_argument("--out", help="pmf CSV")
    s.add_argument("--report", help="JSON summary (default stdout)")
    s.set_defaults(func=cmd_build_dn)

    s = sub.add_parser("verify-lemma", parents=[common], help="moment and integration-by-parts checks")
    s.add_argument("--lemma", choices=["2.1", "2.2a", "2.2b", "2.2c", "2.1iii"], required=True)
    s.add_argument("--dim", default="1,2")
    s.add_argument("--n", help="comma separated sizes")
    s.add_argument("--delta", default="0.5,1")
    s.add_argument("--trials", type=int, default=20)
    s.add_argument("--out")
    s.set_defaults(func=cmd_verify_lemma)

    s = sub.add_parser("diagnose", parents=[common], help="exchangeable pair diagnostics")
    s.add_argument("--model", required=True, help="key = value model spec file")
    s.add_argument("--mode", choices=["exact", "mc"], default="exact")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("colouring", parents=[common], help="build a colouring model and audit it")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--p", help="comma separated colour probabilities")
    s.add_argument("--kind", choices=["circulant", "pairing"], default="circulant")
    s.add_argument("--out")
    s.set_defaults(func=cmd_colouring)

    s = sub.add_parser("tv-curve", parents=[common], help="total variation against size")
    s.add_argument("--model", required=True)
    s.add_argument("--sizes", required=True)
    s.add_argument("--tail-tol", type=float, default=1e-10)
    s.add_argument("--mode", choices=["auto", "exact", "mc"], default="auto")
    s.add_argument("--samples", type=int, default=200_000)
    s.add_argument("--reduced", action="store_true", help="(M_1, N_1) only, m = 2")
    s.add_argument("--expect-ratio", help="lo,hi band for tv(s)/tv(4s)")
    s.add_argument("--plot", help="prefix for .dat and .png outputs")
    s.add_argument("--out")
    s.set_defaults(func=cmd_tv_curve)

    s = sub.add_parser("bound-report", parents=[common], help="term-by-term bound brackets")
    s.add_argument("--model", required=True)
    s.add_argument("--mode", choices=["exact", "mc"], default="exact")
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--plot", help="prefix for .dat and .png outputs")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bound_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    for k, v in (("seed", 0), ("threads", 1), ("verbose", False)):
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        ok = args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
