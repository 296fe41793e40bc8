"""Command-line experiment runner.

    arakelov run <config.json> [--out DIR] [--threads N]
    arakelov validate <config.json>

Exit status: 0 success, 1 unreadable file, 2 schema violation, 3 cap
exceeded, 4 numeric failure.  Outputs are a JSON report plus CSV tables whose
bytes depend only on the configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import islice
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from pydantic import ValidationError

from .asympt import (
    asymptotic_measure,
    count_effective_sections,
    inequality_chain_check,
    sectional_capacity_estimate,
)
from .config import CAPS, ExperimentConfig, load_config, schema_errors
from .equidist import (
    PhiEstimator,
    Verdict,
    additivity_verdict,
    default_dictionary,
    directional_derivative,
    limit_measure,
    points_from_spec,
)
from .errors import ArakelovError, CapExceeded
from .heights import AdelicMetric, AlgebraicPoint, MetricTwist, height, height_error_bound, orbit_moments
from .lattices import evaluation_bound_check, random_injective_map, slope_inequality_check
from .measures import EmpiricalMeasure, sphere_coords, wasserstein_circle
from .sections import SectionSpace
from .semigroup import HalfSpaceSemigroup, HomogeneousFunctionOnSemigroup, random_case, sandwich_differential

EXIT_OK, EXIT_IO, EXIT_SCHEMA, EXIT_CAP, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _clean(obj: Any) -> Any:
    """Plain JSON types; non-finite floats become strings so the output stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _pmap(fn: Callable, items: Sequence, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _points(cfg: ExperimentConfig) -> list[AlgebraicPoint]:
    src = points_from_spec(cfg.sequence.as_mapping())
    return list(islice(src, cfg.horizon) if cfg.horizon else src)


def _dictionary(cfg: ExperimentConfig) -> list[MetricTwist]:
    if cfg.dictionary is None:
        return default_dictionary(cfg.max_degree)
    return [t.build() for t in cfg.dictionary]


# -- experiment kinds -------------------------------------------------------
# each returns (report dict, {file name: csv text})


def run_heights(cfg: ExperimentConfig, threads: int):
    M = cfg.metric.build()
    pts = _points(cfg)

    def one(x: AlgebraicPoint):
        return height(x, M), height_error_bound(x, M)

    vals = _pmap(one, pts, threads)
    rows = [[i + 1, x.label, x.degree, x.irreducibility, h, e] for i, (x, (h, e)) in enumerate(zip(pts, vals))]
    report = {"metric": M.to_json(), "points": [
        {"index": r[0], "label": r[1], "degree": r[2], "irreducibility": r[3], "height": r[4], "error_bound": r[5]}
        for r in rows]}
    return report, {"heights.csv": _csv(["index", "label", "degree", "irreducibility", "height", "error_bound"],
                                        rows)}


def run_orbit_measure(cfg: ExperimentConfig, threads: int):
    pts = _points(cfg)
    haar = EmpiricalMeasure.haar_grid(1000)
    summary, atoms, moments = [], [], []
    for i, x in enumerate(pts, 1):
        m = x.orbit_measure()
        u1, u2, u3 = sphere_coords(m.points)
        for k, (z, w) in enumerate(zip(m.points, m.weights)):
            re, im = (z.real, z.imag) if np.isfinite(z) else ("inf", "inf")
            atoms.append([i, x.label, k, re, im, u1[k], u2[k], u3[k], w])
        mom = orbit_moments(x, cfg.max_degree)
        for idx, v in sorted(mom.items()):
            moments.append([i, x.label, *idx, v])
        row = {"index": i, "label": x.label, "degree": x.degree,
               "root_radius_bound": 0.0 if x.is_infinity else x.root_set.max_radius,
               "on_unit_circle": m.on_unit_circle()}
        if row["on_unit_circle"]:
            row["w1_to_haar_grid"] = wasserstein_circle(m, haar)
        summary.append(row)
    return {"points": summary}, {
        "orbit_atoms.csv": _csv(["index", "label", "atom", "re", "im", "u1", "u2", "u3", "mass"], atoms),
        "orbit_moments.csv": _csv(["index", "label", "i", "j", "k", "integral"], moments),
    }


def run_equidist(cfg: ExperimentConfig, threads: int):
    M = cfg.metric.build()
    est = PhiEstimator(cfg.sequence.as_mapping(), M, cfg.window, cfg.max_degree)
    N = est.extend(cfg.horizon or CAPS["horizon"])
    if cfg.horizon and N < cfg.horizon:
        raise ValueError(f"sequence has only {N} terms, horizon {cfg.horizon} requested")
    dic = _dictionary(cfg)
    rep = additivity_verdict(est, dic, N, cfg.tol)
    trend = []
    for f in dic:
        d = directional_derivative(est, f, cfg.m_list, N, cfg.tol, check=False)
        for m, v in d.per_m.items():
            trend.append([f.label(), m, v, d.stabilized])
    report: dict = {"metric": M.to_json(), **rep.to_json()}
    files = {
        "pairs.csv": _csv(["f", "g", "D_f", "D_g", "D_fg", "gap", "stabilized"],
                          [[r["f"], r["g"], r["D_f"], r["D_g"], r["D_fg"], r["gap"], r["stabilized"]]
                           for r in rep.per_pair]),
        "derivatives.csv": _csv(["twist", "m", "value", "stabilized"], trend),
    }
    if rep.verdict is Verdict.EQUIDISTRIBUTES or cfg.force_limit_measure:
        lm = limit_measure(est, dic, N, cfg.tol, force=cfg.force_limit_measure, verdict=rep)
        report["limit_measure"] = lm.to_json()
        if lm.density is not None:
            d = lm.density
            files["limit_density.csv"] = _csv(["theta", "density"], list(zip(d.theta, d.density)))
    else:
        report["limit_measure"] = {"refused": f"verdict is {rep.verdict.value}"}
    return report, files


def _trend_files(rep, prefix: str = "") -> dict:
    return {f"{prefix}trend.csv": rep.trend_csv(), f"{prefix}minima.csv": rep.minima_csv(),
            f"{prefix}measures.csv": rep.measures_csv()}


def run_asymptotic(cfg: ExperimentConfig, threads: int):
    M = cfg.metric.build()
    rep = asymptotic_measure(M, cfg.n_list, cfg.method, threads=threads)
    chain = inequality_chain_check(M, cfg.n_list, report=rep)
    report = {**rep.to_json(), "inequality_chain": chain.to_json()}
    files = _trend_files(rep)
    if cfg.capacity:
        cap = sectional_capacity_estimate(M, cfg.capacity_n_list, cfg.samples, cfg.seed)
        report["capacity"] = cap.to_json()
        cols = ["n", "deg", "deg_std_error", "minkowski_lower", "minkowski_upper", "mu_n", "mu_n_std_error"]
        files["capacity.csv"] = _csv(cols, [[r[c] for c in cols] for r in cap.rows])
    return report, files


def _metric_suite() -> list[AdelicMetric]:
    out = [AdelicMetric("canonical"), AdelicMetric("fubini-study")]
    out += [AdelicMetric("canonical", MetricTwist.constant(c)) for c in (0.5, -0.5, 1.0)]
    return out


def run_chain(cfg: ExperimentConfig, threads: int):
    metrics = [m.build() for m in cfg.metrics] if cfg.metrics else _metric_suite()

    def one(M: AdelicMetric):
        rep = asymptotic_measure(M, cfg.n_list, cfg.method)
        return rep, inequality_chain_check(M, cfg.n_list, report=rep)

    results = _pmap(one, metrics, threads)
    rows, out = [], []
    for M, (rep, ch) in zip(metrics, results):
        label = f"{M.base}+{M.twist.label()}"
        rows.append([label, ch.mean, ch.positive_part_mean, ch.sup_support, *ch.sup_support_bounds, ch.mu_ess,
                     ch.big, ch.measure_chain, ch.ess_comparison, ch.ok])
        out.append({"metric": M.to_json(), **ch.to_json()})
    violations = sum(len(ch.violations) for _, ch in results)
    return {"metrics": out, "violations": violations}, {
        "chain.csv": _csv(["metric", "mean", "positive_part_mean", "sup_support", "sup_support_lower",
                           "sup_support_upper", "mu_ess", "arithmetically_big", "measure_chain",
                           "ess_comparison", "ok"], rows),
    }


def run_lattices(cfg: ExperimentConfig, threads: int):
    rng = np.random.default_rng(cfg.seed)
    slope_rows = []
    for i in range(cfg.cases):
        f = random_injective_map(rng)
        r = slope_inequality_check(f)
        slope_rows.append([i, f.source.rank, f.target.rank, r.mu_source.upper, r.mu_target.lower,
                           r.height.value, r.slack, r.ok])
    M = cfg.metric.build()
    eval_rows = []
    for n in cfg.evaluation_n:
        fams = {"torsion": [AlgebraicPoint.cyclotomic(k) for k in range(1, n + 3)],
                "integer": [AlgebraicPoint.rational(k) for k in range(0, n + 2)]}
        for fam, pts in fams.items():
            r = evaluation_bound_check(pts, M, n)
            eval_rows.append([fam, n, r.mu_max.lower, r.mu_max.upper, r.rhs, r.status])
    count_rows = []
    for n in range(cfg.count_n_max + 1):
        v = count_effective_sections(SectionSpace(n, M))
        count_rows.append([n, v, math.log(2 * n + 3), True])
    report = {
        "slope_inequality": {"cases": cfg.cases, "failures": sum(not r[-1] for r in slope_rows)},
        "evaluation_bound": {"checks": len(eval_rows), "violated": sum(r[-1] == "violated" for r in eval_rows),
                             "inconclusive": sum(r[-1] == "inconclusive" for r in eval_rows)},
        "effective_sections": [{"n": r[0], "log_count": r[1], "exact": True} for r in count_rows],
    }
    return report, {
        "slope.csv": _csv(["case", "source_rank", "target_rank", "mu_max_source_upper", "mu_max_target_lower",
                           "height", "slack", "ok"], slope_rows),
        "evaluation.csv": _csv(["family", "n", "mu_max_lower", "mu_max_upper", "rhs", "status"], eval_rows),
        "effective_sections.csv": _csv(["n", "log_count", "log_2n_plus_3", "exact"], count_rows),
    }


def run_semigroup(cfg: ExperimentConfig, threads: int):
    rng = np.random.default_rng(cfg.seed)
    cases = []
    for i in range(cfg.cases):
        tie = i % 2 == 1
        f, x, w = random_case(rng, tie=tie)
        g = HomogeneousFunctionOnSemigroup.linear(f.active_forms(x)[0][0], f.semigroup)
        cases.append((f"random-{i}", tie, f, g, x, w))
    if cfg.semigroup is not None:
        s = cfg.semigroup
        C = HalfSpaceSemigroup(len(s.x), s.constraints)
        f = HomogeneousFunctionOnSemigroup(s.f, C)
        g = HomogeneousFunctionOnSemigroup(s.g, C) if s.g else None
        cases.append(("explicit", None, f, g, tuple(s.x), tuple(s.w)))
    rows, failures = [], 0
    for name, tie, f, g, x, w in cases:
        r = sandwich_differential(f, g, x, w, cfg.semigroup_N)
        ok = r.ok and (tie is None or r.differentiable != tie)
        failures += not ok
        rows.append([name, json.dumps(f.to_json()["terms"]), json.dumps(list(x)), json.dumps(list(w)), r.n0,
                     r.limit, r.predicted, r.differentiable, r.additive_on_axes, r.converges_to_g, ok])
    return {"cases": len(cases), "failures": failures}, {
        "semigroup.csv": _csv(["case", "terms", "x", "w", "n0", "limit", "predicted", "differentiable",
                               "additive_on_axes", "converges_to_g", "ok"], rows),
    }


RUNNERS = {
    "heights": run_heights,
    "orbit-measure": run_orbit_measure,
    "equidist-verdict": run_equidist,
    "asymptotic-measure": run_asymptotic,
    "invariants-chain": run_chain,
    "lattice-properties": run_lattices,
    "semigroup-harness": run_semigroup,
}


def run(cfg: ExperimentConfig, out: str | Path | None = None, threads: int = 1) -> Path:
    """Execute ``cfg`` and write ``<prefix>report.json`` plus CSV tables; returns the output directory."""
    cfg.check_caps()
    report, files = RUNNERS[cfg.kind](cfg, max(1, int(threads)))
    outdir = Path(out or cfg.output.dir)
    outdir.mkdir(parents=True, exist_ok=True)
    full = {"schema_version": cfg.schema_version, "kind": cfg.kind, "config": cfg.model_dump(mode="json"),
            "result": report}
    pre = cfg.output.prefix
    (outdir / f"{pre}report.json").write_text(json.dumps(_clean(full), indent=2, sort_keys=True) + "\n")
    for name in sorted(files):
        (outdir / f"{pre}{name}").write_text(files[name])
    return outdir


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="arakelov", description="Heights, slopes and equidistribution on P^1.")
    sub = ap.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", help="run an experiment")
    pr.add_argument("config")
    pr.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    pr.add_argument("--threads", type=int, default=1)
    pv = sub.add_parser("validate", help="check a configuration file without running it")
    pv.add_argument("config")
    args = ap.parse_args(argv)

    if args.command == "validate":
        try:
            errs = schema_errors(args.config)
        except OSError as e:
            print(f"cannot read {args.config}: {e}", file=sys.stderr)
            return EXIT_IO
        if errs:
            for e in errs:
                print(e)
            return EXIT_SCHEMA
        print("OK")
        return EXIT_OK

    try:
        cfg = load_config(args.config)
    except OSError as e:
        print(f"cannot read {args.config}: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, json.JSONDecodeError):
        for e in schema_errors(args.config):
            print(e, file=sys.stderr)
        return EXIT_SCHEMA
    try:
        outdir = run(cfg, args.out, args.threads)
    except CapExceeded as e:
        print(f"cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP
    except (ArakelovError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    print(outdir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
