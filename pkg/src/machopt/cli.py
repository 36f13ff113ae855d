"""Command-line entry point: ``machopt {run,study,sample,repair,metrics}``.

Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.
The default output directory is taken from ``MACHOPT_OUT_DIR``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from machopt import streams
from machopt.config import (
    MODES,
    ConfigError,
    RunConfig,
    dump_config,
    embedded_header,
    extract_embedded,
    parse_config,
)
from machopt.ipm import REGISTRY, get_problem
from machopt.metrics import (
    HvReference,
    feasibility_study,
    filter_rows,
    hypervolume2d,
    median_trace,
    rhve,
    tradeoff,
)
from machopt.nsga2 import Archive, non_dominated_sort, nsga2_run, write_individuals_csv
from machopt.problem import Problem
from machopt.repair import repair_with_info
from machopt.saloop import SARun, run_sa

log = logging.getLogger("machopt")

OUT_DIR_ENV = "MACHOPT_OUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


# ----------------------------------------------------------------- helpers


def _out_dir(args) -> Path:
    path = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "machopt-out")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _problem(name: str) -> Problem:
    try:
        return get_problem(name)
    except KeyError:
        raise UsageError(f"unknown problem {name!r}; registered: {', '.join(sorted(REGISTRY))}") from None


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_run_config(path) -> RunConfig:
    """INI file, or a CSV artifact carrying an embedded configuration."""
    text = _read_text(path)
    if text.startswith("# machopt schema"):
        return extract_embedded(path)
    return parse_config(text)


def _read_rows(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return list(reader.fieldnames or []), list(reader)


def _write_rows(path, header, rows, comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _design_matrix(rows, n_var) -> np.ndarray:
    try:
        return np.array([[float(r[f"x{i + 1}"]) for i in range(n_var)] for r in rows]).reshape(len(rows), n_var)
    except KeyError as exc:
        raise UsageError(f"missing design column {exc.args[0]}") from None


def _objective_matrix(rows, n_obj, problem: Problem | None = None) -> np.ndarray:
    """Minimization-form objectives from an archive or front CSV."""
    try:
        raw = np.array([[float(r[f"f{m + 1}_raw"]) for m in range(n_obj)] for r in rows]).reshape(len(rows), n_obj)
    except KeyError as exc:
        raise UsageError(f"missing objective column {exc.args[0]}") from None
    return problem.to_min(raw) if problem is not None else raw


# ------------------------------------------------------------------- run


def _execute(cfg: RunConfig, threads: int, holder: dict) -> Archive:
    problem = _problem(cfg.problem)
    if cfg.mode == "wr-sa":
        run = SARun(Archive(problem))
        holder["run"] = run
        holder["archive"] = run.archive
        run_sa(problem, cfg, threads=threads, run=run)
        return run.archive
    archive = Archive(problem)
    holder["archive"] = archive
    rcfg = cfg.repair if cfg.mode == "wr" else None
    return nsga2_run(problem, cfg, rcfg, threads=threads, archive=archive)


def _write_run_artifacts(out: Path, cfg: RunConfig, archive: Archive, run: SARun | None) -> None:
    header = embedded_header(cfg)
    tag = f"seed{cfg.seed}"
    problem = archive.problem
    archive.write_csv(out / f"archive_{tag}.csv", header)
    front = archive.pareto_front()
    write_individuals_csv(out / f"front_{tag}.csv", problem, front, header)
    lo, hi = problem.bounds.lower, problem.bounds.upper
    pcp = [[_fmt(v) for v in (ind.x - lo) / (hi - lo)] for ind in front]
    _write_rows(out / f"pcp_{tag}.csv", list(problem.variable_names), pcp, header)
    if run is not None:
        keys = ["cycle", "archive_size", "infill", "injected", "fallback"]
        m_keys = [f"{p}_f{m + 1}" for m in range(problem.n_obj) for p in ("winner", "mse")]
        _write_rows(
            out / f"cycles_{tag}.csv", keys + m_keys,
            [[_fmt(row.get(k, "")) for k in keys + m_keys] for row in run.cycles], header,
        )  # fmt: skip
        if run.selection:
            specs = [k for k in run.selection[0] if k not in ("cycle", "objective", "winner")]
            _write_rows(
                out / f"selection_{tag}.csv", ["cycle", "objective", "winner", *specs],
                [[r["cycle"], r["objective"], r["winner"], *(_fmt(r[s]) for s in specs)] for r in run.selection],
                header,
            )  # fmt: skip


def run_one(cfg: RunConfig, out: Path, threads: int = 1) -> Archive:
    """Execute one seeded run and write its artifacts; partial ones on failure."""
    holder: dict = {}
    try:
        archive = _execute(cfg, threads, holder)
    except Exception:
        if "archive" in holder:
            _write_run_artifacts(out, cfg, holder["archive"], holder.get("run"))
        (out / f"error_seed{cfg.seed}.txt").write_text(traceback.format_exc())
        raise
    _write_run_artifacts(out, cfg, archive, holder.get("run"))
    return archive


def _front_matrix(archive: Archive) -> np.ndarray:
    return np.array([m.f for m in archive.pareto_front()]).reshape(-1, archive.problem.n_obj)


def summarize(archives: list[Archive]) -> list[dict]:
    """Per-run feasible count, front size and HV normalized over all fronts."""
    fronts = [_front_matrix(a) for a in archives]
    rows = []
    nonempty = [f for f in fronts if len(f)]
    ref = HvReference.from_fronts(*nonempty) if nonempty else None
    for a, f in zip(archives, fronts):
        hv = hypervolume2d(f, ref) if ref is not None and a.problem.n_obj == 2 else float("nan")
        rows.append({"evaluations": len(a), "feasible": a.feasible_count, "non_dominated": len(f), "hv": hv})
    return rows


def cmd_run(args) -> int:
    cfg = _load_run_config(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in (("seed", args.seed), ("mode", args.mode), ("problem", args.problem),
                                   ("ese_max", args.ese_max)) if v is not None}  # fmt: skip
    try:
        cfg = cfg.replace(**overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _problem(cfg.problem)
    out = _out_dir(args)
    seeds = [cfg.seed + i for i in range(args.runs)]
    archives = [run_one(cfg.replace(seed=s), out, args.threads) for s in seeds]
    rows = summarize(archives)
    lines = [f"mode {cfg.mode}  problem {cfg.problem}  ese_max {cfg.ese_max}"]
    lines.append("seed  evaluations  feasible  non_dominated  hv")
    for s, r in zip(seeds, rows):
        lines.append(f"{s}  {r['evaluations']}  {r['feasible']}  {r['non_dominated']}  {r['hv']:.6f}")
    if len(archives) > 1:
        F = np.vstack([_front_matrix(a) for a in archives])
        members = [m for a in archives for m in a.pareto_front()]
        combined = [members[i] for i in sorted(non_dominated_sort(F)[0])] if len(F) else []
        write_individuals_csv(out / "combined_front.csv", archives[0].problem, combined, embedded_header(cfg))
        total_feasible = sum(r["feasible"] for r in rows)
        lines.append(f"combined  {sum(r['evaluations'] for r in rows)}  {total_feasible}  {len(combined)}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


# ----------------------------------------------------------------- study

_VARIABLE = {"n_infill": "n_infill", "k": "k", "n_doe": "n_doe"}


def parse_study(text: str) -> tuple[RunConfig, str, list[int], int, int]:
    """Split a study file into (base config, varied key, values, runs, stride).

    A study file is a run configuration plus a ``[study]`` section with keys
    ``vary`` (n_infill, k or n_doe), ``values`` (comma list), ``runs`` and
    ``stride``.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if not cp.has_section("study"):
        raise ConfigError("study file needs a [study] section")
    study = dict(cp.items("study"))
    unknown = set(study) - {"vary", "values", "runs", "stride"}
    if unknown:
        raise ConfigError(f"unknown key(s) in [study]: {', '.join(sorted(unknown))}")
    vary = study.get("vary", "")
    if vary not in _VARIABLE:
        raise ConfigError(f"[study] vary must be one of {', '.join(_VARIABLE)}")
    try:
        values = [int(v) for v in study.get("values", "").split(",") if v.strip()]
        runs = int(study.get("runs", "1"))
        stride = int(study.get("stride", "10"))
    except ValueError as exc:
        raise ConfigError(f"[study] {exc}") from None
    if not values or runs < 1 or stride < 1:
        raise ConfigError("[study] needs values, runs >= 1 and stride >= 1")
    # Strip the study section; the rest is an ordinary run config.
    cp.remove_section("study")
    rest = []
    for section in cp.sections():
        rest.append(f"[{section}]")
        rest += [f"{k} = {v}" for k, v in cp.items(section)]
    base = parse_config("\n".join(rest) + "\n") if rest else RunConfig()
    return base.replace(mode="wr-sa"), vary, values, runs, stride


def cmd_study(args) -> int:
    base, vary, values, runs, stride = parse_study(_read_text(args.config))
    if args.seed is not None:
        base = base.replace(seed=args.seed)
    try:
        configs = [base.replace(**{_VARIABLE[vary]: v}) for v in values]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    problem = _problem(base.problem)
    out = _out_dir(args)
    results = []
    for cfg, value in zip(configs, values):
        sub = out / f"{vary}_{value}"
        sub.mkdir(exist_ok=True)
        archives = []
        for i in range(runs):
            a = run_one(cfg.replace(seed=base.seed + i), sub, args.threads)
            archives.append(a)
            doe = a.members[: cfg.n_doe]
            write_individuals_csv(sub / f"doe_seed{base.seed + i}.csv", problem, doe, [f"doe seed {base.seed + i}"])
        results.append(archives)
    fronts = []
    for archives in results:
        F = np.vstack([_front_matrix(a) for a in archives])
        fronts.append(F[sorted(non_dominated_sort(F)[0])] if len(F) else F)
    ref = HvReference.from_fronts(*[f for f in fronts if len(f)])
    rows, traces = [], {}
    for value, archives, front in zip(values, results, fronts):
        per_run = [rhve(a.objectives(), a.feasible_mask(), ref, stride) for a in archives]
        traces[value] = median_trace(per_run)
        rows.append([vary, value, runs, len(front), _fmt(hypervolume2d(front, ref))])
    _write_rows(out / "study_summary.csv", ["vary", "value", "runs", "n_nds", "hv"], rows, embedded_header(base))
    counts = [t for t, _ in traces[values[0]]]
    if all([t for t, _ in tr] == counts for tr in traces.values()):
        trace_rows = [[t] + [_fmt(traces[v][i][1]) for v in values] for i, t in enumerate(counts)]
        _write_rows(out / "study_rhve.csv", ["evaluations"] + [f"{vary}={v}" for v in values], trace_rows)
    print(f"{vary:>8}  n_nds  hv")
    for r in rows:
        print(f"{r[1]:>8}  {r[3]:>5}  {float(r[4]):.6f}")
    return EXIT_OK


# ------------------------------------------------------- sample / repair


def cmd_sample(args) -> int:
    problem = _problem(args.problem)
    stats = feasibility_study(problem, args.batches, args.size, args.seed)
    rows = [["all", _fmt(1.0 - stats.feasible_fraction), "", _fmt(stats.feasible_fraction)]]
    for j in range(problem.n_constraints):
        rows.append([f"g{j + 1}", _fmt(stats.violation_fraction[j]), int(stats.rank[j]), ""])
    comments = [f"sample problem={problem.name} batches={args.batches} size={args.size} seed={args.seed}"]
    path = Path(args.out) if args.out else _out_dir(args) / "feasibility.csv"
    _write_rows(path, ["constraint", "violation_fraction", "rank", "feasible_fraction"], rows, comments)
    print(f"feasible fraction {stats.feasible_fraction:.4f} over {stats.samples} samples -> {path}")
    return EXIT_OK


def cmd_repair(args) -> int:
    problem = _problem(args.problem)
    header, rows = _read_rows(args.input)
    X = _design_matrix(rows, problem.n_var)
    cfg = _load_run_config(args.config).repair if args.config else RunConfig().repair
    out_rows = []
    for i, x in enumerate(X):
        res = repair_with_info(x, problem, cfg, streams.substream(args.seed, streams.REPAIR, i))
        xo = res.x if res.x is not None else np.full(problem.n_var, np.nan)
        out_rows.append([f"{v:.2f}" for v in xo] + [res.status, _fmt(res.distance)])
    names = [f"x{i + 1}" for i in range(problem.n_var)]
    _write_rows(args.output, names + ["status", "distance"], out_rows, [f"repair seed={args.seed}"])
    counts = {s: sum(r[-2] == s for r in out_rows) for s in ("unchanged", "repaired", "failed")}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


# --------------------------------------------------------------- metrics


def _archive_objectives(path, problem):
    _, rows = _read_rows(path)
    F = _objective_matrix(rows, problem.n_obj, problem)
    feas = np.array([r.get("feasible", "1") == "1" for r in rows], dtype=bool)
    return rows, F, feas


def cmd_metrics(args) -> int:
    problem = _problem(args.problem)
    if args.metric == "hv":
        fronts = []
        for path in args.archives:
            _, F, feas = _archive_objectives(path, problem)
            F = F[feas]
            fronts.append(F[sorted(non_dominated_sort(F)[0])] if len(F) else F)
        ref = HvReference.from_fronts(*[f for f in fronts if len(f)])
        for path, f in zip(args.archives, fronts):
            print(f"{path}  non_dominated {len(f)}  hv {hypervolume2d(f, ref):.6f}")
    elif args.metric == "rhve":
        traces = []
        for path in args.archives:
            _, F, feas = _archive_objectives(path, problem)
            traces.append((F, feas))
        ref = HvReference.from_fronts(*[F[feas] for F, feas in traces if feas.any()])
        per_run = [rhve(F, feas, ref, args.stride) for F, feas in traces]
        header = ["evaluations"] + [f"run{i + 1}" for i in range(len(per_run))]
        try:
            med = median_trace(per_run)
            header.append("median")
        except ValueError:
            med = None
        rows = []
        for i, (t, _) in enumerate(per_run[0]):
            row = [t] + [_fmt(tr[i][1]) if i < len(tr) else "" for tr in per_run]
            if med is not None:
                row.append(_fmt(med[i][1]))
            rows.append(row)
        path = Path(args.out) if args.out else _out_dir(args) / "rhve.csv"
        _write_rows(path, header, rows)
        print(f"rhve trace -> {path}")
    elif args.metric == "tradeoff":
        header, rows = _read_rows(args.front)
        F = _objective_matrix(rows, problem.n_obj, problem)
        ranked = tradeoff(F)[: args.top] if args.top else tradeoff(F)
        out_rows = [[rows[i][h] for h in header] + [_fmt(v)] for i, v in ranked]
        if args.out:
            _write_rows(args.out, header + ["tradeoff"], out_rows)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header + ["tradeoff"])
        w.writerows(out_rows)
    elif args.metric == "filter":
        header, rows = _read_rows(args.input)
        rules = [_parse_rule(r, header) for r in args.rule]
        kept = filter_rows(rows, rules)
        _write_rows(args.out, header, [[r[h] for h in header] for r in kept])
        print(f"kept {len(kept)} of {len(rows)} rows -> {args.out}")
    return EXIT_OK


def _parse_rule(text: str, header):
    for op in ("<=", ">=", "<", ">"):
        if op in text:
            col, thr = text.split(op, 1)
            col = col.strip()
            if col not in header:
                raise UsageError(f"unknown column {col!r} in rule {text!r}")
            try:
                return col, op, float(thr)
            except ValueError:
                raise UsageError(f"bad threshold in rule {text!r}") from None
    raise UsageError(f"rule {text!r} needs one of <, <=, >, >=")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="machopt", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="INI config (or a CSV artifact with an embedded config)")
        sp.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./machopt-out)")
        sp.add_argument("--threads", type=int, default=1)

    r = sub.add_parser("run", help="single or multi-seed optimization runs")
    common(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--problem")
    r.add_argument("--ese-max", type=int)
    r.add_argument("--runs", type=int, default=1, help="consecutive seeds starting at --seed")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("study", help="hyperparameter study over N, k or N_DOE")
    common(s)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_study)

    sm = sub.add_parser("sample", help="LHS feasibility statistics")
    common(sm, config=False)
    sm.add_argument("--problem", default="ipm-proxy-v1")
    sm.add_argument("--batches", type=int, default=100)
    sm.add_argument("--size", type=int, default=100)
    sm.add_argument("--seed", type=int, default=7)
    sm.add_argument("--out")
    sm.set_defaults(func=cmd_sample)

    rp = sub.add_parser("repair", help="repair designs from a CSV")
    common(rp)
    rp.add_argument("--problem", default="ipm-proxy-v1")
    rp.add_argument("--in", dest="input", required=True)
    rp.add_argument("--out", dest="output", required=True)
    rp.add_argument("--seed", type=int, default=0)
    rp.set_defaults(func=cmd_repair)

    m = sub.add_parser("metrics", help="hypervolume, RHVE, trade-off and column filters")
    msub = m.add_subparsers(dest="metric", required=True)
    for name in ("hv", "rhve"):
        mp = msub.add_parser(name)
        mp.add_argument("archives", nargs="+")
        mp.add_argument("--problem", default="ipm-proxy-v1")
        mp.add_argument("--out-dir")
        if name == "rhve":
            mp.add_argument("--stride", type=int, default=10)
            mp.add_argument("--out")
    t = msub.add_parser("tradeoff")
    t.add_argument("--front", required=True)
    t.add_argument("--top", type=int, default=0)
    t.add_argument("--problem", default="ipm-proxy-v1")
    t.add_argument("--out")
    f = msub.add_parser("filter", help="screen rows by auxiliary metric columns")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--rule", action="append", required=True, help="e.g. 'thdv<=0.05'")
    f.add_argument("--out", required=True)
    f.add_argument("--problem", default="ipm-proxy-v1")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level failure report
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
