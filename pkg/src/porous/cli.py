"""Command-line front end: build, audit, and report aggregation.

Subcommands:
  build   construct a hole family from a config and audit its invariants
  audit   run selected verification suites against a family (+ corpus)
  report  merge audit reports into flat CSV and plot-ready series

Exit codes: 0 all-pass, 1 usage or input error, 2 any audit or construction
failure, 3 indeterminate results with no failures.  Every artifact carries
the config hash and seed; apart from the run manifest (which records wall
times), outputs are byte-reproducible.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import LoadedConfig, load_config
from .construction import (build_family, deserialize_family,
                           sample_truncated_P, serialize_family, truncated_P)
from .errors import (AuditFailure, ConfigError, ConstructionFailure,
                     ParseError, PorousError, PreconditionError)
from .surfaces import generate_from_spec, load_corpus_spec
from .verification import (AuditReport, AuditRow, alpha_relaxed,
                           analysis_suite, budget, coverage_deficit,
                           emit_report, family_invariant_audit,
                           hole_intersection_mass, ledger_rows, mode_map,
                           porosity_witness)

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_INDETERMINATE = 3

WHICH_CHOICES = ("construction", "analysis", "cover", "budget", "porosity",
                 "holes-mass")
_STATUS_EXIT = {"pass": EXIT_PASS, "fail": EXIT_FAIL,
                "indeterminate": EXIT_INDETERMINATE}


def _manifest(subcommand: str, cfg: LoadedConfig, inputs: dict,
              outputs: dict, started: float) -> dict:
    # wall-clock stamps live only here, never in reports or families
    return {
        "tool": "porous",
        "version": __version__,
        "subcommand": subcommand,
        "config_path": cfg.path,
        "config_hash": cfg.config_hash,
        "seed": cfg.build.seed,
        "inputs": inputs,
        "outputs": outputs,
        "started_unix": started,
        "finished_unix": time.time(),
    }


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _report_config(cfg: LoadedConfig) -> dict:
    build = cfg.build
    return {
        "config_hash": cfg.config_hash,
        "seed": build.seed,
        "parameters": cfg.doc,
        "mode_map": mode_map(build.E, build.epsilons[: build.depth],
                             build.stop_fractions[: build.depth]),
    }


def _load(args) -> LoadedConfig:
    cfg = load_config(args.config)
    cfg = cfg.with_seed(args.seed)
    if getattr(args, "workers", None):
        cfg = LoadedConfig(path=cfg.path, raw=cfg.raw, doc=cfg.doc,
                           config_hash=cfg.config_hash, build=cfg.build,
                           audit=cfg.audit, workers=int(args.workers))
    return cfg


# ---------------------------------------------------------------------------
# build
# ---------------------------------------------------------------------------

def cmd_build(args) -> int:
    started = time.time()
    cfg = _load(args)
    out = Path(args.out)
    try:
        family, log = build_family(cfg.build)
    except ConstructionFailure as exc:
        print(f"error: construction failed: {exc}", file=sys.stderr)
        for key, val in exc.details.items():
            print(f"  {key}: {val}", file=sys.stderr)
        return EXIT_FAIL

    family_path = out / "family.jsonl"
    _write(family_path, serialize_family(family))

    rows = family_invariant_audit(family, seed=cfg.audit.seed,
                                  floor_samples=cfg.audit.floor_samples)
    report = emit_report(_report_config(cfg), construction_audits=rows)
    _write(out / "build_report.json", report.to_json())
    _write(out / "build_report.csv", report.to_csv())
    _write(out / "build_log.json",
           json.dumps(log, separators=(",", ":"), default=float) + "\n")
    _write(out / "manifest-build.json", json.dumps(_manifest(
        "build", cfg, inputs={"config": cfg.path},
        outputs={"family": str(family_path),
                 "report": str(out / "build_report.json")},
        started=started), indent=2) + "\n")
    print(f"built {len(family.ks)} holes -> {family_path} "
          f"[{report.verdicts['overall']}]")
    return _STATUS_EXIT[report.verdicts["overall"]]


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

def _parse_which(raw: Optional[str]) -> tuple[str, ...]:
    if not raw:
        return WHICH_CHOICES
    picked = tuple(part.strip() for part in raw.split(",") if part.strip())
    bad = [p for p in picked if p not in WHICH_CHOICES]
    if bad:
        raise ConfigError(
            f"unknown audit selection {bad}; choose from "
            + ", ".join(WHICH_CHOICES))
    return picked


def _construction_rows(family, cfg: LoadedConfig) -> list[AuditRow]:
    try:
        return family_invariant_audit(family, seed=cfg.audit.seed,
                                      floor_samples=cfg.audit.floor_samples)
    except AuditFailure as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return [AuditRow(id="construction/violation",
                         check="disjoint-or-nested",
                         measured=1.0, bound=0.0, margin=-1.0,
                         status="fail")]


def _cover_rows(family, cfg: LoadedConfig) -> list[AuditRow]:
    rows = []
    for k in range(1, family.depth + 1):
        deficit = coverage_deficit(
            family, m=family.plane(k).index, k=k,
            stop_fraction=cfg.build.stop_fractions[k - 1],
            budget_cfg=cfg.audit.budget, seed=cfg.audit.seed)
        upper = deficit.estimate.upper()
        rows.append(AuditRow(
            id=f"cover/stage-{k}", check="plane-cover-deficit",
            measured=upper, bound=deficit.bound,
            margin=deficit.bound - upper,
            status="pass" if deficit.ok else "fail"))
    return rows


def _porosity_rows(family, cfg: LoadedConfig) -> list[AuditRow]:
    points = sample_truncated_P(truncated_P(family),
                                cfg.audit.porosity_samples,
                                seed=cfg.audit.seed)
    floor = 1.0 / family.L - cfg.audit.porosity_tol
    worst = float("inf")
    for point in points:
        try:
            worst = min(worst, porosity_witness(
                point, family, tol=cfg.audit.porosity_tol).ratio)
        except AuditFailure as exc:
            print(f"audit failure: {exc}", file=sys.stderr)
            return [AuditRow(id="porosity/witness", check="porosity-witness",
                             measured=0.0, bound=floor, margin=-floor,
                             status="fail")]
    return [AuditRow(
        id="porosity/witness", check="porosity-witness",
        measured=worst, bound=floor, margin=worst - floor,
        status="pass" if worst >= floor else "fail")]


def _budget_rows(entries, family, cfg: LoadedConfig) -> list[AuditRow]:
    def one(entry):
        return ledger_rows(budget(
            entry.patch, family, budget_cfg=cfg.audit.budget,
            dbound_budget=cfg.audit.dbound_budget, seed=cfg.audit.seed,
            c_ledger=cfg.audit.c_ledger, c_dbound=cfg.audit.c_dbound))

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_entry = list(pool.map(one, entries))
    else:
        per_entry = [one(entry) for entry in entries]
    return [row for rows in per_entry for row in rows]


def _holes_mass_rows(entries, family, cfg: LoadedConfig) -> list[AuditRow]:
    quarter_alpha = alpha_relaxed(family.n, family.s,
                                  cfg.build.stop_fractions[0]) / 4.0
    rows = []
    for entry in entries:
        check = hole_intersection_mass(entry.patch, family,
                                       budget_cfg=cfg.audit.budget,
                                       seed=cfg.audit.seed)
        upper = check.mass.upper()
        rows.append(AuditRow(
            id=f"holes-mass/{entry.patch.source}", check="graph-hole-mass",
            measured=upper, bound=check.cap, margin=check.cap - upper,
            status="pass" if check.ok else "fail"))
        if entry.kind == "plane":
            rows.append(AuditRow(
                id=f"holes-mass/{entry.patch.source}/alpha",
                check="plane-mass-alpha", measured=upper,
                bound=quarter_alpha, margin=quarter_alpha - upper,
                status="pass" if upper <= quarter_alpha else "fail"))
    return rows


def cmd_audit(args) -> int:
    started = time.time()
    cfg = _load(args)
    which = _parse_which(args.which)
    out = Path(args.out)

    family = None
    needs_family = [w for w in which if w != "analysis"]
    if args.family is None and needs_family:
        raise ConfigError(
            f"--family is required for audits {needs_family}")
    if args.family is not None:
        family_path = Path(args.family)
        if not family_path.exists():
            raise ConfigError(f"family file not found: {family_path}")
        family = deserialize_family(family_path.read_text())
        if family.config_hash and family.config_hash != cfg.config_hash:
            raise ConfigError(
                f"family was built under config hash "
                f"{family.config_hash[:12]}..., loaded config hashes to "
                f"{cfg.config_hash[:12]}...; refusing to mix")

    entries = []
    needs_corpus = [w for w in which if w in ("budget", "holes-mass")]
    if needs_corpus:
        if args.corpus is None:
            raise ConfigError(
                f"--corpus is required for audits {needs_corpus}")
        corpus_path = Path(args.corpus)
        if not corpus_path.exists():
            raise ConfigError(f"corpus spec not found: {corpus_path}")
        entries = generate_from_spec(load_corpus_spec(corpus_path),
                                     window=family.window)

    construction_rows: list[AuditRow] = []
    analysis_rows: list[AuditRow] = []
    budget_rows: list[AuditRow] = []
    porosity_rows: list[AuditRow] = []
    if "construction" in which:
        construction_rows += _construction_rows(family, cfg)
    if "cover" in which:
        construction_rows += _cover_rows(family, cfg)
    if "analysis" in which:
        analysis_rows += analysis_suite(seed=cfg.audit.seed)
    if "budget" in which:
        budget_rows += _budget_rows(entries, family, cfg)
    if "holes-mass" in which:
        budget_rows += _holes_mass_rows(entries, family, cfg)
    if "porosity" in which:
        porosity_rows += _porosity_rows(family, cfg)

    for row in construction_rows:
        if row.status == "fail":
            print(f"audit failure: {row.id}: measured {row.measured:.6g} "
                  f"vs bound {row.bound:.6g}", file=sys.stderr)
    report = emit_report(_report_config(cfg),
                         construction_audits=construction_rows,
                         analysis_audits=analysis_rows,
                         budget_ledgers=budget_rows,
                         porosity=porosity_rows)
    _write(out / "audit_report.json", report.to_json())
    _write(out / "audit_report.csv", report.to_csv())
    _write(out / "manifest-audit.json", json.dumps(_manifest(
        "audit", cfg,
        inputs={"config": cfg.path, "family": args.family,
                "corpus": args.corpus, "which": ",".join(which)},
        outputs={"report": str(out / "audit_report.json")},
        started=started), indent=2) + "\n")
    verdicts = report.verdicts
    print(f"audit [{', '.join(which)}]: {verdicts['pass']} pass, "
          f"{verdicts['fail']} fail, {verdicts['indeterminate']} "
          f"indeterminate -> {verdicts['overall']}")
    return _STATUS_EXIT[verdicts["overall"]]


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"report not found: {p}")
        try:
            reports.append(AuditReport.from_json(p.read_text()))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"cannot parse report {p}: {exc}") from exc

    hashes = {r.config.get("config_hash") for r in reports}
    if len(hashes) > 1:
        raise ConfigError(
            "refusing to merge reports with mixed config hashes: "
            + ", ".join(sorted(str(h)[:12] for h in hashes)))

    merged = AuditReport(
        config=reports[0].config,
        construction_audits=[row for r in reports
                             for row in r.construction_audits],
        analysis_audits=[row for r in reports for row in r.analysis_audits],
        budget_ledgers=[row for r in reports for row in r.budget_ledgers],
        porosity=[row for r in reports for row in r.porosity],
        verdicts={})
    statuses = [row.status for row in merged.rows()]
    overall = ("fail" if "fail" in statuses
               else "indeterminate" if "indeterminate" in statuses
               else "pass")
    merged = AuditReport(
        config=merged.config,
        construction_audits=merged.construction_audits,
        analysis_audits=merged.analysis_audits,
        budget_ledgers=merged.budget_ledgers,
        porosity=merged.porosity,
        verdicts={"overall": overall,
                  "pass": statuses.count("pass"),
                  "fail": statuses.count("fail"),
                  "indeterminate": statuses.count("indeterminate")})

    out = Path(args.out)
    _write(out / "merged_report.json", merged.to_json())
    _write(out / "merged_report.csv", merged.to_csv())
    # plot-ready: one series per check, rows sorted by (check, id)
    series_rows = sorted(merged.rows(), key=lambda r: (r.check, r.id))
    lines = ["check,id,measured,bound,margin"]
    lines += [f"{r.check},{r.id},{r.measured!r},{r.bound!r},{r.margin!r}"
              for r in series_rows]
    _write(out / "series.csv", "\n".join(lines) + "\n")
    print(f"merged {len(reports)} report(s), {len(statuses)} rows "
          f"-> {out / 'merged_report.json'} [{overall}]")
    return EXIT_PASS


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porous",
        description="Build and audit directionally porous hole families.")
    parser.add_argument("--version", action="version",
                        version=f"porous {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="construct a family from a config")
    build.add_argument("--config", required=True, help="config JSON path")
    build.add_argument("--out", default="porous-out", help="output directory")
    build.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    build.set_defaults(func=cmd_build)

    audit = sub.add_parser("audit", help="verify a family against a corpus")
    audit.add_argument("--config", required=True, help="config JSON path")
    audit.add_argument("--family", default=None, help="family JSON-lines path")
    audit.add_argument("--corpus", default=None, help="corpus spec path")
    audit.add_argument("--out", default="porous-out", help="output directory")
    audit.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    audit.add_argument("--workers", type=int, default=None,
                       help="worker threads for per-field audits")
    audit.add_argument("--which", default=None,
                       help="comma-separated subset of: "
                       + ", ".join(WHICH_CHOICES))
    audit.set_defaults(func=cmd_audit)

    report = sub.add_parser("report", help="merge audit reports")
    report.add_argument("reports", nargs="+", help="audit report JSON paths")
    report.add_argument("--out", default="porous-out",
                        help="output directory")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuditFailure as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except PorousError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
