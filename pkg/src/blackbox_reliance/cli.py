"""Command-line interface.

Subcommands::

    simulate   simulate the admissions population and write it as CSV
    bands      conservative reliance bands for the admissions survey
    reliance   fit an oracle (per group) and estimate reliance per x1 set
    rank       reliance per group plus orderings by normalized reliance
    parity     bootstrap test of r = b under square loss

Reports are written to ``--out`` (default: ``$BLACKBOX_RELIANCE_OUTPUT_DIR``
or ``./reliance_output``) as JSON with sorted keys plus CSV tables. Exit
codes: 0 success, 1 usage or configuration error, 2 data error, 3
numerical failure. Errors are printed to stderr as one line::

    error: code=<exit code> kind=<kind> message=<text>
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import admissions
from .config import RunConfig, default_output_dir
from .errors import RelianceError, UsageError
from .reliance import (bootstrap_reliance, dumps, estimate_reliance, order_groups, parity_test,
                       rank_reliance, rows_to_csv)
from .tabular import Dataset, load_chunks, load_csv, load_schema, split_by_group

BAND_CLAIM_MIN_N = 5000


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _workers(threads: int | None) -> int:
    if threads is None:
        return 1
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    return max(1, min(threads, os.cpu_count() or 1))


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- configuration -----------------------------------------------------------

def _config(args, base: RunConfig | None = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_file(args.config, cfg)
    overrides = {
        "format": getattr(args, "format", None), "path": getattr(args, "input", None),
        "schema": getattr(args, "schema", None), "n": getattr(args, "n", None),
        "survey_offset": getattr(args, "survey_offset", None),
        "x1": [tuple(t.strip() for t in s.split(",") if t.strip()) for s in args.x1] if getattr(args, "x1", None)
        else None,
        "x2": getattr(args, "x2", None), "outcome": getattr(args, "outcome", None),
        "loss": getattr(args, "loss", None), "lam": getattr(args, "lam", None),
        "risk_columns": getattr(args, "risk_columns", None), "fitter": getattr(args, "fitter", None),
        "covariates": getattr(args, "covariates", None), "tuning_c": getattr(args, "tuning_c", None),
        "intercept": False if getattr(args, "no_intercept", False) else None,
        "group": getattr(args, "group", None), "method": getattr(args, "method", None),
        "bootstrap": getattr(args, "bootstrap", None), "refit": True if getattr(args, "refit", False) else None,
        "seed": getattr(args, "seed", None), "output_dir": getattr(args, "out", None),
        "validate": True if getattr(args, "validate", False) else None,
    }
    cfg.update(overrides)
    return cfg


def load_input(cfg: RunConfig) -> Dataset:
    if cfg.format == "csv":
        return load_csv(cfg.path, load_schema(cfg.schema))
    if cfg.format == "chunks":
        return load_chunks(cfg.path)
    return admissions.simulate(cfg.n, cfg.seed, cfg.survey_offset)


# -- simulate / bands --------------------------------------------------------

def _admissions_config(args) -> RunConfig:
    cfg = _config(args, RunConfig(format="admissions", seed=admissions.DEFAULT_SEED))
    if cfg.n < 1:
        raise UsageError(f"--n must be >= 1; got {cfg.n}")
    return cfg


def cmd_simulate(args) -> int:
    cfg = _admissions_config(args)
    data = admissions.simulate(cfg.n, cfg.seed, cfg.survey_offset)
    out = _out_dir(cfg)
    data.to_csv(out / "admissions.csv")
    summary = admissions.summarize(data)
    summary["exact_response_rate"] = admissions.exact_response_rate(cfg.survey_offset)
    _write(out / "simulate.json", dumps({"command": "simulate", "config": cfg.to_dict(), "summary": summary}))
    print(f"n={summary['n']} respondents={summary['respondents']} "
          f"respondent_acceptance_rate={summary['acceptance_rate_respondents']:.4f}")
    return 0


def cmd_bands(args) -> int:
    cfg = _admissions_config(args)
    if cfg.n < 100:
        raise UsageError(f"bands needs --n >= 100; got {cfg.n}")
    result = admissions.run_band_analysis(cfg.n, cfg.seed, args.p_z1, cfg.survey_offset, _workers(args.threads))
    out = _out_dir(cfg)
    result.to_csv(out / "bands.csv")
    claims = result.ordering_claims()
    asserted = cfg.n >= BAND_CLAIM_MIN_N
    report = {"command": "bands", "config": cfg.to_dict(), "p_z1_override": args.p_z1,
              "result": result.to_dict(), "ordering_asserted": asserted}
    _write(out / "bands.json", dumps(report))
    for row in result.rows():
        print(f"{row['covariate']}: [{row['r_min']:.4f}, {row['r_max']:.4f}] true={row['true_value']:.4f}")
    above = claims["race_above_score"] and claims["sex_above_score"]
    if asserted:
        print(f"race & sex above score: {'PASS' if above else 'FAIL'}")
        print(f"race & sex overlap: {'PASS' if claims['race_sex_overlap'] else 'FAIL'}")
    else:
        print(f"race & sex above score: INFO ({above}; n={cfg.n} < {BAND_CLAIM_MIN_N}, not asserted)")
        print(f"race & sex overlap: INFO ({claims['race_sex_overlap']})")
    return 0


# -- reliance / rank / parity -------------------------------------------------

def _groups(cfg: RunConfig, data: Dataset) -> dict[str, Dataset]:
    return split_by_group(data, cfg.group) if cfg.group else {"all": data}


def _prepare(cfg: RunConfig):
    cfg.check()
    data = load_input(cfg)
    cfg.check_columns(data.names)
    partitions = cfg.partitions()
    return data, partitions


def _audit(cfg: RunConfig, workers: int, ranking: bool):
    data, partitions = _prepare(cfg)
    fitter, loss = cfg.fitter_spec(), cfg.loss_spec()
    fitted, failures, groups_out = {}, {}, {}
    errors = []
    for g, gdata in _groups(cfg, data).items():
        try:
            oracle = fitter.fit(gdata, cfg.outcome)
        except RelianceError as exc:
            failures[g] = f"{type(exc).__name__}: {exc}"
            errors.append(exc)
            continue
        fitted[g] = (gdata, oracle)
        groups_out[g] = {"n": gdata.n,
                         "fitter": oracle.diagnostics.to_dict() if oracle.diagnostics else {"fitter": oracle.name}}
    if not fitted:
        raise errors[0]
    report = rank_reliance(fitted, loss, partitions, cfg.method, validate=ranking and cfg.validate,
                           seed=cfg.seed, workers=workers)
    failures.update(report.failures)
    rows = []
    for g, sets in report.entries.items():
        gdata, oracle = fitted[g]
        groups_out[g]["estimates"] = {}
        for label, est in sets.items():
            entry = est.to_dict()
            row = {"group": g, "covariate_set": label, "n": est.n, "r_hat": est.r_hat, "b_hat": est.b_hat,
                   "normalized": est.normalized, "method": est.method}
            if cfg.bootstrap:
                boot = bootstrap_reliance(gdata, oracle, loss, partitions[label], cfg.bootstrap, cfg.seed,
                                          cfg.refit, fitter, method=cfg.method)
                entry["bootstrap"] = boot.to_dict()
                row.update(r_lo=boot.r_interval[0], r_hi=boot.r_interval[1],
                           normalized_lo=boot.normalized_interval[0], normalized_hi=boot.normalized_interval[1])
            groups_out[g]["estimates"][label] = entry
            rows.append(row)
    for g in failures:
        groups_out.pop(g, None)
    out = {"config": cfg.to_dict(), "groups": groups_out, "failures": failures}
    if ranking:
        out["orderings"] = report.orderings
        out["cross"] = report.cross
        rank_of = {(label, g): k for label, order in report.orderings.items() for k, g in enumerate(order, 1)}
        for row in rows:
            row["rank"] = rank_of[(row["covariate_set"], row["group"])]
        rows.sort(key=lambda r: (r["covariate_set"], r["rank"]))
    elif cfg.group:
        out["orderings"] = {label: order_groups({g: s[label].normalized for g, s in report.entries.items()})
                            for label in partitions}
    return out, rows


def cmd_reliance(args) -> int:
    cfg = _config(args)
    report, rows = _audit(cfg, _workers(args.threads), ranking=False)
    out = _out_dir(cfg)
    _write(out / "reliance.json", dumps({"command": "reliance", **report}))
    _write(out / "reliance.csv", rows_to_csv(rows))
    for row in rows:
        print(f"{row['group']} [{row['covariate_set']}] r_hat={row['r_hat']:.6g} b_hat={row['b_hat']:.6g} "
              f"normalized={row['normalized']:.6g}")
    for g, msg in report["failures"].items():
        print(f"{g}: FAILED {msg}", file=sys.stderr)
    return 0


def cmd_rank(args) -> int:
    cfg = _config(args)
    if not cfg.group:
        raise UsageError("rank needs a group column (run.group or --group)")
    report, rows = _audit(cfg, _workers(args.threads), ranking=True)
    out = _out_dir(cfg)
    _write(out / "ranking.json", dumps({"command": "rank", **report}))
    _write(out / "ranking.csv", rows_to_csv(rows))
    for label, order in report["orderings"].items():
        print(f"{label}: {' > '.join(order)}")
    if report["cross"]:
        for label, chk in report["cross"].items():
            print(f"{label}: cross-distribution identity max diff {chk['max_abs_diff']:.3g}, "
                  f"orderings agree: {chk['orderings_agree']}")
    for g, msg in report["failures"].items():
        print(f"{g}: FAILED {msg}", file=sys.stderr)
    return 0


def cmd_parity(args) -> int:
    cfg = _config(args)
    B = cfg.bootstrap or 1000
    cfg.check()
    if cfg.loss != "square":
        raise UsageError("parity needs loss.kind = square")
    data, partitions = _prepare(cfg)
    fitter = cfg.fitter_spec()
    results, rows = {}, []
    for g, gdata in _groups(cfg, data).items():
        results[g] = {}
        for label, part in partitions.items():
            res = parity_test(gdata, fitter, part, cfg.loss_spec(), B, cfg.seed, cfg.method)
            results[g][label] = res.to_dict()
            rows.append({"group": g, "covariate_set": label, "statistic": res.statistic, "p_value": res.p_value,
                         "B": res.B, "seed": res.seed, "scheme": res.scheme})
            print(f"{g} [{label}] statistic={res.statistic:.6g} p_value={res.p_value:.4f} B={res.B} seed={res.seed}")
    out = _out_dir(cfg)
    _write(out / "parity.json", dumps({"command": "parity", "config": cfg.to_dict(), "results": results}))
    _write(out / "parity.csv", rows_to_csv(rows))
    return 0


# -- argument parsing --------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI run configuration; flags override its fields")
    p.add_argument("--out", help=f"output directory (default: {default_output_dir()!r})")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="cap on worker threads (results do not depend on it)")


def _add_audit(p: argparse.ArgumentParser) -> None:
    _add_common(p)
    p.add_argument("--format", choices=("csv", "chunks", "admissions"))
    p.add_argument("--input", help="data file (csv or chunk format)")
    p.add_argument("--schema", help="schema INI for csv input")
    p.add_argument("--n", type=int, help="rows to simulate for admissions input")
    p.add_argument("--x1", action="append", help="audited columns, comma separated; repeat for several sets")
    p.add_argument("--x2", help="extra retained covariates, comma separated")
    p.add_argument("--outcome")
    p.add_argument("--loss", choices=("square", "cross_entropy", "utility"))
    p.add_argument("--lam", type=float, help="utility-loss lambda")
    p.add_argument("--risk-columns", help="two columns with P(S=0|x), P(S=1|x) for the utility loss")
    p.add_argument("--fitter", choices=("ols", "logistic", "huber", "constant"))
    p.add_argument("--covariates", help="oracle covariates, comma separated")
    p.add_argument("--tuning-c", type=float, help="Huber tuning constant")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--group", help="group column; one analysis per level")
    p.add_argument("--method", choices=("auto", "exhaustive", "categorical"))
    p.add_argument("--bootstrap", "-B", type=int, help="bootstrap resamples (>= 100)")
    p.add_argument("--refit", action="store_true", help="refit the oracle on every bootstrap resample")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blackbox-reliance", description="Reliance audits of black-box decision-makers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate the admissions population")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--survey-offset", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bands", help="reliance bands for the admissions survey")
    _add_common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--survey-offset", type=float)
    p.add_argument("--p-z1", type=float, help="override the response rate used for the envelope")
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("reliance", help="reliance estimates per group and x1 set")
    _add_audit(p)
    p.set_defaults(func=cmd_reliance)

    p = sub.add_parser("rank", help="rank groups by normalized reliance")
    _add_audit(p)
    p.add_argument("--validate", action="store_true", help="run the stacked cross-distribution check")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("parity", help="bootstrap test of conditional statistical parity")
    _add_audit(p)
    p.set_defaults(func=cmd_parity)
    return parser


def _error_line(exc: BaseException, code: int, kind: str) -> str:
    msg = " ".join(str(exc).split())
    extra = ""
    for attr in ("row", "column", "pair"):
        v = getattr(exc, attr, None)
        if v is not None:
            extra += f" {attr}={v if not isinstance(v, tuple) else ','.join(map(str, v))}"
    return f"error: code={code} kind={kind}{extra} message={msg}"


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except RelianceError as exc:
        print(_error_line(exc, exc.exit_code, exc.kind), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(_error_line(exc, 1, "io"), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
