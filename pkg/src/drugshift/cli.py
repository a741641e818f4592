"""Command-line entry point.

Subcommands cover the pipeline end to end: ``simulate`` writes a
synthetic dataset, ``build-eras`` turns prescriptions into drug eras,
``fit`` runs a penalized model, ``pm`` runs the paired-shift baseline,
``evaluate`` scores rankings against labels, and ``report`` renders
figures for an output directory.

Every subcommand accepts ``--config FILE`` (JSON keyed by flag name,
explicit flags win) and echoes the values it actually used into
``effective-config.json`` in its output directory.  The thread count and
the output directory itself are deliberately not echoed: outputs are
byte-identical across thread counts and directory choices.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import figures, reports
from .errors import DrugshiftError
from .ingest import IngestConfig, load_cohort
from .lasso import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_N_LAMBDAS,
    DEFAULT_TARGET_SUPPORT,
    DEFAULT_TOLERANCE,
)
from .design import DEFAULT_MAX_PAIR_GAP_DAYS, MIN_COLUMN_COUNT_DEFAULT
from .eras import MIN_GAPS_DEFAULT, build_eras, estimate_era_params
from .pairwise_mean import DEFAULT_WINDOW_DAYS
from .pipeline import run_fit, run_pm
from .ranking import evaluate_ranked, restrict, union_top_k
from .simulate import SynthConfig, generate, write_dataset

_UNECHOED = ("out", "threads", "config")


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise DrugshiftError(f"config file not found: {path}")
    with p.open(encoding="utf-8") as fh:
        return json.load(fh)


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Flag > config file > built-in default, per option."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise DrugshiftError(f"unknown config keys: {sorted(unknown)}")
    eff = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            eff[key] = flag
        elif key in file_cfg:
            eff[key] = file_cfg[key]
        else:
            eff[key] = default
    return eff


def _echo_config(out_dir: Path, command: str, eff: dict) -> None:
    payload = {k: v for k, v in eff.items() if k not in _UNECHOED}
    reports.update_json(out_dir / "effective-config.json", command, payload)


def _out_dir(eff: dict) -> Path:
    out = Path(eff["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cohort_from(eff: dict):
    return load_cohort(
        IngestConfig(
            prescriptions_path=eff["prescriptions"],
            measurements_path=eff["measurements"],
            dedupe_policy=eff["dedupe"],
        )
    )


def _parse_effects(raw) -> dict[int, float]:
    if raw is None:
        return {}
    if isinstance(raw, dict):
        return {int(k): float(v) for k, v in raw.items()}
    effects = {}
    for item in raw:
        try:
            key, value = item.split("=", 1)
            effects[int(key)] = float(value)
        except ValueError:
            raise DrugshiftError(
                f"bad --effect {item!r}, expected DRUG_INDEX=VALUE"
            ) from None
    return effects


_SIM_DEFAULTS = dict(
    out=None,
    seed=0,
    patients=100,
    drugs=10,
    span_days=3653,
    start_date="2005-01-01",
    baseline_mean=100.0,
    baseline_sd=10.0,
    noise_sd=1.0,
    effects=None,
    measurements_per_year=6.0,
    recurrent_fraction=0.3,
    scenario="none",
    scenario_causal_drug=0,
    scenario_null_drug=1,
    scenario_co_rate=0.85,
    drug_use_prob=0.5,
)


def _cmd_simulate(args, parser) -> int:
    eff = _resolve(args, _SIM_DEFAULTS)
    if eff["out"] is None:
        parser.error("simulate requires --out")
    out = _out_dir(eff)
    config = SynthConfig(
        seed=eff["seed"],
        n_patients=eff["patients"],
        n_drugs=eff["drugs"],
        span_days=eff["span_days"],
        start_date=eff["start_date"],
        baseline_mean=eff["baseline_mean"],
        baseline_sd=eff["baseline_sd"],
        noise_sd=eff["noise_sd"],
        effects=_parse_effects(eff["effects"]),
        measurements_per_year=eff["measurements_per_year"],
        recurrent_fraction=eff["recurrent_fraction"],
        scenario=eff["scenario"],
        scenario_causal_drug=eff["scenario_causal_drug"],
        scenario_null_drug=eff["scenario_null_drug"],
        scenario_co_rate=eff["scenario_co_rate"],
        drug_use_prob=eff["drug_use_prob"],
    )
    data = generate(config)
    paths = write_dataset(data, out)
    echo = dict(eff)
    echo["effects"] = {str(k): v for k, v in sorted(_parse_effects(eff["effects"]).items())}
    _echo_config(out, "simulate", echo)
    print(f"wrote {len(data.prescriptions)} prescriptions, "
          f"{len(data.measurements)} measurements to {out}")
    for name in ("prescriptions", "measurements", "truth"):
        print(f"  {paths[name]}")
    return 0


_ERA_DEFAULTS = dict(
    prescriptions=None,
    measurements=None,
    out=None,
    dedupe="strict",
    era_mode="changepoint",
    min_gaps=MIN_GAPS_DEFAULT,
    threads=1,
)


def _cmd_build_eras(args, parser) -> int:
    eff = _resolve(args, _ERA_DEFAULTS)
    for req in ("prescriptions", "measurements", "out"):
        if eff[req] is None:
            parser.error(f"build-eras requires --{req}")
    out = _out_dir(eff)
    cohort = _cohort_from(eff)
    params = estimate_era_params(
        cohort, mode=eff["era_mode"], min_gaps=eff["min_gaps"], threads=eff["threads"]
    )
    eras = build_eras(cohort, params)
    reports.write_eras_csv(out / "eras.csv", eras)
    reports.write_era_params(out / "era-params.json", params)
    _echo_config(out, "build-eras", eff)
    for line in cohort.summary.lines():
        print(line)
    n_recurrent = sum(1 for p in params.per_drug.values() if p.recurrent)
    print(f"eras built: {len(eras)} ({n_recurrent} of {cohort.n_drugs} drugs recurrent)")
    if params.mean_refill_days is not None:
        print(f"regime mean refill period: {params.mean_refill_days:.2f} days")
    for warning in params.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


_FIT_DEFAULTS = dict(
    prescriptions=None,
    measurements=None,
    out=None,
    model="csccs",
    dedupe="strict",
    era_mode="changepoint",
    min_gaps=MIN_GAPS_DEFAULT,
    era_params=None,
    max_pair_gap_days=DEFAULT_MAX_PAIR_GAP_DAYS,
    min_count=MIN_COLUMN_COUNT_DEFAULT,
    lam=None,
    target_support=None,
    n_lambdas=DEFAULT_N_LAMBDAS,
    tolerance=DEFAULT_TOLERANCE,
    max_sweeps=DEFAULT_MAX_SWEEPS,
    standardize=False,
    dump_design=False,
    threads=1,
)


def _cmd_fit(args, parser) -> int:
    eff = _resolve(args, _FIT_DEFAULTS)
    for req in ("prescriptions", "measurements", "out"):
        if eff[req] is None:
            parser.error(f"fit requires --{req}")
    if eff["lam"] is not None and eff["target_support"] is not None:
        parser.error("--lambda and --target-support are mutually exclusive")
    target = eff["target_support"] if eff["target_support"] is not None else DEFAULT_TARGET_SUPPORT
    out = _out_dir(eff)
    cohort = _cohort_from(eff)
    era_params = None
    if eff["era_params"]:
        era_params = reports.read_era_params(eff["era_params"])

    result = run_fit(
        cohort,
        model=eff["model"],
        era_params=era_params,
        era_mode=eff["era_mode"],
        min_gaps=eff["min_gaps"],
        max_pair_gap_days=eff["max_pair_gap_days"],
        min_count=eff["min_count"],
        lam=eff["lam"],
        target_support=target,
        n_lambdas=eff["n_lambdas"],
        tolerance=eff["tolerance"],
        max_sweeps=eff["max_sweeps"],
        threads=eff["threads"],
        standardize=bool(eff["standardize"]),
    )

    reports.write_coefficients(out / "coefficients.tsv", result.ranked, result.counts)
    reports.write_era_params(out / "era-params.json", result.era_params)
    reports.update_json(out / "metrics.json", f"fit-{result.model}", result.info)
    if eff["dump_design"]:
        reports.dump_design(result.design, out, stem=f"design-{result.model}")
    echo = dict(eff)
    echo["target_support"] = None if eff["lam"] is not None else target
    _echo_config(out, f"fit-{result.model}", echo)

    info = result.info
    print(
        f"{result.model}: {info['n_rows']} rows, {info['n_drugs_fitted']} drugs "
        f"after min-count filter"
    )
    print(
        f"penalty {info['lambda']:.6g} -> {info['support_size']} nonzero coefficients"
    )
    for warning in info["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


_PM_DEFAULTS = dict(
    prescriptions=None,
    measurements=None,
    out=None,
    dedupe="strict",
    window_days=DEFAULT_WINDOW_DAYS,
)


def _cmd_pm(args, parser) -> int:
    eff = _resolve(args, _PM_DEFAULTS)
    for req in ("prescriptions", "measurements", "out"):
        if eff[req] is None:
            parser.error(f"pm requires --{req}")
    out = _out_dir(eff)
    cohort = _cohort_from(eff)
    ranked, counts, info = run_pm(cohort, window_days=eff["window_days"])
    reports.write_coefficients(out / "coefficients.tsv", ranked, counts)
    reports.update_json(out / "metrics.json", "pm", info)
    _echo_config(out, "pm", eff)
    print(f"pm: scored {info['n_drugs_scored']} of {info['n_drugs_total']} drugs")
    return 0


_EVAL_DEFAULTS = dict(
    scores=None,
    labels=None,
    out=None,
    ks="10,20,40",
    positive_label="decrease",
    labeled_only=False,
    exclude_increase=False,
    union_top_k=None,
)


def _parse_ks(raw) -> tuple[int, ...]:
    if isinstance(raw, (list, tuple)):
        return tuple(int(k) for k in raw)
    try:
        return tuple(int(part) for part in str(raw).split(",") if part.strip())
    except ValueError:
        raise DrugshiftError(f"bad K list {raw!r}, expected e.g. 10,20,40") from None


def _cmd_evaluate(args, parser) -> int:
    eff = _resolve(args, _EVAL_DEFAULTS)
    if not eff["scores"]:
        parser.error("evaluate requires at least one --scores NAME=PATH")
    for req in ("labels", "out"):
        if eff[req] is None:
            parser.error(f"evaluate requires --{req}")
    ks = _parse_ks(eff["ks"])
    out = _out_dir(eff)
    labels = reports.read_labels(eff["labels"])

    rankings = []
    for token in eff["scores"]:
        if "=" in token:
            name, path = token.split("=", 1)
        else:
            name, path = Path(token).stem, token
        ranked, _ = reports.read_coefficients(path, method=name)
        rankings.append(ranked)

    union_note = None
    if eff["union_top_k"] is not None:
        universe = union_top_k(rankings, int(eff["union_top_k"]))
        rankings = [restrict(r, universe) for r in rankings]
        union_note = len(universe)

    curves = {}
    payload = {}
    for ranked in rankings:
        result = evaluate_ranked(
            ranked,
            labels,
            positive_label=eff["positive_label"],
            ks=ks,
            labeled_only=bool(eff["labeled_only"]),
            exclude_opposite=bool(eff["exclude_increase"]),
        )
        curves[ranked.method] = result.roc
        payload[ranked.method] = reports.eval_payload(result)
        print(f"{ranked.method}: auroc {result.auroc:.4f}  " + "  ".join(
            f"p@{k} {result.precision[k]:.3f}" for k in sorted(result.precision)
        ))

    if union_note is not None:
        payload["union_list_size"] = union_note
        print(f"union list: {union_note} drugs")
    reports.write_roc_csv(out / "roc.csv", curves)
    reports.update_json(out / "metrics.json", "evaluation", payload)
    _echo_config(out, "evaluate", eff)
    return 0


_REPORT_DEFAULTS = dict(run_dir=None, top_k=40)


def _cmd_report(args, parser) -> int:
    eff = _resolve(args, _REPORT_DEFAULTS)
    if eff["run_dir"] is None:
        parser.error("report requires --run-dir")
    run_dir = Path(eff["run_dir"])
    if not run_dir.is_dir():
        raise DrugshiftError(f"not a directory: {run_dir}")
    top_k = int(eff["top_k"])
    written = []

    roc_path = run_dir / "roc.csv"
    metrics_path = run_dir / "metrics.json"
    metrics = {}
    if metrics_path.exists():
        with metrics_path.open(encoding="utf-8") as fh:
            metrics = json.load(fh)
    if roc_path.exists():
        curves = reports.read_roc_csv(roc_path)
        aurocs = {
            method: entry["auroc"]
            for method, entry in metrics.get("evaluation", {}).items()
            if isinstance(entry, dict) and "auroc" in entry
        }
        written.append(figures.save_roc_figure(run_dir / "roc.png", curves, aurocs))

    evaluation = metrics.get("evaluation", {})
    precision = {
        method: {int(k): v for k, v in entry["precision_at_k"].items()}
        for method, entry in evaluation.items()
        if isinstance(entry, dict) and "precision_at_k" in entry
    }
    if precision:
        written.append(
            figures.save_precision_figure(run_dir / "precision.png", precision)
        )

    coef_path = run_dir / "coefficients.tsv"
    if coef_path.exists():
        ranked, _ = reports.read_coefficients(coef_path)
        written.append(
            figures.save_coefficients_figure(
                run_dir / "coefficients.png",
                ranked.entries,
                top_k=top_k,
                title=f"top {min(top_k, len(ranked.entries))} drugs by fitted shift",
            )
        )

    params_path = run_dir / "era-params.json"
    if params_path.exists():
        params = reports.read_era_params(params_path)
        values = sorted(
            fit.value_at_psi
            for fit in params.changepoints.values()
            if fit is not None and fit.converged and fit.value_at_psi is not None
        )
        if values:
            written.append(
                figures.save_changepoint_figure(
                    run_dir / "changepoints.png",
                    values,
                    params.second_level,
                    params.mean_refill_days,
                )
            )

    if not written:
        raise DrugshiftError(
            f"nothing to report: no roc.csv, metrics.json, coefficients.tsv, "
            f"or era-params.json under {run_dir}"
        )
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drugshift",
        description=(
            "Detect drugs associated with shifting a continuous clinical "
            "measurement, from longitudinal prescription and measurement data."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_io(p):
        p.add_argument("--prescriptions", help="prescriptions CSV (patient_id,drug,date)")
        p.add_argument("--measurements", help="measurements CSV (patient_id,date,value)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--dedupe", choices=("strict", "mean"),
                       help="same-day duplicate measurement policy (default strict)")
        p.add_argument("--config", help="JSON config file; explicit flags win")

    sim = sub.add_parser("simulate", help="write a synthetic dataset with known truth")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--config", help="JSON config file; explicit flags win")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--patients", type=int)
    sim.add_argument("--drugs", type=int)
    sim.add_argument("--span-days", type=int, dest="span_days")
    sim.add_argument("--start-date", dest="start_date")
    sim.add_argument("--baseline-mean", type=float, dest="baseline_mean")
    sim.add_argument("--baseline-sd", type=float, dest="baseline_sd")
    sim.add_argument("--noise-sd", type=float, dest="noise_sd")
    sim.add_argument("--effect", action="append", dest="effects",
                     metavar="DRUG_INDEX=VALUE",
                     help="planted effect, repeatable (e.g. --effect 0=-8)")
    sim.add_argument("--measurements-per-year", type=float, dest="measurements_per_year")
    sim.add_argument("--recurrent-fraction", type=float, dest="recurrent_fraction")
    sim.add_argument("--scenario", choices=("none", "bystander", "comorbidity"))
    sim.add_argument("--scenario-causal-drug", type=int, dest="scenario_causal_drug")
    sim.add_argument("--scenario-null-drug", type=int, dest="scenario_null_drug")
    sim.add_argument("--scenario-co-rate", type=float, dest="scenario_co_rate")
    sim.add_argument("--drug-use-prob", type=float, dest="drug_use_prob")
    sim.set_defaults(func=_cmd_simulate)

    eras = sub.add_parser("build-eras", help="estimate era parameters and build drug eras")
    add_common_io(eras)
    eras.add_argument("--era-mode", choices=("changepoint", "cdm30"), dest="era_mode")
    eras.add_argument("--min-gaps", type=int, dest="min_gaps")
    eras.add_argument("--threads", type=int)
    eras.set_defaults(func=_cmd_build_eras)

    fit = sub.add_parser("fit", help="fit a penalized within-patient model")
    add_common_io(fit)
    fit.add_argument("--model", choices=("csccs", "csccsa"))
    fit.add_argument("--era-mode", choices=("changepoint", "cdm30"), dest="era_mode")
    fit.add_argument("--min-gaps", type=int, dest="min_gaps")
    fit.add_argument("--era-params", dest="era_params",
                     help="reuse era-params.json from a previous build-eras run")
    fit.add_argument("--max-pair-gap-days", type=int, dest="max_pair_gap_days",
                     help="widest admissible measurement-pair gap (csccsa)")
    fit.add_argument("--min-count", type=int, dest="min_count")
    fit.add_argument("--lambda", type=float, dest="lam",
                     help="fixed penalty (conflicts with --target-support)")
    fit.add_argument("--target-support", type=int, dest="target_support",
                     help="pick the path penalty whose support is closest to this")
    fit.add_argument("--n-lambdas", type=int, dest="n_lambdas")
    fit.add_argument("--tolerance", type=float)
    fit.add_argument("--max-sweeps", type=int, dest="max_sweeps")
    fit.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None)
    fit.add_argument("--dump-design", action=argparse.BooleanOptionalAction,
                     default=None, dest="dump_design")
    fit.add_argument("--threads", type=int)
    fit.set_defaults(func=_cmd_fit)

    pm = sub.add_parser("pm", help="paired before/after shift baseline")
    add_common_io(pm)
    pm.add_argument("--window-days", type=int, dest="window_days")
    pm.set_defaults(func=_cmd_pm)

    ev = sub.add_parser("evaluate", help="score rankings against a label file")
    ev.add_argument("--scores", action="append",
                    metavar="NAME=PATH",
                    help="coefficients.tsv to evaluate, repeatable")
    ev.add_argument("--labels", help="CSV with columns drug,label (decrease|increase)")
    ev.add_argument("--out", help="output directory")
    ev.add_argument("--config", help="JSON config file; explicit flags win")
    ev.add_argument("--k", dest="ks", help="comma-separated K values (default 10,20,40)")
    ev.add_argument("--positive-label", choices=("decrease", "increase"),
                    dest="positive_label")
    ev.add_argument("--labeled-only", action=argparse.BooleanOptionalAction,
                    default=None, dest="labeled_only")
    ev.add_argument("--exclude-increase", action=argparse.BooleanOptionalAction,
                    default=None, dest="exclude_increase")
    ev.add_argument("--union-top-k", type=int, dest="union_top_k",
                    help="restrict evaluation to the union of each method's top K")
    ev.set_defaults(func=_cmd_evaluate)

    rep = sub.add_parser("report", help="render figures for an output directory")
    rep.add_argument("--run-dir", dest="run_dir")
    rep.add_argument("--top-k", type=int, dest="top_k")
    rep.add_argument("--config", help="JSON config file; explicit flags win")
    rep.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except DrugshiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
