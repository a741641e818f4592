"""Readers and writers for every delimited or JSON artifact.

All writers emit rows in a deterministic order with fixed number
formatting, so re-running a pipeline with the same inputs reproduces
files byte for byte.  Ranks in coefficient tables are 1-based over the
scored entries (most negative score first); rank 0 marks a drug in the
zero block (present, but given no individual rank).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

from .changepoint import ChangePointFit
from .cohort import day_from_iso, day_to_iso
from .eras import DrugEra, DrugEraParams, EraParams
from .errors import IngestError
from .ranking import EvalResult, LabelSet, RankedList


def write_eras_csv(path: str | Path, eras: Sequence[DrugEra]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("patient_id,drug,start_date,end_date\n")
        for era in eras:
            fh.write(
                f"{era.patient},{era.drug},{day_to_iso(era.start)},{day_to_iso(era.end)}\n"
            )


def read_eras_csv(path: str | Path) -> list[DrugEra]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"patient_id", "drug", "start_date", "end_date"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise IngestError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            out.append(
                DrugEra(
                    patient=row["patient_id"],
                    drug=row["drug"],
                    start=day_from_iso(row["start_date"]),
                    end=day_from_iso(row["end_date"]),
                )
            )
    return out


def _fit_payload(fit: ChangePointFit | None) -> dict | None:
    if fit is None:
        return None
    return {
        "psi": fit.psi,
        "value_at_psi": fit.value_at_psi,
        "sse": fit.sse,
        "iterations": fit.iterations,
        "converged": fit.converged,
    }


def write_era_params(path: str | Path, params: EraParams) -> None:
    payload = {
        "mode": params.mode,
        "mean_refill_days": params.mean_refill_days,
        "second_level": _fit_payload(params.second_level),
        "warnings": list(params.warnings),
        "per_drug": {
            drug: {
                "recurrent": p.recurrent,
                "duration_days": p.duration_days,
                "persistence_window_days": p.persistence_window_days,
                "gap_count": params.gap_counts.get(drug),
                "changepoint": _fit_payload(params.changepoints.get(drug)),
            }
            for drug, p in params.per_drug.items()
        },
    }
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fit_from_payload(payload: dict | None) -> ChangePointFit | None:
    if payload is None:
        return None
    return ChangePointFit(
        psi=payload["psi"],
        value_at_psi=payload["value_at_psi"],
        sse=payload["sse"],
        iterations=payload["iterations"],
        converged=payload["converged"],
    )


def read_era_params(path: str | Path) -> EraParams:
    with Path(path).open(encoding="utf-8") as fh:
        payload = json.load(fh)
    per_drug = {}
    changepoints = {}
    gap_counts = {}
    for drug, entry in payload["per_drug"].items():
        per_drug[drug] = DrugEraParams(
            recurrent=entry["recurrent"],
            duration_days=entry["duration_days"],
            persistence_window_days=entry["persistence_window_days"],
        )
        changepoints[drug] = _fit_from_payload(entry.get("changepoint"))
        if entry.get("gap_count") is not None:
            gap_counts[drug] = entry["gap_count"]
    return EraParams(
        mode=payload["mode"],
        per_drug=per_drug,
        mean_refill_days=payload.get("mean_refill_days"),
        changepoints=changepoints,
        gap_counts=gap_counts,
        second_level=_fit_from_payload(payload.get("second_level")),
        warnings=tuple(payload.get("warnings", ())),
    )


def write_coefficients(
    path: str | Path, ranked: RankedList, counts: Mapping[str, int]
) -> None:
    """Shared score table: drug, count, score, rank (tab-separated).

    Scored entries come first, rank 1 upward; zero-block drugs follow
    with rank 0 and score 0.
    """
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("drug\tcount\tscore\trank\n")
        for rank, (drug, score) in enumerate(ranked.entries, start=1):
            fh.write(f"{drug}\t{int(counts.get(drug, 0))}\t{score:.10g}\t{rank}\n")
        for drug in ranked.zero_block:
            fh.write(f"{drug}\t{int(counts.get(drug, 0))}\t0\t0\n")


def read_coefficients(
    path: str | Path, method: str | None = None
) -> tuple[RankedList, dict[str, int]]:
    """Read a score table back into a ranking plus per-drug counts."""
    entries: list[tuple[str, float]] = []
    zeros: list[str] = []
    counts: dict[str, int] = {}
    p = Path(path)
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        required = {"drug", "count", "score", "rank"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise IngestError(f"{path}: expected columns {sorted(required)}")
        for row in reader:
            drug = row["drug"]
            counts[drug] = int(row["count"])
            if int(row["rank"]) == 0:
                zeros.append(drug)
            else:
                entries.append((drug, float(row["score"])))
    entries.sort(key=lambda item: (item[1], item[0]))
    ranked = RankedList(
        method=method or p.stem,
        entries=tuple(entries),
        zero_block=tuple(sorted(zeros)),
    )
    return ranked, counts


def read_labels(path: str | Path) -> LabelSet:
    """Label file: CSV with columns drug, label in {decrease, increase}."""
    decrease: set[str] = set()
    increase: set[str] = set()
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"drug", "label"} <= set(reader.fieldnames):
            raise IngestError(f"{path}: expected columns ['drug', 'label']")
        for row in reader:
            drug = row["drug"].strip().casefold()
            label = row["label"].strip().casefold()
            if label == "decrease":
                decrease.add(drug)
            elif label == "increase":
                increase.add(drug)
            else:
                raise IngestError(
                    f"{path}:{reader.line_num}: label must be decrease or "
                    f"increase, got {row['label']!r}"
                )
    both = decrease & increase
    if both:
        raise IngestError(f"{path}: drugs labeled both ways: {sorted(both)}")
    return LabelSet(decrease=frozenset(decrease), increase=frozenset(increase))


def write_roc_csv(path: str | Path, curves: Mapping[str, Sequence[tuple[float, float]]]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("method,fpr,tpr\n")
        for method in sorted(curves):
            for fpr, tpr in curves[method]:
                fh.write(f"{method},{fpr:.10g},{tpr:.10g}\n")


def read_roc_csv(path: str | Path) -> dict[str, list[tuple[float, float]]]:
    curves: dict[str, list[tuple[float, float]]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"method", "fpr", "tpr"} <= set(reader.fieldnames):
            raise IngestError(f"{path}: expected columns ['method', 'fpr', 'tpr']")
        for row in reader:
            curves.setdefault(row["method"], []).append(
                (float(row["fpr"]), float(row["tpr"]))
            )
    return curves


def update_json(path: str | Path, section: str, payload: dict) -> None:
    """Set one top-level section of a JSON file, keeping the others.

    Lets several pipeline stages share metrics.json or
    effective-config.json in one output directory without clobbering
    each other.
    """
    p = Path(path)
    doc = {}
    if p.exists():
        with p.open(encoding="utf-8") as fh:
            doc = json.load(fh)
    doc[section] = payload
    with p.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def eval_payload(result: EvalResult) -> dict:
    return {
        "auroc": result.auroc,
        "precision_at_k": {str(k): v for k, v in sorted(result.precision.items())},
        "n_pos": result.n_pos,
        "n_neg": result.n_neg,
        "notes": list(result.notes),
    }


def dump_design(design, out_dir: str | Path, stem: str = "design") -> dict[str, Path]:
    """Coordinate-format dump of X plus the response vector.

    For cross-checking a fit against outside tooling: one
    ``row col value`` triple per line, 0-based indices, and one response
    value per line.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x_path = out / f"{stem}-X.txt"
    y_path = out / f"{stem}-y.txt"
    coo = design.X.tocoo()
    order = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    with x_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# rows={design.n_rows} cols={design.n_drugs} kind={design.kind}\n")
        for r, c, v in order:
            fh.write(f"{r} {c} {v:.17g}\n")
    with y_path.open("w", encoding="utf-8", newline="\n") as fh:
        for v in design.y:
            fh.write(f"{v:.17g}\n")
    return {"X": x_path, "y": y_path}
