"""Synthetic longitudinal EHR generator with planted ground truth.

Each patient gets a baseline level, a prescription history per drug, and
noisy measurements:

    value = baseline + sum of planted effects of currently-active drugs + noise

"Currently active" is decided by the same era logic the estimators use,
applied with the generator's true per-drug parameters, so a planted
effect is exactly recoverable in the noise-free case.

Two drug classes mirror real refill behaviour.  Recurrent drugs are
refilled on a roughly monthly log-normal cadence with occasional long
breaks, producing a gap distribution that is flat for most of its sorted
range and then jumps.  Non-recurrent drugs are prescribed at scattered
Poisson times with no cadence.

Optional confounding scenarios plant an innocent-bystander structure: a
null drug prescribed together with a causal drug (same days), or started
shortly after it (a treated comorbidity).  The generator writes the same
CSV schemas the ingest module reads, plus a ground-truth JSON that the
estimators never see.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .cohort import MeasurementRecord, PrescriptionRecord, day_from_iso, day_to_iso
from .eras import NON_RECURRENT_DURATION_DAYS, eras_for_days
from .errors import SynthConfigError


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one synthetic dataset.  All randomness flows from ``seed``."""

    seed: int = 0
    n_patients: int = 100
    n_drugs: int = 10
    span_days: int = 3653  # ten years of observation
    start_date: str = "2005-01-01"
    baseline_mean: float = 100.0
    baseline_sd: float = 10.0
    noise_sd: float = 1.0
    effects: Mapping[int, float] = field(default_factory=dict)
    measurements_per_year: float = 6.0
    recurrent_fraction: float = 0.6
    recurrent_gap_median: float = 30.0
    recurrent_gap_sigma: float = 0.35
    gap_break_prob: float = 0.08
    gap_break_range: tuple[float, float] = (150.0, 600.0)
    nonrecurrent_rate_per_year: float = 0.6
    drug_use_prob: float = 0.5
    scenario: str = "none"  # none | bystander | comorbidity
    scenario_causal_drug: int = 0
    scenario_null_drug: int = 1
    scenario_co_rate: float = 0.85
    scenario_background_prob: float = 0.1
    comorbidity_delay_days: int = 90

    def validate(self) -> None:
        if self.n_patients < 1 or self.n_drugs < 1:
            raise SynthConfigError("need at least one patient and one drug")
        if self.span_days < 1:
            raise SynthConfigError("observation span must be positive")
        for rate_name in (
            "measurements_per_year",
            "recurrent_gap_median",
            "nonrecurrent_rate_per_year",
        ):
            if getattr(self, rate_name) <= 0:
                raise SynthConfigError(f"{rate_name} must be positive")
        if not 0 <= self.drug_use_prob <= 1:
            raise SynthConfigError("drug_use_prob must be a probability")
        if not 0 <= self.gap_break_prob <= 1:
            raise SynthConfigError("gap_break_prob must be a probability")
        if not 0 <= self.recurrent_fraction <= 1:
            raise SynthConfigError("recurrent_fraction must be a probability")
        if self.noise_sd < 0 or self.baseline_sd < 0 or self.recurrent_gap_sigma < 0:
            raise SynthConfigError("spread parameters must be nonnegative")
        expected = self.measurements_per_year * self.span_days / 365.25
        if expected < 1.0:
            raise SynthConfigError(
                f"config expects {expected:.2f} measurements per patient; "
                "nothing to model"
            )
        for m in self.effects:
            if not 0 <= m < self.n_drugs:
                raise SynthConfigError(f"effect refers to unknown drug index {m}")
        if len(self.effects) > self.n_drugs:
            raise SynthConfigError("more effects than drugs")
        if self.scenario not in ("none", "bystander", "comorbidity"):
            raise SynthConfigError(f"unknown scenario {self.scenario!r}")
        if self.scenario != "none":
            a, b = self.scenario_causal_drug, self.scenario_null_drug
            if a == b or not (0 <= a < self.n_drugs and 0 <= b < self.n_drugs):
                raise SynthConfigError("scenario needs two distinct valid drug indexes")
            if self.effects.get(a, 0.0) == 0.0:
                raise SynthConfigError("scenario causal drug has no planted effect")
            if self.effects.get(b, 0.0) != 0.0:
                raise SynthConfigError("scenario bystander drug must be a null drug")

    def n_recurrent(self) -> int:
        return math.ceil(self.recurrent_fraction * self.n_drugs)

    def drug_id(self, m: int) -> str:
        width = max(3, len(str(self.n_drugs - 1)))
        return f"drug_{m:0{width}d}"

    def patient_id(self, i: int) -> str:
        width = max(4, len(str(self.n_patients - 1)))
        return f"p{i:0{width}d}"


@dataclass(frozen=True)
class SynthTruth:
    """What was planted: per-drug effects and flags, per-patient baselines."""

    effects: dict[str, float]
    recurrent: dict[str, bool]
    baselines: dict[str, float]


@dataclass(frozen=True)
class SynthData:
    config: SynthConfig
    prescriptions: list[PrescriptionRecord]
    measurements: list[MeasurementRecord]
    truth: SynthTruth


def _recurrent_days(
    rng: np.random.Generator, cfg: SynthConfig, gap_median: float
) -> list[int]:
    """Refill schedule: log-normal monthly-ish gaps with occasional breaks."""
    day = float(rng.uniform(0, cfg.span_days / 3))
    mu = math.log(gap_median)
    days = []
    while day <= cfg.span_days:
        days.append(int(day))
        if rng.random() < cfg.gap_break_prob:
            gap = rng.uniform(*cfg.gap_break_range)
        else:
            gap = rng.lognormal(mu, cfg.recurrent_gap_sigma)
        day += max(1.0, gap)
    return sorted(set(days))


def _sporadic_days(
    rng: np.random.Generator, cfg: SynthConfig, rate_per_year: float
) -> list[int]:
    """Scattered prescriptions with no refill cadence."""
    lam = rate_per_year * cfg.span_days / 365.25
    count = int(rng.poisson(lam))
    if count == 0:
        return []
    days = rng.integers(0, cfg.span_days + 1, size=count)
    return sorted(set(int(d) for d in days))


def _era_bounds(days: list[int], gap_median: float | None) -> list[tuple[int, int]]:
    """True exposure intervals; ``gap_median`` is None for sporadic drugs."""
    if gap_median is not None:
        span = int(round(gap_median))
        return eras_for_days(days, span, span)
    return eras_for_days(days, NON_RECURRENT_DURATION_DAYS, 0)


def generate(config: SynthConfig) -> SynthData:
    """Draw one dataset.  The RNG stream is consumed in a fixed order
    (patient by patient, drug by drug), so equal configs give equal data.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    base_day = day_from_iso(config.start_date)
    n_recurrent = config.n_recurrent()
    scenario = config.scenario
    null_drug = config.scenario_null_drug if scenario != "none" else None

    # Per-drug usage character, drawn once up front.  Recurrent drugs get
    # slightly different refill periods; sporadic drugs get very different
    # prescription rates.  Without this spread every sporadic drug would
    # show the same gap structure, which no real formulary does.
    gap_medians = config.recurrent_gap_median * rng.uniform(0.85, 1.2, config.n_drugs)
    rate_scales = rng.uniform(0.4, 3.0, config.n_drugs)

    def draw_days(m: int) -> list[int]:
        if m < n_recurrent:
            return _recurrent_days(rng, config, float(gap_medians[m]))
        return _sporadic_days(
            rng, config, config.nonrecurrent_rate_per_year * float(rate_scales[m])
        )

    prescriptions: list[PrescriptionRecord] = []
    measurements: list[MeasurementRecord] = []
    baselines: dict[str, float] = {}

    for i in range(config.n_patients):
        pid = config.patient_id(i)
        alpha = float(rng.normal(config.baseline_mean, config.baseline_sd))
        baselines[pid] = alpha

        rx_days: dict[int, list[int]] = {}
        for m in range(config.n_drugs):
            if m == null_drug:
                continue
            if rng.random() >= config.drug_use_prob:
                continue
            days = draw_days(m)
            if days:
                rx_days[m] = days

        if scenario == "bystander":
            causal = rx_days.get(config.scenario_causal_drug, [])
            tied = [d for d in causal if rng.random() < config.scenario_co_rate]
            extra: list[int] = []
            if rng.random() < config.scenario_background_prob:
                extra = draw_days(null_drug)
            merged = sorted(set(tied) | set(extra))
            if merged:
                rx_days[null_drug] = merged
        elif scenario == "comorbidity":
            causal = rx_days.get(config.scenario_causal_drug, [])
            days: list[int] = []
            if causal and rng.random() < config.scenario_co_rate:
                onset = causal[0] + config.comorbidity_delay_days + int(rng.uniform(0, 30))
                day = float(onset)
                mu = math.log(float(gap_medians[null_drug]))
                while day <= config.span_days:
                    days.append(int(day))
                    day += max(1.0, rng.lognormal(mu, config.recurrent_gap_sigma))
            elif rng.random() < config.scenario_background_prob:
                days = draw_days(null_drug)
            merged = sorted(set(days))
            if merged:
                rx_days[null_drug] = merged

        for m in sorted(rx_days):
            drug = config.drug_id(m)
            for d in rx_days[m]:
                prescriptions.append(PrescriptionRecord(pid, drug, base_day + d))

        eras = {
            m: _era_bounds(days, float(gap_medians[m]) if m < n_recurrent else None)
            for m, days in rx_days.items()
            if config.effects.get(m, 0.0) != 0.0
        }

        n_meas = int(rng.poisson(config.measurements_per_year * config.span_days / 365.25))
        meas_days = sorted(set(int(d) for d in rng.integers(0, config.span_days + 1, size=n_meas)))
        noise = rng.normal(0.0, config.noise_sd, size=len(meas_days))
        for day, eps in zip(meas_days, noise):
            value = alpha + float(eps)
            for m, bounds in eras.items():
                if any(start <= day <= end for start, end in bounds):
                    value += config.effects[m]
            measurements.append(MeasurementRecord(pid, base_day + day, value))

    truth = SynthTruth(
        effects={
            config.drug_id(m): float(v) for m, v in sorted(config.effects.items()) if v != 0.0
        },
        recurrent={config.drug_id(m): m < n_recurrent for m in range(config.n_drugs)},
        baselines=baselines,
    )
    return SynthData(
        config=config,
        prescriptions=prescriptions,
        measurements=measurements,
        truth=truth,
    )


def write_dataset(data: SynthData, out_dir: str | Path) -> dict[str, Path]:
    """Write prescriptions.csv, measurements.csv, and truth.json.

    Rows are emitted in a fixed sort order and values with fixed
    formatting, so the same data always serializes to the same bytes.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rx_path = out / "prescriptions.csv"
    rows = sorted(
        (r.patient, r.drug, r.date) for r in data.prescriptions
    )
    with rx_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("patient_id,drug,date\n")
        for patient, drug, day in rows:
            fh.write(f"{patient},{drug},{day_to_iso(day)}\n")

    meas_path = out / "measurements.csv"
    mrows = sorted((r.patient, r.date, r.value) for r in data.measurements)
    with meas_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("patient_id,date,value\n")
        for patient, day, value in mrows:
            fh.write(f"{patient},{day_to_iso(day)},{value:.6f}\n")

    truth_path = out / "truth.json"
    payload = {
        "effects": data.truth.effects,
        "recurrent": data.truth.recurrent,
        "baselines": {k: round(v, 6) for k, v in sorted(data.truth.baselines.items())},
    }
    with truth_path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return {"prescriptions": rx_path, "measurements": meas_path, "truth": truth_path}
