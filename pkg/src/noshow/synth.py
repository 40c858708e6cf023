"""Synthetic appointment populations with a known ground-truth logit.

Real scheduling records cannot be redistributed, so demos and benchmarks
run on cohorts drawn from a :class:`GeneratorSpec`: every feature is
sampled independently from configured level frequencies, and the outcome
is Bernoulli in a fully known linear logit over those levels. Because
the true score is available, :func:`bayes_auroc` gives the ceiling any
fitted model can reach on a generated cohort.

Calibrated presets reproduce the per-service gender, age-band, and
lead-time marginals shipped in ``data/reference_marginals.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping

import numpy as np

from .dataset import (DAYS, GENDERS, MONTHS, REPORT_AGE_BANDS,
                      REPORT_LEAD_BANDS, SERVICES, VARIABLES, ZONE_INCOMES,
                      AppointmentRecord, RecordSet, _band_label, _report_level)
from .errors import ValidationError
from .evaluation import auroc
from .linear import sigmoid

# Sampled ages and lead times are capped so the open-ended report bands
# become finite uniform ranges.
_AGE_CAP = 90
_LEAD_CAP = 120


def _band_ranges(bands, cap: int) -> dict[str, tuple[int, int]]:
    out = {}
    for lo, hi in bands:
        out[_band_label(lo, hi)] = (lo, (hi if hi is not None else cap + 1))
    return out


AGE_BAND_RANGES = _band_ranges(REPORT_AGE_BANDS, _AGE_CAP)
LEAD_BAND_RANGES = _band_ranges(REPORT_LEAD_BANDS, _LEAD_CAP)

# Canonical level order per variable, used both for validation and to make
# sampling independent of dict insertion order. None means free-form keys
# (facilities), ordered lexicographically.
_CANONICAL_LEVELS: dict[str, tuple[str, ...] | None] = {
    "gender": GENDERS,
    "age": tuple(AGE_BAND_RANGES),
    "zone_income": ZONE_INCOMES,
    "lead_time": tuple(LEAD_BAND_RANGES),
    "month": MONTHS,
    "day_of_week": DAYS,
    "facility_id": None,
}

DEFAULT_FACILITIES = ("f01", "f02", "f03")


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _parse_effect_key(key: str) -> tuple[str, str]:
    variable, sep, level = key.partition("=")
    if not sep or not level:
        raise ValidationError(f"effect key {key!r} is not 'variable=level'")
    if variable not in VARIABLES:
        raise ValidationError(f"effect key {key!r}: unknown variable")
    return variable, level


def _parse_interaction_key(key: str) -> tuple[tuple[str, str], tuple[str, str]]:
    parts = key.split("*")
    if len(parts) != 2:
        raise ValidationError(
            f"interaction key {key!r} is not 'variable=level*variable=level'")
    first, second = (_parse_effect_key(p) for p in parts)
    if first[0] == second[0]:
        raise ValidationError(
            f"interaction key {key!r} repeats variable {first[0]!r}")
    return first, second


def _check_level(variable: str, level: str,
                 frequencies: Mapping[str, Mapping[str, float]]) -> None:
    allowed = _CANONICAL_LEVELS[variable]
    if allowed is None:
        if level not in frequencies["facility_id"]:
            raise ValidationError(
                f"facility {level!r} not among the spec's facilities")
    elif level not in allowed:
        raise ValidationError(f"unknown level {level!r} for {variable!r}")


def _coerce_distribution(name: str, freq: Mapping) -> dict[str, float]:
    if not freq:
        raise ValidationError(f"{name}: empty distribution")
    out = {}
    for level, value in freq.items():
        try:
            p = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"{name}: non-numeric frequency for "
                                  f"{level!r}") from None
        if not math.isfinite(p) or p < 0:
            raise ValidationError(f"{name}: bad frequency {value!r}")
        out[str(level)] = p
    total = math.fsum(out.values())
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"{name}: frequencies sum to {total}, not 1")
    return out


@dataclass(frozen=True)
class GeneratorSpec:
    """Sampling plan for a synthetic cohort with known true log-odds.

    ``true_coefficients`` is a sparse map from ``"variable=level"`` to a
    log-odds shift; ``interaction_effects`` maps
    ``"variable=level*variable=level"`` pairs the same way. Age and lead
    time are driven at the band level (the fixed reporting bands), with
    the integer value uniform within the sampled band.
    """

    n: int
    service_mix: Mapping[str, float]
    level_frequencies: Mapping[str, Mapping[str, float]]
    true_intercept: float
    true_coefficients: Mapping[str, float] = field(default_factory=dict)
    interaction_effects: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n must be positive, got {self.n}")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

        mix = _coerce_distribution("service_mix", self.service_mix)
        for service in mix:
            if service not in SERVICES:
                raise ValidationError(f"unknown service {service!r} in mix")
        object.__setattr__(self, "service_mix", mix)

        if set(self.level_frequencies) != set(VARIABLES):
            raise ValidationError(
                "level_frequencies must cover exactly the model variables, "
                f"got {sorted(self.level_frequencies)}")
        freqs = {}
        for variable in VARIABLES:
            dist = _coerce_distribution(
                f"level_frequencies[{variable}]",
                self.level_frequencies[variable])
            allowed = _CANONICAL_LEVELS[variable]
            for level in dist:
                if allowed is not None and level not in allowed:
                    raise ValidationError(
                        f"unknown level {level!r} for {variable!r}")
                if allowed is None and not level:
                    raise ValidationError("empty facility id")
            freqs[variable] = dist
        object.__setattr__(self, "level_frequencies", freqs)

        if not math.isfinite(float(self.true_intercept)):
            raise ValidationError("true_intercept must be finite")
        object.__setattr__(self, "true_intercept", float(self.true_intercept))

        coefs = {}
        for key, value in self.true_coefficients.items():
            variable, level = _parse_effect_key(str(key))
            _check_level(variable, level, freqs)
            beta = float(value)
            if not math.isfinite(beta):
                raise ValidationError(f"effect {key!r} must be finite")
            coefs[str(key)] = beta
        object.__setattr__(self, "true_coefficients", coefs)

        inter = {}
        for key, value in self.interaction_effects.items():
            for variable, level in _parse_interaction_key(str(key)):
                _check_level(variable, level, freqs)
            beta = float(value)
            if not math.isfinite(beta):
                raise ValidationError(f"effect {key!r} must be finite")
            inter[str(key)] = beta
        object.__setattr__(self, "interaction_effects", inter)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n": self.n,
            "service_mix": dict(self.service_mix),
            "level_frequencies": {v: dict(f)
                                  for v, f in self.level_frequencies.items()},
            "true_intercept": self.true_intercept,
            "true_coefficients": dict(self.true_coefficients),
            "interaction_effects": dict(self.interaction_effects),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "GeneratorSpec":
        if payload.get("schema_version", 1) != 1:
            raise ValidationError(
                f"unsupported spec version {payload.get('schema_version')!r}")
        try:
            return cls(
                n=int(payload["n"]),
                service_mix=payload["service_mix"],
                level_frequencies=payload["level_frequencies"],
                true_intercept=payload["true_intercept"],
                true_coefficients=payload.get("true_coefficients", {}),
                interaction_effects=payload.get("interaction_effects", {}),
                seed=int(payload.get("seed", 0)),
            )
        except KeyError as missing:
            raise ValidationError(f"spec payload missing {missing}") from None


def _ordered(freq: Mapping[str, float],
             canonical: tuple[str, ...] | None) -> tuple[tuple[str, ...], np.ndarray]:
    if canonical is None:
        levels = tuple(sorted(freq))
    else:
        levels = tuple(level for level in canonical if level in freq)
    probs = np.array([freq[level] for level in levels], dtype=float)
    return levels, probs / probs.sum()


def _draw(rng: np.random.Generator, n: int, levels: tuple[str, ...],
          probs: np.ndarray) -> np.ndarray:
    index = rng.choice(len(levels), size=n, p=probs)
    return np.array(levels, dtype=object)[index]


def _logit_from_levels(spec: GeneratorSpec,
                       levels: Mapping[str, np.ndarray]) -> np.ndarray:
    n = len(next(iter(levels.values())))
    z = np.full(n, spec.true_intercept, dtype=float)
    # Sorted iteration keeps float summation order independent of how the
    # effect dicts were built.
    for key in sorted(spec.true_coefficients):
        variable, level = _parse_effect_key(key)
        z = z + spec.true_coefficients[key] * (levels[variable] == level)
    for key in sorted(spec.interaction_effects):
        (v1, l1), (v2, l2) = _parse_interaction_key(key)
        mask = (levels[v1] == l1) & (levels[v2] == l2)
        z = z + spec.interaction_effects[key] * mask
    return z


def generate(spec: GeneratorSpec, shard_index: int = 0,
             id_offset: int = 0) -> RecordSet:
    """Draw ``spec.n`` records, deterministic per (spec.seed, shard_index).

    Columns are sampled independently in a fixed order (service, then the
    model variables, then the outcome), so two specs with equal content
    generate identical cohorts.
    """
    rng = np.random.default_rng([spec.seed, shard_index])
    n = spec.n

    services = _draw(rng, n, *_ordered(spec.service_mix, SERVICES))
    levels: dict[str, np.ndarray] = {}
    for variable in VARIABLES:
        levels[variable] = _draw(rng, n, *_ordered(
            spec.level_frequencies[variable], _CANONICAL_LEVELS[variable]))

    ages = _values_within_bands(rng, levels["age"], AGE_BAND_RANGES)
    leads = _values_within_bands(rng, levels["lead_time"], LEAD_BAND_RANGES)

    probabilities = sigmoid(_logit_from_levels(spec, levels))
    outcomes = np.where(rng.random(n) < probabilities, "no_show", "show")

    gender = levels["gender"].tolist()
    zone = levels["zone_income"].tolist()
    month = levels["month"].tolist()
    day = levels["day_of_week"].tolist()
    facility = levels["facility_id"].tolist()
    records = tuple(
        AppointmentRecord(
            record_id=id_offset + i,
            gender=gender[i],
            age_years=int(ages[i]),
            zone_id="z-" + zone[i],
            zone_income=zone[i],
            service=str(services[i]),
            facility_id=facility[i],
            lead_time_days=int(leads[i]),
            month=int(month[i]),
            day_of_week=day[i],
            outcome=str(outcomes[i]))
        for i in range(n))
    return RecordSet(records=records)


def _values_within_bands(rng: np.random.Generator, bands: np.ndarray,
                         ranges: Mapping[str, tuple[int, int]]) -> np.ndarray:
    lo = np.array([ranges[b][0] for b in bands])
    hi = np.array([ranges[b][1] for b in bands])
    return rng.integers(lo, hi)


def true_logit(spec: GeneratorSpec, records: RecordSet) -> np.ndarray:
    """True no-show log-odds of each record under the spec's ground truth."""
    levels = {
        variable: np.array([_report_level(r, variable) for r in records],
                           dtype=object)
        for variable in VARIABLES}
    return _logit_from_levels(spec, levels)


def bayes_auroc(spec: GeneratorSpec, records: RecordSet) -> float:
    """AUROC of the true probability as the score: the model ceiling."""
    return auroc(sigmoid(true_logit(spec, records)), records.labels)


# ---------------------------------------------------------------------------
# Presets

_REFERENCE_CACHE: dict | None = None


def reference_tables() -> dict:
    """Shipped per-service marginal counts and calendar odds ratios."""
    global _REFERENCE_CACHE
    if _REFERENCE_CACHE is None:
        text = (resources.files("noshow.data") / "reference_marginals.json")\
            .read_text("utf-8")
        _REFERENCE_CACHE = json.loads(text)
    return _REFERENCE_CACHE


def reference_population_mix() -> dict[str, float]:
    services = reference_tables()["services"]
    totals = {svc: t["total"]["show"] + t["total"]["no_show"]
              for svc, t in services.items()}
    grand = sum(totals.values())
    return {svc: totals[svc] / grand for svc in SERVICES}


def _uniform(levels) -> dict[str, float]:
    return {level: 1.0 / len(levels) for level in levels}


def default_frequencies() -> dict[str, dict[str, float]]:
    return {
        "gender": {"female": 0.5, "male": 0.5},
        "age": _uniform(AGE_BAND_RANGES),
        "zone_income": {"low": 0.7, "medium": 0.3},
        "lead_time": _uniform(LEAD_BAND_RANGES),
        "month": _uniform(MONTHS),
        "day_of_week": _uniform(DAYS),
        "facility_id": _uniform(DEFAULT_FACILITIES),
    }


def null_spec(n: int, seed: int = 0) -> GeneratorSpec:
    """No feature effects; every record's no-show probability is 29%."""
    return GeneratorSpec(
        n=n,
        service_mix=reference_population_mix(),
        level_frequencies=default_frequencies(),
        true_intercept=_logit(0.29),
        seed=seed)


def reference_service_spec(service: str, n: int, seed: int = 0,
                           include_calendar_effects: bool = False) -> GeneratorSpec:
    """One service's cohort, calibrated to the shipped marginal counts.

    Level frequencies for gender, age band, and lead-time band follow the
    historical counts; each level's coefficient is the gap between its
    historical no-show log-odds and the service's base log-odds. With
    ``include_calendar_effects``, month and weekday effects are derived
    from the shipped attendance odds ratios (an attendance odds ratio r
    shifts the no-show logit by -ln r).
    """
    if service not in SERVICES:
        raise ValidationError(f"unknown service {service!r}")
    table = reference_tables()["services"][service]
    base = table["total"]["no_show"] / (
        table["total"]["show"] + table["total"]["no_show"])

    frequencies = default_frequencies()
    coefficients: dict[str, float] = {}
    for variable in ("gender", "age", "lead_time"):
        counts = table[variable]
        total = sum(show + miss for show, miss in counts.values())
        frequencies[variable] = {
            level: (show + miss) / total
            for level, (show, miss) in counts.items()}
        for level, (show, miss) in counts.items():
            rate = miss / (show + miss)
            coefficients[f"{variable}={level}"] = _logit(rate) - _logit(base)

    if include_calendar_effects:
        odds = reference_tables()["attendance_odds"]
        for variable in ("month", "day_of_week"):
            for level, ratio in odds[variable][service].items():
                if ratio != 1.0:
                    coefficients[f"{variable}={level}"] = -math.log(ratio)

    return GeneratorSpec(
        n=n,
        service_mix={service: 1.0},
        level_frequencies=frequencies,
        true_intercept=_logit(base),
        true_coefficients=coefficients,
        seed=seed)


def recovery_spec(n: int, seed: int = 0) -> GeneratorSpec:
    """Sparse ground truth with identifiable signs.

    Each variable's most frequent level carries a zero effect, so a
    dropped-reference encoding leaves every nonzero coefficient on a
    retained column; the remaining columns are true zeros. Levels that
    do carry an effect are kept frequent enough that their mean-loss
    gradient clears the smallest penalty on the default path, keeping
    the signal identifiable after L1 shrinkage.
    """
    frequencies = {
        "gender": {"female": 0.55, "male": 0.45},
        "age": {"0-10": 0.15, "10-20": 0.10, "20-30": 0.10, "30-40": 0.30,
                "40-50": 0.15, "50-60": 0.10, "Over 60": 0.10},
        "zone_income": {"low": 0.7, "medium": 0.3},
        "lead_time": {"0-15": 0.45, "15-30": 0.20, "30-60": 0.15,
                      "Over 60": 0.20},
        "month": {m: (0.23 if m == "6" else 0.18 if m == "12" else 0.059)
                  for m in MONTHS},
        "day_of_week": {d: (0.24 if d == "WED" else 0.16 if d == "SAT"
                            else 0.12) for d in DAYS},
        "facility_id": {"f01": 0.5, "f02": 0.25, "f03": 0.25},
    }
    coefficients = {
        "gender=male": 0.8,
        "zone_income=medium": 0.5,
        "lead_time=Over 60": 0.7,
        "age=0-10": -0.6,
        "day_of_week=SAT": 0.45,
        "month=12": 0.5,
    }
    return GeneratorSpec(
        n=n,
        service_mix={"OH": 1.0},
        level_frequencies=frequencies,
        true_intercept=_logit(0.25),
        true_coefficients=coefficients,
        seed=seed)


def interaction_demo_spec(n: int, seed: int = 0,
                          strength: float = 1.0) -> GeneratorSpec:
    """Interaction-only ground truth that main effects cannot see.

    Saturday and Sunday shift risk in opposite directions for the two
    genders, with the negative shift sized so each gender's and each
    day's marginal no-show rate stays at the 29% base. A main-effects
    linear model scores at chance here; models able to represent the
    gender-by-day pattern do not.
    """
    base = 0.29
    intercept = _logit(base)
    lifted = float(sigmoid(np.array(intercept + strength)))
    dropped = 2.0 * base - lifted
    if not 0.0 < dropped < 1.0:
        raise ValidationError(
            f"strength {strength} cannot be balanced at base rate {base}")
    negative = _logit(dropped) - intercept
    effects = {
        "gender=female*day_of_week=SAT": strength,
        "gender=male*day_of_week=SUN": strength,
        "gender=male*day_of_week=SAT": negative,
        "gender=female*day_of_week=SUN": negative,
    }
    return GeneratorSpec(
        n=n,
        service_mix={"YAP": 1.0},
        level_frequencies=default_frequencies(),
        true_intercept=intercept,
        interaction_effects=effects,
        seed=seed)


def generate_population(n: int, seed: int = 0,
                        include_calendar_effects: bool = False) -> RecordSet:
    """All four services in their historical proportions, one RecordSet.

    Service cohorts are drawn on separate substreams of the same seed and
    concatenated with disjoint record id ranges (largest-remainder
    apportionment keeps the total at exactly ``n``).
    """
    if n < len(SERVICES):
        raise ValidationError(f"population needs at least {len(SERVICES)} rows")
    mix = reference_population_mix()
    quotas = [n * mix[svc] for svc in SERVICES]
    counts = [int(q) for q in quotas]
    leftovers = sorted(range(len(SERVICES)),
                       key=lambda i: quotas[i] - counts[i], reverse=True)
    for i in leftovers[:n - sum(counts)]:
        counts[i] += 1

    parts: list[AppointmentRecord] = []
    offset = 0
    for index, service in enumerate(SERVICES):
        if counts[index] == 0:
            continue
        spec = reference_service_spec(
            service, counts[index], seed=seed,
            include_calendar_effects=include_calendar_effects)
        shard = generate(spec, shard_index=index, id_offset=offset)
        parts.extend(shard.records)
        offset += counts[index]
    return RecordSet(records=tuple(parts))
