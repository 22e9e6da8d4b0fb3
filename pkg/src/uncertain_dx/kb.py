"""Probabilistic knowledge base: domain types, file ingestion, validation.

The knowledge base holds mutually exclusive and exhaustive disease
hypotheses with prior probabilities, multi-valued features whose values
are mutually exclusive and exhaustive, and a dense conditional table
p(feature=value | disease).  Case records pair observation sets with
optional gold-standard distributions and expert ratings.

Everything in this module is immutable after load and safe to share
across threads.

File formats (UTF-8 JSON):

* Knowledge base::

    {"diseases":     [{"id": "d1", "name": "...", "prior": 0.5, "class": "c1"}, ...],
     "features":     [{"id": "f1", "name": "...", "values": ["v1", "v2"]}, ...],
     "conditionals": [{"feature": "f1", "disease": "d1",
                       "probs": {"v1": 0.8, "v2": 0.2}}, ...]}

* Cases: a JSON array of::

    {"id": "c1",
     "observations": [{"feature": "f1", "value": "v1"}, ...],
     "true_diagnosis": "d1",                  # optional
     "gold_descriptive": {"d1": 0.7, ...},    # optional, sums to 1 +- 1e-6
     "gold_informed":    {"d1": 0.8, ...},    # optional
     "expert_ratings":   {"simple_bayes": 8, ...}}  # optional, 0..10
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Mapping

from .errors import AllHypothesesRuledOut, FileFormatError, ValidationError

# Probability sums are checked against these tolerances: tight enough to
# catch data errors, loose enough for decimal text round-trips.
PROB_SUM_TOL = 1e-9
GOLD_SUM_TOL = 1e-6

BELIEF_METHODS = ("simple_bayes", "odds_likelihood", "naive_dempster_shafer", "external")


@dataclass(frozen=True)
class Disease:
    id: str
    name: str
    prior: float
    equivalence_class: str


@dataclass(frozen=True)
class Feature:
    id: str
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class ConditionalTable:
    """Dense map (feature id, value id, disease id) -> probability."""

    entries: Mapping[tuple[str, str, str], float]

    def prob(self, feature: str, value: str, disease: str) -> float:
        return self.entries[(feature, value, disease)]


@dataclass(frozen=True)
class KnowledgeBase:
    diseases: tuple[Disease, ...]
    features: tuple[Feature, ...]
    conditionals: ConditionalTable

    @cached_property
    def disease_index(self) -> dict[str, Disease]:
        return {d.id: d for d in self.diseases}

    @cached_property
    def feature_index(self) -> dict[str, Feature]:
        return {f.id: f for f in self.features}

    def prior(self, disease_id: str) -> float:
        return self.disease_index[disease_id].prior


@dataclass(frozen=True)
class Observation:
    """One (feature, value) pair; a case observes at most one value per feature."""

    feature: str
    value: str


@dataclass(frozen=True)
class BeliefDistribution:
    """Per-disease belief vector, renormalized to sum to one.

    ``pre_norm_sum`` retains the total belief mass the producing method
    assigned before renormalization; it equals 1 exactly when the
    method's independence assumptions are jointly consistent.
    """

    beliefs: Mapping[str, float]
    pre_norm_sum: float
    method: str

    def __post_init__(self) -> None:
        if self.method not in BELIEF_METHODS:
            raise ValueError(f"unknown belief method tag '{self.method}'")
        if self.pre_norm_sum < 0:
            raise ValueError("pre_norm_sum must be nonnegative")
        for disease, value in self.beliefs.items():
            if not 0.0 <= value <= 1.0 + PROB_SUM_TOL:
                raise ValueError(f"belief for '{disease}' outside [0, 1]: {value!r}")
        total = math.fsum(self.beliefs.values())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"beliefs sum to {total!r}, expected 1 within {PROB_SUM_TOL}")

    @classmethod
    def from_unnormalized(cls, raw: Mapping[str, float], method: str) -> "BeliefDistribution":
        """Renormalize a raw nonnegative belief vector, recording its sum.

        Raises AllHypothesesRuledOut when every entry is zero; a uniform
        fallback would silently hide an inconsistent case.
        """
        total = math.fsum(raw.values())
        if total <= 0.0:
            raise AllHypothesesRuledOut("all hypotheses have zero belief")
        return cls(
            beliefs={d: v / total for d, v in raw.items()},
            pre_norm_sum=total,
            method=method,
        )

    def belief(self, disease_id: str) -> float:
        return self.beliefs.get(disease_id, 0.0)

    def sorted_items(self) -> list[tuple[str, float]]:
        """(disease, belief) pairs by descending belief, id as tie-break."""
        return sorted(self.beliefs.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class CaseRecord:
    id: str
    observations: tuple[Observation, ...]
    true_diagnosis: str | None = None
    gold_descriptive: BeliefDistribution | None = None
    gold_informed: BeliefDistribution | None = None
    expert_ratings: Mapping[str, float] | None = None

    def gold(self, source: str) -> BeliefDistribution | None:
        if source == "descriptive":
            return self.gold_descriptive
        if source == "informed":
            return self.gold_informed
        raise ValueError(f"unknown gold source '{source}'")


# ---------------------------------------------------------------------------
# Validation


def validate_kb(kb: KnowledgeBase) -> list[str]:
    """Check every knowledge-base invariant; return violations as data.

    An empty list means the knowledge base is valid.  Each violation
    names the offending entity and the rule it breaks.
    """
    violations: list[str] = []

    seen_d: set[str] = set()
    for d in kb.diseases:
        if d.id in seen_d:
            violations.append(f"disease '{d.id}': duplicate id")
        seen_d.add(d.id)
        if d.prior <= 0.0:
            violations.append(f"disease '{d.id}': prior must be strictly positive")
        if d.prior > 1.0:
            violations.append(f"disease '{d.id}': prior {d.prior} exceeds 1")
    if not kb.diseases:
        violations.append("knowledge base has no diseases")
    else:
        total = math.fsum(d.prior for d in kb.diseases)
        if abs(total - 1.0) > PROB_SUM_TOL:
            violations.append(f"disease priors must sum to 1 (got {total!r})")

    seen_f: set[str] = set()
    for f in kb.features:
        if f.id in seen_f:
            violations.append(f"feature '{f.id}': duplicate id")
        seen_f.add(f.id)
        if len(f.values) < 2:
            violations.append(f"feature '{f.id}': needs at least 2 values")
        if len(set(f.values)) != len(f.values):
            violations.append(f"feature '{f.id}': duplicate value ids")

    valid_values = {f.id: set(f.values) for f in kb.features}
    disease_ids = {d.id for d in kb.diseases}
    for (feat, value, dis), p in kb.conditionals.entries.items():
        if feat not in valid_values:
            violations.append(f"conditional ({feat}, {value}, {dis}): unknown feature")
            continue
        if value not in valid_values[feat]:
            violations.append(f"conditional ({feat}, {value}, {dis}): unknown value")
        if dis not in disease_ids:
            violations.append(f"conditional ({feat}, {value}, {dis}): unknown disease")
        if not 0.0 <= p <= 1.0:
            violations.append(f"conditional ({feat}, {value}, {dis}): probability {p} outside [0, 1]")

    # Dense-table requirement: every (feature, disease) row complete and
    # summing to 1.
    for f in kb.features:
        if len(set(f.values)) != len(f.values):
            continue
        for d in kb.diseases:
            row = [
                kb.conditionals.entries[(f.id, v, d.id)]
                for v in f.values
                if (f.id, v, d.id) in kb.conditionals.entries
            ]
            if len(row) != len(f.values):
                violations.append(f"conditional row ({f.id}, {d.id}): missing value entries")
                continue
            s = math.fsum(row)
            if abs(s - 1.0) > PROB_SUM_TOL:
                violations.append(f"conditional row ({f.id}, {d.id}): sums to {s!r}, expected 1")

    return violations


# ---------------------------------------------------------------------------
# Loading and serialization


def _read_bytes(source: bytes | str | os.PathLike | IO[bytes]) -> bytes:
    if isinstance(source, bytes):
        return source
    if hasattr(source, "read"):
        data = source.read()
        return data.encode("utf-8") if isinstance(data, str) else data
    with open(source, "rb") as fh:
        return fh.read()


def _parse_json(source: bytes | str | os.PathLike | IO[bytes], what: str):
    raw = _read_bytes(source)
    try:
        return json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise FileFormatError(f"{what}: not valid UTF-8 ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise FileFormatError(
            f"{what}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def _require(obj: Mapping, key: str, where: str):
    if key not in obj:
        raise FileFormatError(f"{where}: missing key '{key}'")
    return obj[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FileFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _string(value, where: str) -> str:
    if not isinstance(value, str):
        raise FileFormatError(f"{where}: expected a string, got {value!r}")
    return value


def load_kb(source: bytes | str | os.PathLike | IO[bytes]) -> KnowledgeBase:
    """Parse and validate a knowledge-base file.

    Accepts raw bytes, a binary file object, or a filesystem path.
    Raises FileFormatError with the offending location on parse errors
    and ValidationError carrying all violations on semantic errors.
    """
    doc = _parse_json(source, "knowledge base")
    if not isinstance(doc, dict):
        raise FileFormatError("knowledge base: top level must be a JSON object")

    diseases = []
    for i, entry in enumerate(_require(doc, "diseases", "knowledge base")):
        where = f"diseases[{i}]"
        diseases.append(
            Disease(
                id=_string(_require(entry, "id", where), f"{where}.id"),
                name=_string(_require(entry, "name", where), f"{where}.name"),
                prior=_number(_require(entry, "prior", where), f"{where}.prior"),
                equivalence_class=_string(_require(entry, "class", where), f"{where}.class"),
            )
        )

    features = []
    for i, entry in enumerate(_require(doc, "features", "knowledge base")):
        where = f"features[{i}]"
        values = _require(entry, "values", where)
        if not isinstance(values, list):
            raise FileFormatError(f"{where}.values: expected an array")
        features.append(
            Feature(
                id=_string(_require(entry, "id", where), f"{where}.id"),
                name=_string(_require(entry, "name", where), f"{where}.name"),
                values=tuple(_string(v, f"{where}.values[{j}]") for j, v in enumerate(values)),
            )
        )

    entries: dict[tuple[str, str, str], float] = {}
    for i, entry in enumerate(_require(doc, "conditionals", "knowledge base")):
        where = f"conditionals[{i}]"
        feat = _string(_require(entry, "feature", where), f"{where}.feature")
        dis = _string(_require(entry, "disease", where), f"{where}.disease")
        probs = _require(entry, "probs", where)
        if not isinstance(probs, dict):
            raise FileFormatError(f"{where}.probs: expected an object")
        for value, p in probs.items():
            entries[(feat, value, dis)] = _number(p, f"{where}.probs['{value}']")

    kb = KnowledgeBase(
        diseases=tuple(diseases),
        features=tuple(features),
        conditionals=ConditionalTable(entries),
    )
    violations = validate_kb(kb)
    if violations:
        raise ValidationError(violations)
    return kb


def serialize_kb(kb: KnowledgeBase) -> bytes:
    """Inverse of load_kb; loading the output reproduces the knowledge base."""
    doc = {
        "diseases": [
            {"id": d.id, "name": d.name, "prior": d.prior, "class": d.equivalence_class}
            for d in kb.diseases
        ],
        "features": [
            {"id": f.id, "name": f.name, "values": list(f.values)} for f in kb.features
        ],
        "conditionals": [
            {
                "feature": f.id,
                "disease": d.id,
                "probs": {v: kb.conditionals.entries[(f.id, v, d.id)] for v in f.values},
            }
            for f in kb.features
            for d in kb.diseases
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def _load_gold(raw, kb: KnowledgeBase, where: str, violations: list[str]) -> BeliefDistribution | None:
    if not isinstance(raw, dict):
        raise FileFormatError(f"{where}: expected an object mapping disease to probability")
    dist: dict[str, float] = {}
    for dis, p in raw.items():
        if dis not in kb.disease_index:
            violations.append(f"{where}: unknown disease '{dis}'")
            return None
        value = _number(p, f"{where}['{dis}']")
        if value < 0.0:
            violations.append(f"{where}: negative probability for '{dis}'")
            return None
        dist[dis] = value
    total = math.fsum(dist.values())
    if abs(total - 1.0) > GOLD_SUM_TOL:
        violations.append(f"{where}: probabilities sum to {total!r}, expected 1 within {GOLD_SUM_TOL}")
        return None
    # Renormalize the file's decimal values so downstream arithmetic sees
    # an exact distribution; the raw sum is retained on the distribution.
    return BeliefDistribution.from_unnormalized(dist, method="external")


def load_cases(source: bytes | str | os.PathLike | IO[bytes], kb: KnowledgeBase) -> list[CaseRecord]:
    """Parse a case file and validate every case against the knowledge base."""
    doc = _parse_json(source, "cases")
    if not isinstance(doc, list):
        raise FileFormatError("cases: top level must be a JSON array")

    cases: list[CaseRecord] = []
    violations: list[str] = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(doc):
        where = f"cases[{i}]"
        case_id = _string(_require(entry, "id", where), f"{where}.id")
        where = f"case '{case_id}'"
        if case_id in seen_ids:
            violations.append(f"{where}: duplicate case id")
        seen_ids.add(case_id)

        observations: list[Observation] = []
        seen_features: set[str] = set()
        for j, obs in enumerate(_require(entry, "observations", where)):
            ow = f"{where}.observations[{j}]"
            feat = _string(_require(obs, "feature", ow), f"{ow}.feature")
            value = _string(_require(obs, "value", ow), f"{ow}.value")
            feature = kb.feature_index.get(feat)
            if feature is None:
                violations.append(f"{ow}: unknown feature '{feat}'")
                continue
            if value not in feature.values:
                violations.append(f"{ow}: unknown value '{value}' for feature '{feat}'")
                continue
            if feat in seen_features:
                violations.append(f"{where}: multiple observations for feature '{feat}'")
                continue
            seen_features.add(feat)
            observations.append(Observation(feature=feat, value=value))

        true_dx = entry.get("true_diagnosis")
        if true_dx is not None:
            true_dx = _string(true_dx, f"{where}.true_diagnosis")
            if true_dx not in kb.disease_index:
                violations.append(f"{where}: unknown true diagnosis '{true_dx}'")
                true_dx = None

        gold_desc = gold_inf = None
        if entry.get("gold_descriptive") is not None:
            gold_desc = _load_gold(entry["gold_descriptive"], kb, f"{where}.gold_descriptive", violations)
        if entry.get("gold_informed") is not None:
            gold_inf = _load_gold(entry["gold_informed"], kb, f"{where}.gold_informed", violations)

        ratings = None
        if entry.get("expert_ratings") is not None:
            raw_ratings = entry["expert_ratings"]
            if not isinstance(raw_ratings, dict):
                raise FileFormatError(f"{where}.expert_ratings: expected an object")
            ratings = {}
            for method, r in raw_ratings.items():
                value = _number(r, f"{where}.expert_ratings['{method}']")
                if not 0.0 <= value <= 10.0:
                    violations.append(f"{where}: rating for '{method}' outside [0, 10]")
                ratings[method] = value

        cases.append(
            CaseRecord(
                id=case_id,
                observations=tuple(observations),
                true_diagnosis=true_dx,
                gold_descriptive=gold_desc,
                gold_informed=gold_inf,
                expert_ratings=ratings,
            )
        )

    if violations:
        raise ValidationError(violations)
    return cases


# ---------------------------------------------------------------------------
# Feature clustering


def cross_product_feature(
    a: Feature, b: Feature, tables: ConditionalTable
) -> tuple[Feature, ConditionalTable]:
    """Merge two dependent features into one whose values are value pairs.

    The merged feature's id is ``"<a.id>+<b.id>"`` and its values are all
    ordered pairs ``"<a value>+<b value>"``.  Joint conditional rows for
    the merged feature must be supplied by the caller in ``tables`` under
    the merged feature id: the two features are being merged precisely
    because they are dependent, so multiplying their marginal rows would
    defeat the purpose.
    """
    if a.id == b.id:
        raise ValueError(f"cannot merge feature '{a.id}' with itself")

    merged_id = f"{a.id}+{b.id}"
    values = tuple(f"{va}+{vb}" for va in a.values for vb in b.values)
    merged = Feature(id=merged_id, name=f"{a.name} and {b.name}", values=values)

    supplied = {
        key: p for key, p in tables.entries.items() if key[0] == merged_id
    }
    disease_ids = sorted({dis for (_, _, dis) in supplied})
    if not disease_ids:
        raise ValidationError(
            [f"merged feature '{merged_id}': no joint conditional rows supplied"]
        )

    violations: list[str] = []
    for dis in disease_ids:
        row = []
        for v in values:
            key = (merged_id, v, dis)
            if key not in supplied:
                violations.append(
                    f"merged feature '{merged_id}', disease '{dis}': missing joint row for value '{v}'"
                )
                continue
            row.append(supplied[key])
        if len(row) == len(values):
            s = math.fsum(row)
            if abs(s - 1.0) > PROB_SUM_TOL:
                violations.append(
                    f"merged feature '{merged_id}', disease '{dis}': joint row sums to {s!r}, expected 1"
                )
    stray = [k for k in supplied if k[1] not in set(values)]
    for key in stray:
        violations.append(f"merged feature '{merged_id}': unexpected value '{key[1]}'")
    if violations:
        raise ValidationError(violations)

    return merged, ConditionalTable(supplied)
