"""Decision rules over belief distributions and the diagnostic utility model.

Diagnostic utilities U(true disease, diagnosed disease) are stored as
nonnegative *disutilities* in micromorts (one micromort = a one in one
million chance of immediate, painless death).  Expected-utility
maximization over negated utilities is therefore implemented here as
expected-disutility minimization; the chosen diagnosis is identical and
reported numbers read as "decrease in utility", smallest is best.

Utilities are assessed once per equivalence class (diseases sharing
treatment and prognosis) and expanded to disease pairs on demand, which
turns a quadratic number of assessments over diseases into a quadratic
number over the far fewer classes.

Utility file format (UTF-8 JSON)::

    {"classes": ["benign", ...],
     "expansion": {"disease_id": "class_id", ...},
     "disutility": [{"true": "benign", "diagnosed": "benign",
                     "micromorts": 1000}, ...]}   # dense over class pairs
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import IO, Mapping

from .errors import (
    FileFormatError,
    LinearityRangeExceeded,
    NonpositiveValueOfLife,
    UnmappedDisease,
    ValidationError,
)
from .kb import BeliefDistribution, KnowledgeBase, _number, _parse_json, _require, _string

# The money/risk trade is linear only for small death probabilities.
LINEAR_RISK_LIMIT = 0.001

MAX_BELIEF = "max_belief"
MEU = "meu"


@dataclass(frozen=True)
class UtilityMatrix:
    """Class-level diagnostic disutilities plus a disease-to-class map."""

    classes: tuple[str, ...]
    class_disutility: Mapping[tuple[str, str], float]
    expansion: Mapping[str, str]

    def __post_init__(self) -> None:
        violations = []
        if len(set(self.classes)) != len(self.classes):
            violations.append("duplicate equivalence-class ids")
        known = set(self.classes)
        for (i, j), u in self.class_disutility.items():
            if i not in known or j not in known:
                violations.append(f"disutility entry ({i}, {j}): unknown class")
            if u < 0.0:
                violations.append(f"disutility entry ({i}, {j}): negative micromorts {u!r}")
        for i in self.classes:
            for j in self.classes:
                if (i, j) not in self.class_disutility:
                    violations.append(f"missing disutility entry ({i}, {j})")
        for disease, cls in self.expansion.items():
            if cls not in known:
                violations.append(f"disease '{disease}' mapped to unknown class '{cls}'")
        if violations:
            raise ValidationError(violations)

    def disease_class(self, disease_id: str) -> str:
        try:
            return self.expansion[disease_id]
        except KeyError:
            raise UnmappedDisease(f"disease '{disease_id}' has no equivalence class") from None

    def disutility(self, true_disease: str, diagnosed_disease: str) -> float:
        return self.class_disutility[
            (self.disease_class(true_disease), self.disease_class(diagnosed_disease))
        ]


@dataclass(frozen=True)
class Diagnosis:
    disease: str
    rule: str  # MAX_BELIEF or MEU


@dataclass(frozen=True)
class MicromortQuote:
    amount: float

    def __post_init__(self) -> None:
        if self.amount < 0.0:
            raise ValueError(f"micromort amount must be nonnegative, got {self.amount!r}")


def max_belief_diagnosis(p: BeliefDistribution) -> Diagnosis:
    """The disease with the highest belief; ties go to the smallest id.

    Works for any nonnegative belief vector, probabilistic or not.
    """
    if not p.beliefs:
        raise ValueError("empty belief distribution")
    best_id = None
    best = -math.inf
    for disease in sorted(p.beliefs):
        b = p.beliefs[disease]
        if b > best:
            best, best_id = b, disease
    return Diagnosis(disease=best_id, rule=MAX_BELIEF)


def expected_class_disutility(
    p: BeliefDistribution, utilities: UtilityMatrix, diagnosed_class: str
) -> float:
    """Expected micromorts of diagnosing into ``diagnosed_class`` under ``p``.

    Shared by the expected-utility decision rule and by rating
    computations so that both produce bit-identical values for the same
    diagnosis.
    """
    return math.fsum(
        belief * utilities.class_disutility[(utilities.disease_class(disease), diagnosed_class)]
        for disease, belief in p.beliefs.items()
    )


def meu_diagnosis(p: BeliefDistribution, utilities: UtilityMatrix, kb: KnowledgeBase) -> Diagnosis:
    """The diagnosis minimizing expected disutility under ``p``.

    Candidates are all diseases in the knowledge base; ties go to the
    smallest disease id, so any disease within the optimal equivalence
    class may be returned and all such choices score identically.
    """
    best_id = None
    best = math.inf
    for candidate in sorted(d.id for d in kb.diseases):
        expected = expected_class_disutility(p, utilities, utilities.disease_class(candidate))
        if expected < best:
            best, best_id = expected, candidate
    if best_id is None:
        raise ValueError("knowledge base has no diseases")
    return Diagnosis(disease=best_id, rule=MEU)


def expand_utilities(utilities: UtilityMatrix, kb: KnowledgeBase) -> dict[tuple[str, str], float]:
    """Disease-pair disutilities from class-pair assessments.

    Produces one entry per ordered disease pair; diseases in the same
    class share identical rows and columns.
    """
    expanded: dict[tuple[str, str], float] = {}
    for di in kb.diseases:
        ci = utilities.disease_class(di.id)
        for dj in kb.diseases:
            expanded[(di.id, dj.id)] = utilities.class_disutility[
                (ci, utilities.disease_class(dj.id))
            ]
    return expanded


def wtp_to_micromorts(dollars: float, small_risk_value_of_life: float) -> MicromortQuote:
    """Convert a willingness-to-pay amount into micromorts.

    Uses the linear small-risk trade: at a small-risk value of life V,
    money and death risk exchange at V / 1,000,000 dollars per
    micromort.  Warns (without failing) when the implied death
    probability exceeds the linear range of 0.001.
    """
    if small_risk_value_of_life <= 0.0:
        raise NonpositiveValueOfLife(
            f"small-risk value of life must be positive, got {small_risk_value_of_life!r}"
        )
    if dollars < 0.0:
        raise ValueError(f"willingness to pay must be nonnegative, got {dollars!r}")
    implied_probability = dollars / small_risk_value_of_life
    if implied_probability > LINEAR_RISK_LIMIT:
        warnings.warn(
            f"implied death probability {implied_probability:.6g} exceeds the "
            f"linear small-risk range ({LINEAR_RISK_LIMIT})",
            LinearityRangeExceeded,
            stacklevel=2,
        )
    return MicromortQuote(amount=dollars / (small_risk_value_of_life / 1e6))


def offdiagonal_adjust(base: float, delta: MicromortQuote) -> float:
    """Add the disutility of an extra consequence to a preexisting assessment.

    Off-diagonal entries are assessed by starting from the most similar
    existing entry and pricing the difference; this is the arithmetic
    half of that procedure.
    """
    if base < 0.0:
        raise ValueError(f"base disutility must be nonnegative, got {base!r}")
    return base + delta.amount


# ---------------------------------------------------------------------------
# Utility file handling


def load_utilities(source: bytes | str | os.PathLike | IO[bytes]) -> UtilityMatrix:
    """Parse a utility file; raises on missing entries or negative values."""
    doc = _parse_json(source, "utilities")
    if not isinstance(doc, dict):
        raise FileFormatError("utilities: top level must be a JSON object")

    raw_classes = _require(doc, "classes", "utilities")
    if not isinstance(raw_classes, list):
        raise FileFormatError("utilities.classes: expected an array")
    classes = tuple(_string(c, f"utilities.classes[{i}]") for i, c in enumerate(raw_classes))

    raw_expansion = _require(doc, "expansion", "utilities")
    if not isinstance(raw_expansion, dict):
        raise FileFormatError("utilities.expansion: expected an object")
    expansion = {
        _string(k, "utilities.expansion key"): _string(v, f"utilities.expansion['{k}']")
        for k, v in raw_expansion.items()
    }

    entries: dict[tuple[str, str], float] = {}
    for i, entry in enumerate(_require(doc, "disutility", "utilities")):
        where = f"utilities.disutility[{i}]"
        true_cls = _string(_require(entry, "true", where), f"{where}.true")
        diag_cls = _string(_require(entry, "diagnosed", where), f"{where}.diagnosed")
        entries[(true_cls, diag_cls)] = _number(
            _require(entry, "micromorts", where), f"{where}.micromorts"
        )

    return UtilityMatrix(classes=classes, class_disutility=entries, expansion=expansion)


def utility_coverage_violations(utilities: UtilityMatrix, kb: KnowledgeBase) -> list[str]:
    """Cross-checks run when a utility model is attached to a knowledge base."""
    violations = []
    known = set(utilities.classes)
    for d in kb.diseases:
        if d.id not in utilities.expansion:
            violations.append(f"disease '{d.id}': not mapped in the utility model")
        elif utilities.expansion[d.id] != d.equivalence_class:
            violations.append(
                f"disease '{d.id}': knowledge base class '{d.equivalence_class}' "
                f"differs from utility expansion '{utilities.expansion[d.id]}'"
            )
        if d.equivalence_class not in known:
            violations.append(
                f"disease '{d.id}': equivalence class '{d.equivalence_class}' "
                "missing from the utility model"
            )
    return violations
