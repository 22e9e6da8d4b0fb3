"""Three inference methods mapping observations to disease beliefs.

All three consume the same assessments: disease priors and conditional
probabilities p(feature=value | disease).

* simple_bayes: Bayes' theorem assuming evidence conditionally
  independent given each disease.
* odds_likelihood: updating in odds form, additionally assuming
  independence given each disease's negation; the resulting
  probabilities generally do not sum to one and are renormalized.
* naive_dempster_shafer: per-observation single-disease posteriors
  (evoking strengths) treated as singleton mass assignments on a
  two-element frame per disease, combined with Dempster's rule for
  simple support functions, then renormalized.

Products run in log space so that cases with a hundred or more
observations cannot underflow; conversion back to probabilities happens
once, at normalization.  All functions are pure and safe to call
concurrently on shared immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    AllHypothesesRuledOut,
    ConflictingObservations,
    DegeneratePrior,
    EmptyEvidence,
    InconsistentProbabilities,
    UnknownDisease,
    UnknownObservation,
    ZeroMarginal,
)
from .kb import BeliefDistribution, KnowledgeBase, Observation

# A prior this close to 1 leaves no measurable mass on the negation.
_PRIOR_ONE_TOL = 1e-12
# Rounding may push the negation-conditional numerator slightly below
# zero; anything worse than this indicates inconsistent inputs.
_NEGATIVE_NUMERATOR_TOL = -1e-12

__all__ = [
    "BeliefDistribution",
    "MassAssignment",
    "simple_bayes",
    "marginal",
    "negation_conditional",
    "odds_likelihood",
    "evoking_strength",
    "naive_dempster_shafer",
    "cf_parallel_combine",
    "barnett_combine",
]


@dataclass(frozen=True)
class MassAssignment:
    """Per-disease mass on the singleton {disease}; the remainder sits on
    the disease's whole two-element frame."""

    singleton_mass: Mapping[str, float]

    def __post_init__(self) -> None:
        for d, m in self.singleton_mass.items():
            if not 0.0 <= m <= 1.0:
                raise ValueError(f"mass for '{d}' outside [0, 1]: {m!r}")


def _check_observation(kb: KnowledgeBase, obs: Observation) -> None:
    feature = kb.feature_index.get(obs.feature)
    if feature is None:
        raise UnknownObservation(f"unknown feature '{obs.feature}'")
    if obs.value not in feature.values:
        raise UnknownObservation(f"unknown value '{obs.value}' for feature '{obs.feature}'")


def _check_observations(kb: KnowledgeBase, observations: Sequence[Observation]) -> None:
    seen: set[str] = set()
    for obs in observations:
        _check_observation(kb, obs)
        if obs.feature in seen:
            raise ConflictingObservations(
                f"multiple observations for feature '{obs.feature}'"
            )
        seen.add(obs.feature)


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def _sigmoid(log_odds: float) -> float:
    if log_odds >= 0.0:
        return 1.0 / (1.0 + math.exp(-log_odds))
    e = math.exp(log_odds)
    return e / (1.0 + e)


def simple_bayes(kb: KnowledgeBase, observations: Sequence[Observation]) -> BeliefDistribution:
    """Posterior over diseases assuming evidence independent given disease.

    belief(d) is proportional to prior(d) times the product of
    p(obs | d) over the observations; an empty observation set leaves
    the priors.  The result is a genuine probability distribution, so
    pre_norm_sum is 1 by construction.
    """
    _check_observations(kb, observations)
    log_mass: dict[str, float] = {}
    for d in kb.diseases:
        terms = [_log(d.prior)]
        terms.extend(
            _log(kb.conditionals.prob(obs.feature, obs.value, d.id)) for obs in observations
        )
        # fsum is order-exact, so permuting the observations cannot move
        # the result even in the last bit.
        log_mass[d.id] = math.fsum(terms)

    peak = max(log_mass.values())
    if peak == -math.inf:
        raise AllHypothesesRuledOut("every disease has zero posterior mass")
    unnorm = {d: math.exp(lm - peak) for d, lm in log_mass.items()}
    z = math.fsum(unnorm.values())
    return BeliefDistribution(
        beliefs={d: u / z for d, u in unnorm.items()},
        pre_norm_sum=1.0,
        method="simple_bayes",
    )


def marginal(kb: KnowledgeBase, obs: Observation) -> float:
    """p(obs) = sum over diseases of p(obs | d) * p(d)."""
    _check_observation(kb, obs)
    total = math.fsum(
        d.prior * kb.conditionals.prob(obs.feature, obs.value, d.id) for d in kb.diseases
    )
    return min(total, 1.0)


def negation_conditional(kb: KnowledgeBase, obs: Observation, disease_id: str) -> float:
    """p(obs | not-d), derived from the marginal rather than assessed.

    Computed as (p(obs) - p(obs|d) p(d)) / (1 - p(d)).  The numerator is
    mathematically nonnegative; tiny negatives from rounding are clamped
    to zero, anything larger is reported as an inconsistency.
    """
    _check_observation(kb, obs)
    disease = kb.disease_index.get(disease_id)
    if disease is None:
        raise UnknownDisease(f"unknown disease '{disease_id}'")
    if disease.prior >= 1.0 - _PRIOR_ONE_TOL:
        raise DegeneratePrior(f"disease '{disease_id}' has prior 1; negation is empty")

    numerator = marginal(kb, obs) - kb.conditionals.prob(obs.feature, obs.value, disease_id) * disease.prior
    if numerator < _NEGATIVE_NUMERATOR_TOL:
        raise InconsistentProbabilities(
            f"negation conditional numerator {numerator!r} for ('{obs.feature}', '{obs.value}', '{disease_id}')"
        )
    numerator = max(numerator, 0.0)
    return min(numerator / (1.0 - disease.prior), 1.0)


def odds_likelihood(kb: KnowledgeBase, observations: Sequence[Observation]) -> BeliefDistribution:
    """Odds-form updating with independence assumed on disease negations.

    Per disease, posterior odds are prior odds times the product of
    likelihood ratios p(obs|d) / p(obs|not-d), accumulated as log odds.
    Each odds value is mapped back through p = O / (1 + O); the sum of
    these probabilities is recorded (it is 1 only when each hypothesis
    is updated by at most one observation) and the vector renormalized.

    Limit conventions: a disease with any zero-probability observation
    is ruled out regardless of other factors.  Otherwise a zero
    denominator makes the odds infinite and the pre-normalization belief
    1; if several diseases are infinite together they share the
    renormalized mass equally and every finite disease gets 0.
    """
    _check_observations(kb, observations)
    pre_norm: dict[str, float] = {}
    infinite: list[str] = []
    for d in kb.diseases:
        likelihoods = [
            kb.conditionals.prob(obs.feature, obs.value, d.id) for obs in observations
        ]
        if any(p == 0.0 for p in likelihoods):
            pre_norm[d.id] = 0.0
            continue
        if d.prior >= 1.0 - _PRIOR_ONE_TOL:
            # An exhaustive single hypothesis has infinite prior odds.
            pre_norm[d.id] = 1.0
            infinite.append(d.id)
            continue
        terms = [math.log(d.prior) - math.log1p(-d.prior)]
        ruled_in = False
        for obs, p in zip(observations, likelihoods):
            denom = negation_conditional(kb, obs, d.id)
            if denom == 0.0:
                ruled_in = True
                break
            terms.append(math.log(p) - math.log(denom))
        if ruled_in:
            pre_norm[d.id] = 1.0
            infinite.append(d.id)
        else:
            pre_norm[d.id] = _sigmoid(math.fsum(terms))

    pre_norm_sum = math.fsum(pre_norm.values())
    if infinite:
        share = 1.0 / len(infinite)
        beliefs = {d: (share if d in infinite else 0.0) for d in pre_norm}
        return BeliefDistribution(beliefs=beliefs, pre_norm_sum=pre_norm_sum, method="odds_likelihood")
    if pre_norm_sum <= 0.0:
        raise AllHypothesesRuledOut("every disease has zero posterior odds")
    return BeliefDistribution(
        beliefs={d: p / pre_norm_sum for d, p in pre_norm.items()},
        pre_norm_sum=pre_norm_sum,
        method="odds_likelihood",
    )


def evoking_strength(kb: KnowledgeBase, obs: Observation) -> MassAssignment:
    """Single-observation posterior for each disease, as singleton masses.

    ES(d, obs) = p(d) p(obs|d) / sum_j p(d_j) p(obs|d_j), which is
    Bayes' theorem over the exhaustive disease set for one observation.
    """
    _check_observation(kb, obs)
    weighted = {
        d.id: d.prior * kb.conditionals.prob(obs.feature, obs.value, d.id)
        for d in kb.diseases
    }
    z = math.fsum(weighted.values())
    if z <= 0.0:
        raise ZeroMarginal(
            f"observation ('{obs.feature}', '{obs.value}') has zero marginal probability"
        )
    return MassAssignment(singleton_mass={d: w / z for d, w in weighted.items()})


def cf_parallel_combine(x: float, y: float) -> float:
    """Parallel combination of two confirming certainty values.

    Returns 1 - (1-x)(1-y), algebraically x + y(1-x): commutative,
    associative, identity 0, absorbing element 1.
    """
    return x + y * (1.0 - x)


def barnett_combine(masses: Iterable[float]) -> float:
    """Combined singleton belief 1 - prod(1 - m) over simple support masses.

    Evaluated through logs so that long streams of small masses keep
    full precision; a mass of 1 is absorbing exactly, and a mass of 0
    leaves the combination exactly unchanged.
    """
    terms = []
    for m in masses:
        if m >= 1.0:
            return 1.0
        terms.append(math.log1p(-m))
    return -math.expm1(math.fsum(terms))


def naive_dempster_shafer(
    kb: KnowledgeBase, observations: Sequence[Observation]
) -> BeliefDistribution:
    """Belief per disease from combining evoking strengths across observations.

    Bel(d) = 1 - prod over observations of (1 - ES(d, obs)), renormalized
    to sum to one.  Rejects an empty observation set: the empty
    combination assigns zero belief everywhere, which has no defensible
    normalization.
    """
    if not observations:
        raise EmptyEvidence("naive Dempster-Shafer requires at least one observation")
    _check_observations(kb, observations)

    per_obs = [evoking_strength(kb, obs) for obs in observations]
    raw = {
        d.id: barnett_combine(mass.singleton_mass[d.id] for mass in per_obs)
        for d in kb.diseases
    }
    return BeliefDistribution.from_unnormalized(raw, method="naive_dempster_shafer")
