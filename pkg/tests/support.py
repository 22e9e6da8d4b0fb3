"""Shared test helpers: random model generators and exact-arithmetic oracles.

The oracles recompute each inference method with fractions.Fraction so
they share no arithmetic path (and no rounding) with the engine under
test; float inputs convert to Fraction exactly, so the oracle value is
the true real-arithmetic answer for the float-valued model.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from hypothesis import strategies as st

from uncertain_dx.kb import (
    ConditionalTable,
    Disease,
    Feature,
    KnowledgeBase,
    Observation,
)


def _normalized(rng: random.Random, k: int) -> list[float]:
    weights = [rng.gammavariate(1.0, 1.0) for _ in range(k)]
    total = sum(weights)
    return [w / total for w in weights]


def random_kb(
    rng: random.Random,
    n_diseases: int,
    n_features: int,
    max_values: int = 4,
) -> KnowledgeBase:
    """Dirichlet-random knowledge base with strictly positive entries."""
    diseases = tuple(
        Disease(id=f"d{i}", name=f"disease {i}", prior=p, equivalence_class=f"c{i}")
        for i, p in enumerate(_normalized(rng, n_diseases))
    )
    features = []
    entries: dict[tuple[str, str, str], float] = {}
    for k in range(n_features):
        n_values = rng.randint(2, max_values)
        values = tuple(f"v{j}" for j in range(n_values))
        features.append(Feature(id=f"f{k}", name=f"feature {k}", values=values))
        for d in diseases:
            for value, p in zip(values, _normalized(rng, n_values)):
                entries[(f"f{k}", value, d.id)] = p
    return KnowledgeBase(
        diseases=diseases, features=features and tuple(features), conditionals=ConditionalTable(entries)
    )


def random_observations(rng: random.Random, kb: KnowledgeBase, count: int) -> list[Observation]:
    """At most one observation per feature, features chosen without replacement."""
    chosen = rng.sample(list(kb.features), min(count, len(kb.features)))
    return [Observation(feature=f.id, value=rng.choice(f.values)) for f in chosen]


# ---------------------------------------------------------------------------
# Exact-arithmetic oracles


def exact_simple_bayes(kb: KnowledgeBase, observations: Sequence[Observation]) -> dict[str, float]:
    raw = {}
    for d in kb.diseases:
        mass = Fraction(d.prior)
        for o in observations:
            mass *= Fraction(kb.conditionals.prob(o.feature, o.value, d.id))
        raw[d.id] = mass
    total = sum(raw.values())
    return {i: float(m / total) for i, m in raw.items()}


def exact_odds_likelihood(
    kb: KnowledgeBase, observations: Sequence[Observation]
) -> tuple[dict[str, float], float]:
    """(renormalized beliefs, pre-normalization sum); finite-odds inputs only."""
    marginals = {}
    for o in observations:
        marginals[o] = sum(
            Fraction(d.prior) * Fraction(kb.conditionals.prob(o.feature, o.value, d.id))
            for d in kb.diseases
        )
    pre = {}
    for d in kb.diseases:
        prior = Fraction(d.prior)
        odds = prior / (1 - prior)
        for o in observations:
            numer = Fraction(kb.conditionals.prob(o.feature, o.value, d.id))
            denom = (marginals[o] - numer * prior) / (1 - prior)
            odds *= numer / denom
        pre[d.id] = odds / (1 + odds)
    total = sum(pre.values())
    return {i: float(p / total) for i, p in pre.items()}, float(total)


def exact_naive_ds(
    kb: KnowledgeBase, observations: Sequence[Observation]
) -> tuple[dict[str, float], float]:
    """(renormalized beliefs, pre-normalization sum) via the product form."""
    marginals = {}
    for o in observations:
        marginals[o] = sum(
            Fraction(d.prior) * Fraction(kb.conditionals.prob(o.feature, o.value, d.id))
            for d in kb.diseases
        )
    bel = {}
    for d in kb.diseases:
        prod = Fraction(1)
        for o in observations:
            es = Fraction(d.prior) * Fraction(kb.conditionals.prob(o.feature, o.value, d.id)) / marginals[o]
            prod *= 1 - es
        bel[d.id] = 1 - prod
    total = sum(bel.values())
    return {i: float(b / total) for i, b in bel.items()}, float(total)


# ---------------------------------------------------------------------------
# Hypothesis strategies

_positive_weight = st.floats(min_value=0.05, max_value=20.0, allow_nan=False, allow_infinity=False)


@st.composite
def knowledge_bases(draw, min_diseases=2, max_diseases=5, min_features=1, max_features=4):
    """Small random knowledge bases with Dirichlet-style rows."""
    n_d = draw(st.integers(min_diseases, max_diseases))
    n_f = draw(st.integers(min_features, max_features))
    prior_w = draw(st.lists(_positive_weight, min_size=n_d, max_size=n_d))
    total = sum(prior_w)
    diseases = tuple(
        Disease(id=f"d{i}", name=f"disease {i}", prior=w / total, equivalence_class=f"c{i}")
        for i, w in enumerate(prior_w)
    )
    features = []
    entries = {}
    for k in range(n_f):
        n_v = draw(st.integers(2, 3))
        values = tuple(f"v{j}" for j in range(n_v))
        features.append(Feature(id=f"f{k}", name=f"feature {k}", values=values))
        for d in diseases:
            row_w = draw(st.lists(_positive_weight, min_size=n_v, max_size=n_v))
            row_total = sum(row_w)
            for value, w in zip(values, row_w):
                entries[(f"f{k}", value, d.id)] = w / row_total
    return KnowledgeBase(
        diseases=diseases, features=tuple(features), conditionals=ConditionalTable(entries)
    )


@st.composite
def kb_with_observations(draw, max_observations=4, **kb_kwargs):
    kb = draw(knowledge_bases(**kb_kwargs))
    count = draw(st.integers(1, max_observations))
    picked = draw(
        st.lists(
            st.integers(0, len(kb.features) - 1),
            min_size=min(count, len(kb.features)),
            max_size=min(count, len(kb.features)),
            unique=True,
        )
    )
    observations = []
    for idx in picked:
        feature = kb.features[idx]
        value = draw(st.integers(0, len(feature.values) - 1))
        observations.append(Observation(feature=feature.id, value=feature.values[value]))
    return kb, observations
