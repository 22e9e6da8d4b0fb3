from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uncertain_dx.decision import load_utilities
from uncertain_dx.kb import load_cases, load_kb
from uncertain_dx.synth import ReplicatedEvidenceSpec, replicate_evidence_kb

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def fixture_kb():
    return load_kb(DATA / "fixture_kb.json")


@pytest.fixture(scope="session")
def fixture_cases(fixture_kb):
    return load_cases(DATA / "fixture_cases.json", fixture_kb)


@pytest.fixture(scope="session")
def fixture_utilities():
    return load_utilities(DATA / "fixture_utilities.json")


@pytest.fixture(scope="session")
def three_hypotheses_one_token():
    """Three equal-prior hypotheses, one shared binary token with
    likelihoods (0.8, 0.6, 0.2)."""
    return replicate_evidence_kb(ReplicatedEvidenceSpec.uniform((0.8, 0.6, 0.2), n=1))


@pytest.fixture(scope="session")
def three_hypotheses_two_tokens():
    """Same construction with two independent copies of the token."""
    return replicate_evidence_kb(ReplicatedEvidenceSpec.uniform((0.8, 0.6, 0.2), n=2))
