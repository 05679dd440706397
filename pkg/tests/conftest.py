"""
Shared pytest fixtures and configuration for the test suite.

This module provides the fixture models, corpus paths, environment
isolation and temporary files used across the tests.
"""

import json
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
MODELS_DIR = ROOT / "models"
CORPUS_DIR = ROOT / "corpus"
MANIFEST = CORPUS_DIR / "manifest.json"

CHAINING_FORMULA = "Khm(p', false, p) & Khm(p, o, q) -> Khm(p', o, q)"


# ============================================================================
# Environment Isolation
# ============================================================================

@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Run every test without KHM_* variables or .env files from the host."""
    import os

    for key in list(os.environ):
        if key.startswith("KHM_"):
            monkeypatch.delenv(key, raising=False)
    monkeypatch.setenv("HOME", str(tmp_path / "home"))
    monkeypatch.chdir(tmp_path)
    yield


# ============================================================================
# Fixture Model Fixtures
# ============================================================================

@pytest.fixture
def model_path():
    """Path to a fixture model file by name (m1 ... m4)."""
    def _path(name: str) -> Path:
        return MODELS_DIR / f"{name}.json"
    return _path


@pytest.fixture
def m1():
    """Two-action chain model: ``ru`` takes every p-state to q."""
    from khm_toolkit.model import load_model_file
    return load_model_file(MODELS_DIR / "m1.json")


@pytest.fixture
def m2():
    """Executable but not strongly executable ``ab`` from s1."""
    from khm_toolkit.model import load_model_file
    return load_model_file(MODELS_DIR / "m2.json")


@pytest.fixture
def m3():
    """Witnesses ``a`` for Khm(p, false, o) and ``ab`` for Khm(p, o, q)."""
    from khm_toolkit.model import load_model_file
    return load_model_file(MODELS_DIR / "m3.json")


@pytest.fixture
def m4():
    """Countermodel to chaining a false-constrained plan before an o-constrained one."""
    from khm_toolkit.model import load_model_file
    return load_model_file(MODELS_DIR / "m4.json")


@pytest.fixture
def tiny_model():
    """Single state, single action, no transitions."""
    from khm_toolkit.model import Model
    return Model(
        states=("s1",),
        valuation={"s1": frozenset({"p"})},
        transitions=frozenset(),
        alphabet=("a",),
    )


# ============================================================================
# Corpus Fixtures
# ============================================================================

@pytest.fixture
def manifest_path():
    """The corpus manifest shipped with the repository."""
    return MANIFEST


@pytest.fixture
def corpus_docs():
    """Decoded corpus documents in manifest order."""
    files = json.loads(MANIFEST.read_text())["files"]
    return [json.loads((CORPUS_DIR / f).read_text()) for f in files]


@pytest.fixture
def checked_db(manifest_path):
    """Theorem database after checking the whole corpus."""
    from khm_toolkit.proofs import TheoremDB, check_corpus

    db = TheoremDB()
    entries = check_corpus(manifest_path, db)
    assert all(e.result.ok for e in entries)
    return db


@pytest.fixture
def write_json(tmp_path):
    """Write a JSON document to a temporary file and return its path."""
    def _write(doc, name: str = "doc.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return path
    return _write


# ============================================================================
# Environment and Configuration Fixtures
# ============================================================================

@pytest.fixture
def mock_env_vars(monkeypatch):
    """Set every toolkit environment variable to a non-default value."""
    env_vars = {
        "KHM_LOG_LEVEL": "DEBUG",
        "KHM_LOG_FORMAT": "json",
        "KHM_COLOR": "never",
        "KHM_COUNTERMODEL_BUDGET": "5000",
        "KHM_FUZZ_WORKERS": "2",
        "KHM_FUZZ_TRIALS": "25",
        "KHM_FUZZ_SEED": "7",
    }

    for key, value in env_vars.items():
        monkeypatch.setenv(key, value)

    return env_vars


@pytest.fixture
def temp_env_file(tmp_path):
    """Create a temporary .env file for testing."""
    path = tmp_path / "khm.env"
    path.write_text(
        "KHM_LOG_LEVEL=info\n"
        "KHM_FUZZ_TRIALS=12\n"
        f"KHM_PROOF_CACHE={tmp_path / 'cache' / 'proofs.json'}\n"
    )
    return path


# ============================================================================
# Markers Configuration
# ============================================================================

def pytest_configure(config):
    """Configure custom pytest markers."""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests as integration tests"
    )
