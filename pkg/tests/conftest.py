"""Shared fixtures: the bundled dataset, a large synthetic table, helpers."""

from __future__ import annotations

import csv
import random
from pathlib import Path

import pytest

from mofsmith.agent import (RulesBackend, ToolContext, default_toolkit,
                            run_session)
from mofsmith.dataset import Registry, load_registry
from mofsmith.generator import GAConfig
from mofsmith.llm import TokenBudget

FIXTURES = Path(__file__).parent / "fixtures"
DATA = FIXTURES / "data"
SUITES = FIXTURES / "suites"
REPLAY = FIXTURES / "replay"
CIFS = FIXTURES / "cifs"


@pytest.fixture(scope="session")
def data_root() -> Path:
    return DATA


@pytest.fixture(scope="session")
def registry() -> Registry:
    return load_registry(DATA)


@pytest.fixture(scope="session")
def coremof(registry):
    return registry.table("coremof")


@pytest.fixture(scope="session")
def big_csv(tmp_path_factory) -> Path:
    """A 12,020-row CSV in the shape of the primary table.

    Values are seeded-random but deterministic, so renders and statistics
    are stable across runs.
    """
    rng = random.Random(31715)
    path = tmp_path_factory.mktemp("bigdata") / "big.csv"
    headers = ["", "name", "Density (g/cm^3)", "Pore limiting diameter (Å)"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        for i in range(12020):
            writer.writerow([i, f"MAT{i:05d}",
                             round(rng.uniform(0.2, 4.0), 5),
                             round(rng.uniform(2.4, 24.0), 5)])
    return path


def rules_outcome(question: str, registry: Registry, *, budget: int = 4000,
                  seed: int = 0, max_steps: int = 8):
    """One deterministic end-to-end session through the rule-driven backend."""
    token_budget = TokenBudget(limit=budget)
    ctx = ToolContext(registry=registry, budget=token_budget,
                      ga_config=GAConfig(seed=seed))
    backend = RulesBackend(registry=registry)
    return run_session(question, default_toolkit(), backend, token_budget,
                       ctx, max_steps=max_steps)
