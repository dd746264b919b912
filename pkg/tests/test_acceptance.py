"""Acceptance suite: every numbered criterion with the default configuration.

Run alone with ``pytest -m acceptance -s`` to see the per-criterion lines as
they happen; they are also repeated in the terminal summary.
"""
import time

import pytest

from conftest import ACCEPTANCE_LINES
from mollified_qft.config import ExperimentConfig
from mollified_qft.experiments import run_experiment

# criterion -> (experiments that evidence it, wall-clock limit in seconds)
CRITERIA = {
    1: (("moments",), 5),
    2: (("sifting", "embeddings"), 30),
    3: (("norms",), 60),
    4: (("zpe-sweep",), 120),
    5: (("commutators",), 30),
    6: (("hamiltonian-blocks",), 60),
    7: (("heisenberg", "field-equation"), 120),
    8: (("scattering",), 120),
}


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    names, limit = CRITERIA[number]
    cfg = ExperimentConfig()
    start = time.perf_counter()
    results = [run_experiment(name, cfg) for name in names]
    elapsed = time.perf_counter() - start
    failed = [f"{r.name} {c.key}" for r in results for c in r.criteria if not c.passed]
    ok = not failed and elapsed < limit
    detail = ", ".join(f"{r.name}[{' '.join(c.key for c in r.criteria)}]" for r in results)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail} in {elapsed:.2f}s (limit {limit}s)"
    if failed:
        line += f"; failed: {', '.join(failed)}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line
    assert elapsed < limit, line
