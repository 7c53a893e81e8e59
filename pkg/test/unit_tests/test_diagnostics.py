#!/usr/bin/env python3

import pytest

from adgan.diagnostics import (
    LOSS_CASES,
    PRIMITIVE_CASES,
    GradcheckResult,
    network_cases,
    run_gradcheck,
    summarize,
)


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted({**PRIMITIVE_CASES, **LOSS_CASES}))
def test_case_passes_over_twenty_seeds(name):
    results = run_gradcheck(seeds=range(20), names=[name], include_networks=False)
    assert len(results) == 20
    worst = max(results, key=lambda r: r.error)
    assert worst.passed, f"{name}: seed {worst.seed} error {worst.error:.3e}"


@pytest.mark.slow
def test_network_cases_pass():
    results = run_gradcheck(seeds=[], names=list(network_cases(0)))
    assert {r.name for r in results} == set(network_cases(0))
    assert all(r.passed for r in results), summarize(results)


def test_unknown_case():
    with pytest.raises(KeyError, match="no_such_case"):
        run_gradcheck(names=["no_such_case"])


def test_summary_reports_failures():
    results = [GradcheckResult("add", 0, 1e-9, 1e-5), GradcheckResult("add", 1, 1e-3, 1e-5),
               GradcheckResult("mul", 0, float("nan"), 1e-5)]
    text = summarize(results)
    assert "1.000e-03" in text
    assert "3 checks, 2 failed" in text
    assert text.count("FAIL") == 2
