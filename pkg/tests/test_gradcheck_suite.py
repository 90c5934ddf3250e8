#!/usr/bin/env python
# -*- coding: utf-8 -*-

import pytest

from motionmod.core.errors import ConfigError, GradcheckFailure
from motionmod.gradcheck_suite import (
    CASES,
    NEGATIVE_GROUP,
    ensure_passed,
    result_rows,
    run_suite,
    select_cases,
)

POSITIVE = [name for name, case in CASES.items() if case.group != NEGATIVE_GROUP]


def test_registry_covers_every_component():
    groups = {case.group for case in CASES.values()}
    assert {"ops", "sampling", "dmm", "models", "losses", NEGATIVE_GROUP} <= groups
    for name in ("conv2d", "deform_conv2d", "modulate_demodulate", "dmm_block", "generate_window"):
        assert name in CASES


@pytest.mark.parametrize("name", POSITIVE)
def test_case_passes(name):
    (result,) = run_suite(seed=0, names=[name])
    assert result.passed, f"{name}: {result.max_rel_error:.2e} @ {result.worst_input}"


def test_corrupted_vjp_is_caught():
    results = run_suite(seed=0, names=["corrupted_vjp"])
    assert not results[0].passed
    with pytest.raises(GradcheckFailure):
        ensure_passed(results)


def test_negative_control_only_on_request():
    assert "corrupted_vjp" not in [c.name for c in select_cases()]
    assert "corrupted_vjp" in [c.name for c in select_cases(include_negative=True)]


def test_unknown_case_rejected():
    with pytest.raises(ConfigError):
        select_cases(["no_such_op"])


def test_result_rows_mark_status():
    rows = result_rows(run_suite(seed=1, names=["add", "corrupted_vjp"]))
    assert [row[0] for row in rows] == ["add", "corrupted_vjp"]
    assert rows[0][-1] != rows[1][-1]
