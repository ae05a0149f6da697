import dataclasses

import numpy as np

from tilq.fixtures import FIXTURES, Expected, format_table, run_examples, run_fixture
from tilq.problem import validate


def test_embedded_data_is_valid():
    for fx in FIXTURES.values():
        assert validate(fx.problem()) == []


def test_all_fixtures_pass():
    results = run_examples()
    assert all(r.passed for r in results)
    assert "4/4 fixtures pass" in format_table(results)


def test_erratum_rows_are_reported_not_gating():
    res = run_fixture(FIXTURES["example-5-1"])
    errata = [r for r in res.rows if r.erratum]
    assert {r.name for r in errata} == {"P[1]", "P[0]", "S[1]", "S[0]"}
    assert all(not r.ok for r in errata)
    assert res.passed


def test_corrupted_expected_value_fails_its_row():
    fx = FIXTURES["example-1-1"]
    bad = [dataclasses.replace(e, value=e.value + 0.01) if e.name.startswith("standard_gain[anchor=0")
           else e for e in fx.expected]
    res = run_fixture(dataclasses.replace(fx, expected=bad))
    assert not res.passed
    failed = [r.name for r in res.rows if not r.ok]
    assert failed == ["standard_gain[anchor=0,k=1]"]


def test_example_1_1_rows():
    res = run_fixture(FIXTURES["example-1-1"])
    assert res.passed
    table = format_table([res])
    assert "standard_gain[anchor=1,k=1]" in table


def test_expected_values_are_arrays():
    e = Expected("x", 1.5, 0.1)
    assert isinstance(e.value, np.ndarray) and e.value.shape == (1,)
