"""Smoke test for the Python extension.

Build and install it first:

    pip install -e crates/py --no-build-isolation

then run `python python/smoke_test.py` or `pytest python/`.
"""

import json
import math

import sasaki_lab_py as lab


def test_examples_are_listed():
    keys = [k for k, _, _ in lab.examples()]
    assert "darboux-1" in keys and "mobius-cotangent" in keys


def test_show_round_trips_parameters():
    text = lab.show("main1-family", {"a": "0.25"})
    assert text.startswith("example main1-family")
    assert "param a 0.25" in text


def test_verify_returns_reports():
    reports = json.loads(lab.verify("darboux-1", checks=["reeb", "pin"], samples=8))
    assert [r["check"] for r in reports] == ["reeb", "pin"]
    assert all(r["verdict"] == r["expected"] == "pass" for r in reports)
    again = lab.verify("darboux-1", checks=["reeb", "pin"], samples=8)
    assert json.loads(again) == reports


def test_expected_failure_is_reported():
    (r,) = json.loads(lab.verify("product-darboux", checks=["weighted_endomorphism"], samples=8))
    assert r["verdict"] == "fail" and r["expected"] == "fail"
    assert r["witness"] is not None


def test_expressions():
    assert lab.normalize("x*(y+1)") == lab.normalize("x * ( y + 1 )")
    assert math.isclose(lab.evaluate("sin(pi/2) + x^2", {"x": 3.0}), 10.0)
    value, slope = lab.derivative("exp(2*x)", {"x": 0.0}, "x")
    assert (value, slope) == (1.0, 2.0)


def test_errors_are_python_exceptions():
    for call, exc in [
        (lambda: lab.verify("torus"), KeyError),
        (lambda: lab.normalize("1 +"), ValueError),
        (lambda: lab.derivative("x", {}, "x"), ValueError),
    ]:
        try:
            call()
        except exc:
            continue
        raise AssertionError(f"{call} did not raise {exc.__name__}")


if __name__ == "__main__":
    for name, f in list(globals().items()):
        if name.startswith("test_"):
            f()
            print("ok", name)
