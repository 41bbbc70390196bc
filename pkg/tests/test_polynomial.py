from __future__ import annotations

import pickle

import numpy as np
import pytest

from cdincompat.polynomial import Polynomial, parse_polynomial


def test_evaluation_and_broadcast():
    p = parse_polynomial("4*x*(1-x) + t^2")
    assert p(0.5, 2.0) == pytest.approx(5.0)
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(p(x, 0.0), 4 * x * (1 - x))


def test_single_variable_signatures():
    phi = parse_polynomial("x^3", ("x",))
    g = parse_polynomial("1 + t^2", ("t",))
    assert phi(2.0) == 8.0 and g(3.0) == 10.0
    with pytest.raises(TypeError):
        phi(1.0, 2.0)


def test_variable_not_in_signature():
    with pytest.raises(ValueError):
        parse_polynomial("x*t", ("t",))


def test_derivatives():
    p = parse_polynomial("x^3*t^2 - 2*x + 5")
    assert p.derivative("x", 2) == parse_polynomial("6*x*t^2")
    assert p.derivative("t", 3) == Polynomial({})


def test_antiderivative():
    a = parse_polynomial("1 - t^2", ("t",))
    assert a.antiderivative_t() == parse_polynomial("t - t^3/3", ("t",))
    with pytest.raises(ValueError):
        parse_polynomial("x").antiderivative_t()


def test_string_round_trip():
    for text in ("0", "-1", "1 - 2*t + 3*t^2", "4*x - 4*x^2", "-x^2*t + 0.125"):
        p = parse_polynomial(text)
        assert parse_polynomial(p.to_string()) == p


@pytest.mark.parametrize("text", ["1+", "sin(x)", "1/x", "y + 1", "x^-1", "x^0.5"])
def test_rejects(text):
    with pytest.raises(ValueError):
        parse_polynomial(text)


def test_implicit_multiplication():
    assert parse_polynomial("2x t") == parse_polynomial("2*x*t")


def test_picklable():
    p = parse_polynomial("1 + x*t")
    assert pickle.loads(pickle.dumps(p)) == p
