import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphsys.errors import DomainError, UnknownData
from graphsys.modelgraph import (Const, Data, Var, evaluate, exp, from_json, gradient, log,
                                 quicksum, sabs, sqrt, to_json, to_prefix)
from graphsys.modelgraph.expr import affine_form

from _gen import central_difference, random_expression

x, y = Var(0, "x"), Var(1, "y")


def test_basic_values():
    assert evaluate(x * x, [3.0]) == 9.0
    assert evaluate(exp(Const(0.0)) + 1, []) == 2.0
    assert evaluate(sabs(x, 1e-6), [0.0]) == pytest.approx(1e-6, rel=1e-12)
    assert evaluate(x / y - 2 ** x, [1.0, 4.0]) == pytest.approx(0.25 - 2.0)


def test_basic_gradients():
    assert np.allclose(gradient(x * x, [3.0]), [6.0])
    assert np.allclose(gradient(x * y, [2.0, 5.0]), [5.0, 2.0])


def test_friction_term_against_finite_differences():
    f, p = x, y
    e = f * sabs(f, 1e-6) / p
    pt = np.array([1.5, 2.0])
    g = e.gradient(pt, None, 2)
    fd = central_difference(lambda z: e.evaluate(z), pt)
    assert np.allclose(g, fd, rtol=1e-6, atol=0)
    # hand derivative: d/df = 2|f|/p, d/dp = -f|f|/p^2 (|f| >> eps)
    assert g == pytest.approx([1.5, -0.5625], rel=1e-9)


def test_domain_errors():
    with pytest.raises(DomainError):
        evaluate(log(x), [0.0])
    with pytest.raises(DomainError):
        evaluate(1 / x, [0.0])
    with pytest.raises(DomainError):
        evaluate(sqrt(x), [-1.0])
    with pytest.raises(UnknownData):
        evaluate(x + Data("d"), [1.0], {})


def test_data_enters_value_not_structure():
    e = x * Data("d", 1)
    assert evaluate(e, [2.0], {"d": np.array([0.0, 3.0])}) == 6.0
    assert np.allclose(e.gradient([2.0], {"d": np.array([0.0, 3.0])}, 1), [3.0])


def test_hessian_is_symmetric_and_matches_hand_value():
    e = x * x * y + exp(x * y)
    pt = np.array([0.3, -0.7])
    H = e.hessian(pt, None, 2)
    assert np.allclose(H, H.T, atol=1e-12)
    exy = math.exp(pt[0] * pt[1])
    hand = np.array([[2 * pt[1] + pt[1] ** 2 * exy, 2 * pt[0] + exy * (1 + pt[0] * pt[1])],
                     [2 * pt[0] + exy * (1 + pt[0] * pt[1]), pt[0] ** 2 * exy]])
    assert np.allclose(H, hand, rtol=1e-12)


def test_degree_classification():
    assert (3 * x + y - 1).degree() == 1
    assert (x * y + x * x).degree() == 2
    assert (x ** 2).degree() == 2
    assert exp(x).degree() == 3


def test_affine_form():
    coefs, data, const = affine_form(2 * x - 3 * y / 2 + Data("d", 0) * 4 + 1)
    assert coefs == {0: 2.0, 1: -1.5}
    assert data == {("d", 0): 4.0}
    assert const == 1.0
    assert affine_form(x * y) is None


def test_json_and_prefix_round_trip():
    e = quicksum([x, y], [2.0, -1.0], 0.5) * sabs(x - y, 1e-4) + log(1 + y * y)
    back = from_json(json.loads(json.dumps(to_json(e))))
    pt = [0.4, -1.1]
    assert back.evaluate(pt) == e.evaluate(pt)
    assert to_prefix(back) == to_prefix(e)
    assert to_prefix(x + 2 * y).startswith("(+")


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    e = random_expression(rng)
    pt = rng.uniform(-2, 2, 4)
    g = e.gradient(pt, None, 4)
    fd = central_difference(lambda z: e.evaluate(z), pt)
    assert np.all(np.abs(g - fd) <= np.maximum(1e-6, 1e-4 * np.abs(g)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_hessian_matches_differenced_gradient(seed):
    rng = np.random.default_rng(seed)
    e = random_expression(rng, size=8)
    pt = rng.uniform(-2, 2, 4)
    H = e.hessian(pt, None, 4)
    assert np.allclose(H, H.T, atol=1e-12)
    fd = np.column_stack([central_difference(lambda z: e.gradient(z, None, 4)[i], pt)
                          for i in range(4)])
    assert np.all(np.abs(H - fd) <= np.maximum(1e-5, 1e-4 * np.abs(H)))
