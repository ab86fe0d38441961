"""Smoke tests for the _aegis extension module."""

import math

import numpy as np
import pytest

import aegis


def test_zoh_closed_form():
    a_bar, b_bar = aegis.zoh_discretize(-1.0, 1.0, math.log(2.0))
    assert a_bar == pytest.approx(0.5, abs=1e-12)
    assert b_bar == pytest.approx(0.5, abs=1e-12)


def test_ltc_tau():
    assert aegis.ltc_tau(0.0, 1.0) == pytest.approx(math.log(1 + math.e) + 1e-5, abs=1e-12)
    assert aegis.ltc_tau(5.0, 1.0) < aegis.ltc_tau(1.0, 1.0)


def test_poincare_distance_ln3():
    u = np.zeros(2)
    v = np.array([0.5, 0.0])
    assert aegis.poincare_distance(u, v) == pytest.approx(math.log(3.0), abs=1e-9)


def test_projection_stays_in_ball():
    w = np.random.default_rng(1).normal(size=(4, 6))
    x = np.random.default_rng(2).normal(size=6) * 1e12
    p = aegis.poincare_project(w, x)
    assert np.linalg.norm(p) < 1.0


def test_entropy_and_softmax():
    p = aegis.position_softmax(np.zeros(8))
    assert p == pytest.approx(np.full(8, 0.125))
    assert aegis.shannon_entropy(np.full(4, 0.25)) == pytest.approx(2.0, abs=1e-12)
    assert aegis.shannon_entropy(np.array([0.5, 0.25, 0.25])) == pytest.approx(1.5, abs=1e-12)
    with pytest.raises(aegis.AegisError):
        aegis.shannon_entropy(np.array([0.5, 0.4]))


def test_focal_loss_value():
    assert aegis.focal_loss(0.5, 1, 2.0, 0.75) == pytest.approx(
        0.75 * 0.25 * math.log(2.0), abs=1e-9
    )


def test_frozen_scan_recurrence():
    y = aegis.frozen_scan(np.ones((3, 1)), 0.5, 1.0, 1.0)
    assert y[:, 0] == pytest.approx([1.0, 1.5, 1.75])


def test_metric_reproduction():
    m = aegis.compute_metrics(tp=57551, fp=265, tn=123505, fn=287)
    assert m["tpr"] == pytest.approx(0.9950, abs=5e-4)
    assert m["fpr"] == pytest.approx(0.002141, abs=5e-4)
    assert m["f1"] == pytest.approx(0.9952, abs=5e-4)
