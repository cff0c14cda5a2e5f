"""Adam, gradient clipping, schedulers."""

import math

import numpy as np
import pytest

import gncalab.autodiff as ad
from gncalab.optim import Adam, EarlyStop, PlateauScheduler, clip_global_norm, global_norm


def test_adam_first_step_is_lr_times_sign():
    p = ad.param(np.array([[1.0, -2.0, 3.0]]))
    opt = Adam([p], lr=0.1)
    g = np.array([[0.5, -0.25, 1e-8]])
    opt.step([g])
    # bias-corrected first step moves by ~lr in the gradient's sign direction
    expect = np.array([[1.0, -2.0, 3.0]]) - 0.1 * np.sign(g) * (
        np.abs(g) / (np.abs(g) + 1e-8 * np.sqrt(1.0))
    )
    assert np.allclose(p.data, expect, atol=1e-9)


def test_adam_scalar_hand_oracle():
    # two steps on a single weight with constant gradient 1, lr 0.5
    p = ad.param(np.array([[0.0]]))
    opt = Adam([p], lr=0.5, beta1=0.9, beta2=0.999, eps=1e-8)
    opt.step([np.array([[1.0]])])
    m1, v1 = 0.1, 0.001
    x1 = -0.5 * (m1 / 0.1) / (math.sqrt(v1 / 0.001) + 1e-8)
    assert abs(p.data[0, 0] - x1) < 1e-12
    opt.step([np.array([[1.0]])])
    m2 = 0.9 * m1 + 0.1
    v2 = 0.999 * v1 + 0.001
    c1 = 1 - 0.9**2
    c2 = 1 - 0.999**2
    x2 = x1 - 0.5 * (m2 / c1) / (math.sqrt(v2 / c2) + 1e-8)
    assert abs(p.data[0, 0] - x2) < 1e-12


def test_adam_converges_on_quadratic():
    p = ad.param(np.array([[4.0]]))
    opt = Adam([p], lr=0.1)
    for _ in range(500):
        opt.step([2.0 * p.data])  # d/dx x^2
    assert abs(p.data[0, 0]) < 1e-3


def test_adam_zero_lr_keeps_params():
    p = ad.param(np.array([[1.0, 2.0]]))
    opt = Adam([p], lr=0.0)
    opt.step([np.ones((1, 2))])
    assert np.array_equal(p.data, np.array([[1.0, 2.0]]))


def test_adam_shape_mismatch_raises():
    p = ad.param(np.zeros((2, 2)))
    opt = Adam([p], lr=0.1)
    with pytest.raises(ValueError):
        opt.step([np.zeros((2, 3))])


def test_global_norm_value():
    gs = [np.array([3.0]), np.array([4.0])]
    assert abs(global_norm(gs) - 5.0) < 1e-12


def test_clip_rescales_to_max_norm():
    gs = [np.full((2, 2), 3.0), np.full((3,), 4.0)]
    clipped = clip_global_norm(gs, 1.0)
    assert abs(global_norm(clipped) - 1.0) < 1e-12
    # direction preserved
    ratio = clipped[0][0, 0] / gs[0][0, 0]
    assert np.allclose(clipped[1], gs[1] * ratio)


def test_clip_leaves_small_grads_untouched():
    gs = [np.array([0.1, 0.2])]
    clipped = clip_global_norm(gs, 10.0)
    assert np.array_equal(clipped[0], gs[0])
    # returns copies, not aliases
    clipped[0][0] = 99.0
    assert gs[0][0] == 0.1


def test_plateau_scheduler_reduces_after_patience():
    p = ad.param(np.zeros((1, 1)))
    opt = Adam([p], lr=1.0)
    sched = PlateauScheduler(opt, factor=0.1, patience=3, min_delta=1e-8)
    assert not sched.update(1.0)
    for _ in range(2):
        assert not sched.update(1.0)
    assert sched.update(1.0)  # third stale epoch triggers
    assert abs(opt.lr - 0.1) < 1e-15


def test_plateau_scheduler_resets_on_improvement():
    p = ad.param(np.zeros((1, 1)))
    opt = Adam([p], lr=1.0)
    sched = PlateauScheduler(opt, factor=0.5, patience=2, min_delta=1e-8)
    sched.update(1.0)
    sched.update(0.5)  # improvement resets the stale counter
    sched.update(0.5)
    assert opt.lr == 1.0
    assert sched.update(0.5)
    assert opt.lr == 0.5


def test_plateau_scheduler_min_lr_floor():
    p = ad.param(np.zeros((1, 1)))
    opt = Adam([p], lr=1e-3)
    sched = PlateauScheduler(opt, factor=0.1, patience=1, min_delta=0.0, min_lr=1e-4)
    sched.update(1.0)
    sched.update(1.0)
    sched.update(1.0)
    sched.update(1.0)
    assert opt.lr >= 1e-4 - 1e-18


def test_early_stop_fires_after_patience():
    stop = EarlyStop(patience=2)
    assert not stop.update(1.0)
    assert not stop.update(1.0)
    assert stop.update(1.0)


def test_early_stop_resets_on_improvement():
    stop = EarlyStop(patience=2)
    stop.update(1.0)
    stop.update(0.9)
    assert not stop.update(0.9)
    assert stop.update(0.9)
