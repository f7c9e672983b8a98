import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmloco import numerics as nx
from mmloco.numerics import Tensor
from mmloco.objectives import (BetaSchedulerState, ContrastiveConfig, ReturnsWindow,
                               adaptive_beta_update, bootstrap_probability, encoder_kl_scale,
                               gaussian_entropy, gaussian_kl, loss_contrastive, loss_estimation,
                               loss_vae_extero, loss_vae_proprio, versatility_gain)


def test_estimation_loss():
    v = Tensor([0.2, -0.1, 0.4])
    assert loss_estimation(v, v).item() == 0.0
    assert abs(loss_estimation(Tensor([0.3, 0, 0]), Tensor([0.0, 0, 0])).item() - 0.03) < 1e-15
    assert loss_estimation(Tensor([-0.3, 0, 0]), Tensor([0.0, 0, 0])).item() == \
        loss_estimation(Tensor([0.3, 0, 0]), Tensor([0.0, 0, 0])).item()


def test_bootstrap_probability():
    assert bootstrap_probability([3.0, 3.0, 3.0]) == 1.0
    # population std 1, mean 1
    assert abs(bootstrap_probability([0.0, 2.0]) - (1 - math.tanh(1.0))) < 1e-12
    assert bootstrap_probability([-1.0, 1.0]) == 0.0
    assert bootstrap_probability([1.0, 2.0]) > bootstrap_probability([1.0, 3.0])
    with pytest.raises(ValueError):
        bootstrap_probability([])
    w = ReturnsWindow(3)
    w.extend([100.0, 1.0, 1.0, 1.0])
    assert bootstrap_probability(w) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=50))
def test_bootstrap_probability_range(r):
    p = bootstrap_probability(r)
    assert 0.0 <= p <= 1.0
    if p == 1.0:
        # tanh rounds to 0 only for tiny CV
        assert np.std(r) <= 1e-15 * abs(np.mean(r)) + 1e-300 or np.std(r) / abs(np.mean(r)) < 1e-15


def test_vae_losses():
    o = Tensor(np.ones(45))
    assert loss_vae_proprio(o, o, Tensor(np.zeros(32)), Tensor(np.ones(32)), 5.0).item() == 0.0
    assert abs(loss_vae_proprio(Tensor([0.0]), Tensor([0.0]), Tensor([1.0]), Tensor([1.0]), 5.0).item() - 2.5) < 1e-15
    a = loss_vae_proprio(Tensor([0.5]), Tensor([0.0]), Tensor([1.0]), Tensor([2.0]), 1.0).item()
    b = loss_vae_proprio(Tensor([0.5]), Tensor([0.0]), Tensor([1.0]), Tensor([2.0]), 2.0).item()
    kl = gaussian_kl(Tensor([1.0]), Tensor([2.0])).item()
    assert abs((b - a) - kl) < 1e-12
    h = Tensor(np.zeros((34, 22)))
    assert loss_vae_extero(h, h, Tensor(np.zeros(64)), Tensor(np.ones(64)), 5.0).item() == 0.0
    e = loss_vae_extero(Tensor(np.full((34, 22), 0.1)), h, Tensor(np.zeros(64)), Tensor(np.ones(64)), 5.0).item()
    assert abs(e - 0.01) < 1e-15
    with pytest.raises(nx.ShapeError):
        loss_vae_extero(Tensor(np.zeros((34, 21))), h, Tensor(np.zeros(64)), Tensor(np.ones(64)), 5.0)
    with pytest.raises(ValueError):
        gaussian_kl(Tensor([0.0]), Tensor([0.0]))


def test_kl_matches_monte_carlo():
    rng = np.random.default_rng(0)
    mu, sd = rng.normal(size=4), rng.uniform(0.5, 1.5, 4)
    x = mu + sd * rng.standard_normal((100_000, 4))
    logq = -0.5 * np.sum(((x - mu) / sd) ** 2 + 2 * np.log(sd) + np.log(2 * np.pi), axis=1)
    logp = -0.5 * np.sum(x ** 2 + np.log(2 * np.pi), axis=1)
    mc = np.mean(logq - logp)
    kl = gaussian_kl(Tensor(mu), Tensor(sd)).item()
    assert abs(mc / kl - 1) < 0.01


def test_beta_update():
    s = BetaSchedulerState(beta=3.0)
    assert adaptive_beta_update(s, s.tau).beta == 3.0
    assert adaptive_beta_update(BetaSchedulerState(beta=3.0), 1.0).beta < 3.0
    s = BetaSchedulerState(beta=1.0, delta=1.0, tau=0.1, beta_min=0.5)
    assert abs(adaptive_beta_update(s, 0.2).beta - math.exp(-0.1)) < 1e-15
    with pytest.raises(ValueError):
        adaptive_beta_update(BetaSchedulerState(), -1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1e300, allow_nan=False, allow_infinity=False), max_size=60),
       st.floats(0.5, 10.0))
def test_beta_stays_bounded(seq, beta0):
    s = BetaSchedulerState(beta=beta0, delta=3.0)
    for L in seq:
        adaptive_beta_update(s, L)
        assert s.beta_min <= s.beta <= s.beta_max


@given(st.floats(0.5, 10), st.floats(0.5, 10), st.floats(0, 10))
def test_beta_map_monotone_in_beta(b1, b2, L):
    lo, hi = sorted((b1, b2))
    a = adaptive_beta_update(BetaSchedulerState(beta=lo), L).beta
    b = adaptive_beta_update(BetaSchedulerState(beta=hi), L).beta
    assert a <= b


def test_contrastive():
    z = Tensor(np.zeros(64))
    assert loss_contrastive(z, z, Tensor(np.full(64, -1.0))).item() == 0.0
    rng = np.random.default_rng(1)
    a, b, r = (Tensor(rng.normal(size=64)) for _ in range(3))
    pure = loss_contrastive(a, b, r, ContrastiveConfig(lam=1.0)).item()
    assert abs(pure - np.sum((a.data - b.data) ** 2)) < 1e-12
    one = loss_contrastive(Tensor([0.0]), Tensor([0.0]), Tensor([0.0]), ContrastiveConfig(0.5 * 2, 0.5))
    assert abs(one.item() - 0.5) < 1e-15
    with pytest.raises(ValueError):
        ContrastiveConfig(margin=0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_contrastive_nonneg_and_zero_iff(seed):
    rng = np.random.default_rng(seed)
    z, anc, r = rng.normal(size=(3, 8))
    L = loss_contrastive(Tensor(z), Tensor(anc), Tensor(r)).item()
    assert L >= 0
    zero = loss_contrastive(Tensor(z), Tensor(z), Tensor(z - 1.0 - rng.random(8))).item()
    assert zero == 0.0


def test_entropy_closed_form_and_monte_carlo():
    assert abs(gaussian_entropy(Tensor(np.ones(1))).item() - 0.5 * math.log(2 * math.pi * math.e)) < 1e-15
    assert abs(0.5 * math.log(2 * math.pi * math.e) - 1.4189) < 1e-4
    rng = np.random.default_rng(2)
    sd = rng.uniform(0.3, 2.0, 3)
    x = sd * rng.standard_normal((100_000, 3))
    mc = -np.mean(np.sum(-0.5 * (x / sd) ** 2 - np.log(sd) - 0.5 * np.log(2 * np.pi), axis=1))
    assert abs(mc / gaussian_entropy(Tensor(sd)).item() - 1) < 0.01


def test_versatility_gain():
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError):
        versatility_gain(Tensor(np.zeros((1, 4))), Tensor(np.ones((1, 4))))
    samples = rng.standard_normal((20_000, 4))
    g = versatility_gain(Tensor(samples), Tensor(np.ones((20_000, 4)))).item()
    assert abs(g) < 0.02
    sd = np.full((200, 4), 0.3)
    eps = rng.standard_normal((200, 4))
    means = np.where(np.arange(200)[:, None] < 100, -0.5, 0.5)
    g1 = versatility_gain(Tensor(means + sd * eps), Tensor(sd)).item()
    g2 = versatility_gain(Tensor(2 * means + sd * eps), Tensor(sd)).item()
    assert g2 > g1


def test_encoder_kl_scale():
    assert encoder_kl_scale() == 0.1

    class C:
        encoder_kl_scale = 1.0
    assert encoder_kl_scale(C()) == 1.0
