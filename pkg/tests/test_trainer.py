import math

import numpy as np
import pytest

from idusel.errors import DomainError
from idusel.idu import GradientStats, optimal_beta
from idusel.trainer import (SKETCH_DIM, LogisticTrainer, QuadraticTrainer, TrainStepReport,
                            extract_gradient_stats)


def quad_loss(theta, target, lam=1.0):
    return 0.5 * lam * float(np.sum((theta - target) ** 2))


def test_quadratic_one_step_closed_form():
    target = np.zeros((1, 3))
    theta0 = np.array([1.0, 0.0, 0.0])  # distance^2 = 1
    tr = QuadraticTrainer(target, eta=0.01, theta0=theta0)
    before = quad_loss(tr.theta, target[0])
    tr.train_on([0])
    assert quad_loss(tr.theta, target[0]) - before == pytest.approx(-0.00995, abs=1e-15)


def test_quadratic_zero_eta():
    tr = QuadraticTrainer(np.ones((2, 2)), eta=0.0, theta0=np.zeros(2))
    before = tr.loss_of([0, 1]).copy()
    rep = tr.train_on([0, 1])
    assert rep.update_energy == 0.0
    assert np.array_equal(tr.loss_of([0, 1]), before)


def test_identical_samples_identical_losses():
    tr = QuadraticTrainer(np.array([[1.0, 2.0], [1.0, 2.0]]), eta=0.1, seed=4)
    rep = tr.train_on([0, 1])
    assert rep.loss_before[0] == rep.loss_before[1]
    after = tr.loss_of([0, 1])
    assert after[0] == after[1]


def test_loss_before_matches_reevaluation(rng):
    targets = rng.normal(size=(20, 4))
    tr = QuadraticTrainer(targets, curvature=[1.0, 2.0, 0.5, 3.0], eta=0.05, seed=1)
    for batch in ([3, 1, 7], [0, 19], [5]):
        theta = tr.theta.copy()
        rep = tr.train_on(batch)
        # bitwise against a fresh forward pass at the pre-step parameters
        assert np.array_equal(rep.loss_before, tr.loss_of(sorted(batch), theta=theta))
        expected = [0.5 * float(np.sum(tr.lam * (theta - targets[i]) ** 2)) for i in sorted(batch)]
        assert np.allclose(rep.loss_before, expected, rtol=1e-12, atol=0)


def logistic_problem(rng, n=120, d=3, c=3):
    x = rng.normal(size=(n, d)) + np.repeat(np.eye(c, d) * 3, n // c, axis=0)
    y = np.repeat(np.arange(c), n // c)
    return x, y


def test_logistic_single_class_descends(rng):
    x, y = logistic_problem(rng)
    tr = LogisticTrainer(x, y, 3, eta=0.1)
    batch = np.flatnonzero(y == 1).tolist()
    means = []
    for _ in range(11):
        means.append(float(tr.loss_of(batch).mean()))
        tr.train_on(batch)
    assert all(b < a for a, b in zip(means, means[1:]))


def test_logistic_zero_eta_and_reevaluation(rng):
    x, y = logistic_problem(rng)
    tr = LogisticTrainer(x, y, 3, eta=0.0, init_scale=0.5, seed=2)
    before = tr.loss_of(range(len(y))).copy()
    rep = tr.train_on([4, 50, 90])
    assert np.array_equal(tr.loss_of(range(len(y))), before)
    z = np.column_stack([x, np.ones(len(y))])[[4, 50, 90]] @ tr.theta.T
    ref = np.log(np.exp(z).sum(axis=1)) - z[np.arange(3), y[[4, 50, 90]]]
    assert np.allclose(rep.loss_before, ref, rtol=1e-12, atol=0)


def test_logistic_extreme_logits_finite():
    tr = LogisticTrainer(np.array([[1e4, -1e4]]), np.array([1]), 2, eta=1.0, init_scale=100.0)
    rep = tr.train_on([0])
    assert np.all(np.isfinite(rep.loss_before)) and np.all(np.isfinite(tr.theta))


def test_batch_permutation_gives_identical_report(rng):
    x, y = logistic_problem(rng)
    batch = rng.permutation(len(y))[:40]
    reports = []
    for order in (batch, batch[::-1], np.sort(batch)):
        tr = LogisticTrainer(x, y, 3, eta=0.3, seed=5)
        tr.train_on([1, 2, 3])
        reports.append((tr.train_on(order), tr.theta.copy()))
    for rep, theta in reports[1:]:
        assert np.array_equal(theta, reports[0][1])
        assert rep.per_sample_loss_before == reports[0][0].per_sample_loss_before
        assert (rep.update_energy, rep.update_dot_prev) == (reports[0][0].update_energy,
                                                            reports[0][0].update_dot_prev)


def test_cauchy_schwarz_every_step(rng):
    x, y = logistic_problem(rng)
    tr = LogisticTrainer(x, y, 3, eta=0.4)
    for _ in range(30):
        rep = tr.train_on(rng.choice(len(y), 10, replace=False))
        assert abs(rep.update_dot_prev) <= math.sqrt(rep.update_energy * rep.prev_energy) * (1 + 1e-9)


def test_contract_errors(rng):
    tr = QuadraticTrainer(rng.normal(size=(3, 2)))
    tr.score_all()
    with pytest.raises(RuntimeError):
        tr.score_all()
    with pytest.raises(DomainError):
        tr.train_on([])
    with pytest.raises(DomainError):
        tr.train_on([99])
    with pytest.raises(DomainError):
        QuadraticTrainer(np.zeros((2, 2)), curvature=0.0)


def test_linear_decay():
    tr = QuadraticTrainer(np.zeros((1, 1)), eta=0.4, decay_steps=4)
    etas = [tr.train_on([0]).eta for _ in range(5)]
    assert etas == pytest.approx([0.4, 0.3, 0.2, 0.1, 0.0])


def test_sketch_for_large_models(rng):
    d = 50_001
    tr = LogisticTrainer(rng.normal(size=(4, d)), np.array([0, 1, 0, 1]), 2, eta=0.1, seed=9)
    assert tr.num_params > 100_000
    rep = tr.train_on([0, 1, 2, 3])
    assert rep.sketched and rep.direction.shape == (SKETCH_DIM,)


def report(energy, dot_cluster=0.0, eta=1.0):
    return TrainStepReport(ids=np.array([0]), loss_before=np.array([1.0]), eta=eta,
                           update_energy=energy, update_dot_prev=0.0, update_dot_cluster=dot_cluster,
                           direction=np.array([math.sqrt(energy)]))


def test_first_selection_forces_tie_break():
    stats = extract_gradient_stats(report(4.0), GradientStats(), cluster=2, iteration=1)
    assert (stats.g_k, stats.g_prev, stats.cos_phi) == (4.0, 4.0, 1.0)
    assert optimal_beta(stats.g_k, stats.g_prev, stats.cos_phi) == 0.5


def test_orthogonal_and_aligned_updates():
    first = extract_gradient_stats(report(4.0), GradientStats(), cluster=0)
    ortho = extract_gradient_stats(report(9.0, 0.0), first, cluster=0)
    assert ortho.cos_phi == 0.0 and ortho.g_k == 4.0 and ortho.g_prev == 9.0
    aligned = extract_gradient_stats(report(9.0, math.sqrt(9.0 * 9.0)), ortho, cluster=0)
    assert aligned.cos_phi == 1.0


def test_zero_energy_history_gives_zero_cos():
    first = extract_gradient_stats(report(0.0), GradientStats(), cluster=0)
    assert first.cos_phi == 0.0
    nxt = extract_gradient_stats(report(1.0, 0.0), first, cluster=0)
    assert nxt.cos_phi == 0.0


def test_energy_in_gradient_units():
    stats = extract_gradient_stats(report(0.04, eta=0.1), GradientStats(), cluster=0)
    assert stats.g_prev == pytest.approx(4.0)
