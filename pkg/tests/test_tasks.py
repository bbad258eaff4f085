"""Substitute training and the attack-by-substitute task pool."""

import numpy as np
import pytest
import torch

from robustamc.attacks import AttackSpec
from robustamc.errors import ConfigurationError, InputShapeError
from robustamc.grads import accuracy, flat_params, to_tensors
from robustamc.models import ArchDescriptor
from robustamc.tasks import (
    AdversarialTask,
    TaskPool,
    build_task_pool,
    materialize_tasks,
    train_substitute,
)

EPS = 1.0


def _specs(methods=("fgsm", "pgd")):
    return [AttackSpec(method=m, epsilon=EPS) for m in methods]


def _subs(trained_sub, n):
    # identity doesn't matter for pool plumbing; reuse the fixture model
    out = []
    for i in range(n):
        s = AdversarialTask  # noqa: F841 (keep import usage obvious)
        out.append(
            type(trained_sub)(
                model=trained_sub.model, desc=trained_sub.desc, seed=i,
                domain="source", sub_id=f"sub{i}",
            )
        )
    return out


# ---------------------------------------------------------------------------
# substitute training


def test_trained_substitute_beats_chance(trained_sub):
    assert trained_sub.eval_accuracy is not None
    assert trained_sub.eval_accuracy > 0.4  # chance is 1/7


def test_substitute_training_is_deterministic(source_train):
    kwargs = dict(seed=31, domain="source", epochs=2)
    a = train_substitute(ArchDescriptor("mlp_small"), source_train.x(), source_train.y(), **kwargs)
    b = train_substitute(ArchDescriptor("mlp_small"), source_train.x(), source_train.y(), **kwargs)
    assert torch.equal(flat_params(a.model), flat_params(b.model))


def test_substitute_training_is_seed_sensitive(source_train):
    a = train_substitute(
        ArchDescriptor("mlp_small"), source_train.x(), source_train.y(), seed=31, domain="source", epochs=2
    )
    b = train_substitute(
        ArchDescriptor("mlp_small"), source_train.x(), source_train.y(), seed=32, domain="source", epochs=2
    )
    assert not torch.equal(flat_params(a.model), flat_params(b.model))


def test_weak_substitute_is_flagged(source_train, source_test, caplog):
    # one epoch on an MLP leaves the high-SNR accuracy below the 0.6 floor
    import logging

    with caplog.at_level(logging.WARNING):
        sub = train_substitute(
            ArchDescriptor("mlp_small"), source_train.x()[:70], source_train.y()[:70],
            seed=1, domain="source", epochs=1,
            eval_x=source_test.x(), eval_y=source_test.y(), eval_snr=source_test.snrs(),
        )
    assert sub.weak
    assert any("weak" in r.message for r in caplog.records)


def test_substitute_eval_uses_high_snr_subset(source_train, source_test):
    # restricting the eval set to its SNR >= 10 rows by hand must reproduce
    # the accuracy the trainer reports
    sub = train_substitute(
        ArchDescriptor("cnn_small"), source_train.x(), source_train.y(),
        seed=9, domain="source", epochs=3,
        eval_x=source_test.x(), eval_y=source_test.y(), eval_snr=source_test.snrs(),
    )
    keep = source_test.snrs() >= 10.0
    ex, ey = to_tensors(source_test.x()[keep], source_test.y()[keep])
    assert sub.eval_accuracy == pytest.approx(accuracy(sub.model, ex, ey), abs=1e-9)


def test_substitute_rejects_empty_data():
    with pytest.raises(InputShapeError):
        train_substitute(ArchDescriptor("mlp_small"), np.zeros((0, 2, 128), np.float32),
                         np.zeros(0, np.int64), seed=0, domain="source")


def test_substitute_default_id_from_family_and_seed(source_train):
    sub = train_substitute(
        ArchDescriptor("mlp_small"), source_train.x()[:70], source_train.y()[:70],
        seed=17, domain="source", epochs=1,
    )
    assert sub.sub_id == "mlp_small#17"


# ---------------------------------------------------------------------------
# task pool partition


def test_pool_partition_is_disjoint_and_complete(trained_sub):
    specs = _specs(("fgsm", "pgd", "mim"))
    subs = _subs(trained_sub, 4)
    pool = build_task_pool(specs, subs, holdout=3, seed=0)
    train_ids = {t.task_id for t in pool.train_tasks}
    held_ids = {t.task_id for t in pool.held_out_tasks}
    assert len(train_ids & held_ids) == 0
    assert len(train_ids) + len(held_ids) == len(specs) * len(subs)
    assert len(held_ids) == 3


def test_balanced_holdout_covers_every_method_once(trained_sub):
    specs = _specs(("fgsm", "pgd", "mim"))
    subs = _subs(trained_sub, 5)
    pool = build_task_pool(specs, subs, holdout=3, seed=4, balanced=True)
    held_methods = sorted(t.attack.method for t in pool.held_out_tasks)
    assert held_methods == ["fgsm", "mim", "pgd"]


def test_unbalanced_holdout_is_a_uniform_sample(trained_sub):
    specs = _specs(("fgsm", "pgd", "mim"))
    subs = _subs(trained_sub, 5)
    pool = build_task_pool(specs, subs, holdout=2, seed=4, balanced=True)
    # holdout != number of methods falls back to the seeded uniform draw
    assert len(pool.held_out_tasks) == 2


def test_pool_partition_is_deterministic_per_seed(trained_sub):
    specs = _specs(("fgsm", "pgd", "mim"))
    subs = _subs(trained_sub, 4)
    a = build_task_pool(specs, subs, holdout=3, seed=7)
    b = build_task_pool(specs, subs, holdout=3, seed=7)
    c = build_task_pool(specs, subs, holdout=3, seed=8)
    assert [t.task_id for t in a.held_out_tasks] == [t.task_id for t in b.held_out_tasks]
    assert [t.task_id for t in a.held_out_tasks] != [t.task_id for t in c.held_out_tasks]


def test_pool_rejects_bad_holdout_and_duplicates(trained_sub):
    specs = _specs(("fgsm", "pgd"))
    subs = _subs(trained_sub, 2)
    with pytest.raises(ConfigurationError):
        build_task_pool(specs, subs, holdout=4, seed=0)  # >= pair count
    with pytest.raises(ConfigurationError):
        build_task_pool([], subs, holdout=0, seed=0)
    with pytest.raises(ConfigurationError):
        build_task_pool(
            [AttackSpec(method="fgsm", epsilon=1.0)] * 2, subs, holdout=1, seed=0
        )


def test_task_pool_rejects_overlapping_sides(trained_sub):
    t = AdversarialTask(task_id="fgsm@sub0", attack=_specs()[0], substitute=trained_sub)
    with pytest.raises(ConfigurationError):
        TaskPool(train_tasks=[t], held_out_tasks=[t])


# ---------------------------------------------------------------------------
# materialization and splits


def test_materialize_crafts_within_budget(trained_sub, source_train):
    specs = _specs(("fgsm", "pgd"))
    pool = build_task_pool(specs, [trained_sub], holdout=1, seed=0)
    materialize_tasks(pool.train_tasks, source_train.x(), source_train.y(), per_task=50, seed=0)
    for t in pool.train_tasks:
        assert t.materialized
        assert t.x_adv.shape == (50, 2, 128)
        norms = (t.x_adv - t.x_clean).reshape(50, -1).norm(dim=1)
        assert float(norms.max()) <= t.attack.epsilon + 1e-5


def test_materialize_subsets_differ_across_tasks(trained_sub, source_train):
    specs = _specs(("fgsm", "pgd", "mim"))
    pool = build_task_pool(specs, [trained_sub], holdout=1, seed=0)
    materialize_tasks(pool.train_tasks, source_train.x(), source_train.y(), per_task=50, seed=0)
    a, b = pool.train_tasks[0], pool.train_tasks[1]
    assert not torch.equal(a.x_clean, b.x_clean)


def test_materialize_without_cap_uses_every_frame(trained_sub, source_train):
    pool = build_task_pool(_specs(("fgsm",)), [trained_sub], holdout=0, seed=0)
    n = len(source_train.x())
    materialize_tasks(pool.train_tasks, source_train.x(), source_train.y(), per_task=None, seed=0)
    assert pool.train_tasks[0].x_clean.shape[0] == n


def test_split_is_disjoint_and_sized(trained_sub, source_train):
    pool = build_task_pool(_specs(("fgsm",)), [trained_sub], holdout=0, seed=0)
    materialize_tasks(pool.train_tasks, source_train.x(), source_train.y(), per_task=60, seed=0)
    task = pool.train_tasks[0]
    rng = np.random.default_rng(0)
    sup, qry = task.split(0.7, rng)
    assert len(sup) == 42 and len(qry) == 18
    assert len(set(sup.tolist()) & set(qry.tolist())) == 0
    assert sorted(np.concatenate([sup, qry]).tolist()) == list(range(60))


def test_split_requires_materialized_task(trained_sub):
    task = AdversarialTask(task_id="x", attack=_specs()[0], substitute=trained_sub)
    with pytest.raises(ConfigurationError):
        task.split(0.7, np.random.default_rng(0))


def test_split_rejects_degenerate_fraction(trained_sub, source_train):
    pool = build_task_pool(_specs(("fgsm",)), [trained_sub], holdout=0, seed=0)
    materialize_tasks(pool.train_tasks, source_train.x(), source_train.y(), per_task=20, seed=0)
    with pytest.raises(ConfigurationError):
        pool.train_tasks[0].split(1.0, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        pool.train_tasks[0].split(0.0, np.random.default_rng(0))
