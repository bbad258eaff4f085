"""Substitute training and the attack-by-substitute task pool.

A task pairs one attack spec with one trained substitute; the offline phase
trains against a pool of such tasks and a held-out subset simulates the
unseen attacker at evaluation time. Perturbed frames are crafted once per
task and cached, since they depend only on the substitute, never on the
classifier being trained.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
import torch

from .attacks import AttackSpec, craft
from .errors import ConfigurationError, InputShapeError
from .grads import accuracy, loss_ce, to_tensors
from .models import AmcModel, ArchDescriptor, build_model

logger = logging.getLogger(__name__)

WEAK_ACCURACY_FLOOR = 0.6


@dataclasses.dataclass
class TrainedSubstitute:
    """A trained attacker-side model plus its identity and health flag."""

    model: AmcModel
    desc: ArchDescriptor
    seed: int
    domain: str
    sub_id: str
    eval_accuracy: float | None = None
    weak: bool = False


def train_substitute(
    desc: ArchDescriptor,
    x: np.ndarray,
    y: np.ndarray,
    seed: int,
    domain: str,
    sub_id: str = "",
    epochs: int = 8,
    lr: float = 1e-3,
    batch_size: int = 64,
    eval_x: np.ndarray | None = None,
    eval_y: np.ndarray | None = None,
    eval_snr: np.ndarray | None = None,
) -> TrainedSubstitute:
    """Train one substitute on labeled frames with Adam and mini-batches.

    If an eval split is given, accuracy is measured on its SNR >= 10 dB
    subset and the substitute is flagged weak below 60%.
    """
    if len(x) == 0:
        raise InputShapeError("substitute training needs a non-empty dataset")
    xt, yt = to_tensors(x, y)
    model = build_model(desc, frame_len=xt.shape[2], seed=seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5B]))
    n = xt.shape[0]
    steps_per_epoch = max(1, n // batch_size)
    model.train()
    for _ in range(epochs):
        order = rng.permutation(n)
        for s in range(steps_per_epoch):
            idx = order[s * batch_size : (s + 1) * batch_size]
            if idx.size == 0:
                continue
            opt.zero_grad()
            loss = loss_ce(model(xt[idx]), yt[idx])
            loss.backward()
            opt.step()

    acc = None
    weak = False
    if eval_x is not None and eval_y is not None and len(eval_x):
        ex, ey = to_tensors(eval_x, eval_y)
        if eval_snr is not None:
            keep = np.asarray(eval_snr) >= 10.0
            if keep.any():
                ex, ey = ex[keep], ey[keep]
        acc = accuracy(model, ex, ey)
        weak = acc < WEAK_ACCURACY_FLOOR
        if weak:
            logger.warning(
                "substitute %s is weak: %.3f accuracy on %s-domain eval (floor %.2f)",
                sub_id or desc.family, acc, domain, WEAK_ACCURACY_FLOOR,
            )
    return TrainedSubstitute(
        model=model, desc=desc, seed=seed, domain=domain,
        sub_id=sub_id or f"{desc.family}#{seed}", eval_accuracy=acc, weak=weak,
    )


@dataclasses.dataclass
class AdversarialTask:
    """One (attack, substitute) pair with cached perturbed frames."""

    task_id: str
    attack: AttackSpec
    substitute: TrainedSubstitute
    x_clean: torch.Tensor | None = None
    x_adv: torch.Tensor | None = None
    y: torch.Tensor | None = None

    def materialize(self, x: torch.Tensor, y: torch.Tensor) -> None:
        """Craft and cache this task's perturbed copy of an assigned pool."""
        self.x_clean = x
        self.y = y
        self.x_adv = craft(self.attack, self.substitute.model, x, y).detach()

    @property
    def materialized(self) -> bool:
        return self.x_adv is not None

    def split(self, support_fraction: float, rng: np.random.Generator):
        """Fresh disjoint support/query index split over the cached pool."""
        if not self.materialized:
            raise ConfigurationError(f"task {self.task_id} has no materialized data to split")
        if not (0.0 < support_fraction < 1.0):
            raise ConfigurationError(
                f"support_fraction must lie in (0, 1), got {support_fraction}"
            )
        n = self.x_adv.shape[0]
        n_support = int(round(n * support_fraction))
        n_support = min(max(n_support, 1), n - 1)
        perm = rng.permutation(n)
        return perm[:n_support], perm[n_support:]


@dataclasses.dataclass
class TaskPool:
    train_tasks: list[AdversarialTask]
    held_out_tasks: list[AdversarialTask]

    def __post_init__(self):
        train_ids = {t.task_id for t in self.train_tasks}
        held_ids = {t.task_id for t in self.held_out_tasks}
        overlap = train_ids & held_ids
        if overlap:
            raise ConfigurationError(f"tasks appear on both sides of the holdout: {sorted(overlap)}")


def build_task_pool(
    specs: list[AttackSpec],
    substitutes: list[TrainedSubstitute],
    holdout: int,
    seed: int,
    balanced: bool = True,
) -> TaskPool:
    """Cross attack specs with substitutes and carve out held-out pairs.

    With balanced=True and holdout equal to the number of attack methods,
    exactly one pair per method is held out (substitute picked by seeded
    draw); otherwise the held-out pairs are a seeded uniform sample.
    """
    if not specs or not substitutes:
        raise ConfigurationError("need at least one attack spec and one substitute")
    methods = [s.method for s in specs]
    if len(set(methods)) != len(methods):
        raise ConfigurationError(f"duplicate attack methods in task pool: {methods}")
    pairs = [(spec, sub) for spec in specs for sub in substitutes]
    if holdout < 0 or holdout >= len(pairs):
        raise ConfigurationError(
            f"holdout must lie in [0, {len(pairs) - 1}], got {holdout}"
        )

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A5C]))
    held: set[int] = set()
    if balanced and holdout == len(specs):
        for mi in range(len(specs)):
            si = int(rng.integers(0, len(substitutes)))
            held.add(mi * len(substitutes) + si)
    else:
        held = set(int(i) for i in rng.choice(len(pairs), size=holdout, replace=False))

    def mk(i: int) -> AdversarialTask:
        spec, sub = pairs[i]
        return AdversarialTask(
            task_id=f"{spec.method}@{sub.sub_id}", attack=spec, substitute=sub
        )

    return TaskPool(
        train_tasks=[mk(i) for i in range(len(pairs)) if i not in held],
        held_out_tasks=[mk(i) for i in sorted(held)],
    )


def materialize_tasks(
    tasks: list[AdversarialTask],
    x: np.ndarray,
    y: np.ndarray,
    per_task: int | None,
    seed: int,
) -> None:
    """Assign each task a seeded frame subset and craft its perturbed copy.

    per_task caps the pool handed to each task (None uses every frame).
    Subsets are drawn independently per task so the pool covers the data.
    """
    xt, yt = to_tensors(x, y)
    n = xt.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A5D]))
    for task in tasks:
        if per_task is not None and per_task < n:
            idx = rng.choice(n, size=per_task, replace=False)
            task.materialize(xt[idx], yt[idx])
        else:
            rng.permutation(n)  # keep the stream aligned regardless of cap
            task.materialize(xt, yt)
