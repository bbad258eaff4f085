"""Offline training strategies: clean, adversarial, and meta-adversarial.

The meta-learners operate on flat parameter vectors through pure loss
closures, so the exact update rules are testable against closed-form
quadratic oracles. MAML's meta-gradient is the exact second-order quantity,
computed by reverse accumulation of Hessian-vector products along the stored
inner trajectory; FOMAML takes the query gradient at the adapted point;
Reptile moves toward the adapted parameters.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from typing import Callable, Sequence

import numpy as np
import torch

from .attacks import pgd
from .errors import ConfigurationError, TrainingDivergedError
from .grads import LossFn, flat_params, grad_fn, hvp, loss_ce, make_loss_fn, set_flat_params
from .models import AmcModel
from .tasks import AdversarialTask

logger = logging.getLogger(__name__)

OFFLINE_STRATEGIES = ("scratch", "clean", "adversarial", "meta_adversarial")
META_ALGOS = ("maml", "fomaml", "reptile")


@dataclasses.dataclass
class OfflineConfig:
    """Hyperparameters for every offline strategy (unused fields are ignored)."""

    strategy: str = "clean"
    epochs: int = 20
    batch_size: int = 64
    lr: float = 1e-3
    mix_weight: float = 0.5
    at_epsilon: float = 0.0
    at_steps: int = 7
    meta_algo: str = "fomaml"
    inner_lr: float = 0.01
    outer_lr: float = 1e-3
    inner_steps: int = 5
    outer_iters: int = 400
    support_fraction: float = 0.7
    inner_batch: int | None = 128
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in OFFLINE_STRATEGIES:
            raise ConfigurationError(
                f"strategy must be one of {OFFLINE_STRATEGIES}, got {self.strategy!r}"
            )
        if self.meta_algo not in META_ALGOS:
            raise ConfigurationError(
                f"meta_algo must be one of {META_ALGOS}, got {self.meta_algo!r}"
            )
        if not (0.0 < self.support_fraction < 1.0):
            raise ConfigurationError(
                f"support_fraction must lie in (0, 1), got {self.support_fraction}"
            )
        if not (0.0 <= self.mix_weight <= 1.0):
            raise ConfigurationError(f"mix_weight must lie in [0, 1], got {self.mix_weight}")
        if self.inner_steps < 0:
            raise ConfigurationError(f"inner_steps must be >= 0, got {self.inner_steps}")
        if self.outer_iters < 1 or self.epochs < 1:
            raise ConfigurationError("outer_iters and epochs must be >= 1")
        for name in ("lr", "inner_lr", "outer_lr"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.at_epsilon < 0 or self.at_steps < 1:
            raise ConfigurationError("at_epsilon must be >= 0 and at_steps >= 1")


def _streams(seed: int, n: int = 3) -> list[np.random.Generator]:
    """Independent child generators: batches, tasks, splits."""
    return [np.random.default_rng(c) for c in np.random.SeedSequence([seed, 0x0FF1]).spawn(n)]


# ---------------------------------------------------------------------------
# inner-loop adaptation and meta-gradients over flat parameter vectors


def _as_loss_list(loss: LossFn | Sequence[LossFn], steps: int) -> list[LossFn]:
    if callable(loss):
        return [loss] * steps
    loss = list(loss)
    if len(loss) != steps:
        raise ConfigurationError(f"expected {steps} per-step losses, got {len(loss)}")
    return loss


def inner_adapt(
    support_loss: LossFn | Sequence[LossFn],
    theta0: torch.Tensor,
    inner_lr: float,
    inner_steps: int,
) -> list[torch.Tensor]:
    """Plain gradient-descent trajectory [theta_0, ..., theta_k], detached."""
    losses = _as_loss_list(support_loss, inner_steps)
    traj = [theta0.detach().clone()]
    theta = traj[0]
    for j in range(inner_steps):
        g = grad_fn(losses[j], theta)
        theta = (theta - inner_lr * g).detach()
        traj.append(theta)
    return traj


def meta_gradient(
    algo: str,
    support_loss: LossFn | Sequence[LossFn],
    query_loss: LossFn,
    theta0: torch.Tensor,
    inner_lr: float,
    inner_steps: int,
) -> tuple[torch.Tensor, torch.Tensor]:
    """One task's meta-gradient and adapted parameters.

    maml: exact second-order gradient of the query loss at the adapted point
    with respect to theta0, via reverse HVP accumulation. fomaml: query
    gradient at the adapted point. reptile: -(theta_k - theta_0), so the
    uniform update theta <- theta - beta * meta_grad moves toward theta_k.
    """
    if algo not in META_ALGOS:
        raise ConfigurationError(f"meta_algo must be one of {META_ALGOS}, got {algo!r}")
    losses = _as_loss_list(support_loss, inner_steps)
    traj = inner_adapt(losses, theta0, inner_lr, inner_steps)
    theta_k = traj[-1]

    if algo == "reptile":
        return theta0.detach() - theta_k, theta_k

    g = grad_fn(query_loss, theta_k)
    if algo == "fomaml":
        return g, theta_k

    for j in range(inner_steps - 1, -1, -1):
        g = g - inner_lr * hvp(losses[j], traj[j], g)
    return g, theta_k


# ---------------------------------------------------------------------------
# training loops


def _diverged_guard(loss_val: float, theta_backup: torch.Tensor, step: int, what: str):
    if not np.isfinite(loss_val):
        raise TrainingDivergedError(
            f"{what} hit a non-finite loss at step {step}",
            last_state=theta_backup.clone(), step=step,
        )


def train_clean(model: AmcModel, x: torch.Tensor, y: torch.Tensor, cfg: OfflineConfig):
    """Mini-batch Adam on cross-entropy; returns (model, log rows)."""
    if x.shape[0] == 0:
        raise ConfigurationError("training set is empty")
    batch_rng, _, _ = _streams(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    n = x.shape[0]
    total_steps = cfg.epochs * max(1, n // cfg.batch_size)
    log = []
    model.train()
    t0 = time.perf_counter()
    for step in range(total_steps):
        idx = batch_rng.choice(n, size=min(cfg.batch_size, n), replace=False)
        opt.zero_grad()
        loss = loss_ce(model(x[idx]), y[idx])
        loss.backward()
        lval = float(loss.detach())
        _diverged_guard(lval, flat_params(model), step, "clean training")
        opt.step()
        log.append({
            "iteration": step, "task_id": "", "support_loss": "",
            "query_loss": f"{lval:.6f}", "seconds": f"{time.perf_counter() - t0:.3f}",
        })
    return model, log


def train_adversarial(model: AmcModel, x: torch.Tensor, y: torch.Tensor, cfg: OfflineConfig):
    """White-box adversarial training on the model's own gradients.

    Every batch is re-attacked with PGD against the current parameters and
    the loss mixes clean and perturbed cross-entropy with weight mix_weight.
    mix_weight 1 skips crafting entirely and reduces bit-exactly to clean
    training on the same batch stream. The model hardens against what it can
    compute itself — its own worst-case directions — not against any
    substitute's.
    """
    if x.shape[0] == 0:
        raise ConfigurationError("training set is empty")
    lam = cfg.mix_weight
    if lam < 1.0 and cfg.at_epsilon <= 0:
        raise ConfigurationError("adversarial training needs a positive at_epsilon")
    batch_rng, _, _ = _streams(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    n = x.shape[0]
    total_steps = cfg.epochs * max(1, n // cfg.batch_size)
    log = []
    model.train()
    t0 = time.perf_counter()
    for step in range(total_steps):
        idx = batch_rng.choice(n, size=min(cfg.batch_size, n), replace=False)
        xb, yb = x[idx], y[idx]
        adv_val = ""
        if lam < 1.0:
            x_adv = pgd(
                model, xb, yb, cfg.at_epsilon, cfg.at_epsilon / 4.0, cfg.at_steps
            ).detach()
            opt.zero_grad()
            loss_clean = loss_ce(model(xb), yb)
            loss_adv = loss_ce(model(x_adv), yb)
            loss = lam * loss_clean + (1.0 - lam) * loss_adv
            adv_val = f"{float(loss_adv.detach()):.6f}"
        else:
            opt.zero_grad()
            loss_clean = loss_ce(model(xb), yb)
            loss = loss_clean
        loss.backward()
        lval = float(loss.detach())
        _diverged_guard(lval, flat_params(model), step, "adversarial training")
        opt.step()
        log.append({
            "iteration": step, "task_id": "",
            "support_loss": f"{float(loss_clean.detach()):.6f}",
            "query_loss": adv_val,
            "seconds": f"{time.perf_counter() - t0:.3f}",
        })
    return model, log


def _task_loss_fn(
    model: AmcModel, task: AdversarialTask, idx, mix_weight: float
) -> LossFn:
    """Mixed clean/perturbed loss closure over the flat parameter vector."""
    loss_adv = make_loss_fn(model, task.x_adv[idx], task.y[idx])
    if mix_weight == 0.0:
        return loss_adv
    loss_clean = make_loss_fn(model, task.x_clean[idx], task.y[idx])
    if mix_weight == 1.0:
        return loss_clean
    lam = mix_weight
    return lambda theta: lam * loss_clean(theta) + (1.0 - lam) * loss_adv(theta)


def meta_train(model: AmcModel, tasks: list[AdversarialTask], cfg: OfflineConfig):
    """Meta-adversarial training over the attack-by-substitute task pool.

    One task per outer iteration; the support/query split is re-drawn every
    visit and both sides carry the task's mixed clean/perturbed loss. The
    meta-gradient feeds an Adam outer step on the flat parameter vector.
    Tasks whose inner loop diverges are skipped and logged.
    """
    live = [t for t in tasks if t.materialized]
    if not live:
        raise ConfigurationError("no materialized tasks to train on")
    _, task_rng, split_rng = _streams(cfg.seed)
    theta = torch.nn.Parameter(flat_params(model))
    opt = torch.optim.Adam([theta], lr=cfg.outer_lr)
    log = []
    t0 = time.perf_counter()
    for it in range(cfg.outer_iters):
        task = live[int(task_rng.integers(0, len(live)))]
        sup_idx, qry_idx = task.split(cfg.support_fraction, split_rng)

        sup_losses = []
        for _ in range(cfg.inner_steps):
            if cfg.inner_batch is not None and cfg.inner_batch < sup_idx.size:
                pick = split_rng.choice(sup_idx, size=cfg.inner_batch, replace=False)
            else:
                pick = sup_idx
            sup_losses.append(_task_loss_fn(model, task, pick, cfg.mix_weight))
        query_loss = _task_loss_fn(model, task, qry_idx, cfg.mix_weight)

        g_meta, theta_k = meta_gradient(
            cfg.meta_algo, sup_losses, query_loss, theta.detach(), cfg.inner_lr, cfg.inner_steps
        )
        with torch.no_grad():
            q_val = float(query_loss(theta_k))
            s_val = float(sup_losses[-1](theta_k)) if sup_losses else q_val
        if not (np.isfinite(q_val) and bool(torch.isfinite(g_meta).all())):
            logger.warning("skipping task %s at iteration %d: non-finite inner loop", task.task_id, it)
            continue
        opt.zero_grad()
        theta.grad = g_meta
        opt.step()
        log.append({
            "iteration": it, "task_id": task.task_id,
            "support_loss": f"{s_val:.6f}", "query_loss": f"{q_val:.6f}",
            "seconds": f"{time.perf_counter() - t0:.3f}",
        })
    if not bool(torch.isfinite(theta).all()):
        raise TrainingDivergedError(
            "meta training produced non-finite parameters", last_state=theta.detach()
        )
    set_flat_params(model, theta.detach())
    return model, log


def run_offline(
    model: AmcModel,
    strategy: str,
    cfg: OfflineConfig,
    x_train: torch.Tensor | None = None,
    y_train: torch.Tensor | None = None,
    tasks: list[AdversarialTask] | None = None,
):
    """Dispatch one offline strategy; scratch leaves the fresh init untouched."""
    if strategy == "scratch":
        return model, []
    if strategy == "clean":
        if x_train is None or y_train is None:
            raise ConfigurationError("clean training needs x_train and y_train")
        return train_clean(model, x_train, y_train, cfg)
    if strategy == "adversarial":
        if x_train is None or y_train is None:
            raise ConfigurationError("adversarial training needs x_train and y_train")
        return train_adversarial(model, x_train, y_train, cfg)
    if strategy == "meta_adversarial":
        if tasks is None:
            raise ConfigurationError("meta-adversarial training needs a task pool")
        return meta_train(model, tasks, cfg)
    raise ConfigurationError(f"unknown offline strategy {strategy!r}")
