"""Online adaptation under the deployed attack: fine-tuning and DANN.

DANN alternates a label step (cross-entropy on the few labeled target
pilots, updating features and head) with a domain step (source-vs-target
discrimination on a 50/50 batch through the gradient reversal layer,
updating the discriminator normally and the features adversarially).
Source frames enter only the domain loss — deployment has no source labels,
all source knowledge arrives through the offline initialization.

The label step follows the same step budget and plateau early-stopping rule
as finetune and freezes afterwards, while alignment keeps running; the
measured gap between the two online strategies is therefore the alignment
effect alone. If alignment later degrades the pilot loss past refit_margin,
the label step re-opens so the head tracks the aligned features. The
feature optimizer on the domain path is plain SGD, so a zero reversal
weight moves nothing, the refit never fires, and the whole trajectory
collapses bit-exactly onto finetune at the matching learning rate and step
budget.
"""

from __future__ import annotations

import copy
import dataclasses
import logging
import time

import numpy as np
import torch
import torch.nn.functional as F

from .errors import ConfigurationError
from .grads import loss_ce
from .models import AmcModel, DomainDiscriminator, GradientReversalFn

logger = logging.getLogger(__name__)

ONLINE_STRATEGIES = ("none", "finetune", "dann")

COLLAPSE_PATIENCE = 50


@dataclasses.dataclass
class OnlineConfig:
    strategy: str = "dann"
    shots: int = 10
    ft_lr: float = 1e-3
    ft_steps: int = 200
    ft_patience: int = 10
    dann_lr: float = 1e-3
    dann_feature_lr: float = 5e-3
    disc_lr: float = 1e-3
    lambda_grl: float = 0.5
    dann_epochs: int = 20
    batch_size: int = 64
    disc_hidden: int = 64
    warmup_fraction: float = 0.2
    refit_margin: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ONLINE_STRATEGIES:
            raise ConfigurationError(
                f"strategy must be one of {ONLINE_STRATEGIES}, got {self.strategy!r}"
            )
        if self.shots < 0:
            raise ConfigurationError(f"shots must be >= 0, got {self.shots}")
        if self.lambda_grl < 0:
            raise ConfigurationError(f"lambda_grl must be >= 0, got {self.lambda_grl}")
        if not (0.0 < self.warmup_fraction <= 1.0):
            raise ConfigurationError(
                f"warmup_fraction must lie in (0, 1], got {self.warmup_fraction}"
            )
        if self.ft_lr < 0 or self.dann_lr <= 0 or self.dann_feature_lr <= 0 or self.disc_lr <= 0:
            raise ConfigurationError("learning rates must be positive (ft_lr may be zero)")
        if self.refit_margin < 0:
            raise ConfigurationError(f"refit_margin must be >= 0, got {self.refit_margin}")
        if self.ft_steps < 1 or self.dann_epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("ft_steps, dann_epochs and batch_size must be >= 1")


def _streams(seed: int, n: int = 4) -> list[np.random.Generator]:
    return [np.random.default_rng(c) for c in np.random.SeedSequence([seed, 0x0A11]).spawn(n)]


def zero_shot(model: AmcModel, x: torch.Tensor, batch: int = 512) -> np.ndarray:
    """Predicted labels on a (possibly attacked) test set, no adaptation."""
    model.eval()
    outs = []
    with torch.no_grad():
        for i in range(0, x.shape[0], batch):
            outs.append(model(x[i : i + batch]).argmax(dim=1))
    return torch.cat(outs).numpy() if outs else np.zeros(0, dtype=np.int64)


def finetune(
    model: AmcModel, x_pilot: torch.Tensor, y_pilot: torch.Tensor, cfg: OnlineConfig
) -> tuple[AmcModel, list[dict]]:
    """Supervised few-shot fine-tuning on pilot frames.

    Full-batch Adam with early stopping once the pilot loss stops improving
    for ft_patience consecutive steps. The input model is left untouched.
    """
    if x_pilot.shape[0] == 0:
        raise ConfigurationError(
            "fine-tuning needs a non-empty pilot set; use the zero-shot path for shots=0"
        )
    tuned = copy.deepcopy(model)
    opt = torch.optim.Adam(tuned.parameters(), lr=cfg.ft_lr)
    best = float("inf")
    stall = 0
    log = []
    t0 = time.perf_counter()
    tuned.train()
    for step in range(cfg.ft_steps):
        opt.zero_grad()
        loss = loss_ce(tuned(x_pilot), y_pilot)
        loss.backward()
        opt.step()
        lval = float(loss.detach())
        log.append({"step": step, "pilot_loss": f"{lval:.6f}",
                    "seconds": f"{time.perf_counter() - t0:.3f}"})
        if lval < best - 1e-4:
            best = lval
            stall = 0
        else:
            stall += 1
            if stall >= cfg.ft_patience:
                break
    return tuned, log


def discriminator_metrics(
    model: AmcModel,
    disc: DomainDiscriminator,
    x_source: torch.Tensor,
    x_target: torch.Tensor,
) -> tuple[float, float]:
    """(accuracy, mean BCE) of the discriminator on a balanced probe batch."""
    if x_source.shape[0] == 0 or x_target.shape[0] == 0:
        raise ConfigurationError("discriminator metrics need non-empty batches from both domains")
    model.eval()
    disc.eval()
    with torch.no_grad():
        logits = torch.cat([
            disc(model.extract_features(x_source)),
            disc(model.extract_features(x_target)),
        ])
        labels = torch.cat([
            torch.zeros(x_source.shape[0]), torch.ones(x_target.shape[0])
        ]).to(logits.dtype)
        loss = F.binary_cross_entropy_with_logits(logits, labels)
        acc = ((logits > 0).to(labels.dtype) == labels).float().mean()
    return float(acc), float(loss)


def dann_adapt(
    model: AmcModel,
    x_source: torch.Tensor,
    x_pilot: torch.Tensor,
    y_pilot: torch.Tensor,
    x_unlabeled: torch.Tensor,
    cfg: OnlineConfig,
    disc: DomainDiscriminator | None = None,
) -> tuple[AmcModel, DomainDiscriminator, list[dict]]:
    """Semi-supervised domain-adversarial adaptation; returns a tuned copy.

    Supervision comes from the pilots alone; source frames act purely as the
    discriminator's reference domain. The label step follows finetune's
    budget and plateau rule, then freezes; it re-opens only if alignment
    drags the pilot loss more than refit_margin above its best. The reversal
    weight warms up linearly over the first warmup_fraction of steps. A
    discriminator pinned at 100% accuracy for 50 consecutive steps triggers
    a logged halving of the reversal weight.
    """
    if x_source.shape[0] == 0 or x_unlabeled.shape[0] == 0:
        raise ConfigurationError("dann needs non-empty source and unlabeled target sets")
    if x_pilot.shape[0] != y_pilot.shape[0]:
        raise ConfigurationError("pilot frames and labels disagree in length")
    tuned = copy.deepcopy(model)
    if disc is None:
        disc = DomainDiscriminator(tuned.feature_dim, hidden=cfg.disc_hidden, seed=cfg.seed + 977)

    feat_params = list(tuned.features.parameters())
    opt_label = torch.optim.Adam(
        feat_params + list(tuned.head.parameters()), lr=cfg.dann_lr
    )
    opt_feat_dom = torch.optim.SGD(feat_params, lr=cfg.dann_feature_lr)
    opt_disc = torch.optim.Adam(disc.parameters(), lr=cfg.disc_lr)

    _, dom_src_rng, dom_tgt_rng, _ = _streams(cfg.seed)
    n_src, n_unl = x_source.shape[0], x_unlabeled.shape[0]
    half = max(1, cfg.batch_size // 2)
    steps_per_epoch = max(1, n_unl // cfg.batch_size)
    total = cfg.dann_epochs * steps_per_epoch
    warm = max(1, int(round(cfg.warmup_fraction * total)))
    lam_scale = 1.0
    pinned = 0
    best_pil = float("inf")
    pil_stall = 0
    pil_frozen = False
    label_steps = 0
    cap_active = True
    log = []
    t0 = time.perf_counter()
    tuned.train()
    disc.train()

    for step in range(total):
        # label step: supervised CE on the pilots (the only labels online),
        # capped at the finetune step budget and frozen once the pilot loss
        # plateaus — the same stopping rule as finetune, so any downstream
        # difference is the alignment alone. If alignment later drags the
        # pilot loss more than refit_margin above its best, the head has
        # gone stale under the moving features and the label step re-opens
        # (plateau rule only from then on) so the head can track them.
        loss_pil = torch.zeros(())
        if x_pilot.shape[0]:
            if pil_frozen:
                with torch.no_grad():
                    drift = float(loss_ce(tuned(x_pilot), y_pilot))
                if drift > best_pil + cfg.refit_margin:
                    pil_frozen = False
                    pil_stall = 0
                    best_pil = drift
                    cap_active = False
                    logger.info(
                        "pilot loss drifted to %.4f at step %d; re-opening the label step",
                        drift, step,
                    )
            if not pil_frozen:
                opt_label.zero_grad()
                loss_pil = loss_ce(tuned(x_pilot), y_pilot)
                loss_pil.backward()
                opt_label.step()
                label_steps += 1
                lval = float(loss_pil.detach())
                if lval < best_pil - 1e-4:
                    best_pil = lval
                    pil_stall = 0
                else:
                    pil_stall += 1
                    if pil_stall >= cfg.ft_patience:
                        pil_frozen = True
                if cap_active and label_steps >= cfg.ft_steps:
                    pil_frozen = True

        # domain step: 50/50 batch through the gradient reversal layer
        lam = cfg.lambda_grl * lam_scale * min(1.0, (step + 1) / warm)
        si = dom_src_rng.choice(n_src, size=min(half, n_src), replace=False)
        ti = dom_tgt_rng.choice(n_unl, size=min(half, n_unl), replace=False)
        opt_feat_dom.zero_grad()
        opt_disc.zero_grad()
        feats = torch.cat([
            tuned.extract_features(x_source[si]),
            tuned.extract_features(x_unlabeled[ti]),
        ])
        logits = disc(GradientReversalFn.apply(feats, lam))
        dom_labels = torch.cat([
            torch.zeros(len(si)), torch.ones(len(ti))
        ]).to(logits.dtype)
        loss_dom = F.binary_cross_entropy_with_logits(logits, dom_labels)
        loss_dom.backward()
        opt_disc.step()
        opt_feat_dom.step()

        with torch.no_grad():
            dom_acc = float(((logits > 0).to(dom_labels.dtype) == dom_labels).float().mean())
        if dom_acc >= 1.0:
            pinned += 1
            if pinned >= COLLAPSE_PATIENCE:
                lam_scale *= 0.5
                pinned = 0
                logger.warning(
                    "discriminator pinned at 100%% for %d steps at step %d; halving reversal weight",
                    COLLAPSE_PATIENCE, step,
                )
        else:
            pinned = 0

        log.append({
            "step": step,
            "loss_label_pilot": f"{float(loss_pil.detach()):.6f}",
            "loss_domain": f"{float(loss_dom.detach()):.6f}",
            "domain_accuracy": f"{dom_acc:.4f}",
            "lambda": f"{lam:.6f}",
            "seconds": f"{time.perf_counter() - t0:.3f}",
        })
    return tuned, disc, log
