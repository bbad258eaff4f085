"""Adversarial perturbation methods under a per-frame L2 budget.

Five methods: FGSM, PGD, MIM, CW, and a PCA-based universal perturbation.
All gradient attacks maximize the substitute's cross-entropy and keep the
perturbation inside an epsilon L2 ball per frame. FGSM is exactly PGD with
one step of size epsilon, and the code paths are arranged so that identity
holds bit for bit (PGD tracks the perturbation, not the perturbed input, and
projection leaves in-budget frames untouched).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigurationError, InputShapeError

ATTACK_METHODS = ("fgsm", "pgd", "mim", "cw", "pca")

BUDGET_SLACK = 1e-5


@dataclasses.dataclass(frozen=True)
class AttackSpec:
    """One attack instantiation: method plus every knob it needs.

    alpha defaults to epsilon/4 at craft time when left unset. For CW,
    alpha is the gradient-descent step size and c the initial margin weight.
    """

    method: str
    epsilon: float
    steps: int = 10
    alpha: float | None = None
    mu: float = 1.0
    c: float = 1.0
    binary_search_steps: int = 5
    pca_space: str = "gradient"

    def __post_init__(self):
        if self.method not in ATTACK_METHODS:
            raise ConfigurationError(
                f"unknown attack method {self.method!r}, expected one of {ATTACK_METHODS}"
            )
        if not (self.epsilon > 0):
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        min_steps = 10 if self.method == "cw" else 1
        if self.steps < min_steps:
            raise ConfigurationError(
                f"{self.method} needs steps >= {min_steps}, got {self.steps}"
            )
        if self.alpha is not None and not (self.alpha > 0):
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.c < 0:
            raise ConfigurationError(f"c must be >= 0, got {self.c}")
        if self.binary_search_steps < 1:
            raise ConfigurationError(
                f"binary_search_steps must be >= 1, got {self.binary_search_steps}"
            )
        if self.pca_space not in ("gradient", "data"):
            raise ConfigurationError(
                f"pca_space must be 'gradient' or 'data', got {self.pca_space!r}"
            )

    @property
    def step_size(self) -> float:
        return self.alpha if self.alpha is not None else self.epsilon / 4.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def eps_from_psr(psr_db: float, frame_len: int) -> float:
    """L2 budget for a perturbation-to-signal ratio against unit-power frames.

    Frames carry mean |sample|^2 = 1, so the squared frame norm is frame_len
    and PSR p dB means ||delta||^2 = frame_len * 10^(p/10).
    """
    if frame_len <= 0:
        raise InputShapeError(f"frame_len must be positive, got {frame_len}")
    return math.sqrt(frame_len * 10.0 ** (psr_db / 10.0))


def _check_batch(x: torch.Tensor, y: torch.Tensor) -> None:
    if x.ndim != 3 or x.shape[1] != 2:
        raise InputShapeError(f"expected frames of shape (batch, 2, L), got {tuple(x.shape)}")
    if y.shape[0] != x.shape[0]:
        raise InputShapeError(f"batch mismatch: {x.shape[0]} frames vs {y.shape[0]} labels")


def _grad_sum_ce(model: nn.Module, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Per-frame CE input gradients (sum reduction, so batching is irrelevant)."""
    x = x.detach().requires_grad_(True)
    loss = F.cross_entropy(model(x), y, reduction="sum")
    (g,) = torch.autograd.grad(loss, x)
    return g


def project_l2(delta: torch.Tensor, epsilon: float) -> torch.Tensor:
    """Radial projection of each frame's perturbation onto the epsilon ball.

    Frames already inside the ball are returned with their exact float
    values, which the FGSM/PGD bit-identity relies on.
    """
    flat = delta.reshape(delta.shape[0], -1)
    norms = flat.norm(dim=1)
    over = norms > epsilon
    if not bool(over.any()):
        return delta
    scale = torch.ones_like(norms)
    scale[over] = epsilon / norms[over]
    return delta * scale.reshape(-1, *([1] * (delta.ndim - 1)))


def pgd(
    model: nn.Module,
    x: torch.Tensor,
    y: torch.Tensor,
    epsilon: float,
    alpha: float,
    steps: int,
) -> torch.Tensor:
    """Projected gradient descent with sign steps and L2 projection."""
    _check_batch(x, y)
    delta = torch.zeros_like(x)
    for _ in range(steps):
        g = _grad_sum_ce(model, x + delta, y)
        delta = project_l2(delta + alpha * torch.sign(g), epsilon)
    return x + delta


def fgsm(model: nn.Module, x: torch.Tensor, y: torch.Tensor, epsilon: float) -> torch.Tensor:
    """Single sign step of size epsilon, projected onto the budget ball."""
    return pgd(model, x, y, epsilon, alpha=epsilon, steps=1)


def mim(
    model: nn.Module,
    x: torch.Tensor,
    y: torch.Tensor,
    epsilon: float,
    alpha: float,
    steps: int,
    mu: float = 1.0,
) -> torch.Tensor:
    """Momentum iterative method: L1-normalized gradients accumulate into the
    momentum buffer, steps follow the buffer's sign. Zero-gradient frames skip
    the normalization."""
    _check_batch(x, y)
    delta = torch.zeros_like(x)
    g_acc = torch.zeros_like(x)
    for _ in range(steps):
        g = _grad_sum_ce(model, x + delta, y)
        l1 = g.abs().reshape(g.shape[0], -1).sum(dim=1)
        safe = torch.where(l1 > 0, l1, torch.ones_like(l1))
        g_normed = g / safe.reshape(-1, *([1] * (g.ndim - 1)))
        g_acc = mu * g_acc + g_normed
        delta = project_l2(delta + alpha * torch.sign(g_acc), epsilon)
    return x + delta


def cw(
    model: nn.Module,
    x: torch.Tensor,
    y: torch.Tensor,
    epsilon: float,
    c: float = 1.0,
    steps: int = 50,
    binary_search_steps: int = 5,
    lr: float | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Carlini-Wagner-style minimum-norm attack with kappa = 0.

    Minimizes ||delta||^2 + c * relu(z_y - max_{j != y} z_j) by plain gradient
    descent, binary-searching c per frame (halve on success, double on
    failure) and keeping the smallest successful delta. The result is clipped
    into the epsilon ball. Returns (x_adv, converged mask); converged=False
    frames carry the best delta found.
    """
    _check_batch(x, y)
    n = x.shape[0]
    if lr is None:
        lr = epsilon / 10.0
    c_cur = torch.full((n,), float(c), dtype=x.dtype)
    best = torch.zeros_like(x)
    best_norm = torch.full((n,), float("inf"), dtype=x.dtype)
    converged = torch.zeros(n, dtype=torch.bool)
    onehot = F.one_hot(y, num_classes=model(x[:1]).shape[1]).to(x.dtype)

    for _ in range(binary_search_steps):
        delta = torch.zeros_like(x, requires_grad=True)
        for _ in range(steps):
            z = model(x + delta)
            z_true = (z * onehot).sum(dim=1)
            z_other = (z - 1e9 * onehot).max(dim=1).values
            margin = F.relu(z_true - z_other)
            norms2 = delta.reshape(n, -1).pow(2).sum(dim=1)
            obj = (norms2 + c_cur * margin).sum()
            (g,) = torch.autograd.grad(obj, delta)
            with torch.no_grad():
                delta = delta - lr * g
            delta.requires_grad_(True)
        with torch.no_grad():
            z = model(x + delta)
            success = z.argmax(dim=1) != y
            norms = delta.reshape(n, -1).norm(dim=1)
            improved = success & (norms < best_norm)
            best[improved] = delta[improved]
            best_norm[improved] = norms[improved]
            converged |= success
            c_cur = torch.where(success, c_cur * 0.5, c_cur * 2.0)

    final = torch.where(
        converged.reshape(-1, *([1] * (x.ndim - 1))), best, delta.detach()
    )
    final = project_l2(final, epsilon)
    return x + final, converged


def principal_direction(matrix: torch.Tensor) -> torch.Tensor:
    """First right-singular vector of an uncentered row matrix.

    Raises if the matrix is numerically rank zero.
    """
    if matrix.ndim != 2 or matrix.shape[0] == 0:
        raise InputShapeError(f"need a non-empty 2-D matrix, got {tuple(matrix.shape)}")
    total = matrix.norm()
    if not torch.isfinite(total) or total < 1e-12:
        raise InputShapeError("degenerate input: matrix is numerically rank zero")
    _, _, vh = torch.linalg.svd(matrix, full_matrices=False)
    return vh[0]


def pca_universal(
    model: nn.Module,
    x: torch.Tensor,
    y: torch.Tensor,
    epsilon: float,
    space: str = "gradient",
    batch: int = 512,
) -> torch.Tensor:
    """Universal perturbation along the first principal component.

    In gradient space the rows are L2-normalized per-frame input gradients;
    in data space the rows are the frames themselves. The sign is chosen by
    whichever direction raises the mean loss more, and the result has L2 norm
    exactly epsilon.
    """
    _check_batch(x, y)
    if space == "gradient":
        rows = []
        for i in range(0, x.shape[0], batch):
            g = _grad_sum_ce(model, x[i : i + batch], y[i : i + batch])
            flat = g.reshape(g.shape[0], -1)
            norms = flat.norm(dim=1, keepdim=True)
            keep = norms.squeeze(1) > 0
            rows.append(flat[keep] / norms[keep])
        mat = torch.cat(rows) if rows else torch.zeros(0, x[0].numel())
    elif space == "data":
        mat = x.reshape(x.shape[0], -1).detach().clone()
    else:
        raise ConfigurationError(f"pca space must be 'gradient' or 'data', got {space!r}")

    v = principal_direction(mat)
    v = v / v.norm()
    cand = (epsilon * v).reshape(x[0].shape)

    with torch.no_grad():
        loss_plus = F.cross_entropy(model(x + cand), y)
        loss_minus = F.cross_entropy(model(x - cand), y)
    v_final = cand if loss_plus >= loss_minus else -cand
    return v_final * (epsilon / v_final.norm())


def craft(
    spec: AttackSpec,
    model: nn.Module,
    x: torch.Tensor,
    y: torch.Tensor,
    fit_x: torch.Tensor | None = None,
    fit_y: torch.Tensor | None = None,
) -> torch.Tensor:
    """Apply one attack spec to a batch of frames against a substitute model.

    For the universal PCA method the direction is fitted on (fit_x, fit_y)
    when given (the adversary's own data), otherwise on the batch itself,
    and then added to every frame.
    """
    if spec.method == "fgsm":
        return fgsm(model, x, y, spec.epsilon)
    if spec.method == "pgd":
        return pgd(model, x, y, spec.epsilon, spec.step_size, spec.steps)
    if spec.method == "mim":
        return mim(model, x, y, spec.epsilon, spec.step_size, spec.steps, spec.mu)
    if spec.method == "cw":
        x_adv, _ = cw(
            model, x, y, spec.epsilon,
            c=spec.c, steps=spec.steps,
            binary_search_steps=spec.binary_search_steps,
            lr=spec.step_size,
        )
        return x_adv
    if spec.method == "pca":
        fx = x if fit_x is None else fit_x
        fy = y if fit_y is None else fit_y
        v = pca_universal(model, fx, fy, spec.epsilon, space=spec.pca_space)
        return x + v
    raise ConfigurationError(f"unknown attack method {spec.method!r}")
