"""Exact gradient machinery: losses, input/parameter gradients, HVPs.

Parameter-space quantities use flat vectors in ``model.parameters()`` order;
``make_loss_fn`` turns (model, batch) into a pure function of that flat
vector via torch.func.functional_call, which is what the meta-learning
updates and their closed-form tests consume.
"""

from __future__ import annotations

from typing import Callable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InputShapeError

LossFn = Callable[[torch.Tensor], torch.Tensor]


def loss_ce(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy; accepts integer labels or soft target rows."""
    if logits.ndim != 2:
        raise InputShapeError(f"logits must be (batch, classes), got {tuple(logits.shape)}")
    if labels.shape[0] != logits.shape[0]:
        raise InputShapeError(
            f"batch mismatch: {logits.shape[0]} logits vs {labels.shape[0]} labels"
        )
    if labels.dtype.is_floating_point:
        if labels.shape != logits.shape:
            raise InputShapeError(
                f"soft labels must match logits shape {tuple(logits.shape)}, got {tuple(labels.shape)}"
            )
        return -(labels * F.log_softmax(logits, dim=1)).sum(dim=1).mean()
    if labels.numel() and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise InputShapeError(
            f"label values must lie in [0, {logits.shape[1] - 1}]"
        )
    return F.cross_entropy(logits, labels)


def input_grad(model: nn.Module, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Gradient of the mean CE loss with respect to the input batch."""
    x = x.detach().requires_grad_(True)
    loss = loss_ce(model(x), y)
    (g,) = torch.autograd.grad(loss, x)
    return g


def flat_params(model: nn.Module) -> torch.Tensor:
    return torch.cat([p.detach().reshape(-1) for p in model.parameters()])


def set_flat_params(model: nn.Module, vec: torch.Tensor) -> None:
    expected = sum(p.numel() for p in model.parameters())
    if vec.numel() != expected:
        raise InputShapeError(f"parameter vector has {vec.numel()} entries, model needs {expected}")
    off = 0
    with torch.no_grad():
        for p in model.parameters():
            n = p.numel()
            p.copy_(vec[off : off + n].reshape(p.shape).to(p.dtype))
            off += n


def _unflatten(model: nn.Module, vec: torch.Tensor) -> dict[str, torch.Tensor]:
    out = {}
    off = 0
    for name, p in model.named_parameters():
        n = p.numel()
        out[name] = vec[off : off + n].reshape(p.shape)
        off += n
    if off != vec.numel():
        raise InputShapeError(f"parameter vector has {vec.numel()} entries, model needs {off}")
    return out


def functional_loss(
    model: nn.Module, theta: torch.Tensor, x: torch.Tensor, y: torch.Tensor
) -> torch.Tensor:
    """CE loss of the model evaluated at an arbitrary flat parameter vector."""
    params = _unflatten(model, theta)
    logits = torch.func.functional_call(model, params, (x,))
    return loss_ce(logits, y)


def make_loss_fn(model: nn.Module, x: torch.Tensor, y: torch.Tensor) -> LossFn:
    """Bind a batch so the loss becomes a pure function of the flat parameters."""
    return lambda theta: functional_loss(model, theta, x, y)


def param_grad(model: nn.Module, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Flat gradient of the mean CE loss with respect to model parameters."""
    theta = flat_params(model).requires_grad_(True)
    loss = functional_loss(model, theta, x, y)
    (g,) = torch.autograd.grad(loss, theta)
    return g


def grad_fn(loss_fn: LossFn, theta: torch.Tensor, create_graph: bool = False) -> torch.Tensor:
    th = theta.detach().requires_grad_(True)
    loss = loss_fn(th)
    (g,) = torch.autograd.grad(loss, th, create_graph=create_graph)
    return g


def hvp(loss_fn: LossFn, theta: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """Hessian-vector product of a scalar loss at theta, via double backward."""
    if v.shape != theta.shape:
        raise InputShapeError(f"v shape {tuple(v.shape)} must match theta {tuple(theta.shape)}")
    th = theta.detach().requires_grad_(True)
    loss = loss_fn(th)
    (g,) = torch.autograd.grad(loss, th, create_graph=True)
    (hv,) = torch.autograd.grad(g @ v.detach(), th)
    return hv


def model_hvp(model: nn.Module, x: torch.Tensor, y: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    return hvp(make_loss_fn(model, x, y), flat_params(model), v)


def accuracy(model: nn.Module, x: torch.Tensor, y: torch.Tensor, batch: int = 512) -> float:
    """Fraction of correct argmax predictions, evaluated without gradients."""
    if x.shape[0] == 0:
        raise InputShapeError("cannot compute accuracy of an empty batch")
    correct = 0
    model.eval()
    with torch.no_grad():
        for i in range(0, x.shape[0], batch):
            pred = model(x[i : i + batch]).argmax(dim=1)
            correct += int((pred == y[i : i + batch]).sum())
    return correct / x.shape[0]


def predict(model: nn.Module, x: torch.Tensor, batch: int = 512) -> torch.Tensor:
    model.eval()
    outs = []
    with torch.no_grad():
        for i in range(0, x.shape[0], batch):
            outs.append(model(x[i : i + batch]).argmax(dim=1))
    return torch.cat(outs) if outs else torch.zeros(0, dtype=torch.long)


def to_tensors(
    x, y=None, dtype: torch.dtype = torch.float32
) -> torch.Tensor | tuple[torch.Tensor, torch.Tensor]:
    """numpy-to-torch convenience used at the library boundaries."""
    xt = torch.as_tensor(x, dtype=dtype)
    if y is None:
        return xt
    return xt, torch.as_tensor(y, dtype=torch.long)
