"""Classifier architectures, the substitute zoo, and DANN components.

Every classifier decomposes into a feature extractor (``features``) and a
final linear label predictor (``head``); the split point is what the domain
discriminator attaches to. Initialization is driven by an explicit seed
through a dedicated torch.Generator so builds are reproducible regardless of
global RNG state.
"""

from __future__ import annotations

import dataclasses
import math

import torch
from torch import nn

from .errors import ConfigurationError, InputShapeError

NUM_CLASSES = 7
FEATURE_DIM = 64
MAX_SUBSTITUTE_PARAMS = 200_000

ARCH_FAMILIES = ("mlp_small", "cnn_small", "cnn_wide", "cnn_deep")

_ACTIVATIONS = {"relu": nn.ReLU, "tanh": nn.Tanh, "elu": nn.ELU}


@dataclasses.dataclass(frozen=True)
class ArchDescriptor:
    """Names one architecture in the zoo: family plus activation."""

    family: str
    activation: str = "relu"

    def __post_init__(self):
        if self.family not in ARCH_FAMILIES:
            raise ConfigurationError(
                f"unknown architecture family {self.family!r}, expected one of {ARCH_FAMILIES}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ConfigurationError(
                f"unknown activation {self.activation!r}, expected one of {tuple(_ACTIVATIONS)}"
            )

    def to_dict(self) -> dict:
        return {"family": self.family, "activation": self.activation}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchDescriptor":
        return cls(family=d["family"], activation=d.get("activation", "relu"))


class _GlobalAvgPool1d(nn.Module):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x.mean(dim=-1)


class AmcModel(nn.Module):
    """Feature extractor + linear head over (batch, 2, frame_len) I/Q frames."""

    def __init__(
        self,
        desc: ArchDescriptor,
        features: nn.Module,
        feature_dim: int,
        frame_len: int,
        num_classes: int,
    ):
        super().__init__()
        self.desc = desc
        self.frame_len = frame_len
        self.num_classes = num_classes
        self.feature_dim = feature_dim
        self.features = features
        self.head = nn.Linear(feature_dim, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3 or x.shape[1] != 2 or x.shape[2] != self.frame_len:
            raise InputShapeError(
                f"expected input of shape (batch, 2, {self.frame_len}), got {tuple(x.shape)}"
            )
        return self.head(self.features(x))

    def extract_features(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x)


def _mlp_small(act, frame_len: int) -> tuple[nn.Module, int]:
    feat = nn.Sequential(
        nn.Flatten(),
        nn.Linear(2 * frame_len, 96),
        act(),
        nn.Linear(96, FEATURE_DIM),
        act(),
    )
    return feat, FEATURE_DIM


def _cnn_small(act, frame_len: int) -> tuple[nn.Module, int]:
    reduced = frame_len // 4
    feat = nn.Sequential(
        nn.Conv1d(2, 16, kernel_size=5, padding=2),
        act(),
        nn.MaxPool1d(2),
        nn.Conv1d(16, 32, kernel_size=5, padding=2),
        act(),
        nn.MaxPool1d(2),
        nn.Flatten(),
        nn.Linear(32 * reduced, FEATURE_DIM),
        act(),
    )
    return feat, FEATURE_DIM


def _cnn_wide(act, frame_len: int) -> tuple[nn.Module, int]:
    feat = nn.Sequential(
        nn.Conv1d(2, 48, kernel_size=7, padding=3, stride=2),
        act(),
        nn.Conv1d(48, 96, kernel_size=7, padding=3, stride=2),
        act(),
        _GlobalAvgPool1d(),
        nn.Linear(96, FEATURE_DIM),
        act(),
    )
    return feat, FEATURE_DIM


def _cnn_deep(act, frame_len: int) -> tuple[nn.Module, int]:
    reduced = frame_len // 16
    chans = [(2, 16), (16, 24), (24, 32), (32, 32)]
    layers: list[nn.Module] = []
    for cin, cout in chans:
        layers += [nn.Conv1d(cin, cout, kernel_size=3, padding=1), act(), nn.MaxPool1d(2)]
    layers += [nn.Flatten(), nn.Linear(32 * reduced, FEATURE_DIM), act()]
    return nn.Sequential(*layers), FEATURE_DIM


_BUILDERS = {
    "mlp_small": _mlp_small,
    "cnn_small": _cnn_small,
    "cnn_wide": _cnn_wide,
    "cnn_deep": _cnn_deep,
}


def init_parameters(module: nn.Module, seed: int) -> None:
    """Fan-in-scaled uniform weights, zero biases, seeded deterministically."""
    gen = torch.Generator().manual_seed(int(seed))
    for p_name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
        with torch.no_grad():
            if p.ndim >= 2:
                fan_in = math.prod(p.shape[1:])
                bound = 1.0 / math.sqrt(fan_in)
                vals = torch.rand(p.shape, generator=gen, dtype=torch.float32)
                p.copy_(((vals * 2.0 - 1.0) * bound).to(p.dtype))
            else:
                p.zero_()


def build_model(
    desc: ArchDescriptor,
    frame_len: int = 128,
    num_classes: int = NUM_CLASSES,
    seed: int = 0,
    dtype: torch.dtype = torch.float32,
) -> AmcModel:
    """Construct and initialize one classifier from its descriptor."""
    if frame_len % 16 != 0:
        raise ConfigurationError(f"frame_len must be a multiple of 16, got {frame_len}")
    act = _ACTIVATIONS[desc.activation]
    features, feat_dim = _BUILDERS[desc.family](act, frame_len)
    model = AmcModel(desc, features, feat_dim, frame_len, num_classes)
    init_parameters(model, seed)
    model = model.to(dtype)
    n_params = sum(p.numel() for p in model.parameters())
    if n_params > MAX_SUBSTITUTE_PARAMS:
        raise ConfigurationError(
            f"{desc.family} has {n_params} parameters, above the {MAX_SUBSTITUTE_PARAMS} cap"
        )
    return model


class GradientReversalFn(torch.autograd.Function):
    """Identity on the forward pass, -lambda-scaled gradient on the backward."""

    @staticmethod
    def forward(ctx, x, lam):
        ctx.lam = lam
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.neg() * ctx.lam, None


class GradientReversal(nn.Module):
    def __init__(self, lam: float = 1.0):
        super().__init__()
        if lam < 0:
            raise ConfigurationError(f"reversal weight must be >= 0, got {lam}")
        self.lam = float(lam)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return GradientReversalFn.apply(x, self.lam)


class DomainDiscriminator(nn.Module):
    """Small MLP mapping features to a single source-vs-target logit."""

    def __init__(self, feature_dim: int = FEATURE_DIM, hidden: int = 64, seed: int = 0):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(feature_dim, hidden),
            nn.ReLU(),
            nn.Linear(hidden, 1),
        )
        init_parameters(self, seed)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return self.net(feats).squeeze(-1)


def substitute_zoo(count: int, base_seed: int = 0) -> list[tuple[ArchDescriptor, int]]:
    """The (descriptor, init seed) list for a substitute pool of given size.

    Families are cycled so any count covers the zoo as evenly as possible;
    seeds are distinct so same-family substitutes are different instances.
    """
    if count < 1:
        raise ConfigurationError(f"substitute count must be >= 1, got {count}")
    out = []
    for i in range(count):
        fam = ARCH_FAMILIES[i % len(ARCH_FAMILIES)]
        out.append((ArchDescriptor(family=fam), base_seed * 10_000 + 101 * i + 17))
    return out
