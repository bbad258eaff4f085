"""Experiment configuration: YAML schema, validation, canonical digest.

Every output artifact is stamped with the config digest (sha256 over the
canonical JSON form), which is also what the resume path compares before
reusing prior results.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from pathlib import Path

import yaml

from .attacks import ATTACK_METHODS, AttackSpec, eps_from_psr
from .errors import ConfigurationError
from .models import ARCH_FAMILIES
from .offline import META_ALGOS
from .sigdata import ChannelProfile

SCHEMA_VERSION = 1


def _from_mapping(cls, data: dict, where: str):
    """Build a dataclass from a mapping, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where} must be a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys under {where}: {sorted(unknown)}")
    return cls(**data)


@dataclasses.dataclass
class DomainSection:
    snr_grid: list = dataclasses.field(default_factory=lambda: [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0])
    fading: str = "none"
    rician_k: float = 4.0
    tap_count: int = 1
    max_cfo: float = 0.0
    max_phase: float = 0.0
    per_class: int = 300
    test_per_class: int = 150

    def __post_init__(self):
        if self.per_class < 1 or self.test_per_class < 1:
            raise ConfigurationError("per_class and test_per_class must be >= 1")
        # profile construction validates the channel fields
        self.profile()

    def profile(self) -> ChannelProfile:
        return ChannelProfile(
            snr_grid=tuple(float(s) for s in self.snr_grid),
            fading=self.fading,
            rician_k=self.rician_k,
            tap_count=self.tap_count,
            max_cfo=self.max_cfo,
            max_phase=self.max_phase,
        )


@dataclasses.dataclass
class DatasetSection:
    frame_len: int = 128
    sps: int = 4
    source: DomainSection = dataclasses.field(default_factory=DomainSection)
    target: DomainSection = dataclasses.field(
        default_factory=lambda: DomainSection(
            fading="rician", rician_k=4.0, tap_count=3,
            max_cfo=0.002, max_phase=math.pi, test_per_class=300,
        )
    )

    def __post_init__(self):
        if isinstance(self.source, dict):
            self.source = _from_mapping(DomainSection, self.source, "dataset.source")
        if isinstance(self.target, dict):
            self.target = _from_mapping(DomainSection, self.target, "dataset.target")
        if self.frame_len % 16 != 0 or self.frame_len < 16:
            raise ConfigurationError(f"frame_len must be a positive multiple of 16, got {self.frame_len}")
        if self.sps < 1 or self.frame_len % self.sps != 0:
            raise ConfigurationError(f"sps must divide frame_len, got sps={self.sps}")


@dataclasses.dataclass
class AttackSection:
    psr_db: float = -10.0
    methods: list = dataclasses.field(default_factory=lambda: list(ATTACK_METHODS))
    alpha_fraction: float = 0.25
    pgd_steps: int = 10
    mim_steps: int = 10
    mim_mu: float = 1.0
    cw_steps: int = 30
    cw_c: float = 1.0
    cw_binary_search_steps: int = 3
    pca_space: str = "gradient"

    def __post_init__(self):
        bad = [m for m in self.methods if m not in ATTACK_METHODS]
        if bad:
            raise ConfigurationError(f"unknown attack methods {bad}, expected among {ATTACK_METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigurationError(f"attack methods list has duplicates: {self.methods}")
        if self.psr_db > 0:
            raise ConfigurationError(f"psr_db should be non-positive, got {self.psr_db}")
        if not (0 < self.alpha_fraction <= 1):
            raise ConfigurationError(f"alpha_fraction must lie in (0, 1], got {self.alpha_fraction}")

    def specs(self, frame_len: int) -> list[AttackSpec]:
        eps = eps_from_psr(self.psr_db, frame_len)
        out = []
        for m in self.methods:
            if m == "fgsm":
                out.append(AttackSpec(method="fgsm", epsilon=eps, steps=1))
            elif m == "pgd":
                out.append(AttackSpec(
                    method="pgd", epsilon=eps, steps=self.pgd_steps,
                    alpha=eps * self.alpha_fraction,
                ))
            elif m == "mim":
                out.append(AttackSpec(
                    method="mim", epsilon=eps, steps=self.mim_steps,
                    alpha=eps * self.alpha_fraction, mu=self.mim_mu,
                ))
            elif m == "cw":
                out.append(AttackSpec(
                    method="cw", epsilon=eps, steps=self.cw_steps, c=self.cw_c,
                    binary_search_steps=self.cw_binary_search_steps,
                ))
            else:
                out.append(AttackSpec(method="pca", epsilon=eps, pca_space=self.pca_space))
        return out


@dataclasses.dataclass
class SubstituteSection:
    count: int = 11
    epochs: int = 18
    lr: float = 1e-3
    batch_size: int = 64

    def __post_init__(self):
        if self.count < 1:
            raise ConfigurationError(f"substitute count must be >= 1, got {self.count}")
        if self.epochs < 1 or self.lr <= 0 or self.batch_size < 1:
            raise ConfigurationError("substitute epochs/lr/batch_size out of range")


@dataclasses.dataclass
class TaskSection:
    holdout: int = 5
    balanced: bool = True
    per_task_frames: int = 700

    def __post_init__(self):
        if self.holdout < 1:
            raise ConfigurationError(f"holdout must be >= 1, got {self.holdout}")
        if self.per_task_frames < 10:
            raise ConfigurationError(f"per_task_frames must be >= 10, got {self.per_task_frames}")


@dataclasses.dataclass
class OfflineSection:
    arch: str = "cnn_small"
    epochs: int = 20
    batch_size: int = 64
    lr: float = 1e-3
    mix_weight: float = 0.5
    at_steps: int = 7
    meta_algo: str = "fomaml"
    inner_lr: float = 0.01
    outer_lr: float = 1e-3
    inner_steps: int = 5
    outer_iters: int = 600
    support_fraction: float = 0.7
    inner_batch: int = 128

    def __post_init__(self):
        if self.arch not in ARCH_FAMILIES:
            raise ConfigurationError(f"offline.arch must be one of {ARCH_FAMILIES}, got {self.arch!r}")
        if self.meta_algo not in META_ALGOS:
            raise ConfigurationError(f"offline.meta_algo must be one of {META_ALGOS}")


@dataclasses.dataclass
class OnlineSection:
    shots: list = dataclasses.field(default_factory=lambda: [5, 10])
    attack_adaptation_data: bool = True
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

    def __post_init__(self):
        if not self.shots or any(int(s) < 1 for s in self.shots):
            raise ConfigurationError(f"online.shots must be a non-empty list of positive ints, got {self.shots}")
        self.shots = sorted(int(s) for s in set(self.shots))


@dataclasses.dataclass
class EvaluationSection:
    seeds: list = dataclasses.field(default_factory=lambda: [0, 1, 2, 3, 4])
    eval_attack_index: int = 0
    headline_min_snr: float | None = 10.0

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("evaluation.seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError(f"evaluation.seeds has duplicates: {self.seeds}")
        self.seeds = [int(s) for s in self.seeds]
        if self.eval_attack_index < 0:
            raise ConfigurationError("evaluation.eval_attack_index must be >= 0")
        if self.headline_min_snr is not None:
            self.headline_min_snr = float(self.headline_min_snr)


@dataclasses.dataclass
class EfficiencySection:
    shots_grid: list = dataclasses.field(default_factory=lambda: [1, 2, 3, 5, 8, 12, 18, 25])
    online_strategies: list = dataclasses.field(default_factory=lambda: ["finetune", "dann"])
    threshold: float | None = None

    def __post_init__(self):
        grid = [int(s) for s in self.shots_grid]
        if not grid or any(s < 1 for s in grid) or sorted(set(grid)) != grid:
            raise ConfigurationError(
                f"efficiency.shots_grid must be strictly increasing positive ints, got {self.shots_grid}"
            )
        self.shots_grid = grid
        bad = [s for s in self.online_strategies if s not in ("finetune", "dann")]
        if bad:
            raise ConfigurationError(f"efficiency.online_strategies entries must be finetune/dann, got {bad}")

    @property
    def cap(self) -> int:
        return self.shots_grid[-1]


@dataclasses.dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    dataset: DatasetSection = dataclasses.field(default_factory=DatasetSection)
    attacks: AttackSection = dataclasses.field(default_factory=AttackSection)
    substitutes: SubstituteSection = dataclasses.field(default_factory=SubstituteSection)
    tasks: TaskSection = dataclasses.field(default_factory=TaskSection)
    offline: OfflineSection = dataclasses.field(default_factory=OfflineSection)
    online: OnlineSection = dataclasses.field(default_factory=OnlineSection)
    evaluation: EvaluationSection = dataclasses.field(default_factory=EvaluationSection)
    efficiency: EfficiencySection = dataclasses.field(default_factory=EfficiencySection)

    _SECTIONS = {
        "dataset": DatasetSection,
        "attacks": AttackSection,
        "substitutes": SubstituteSection,
        "tasks": TaskSection,
        "offline": OfflineSection,
        "online": OnlineSection,
        "evaluation": EvaluationSection,
        "efficiency": EfficiencySection,
    }

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported schema_version {self.schema_version}, this build reads {SCHEMA_VERSION}"
            )
        for name, cls in self._SECTIONS.items():
            val = getattr(self, name)
            if isinstance(val, dict):
                setattr(self, name, _from_mapping(cls, val, name))
        n_pairs = len(self.attacks.methods) * self.substitutes.count
        if self.tasks.holdout >= n_pairs:
            raise ConfigurationError(
                f"tasks.holdout={self.tasks.holdout} must be below the pair count {n_pairs}"
            )
        max_shots = max(max(self.online.shots), self.efficiency.cap)
        per_class = self.dataset.target.per_class
        if per_class - max_shots <= 0 or 7 * max_shots > 0.1 * 7 * (per_class - max_shots):
            raise ConfigurationError(
                f"max shots {max_shots} violates the pilot<=10%-of-unlabeled bound for "
                f"target per_class {per_class}; need shots <= per_class/11"
            )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _from_mapping(cls, data, "config root")

    def max_shots(self) -> int:
        return max(max(self.online.shots), self.efficiency.cap)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Load a YAML experiment config; None gives the built-in defaults."""
    if path is None:
        return ExperimentConfig()
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        return ExperimentConfig()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file must hold a mapping, got {type(raw).__name__}")
    if "schema_version" not in raw:
        raise ConfigurationError("config file is missing schema_version")
    return ExperimentConfig.from_dict(raw)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True))
