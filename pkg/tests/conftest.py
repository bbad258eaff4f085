"""Shared fixtures: small synthetic datasets and lightly trained models.

Everything here is deliberately tiny — each fixture has to build in seconds —
but sized so that trained models are meaningfully above chance and attack
transfer is visible. Session scope keeps the cost paid once.
"""

import numpy as np
import pytest
import torch

from robustamc.config import ExperimentConfig
from robustamc.grid import efficiency_probe, run_grid
from robustamc.models import ArchDescriptor, build_model
from robustamc.sigdata import ChannelProfile, build_domain
from robustamc.sigdata.dataset import DatasetRole
from robustamc.tasks import train_substitute

torch.set_num_threads(1)

SNR_GRID = (0.0, 10.0, 20.0)
FRAME_LEN = 128

# A deliberately tiny but structurally complete experiment: every pipeline
# stage runs in seconds, so grid/report/CLI tests can share one real run.
MINI_CONFIG = {
    "schema_version": 1,
    "dataset": {
        "frame_len": 128,
        "source": {"snr_grid": [0.0, 10.0], "per_class": 24, "test_per_class": 8},
        "target": {
            "snr_grid": [0.0, 10.0], "fading": "rician", "rician_k": 4.0,
            "tap_count": 3, "max_cfo": 0.002, "max_phase": 3.141592653589793,
            "per_class": 24, "test_per_class": 8,
        },
    },
    "attacks": {"methods": ["fgsm", "pgd"], "pgd_steps": 4},
    "substitutes": {"count": 2, "epochs": 2},
    "tasks": {"holdout": 1, "per_task_frames": 40},
    "offline": {
        "epochs": 2, "outer_iters": 8, "inner_steps": 1, "inner_batch": 32,
        "at_steps": 2,
    },
    "online": {"shots": [1, 2], "ft_steps": 12, "dann_epochs": 2},
    "evaluation": {"seeds": [0, 1]},
    "efficiency": {"shots_grid": [1, 2]},
}


@pytest.fixture(scope="session")
def mini_cfg():
    return ExperimentConfig.from_dict(MINI_CONFIG)


@pytest.fixture(scope="session")
def mini_grid(mini_cfg, tmp_path_factory):
    """(cfg, out_dir, grid_rows, efficiency_rows) for the tiny experiment."""
    out = tmp_path_factory.mktemp("minigrid")
    rows = run_grid(mini_cfg, out, resume=True)
    eff = efficiency_probe(mini_cfg, out, resume=True)
    return mini_cfg, out, rows, eff


@pytest.fixture(scope="session")
def source_profile():
    return ChannelProfile(snr_grid=SNR_GRID, fading="none")


@pytest.fixture(scope="session")
def target_profile():
    return ChannelProfile(
        snr_grid=SNR_GRID,
        fading="rician",
        rician_k=4.0,
        tap_count=3,
        max_cfo=0.01,
        max_phase=np.pi,
    )


@pytest.fixture(scope="session")
def source_roles(source_profile):
    return build_domain(
        source_profile, per_class=60, shots=0, seed=4001, domain="source", test_per_class=40
    )


@pytest.fixture(scope="session")
def target_roles(target_profile):
    return build_domain(
        target_profile, per_class=60, shots=5, seed=4002, domain="target", test_per_class=40
    )


@pytest.fixture(scope="session")
def source_train(source_roles):
    return source_roles[DatasetRole.SOURCE_TRAIN]


@pytest.fixture(scope="session")
def source_test(source_roles):
    return source_roles[DatasetRole.SOURCE_TEST]


@pytest.fixture(scope="session")
def trained_sub(source_train, source_test):
    """A substitute trained well above chance on the small source set."""
    return train_substitute(
        ArchDescriptor("cnn_small"),
        source_train.x(),
        source_train.y(),
        seed=555,
        domain="source",
        sub_id="fixture_sub",
        epochs=12,
        eval_x=source_test.x(),
        eval_y=source_test.y(),
        eval_snr=source_test.snrs(),
    )


@pytest.fixture()
def fresh_model():
    return build_model(ArchDescriptor("cnn_small"), FRAME_LEN, seed=99)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def random_frames(n, frame_len=FRAME_LEN, seed=0, unit_power=True):
    """Random complex-baseband-like float32 frames shaped (n, 2, frame_len)."""
    g = np.random.default_rng(seed)
    x = g.standard_normal((n, 2, frame_len)).astype(np.float32)
    if unit_power:
        power = np.mean(x[:, 0] ** 2 + x[:, 1] ** 2, axis=1, keepdims=True)
        x = x / np.sqrt(power[:, None, :])
    return torch.from_numpy(x.astype(np.float32))
