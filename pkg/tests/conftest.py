"""Shared fixtures: precision switch, tiny model configs, tiny benchmarks."""

import numpy as np
import pytest

from app.config import reset_settings
from app.core.tensor import clear_tape, set_precision
from app.datasets.splits import make_benchmark
from app.models.architecture import BackboneConfig, HeadConfig, ModelManifest, TransformerConfig
from app.models.training import AdaptConfig, LossConfig, SplitMode


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run multi-seed end-to-end tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def clean_engine():
    """Every test starts with float32, an empty tape and fresh settings."""
    set_precision("float32")
    clear_tape()
    reset_settings()
    yield
    set_precision("float32")
    clear_tape()
    reset_settings()


@pytest.fixture
def float64():
    set_precision("float64")
    yield
    set_precision("float32")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_backbone():
    # 8x8 input, two blocks -> 2x2 grid, u = 4
    return BackboneConfig(in_channels=3, conv_channels=[3, 4], image_side=8)


@pytest.fixture
def tiny_transformer():
    return TransformerConfig(num_layers=1, num_heads=2, embed_dim=8, mlp_hidden=8)


@pytest.fixture
def tiny_manifest(tiny_backbone, tiny_transformer):
    return ModelManifest(backbone=tiny_backbone, transformer=tiny_transformer,
                         head=HeadConfig(bottleneck_dim=6, num_classes=2), use_transformer=True)


@pytest.fixture
def small_adapt_config():
    return AdaptConfig(
        batch_size=16,
        source_epochs=2,
        target_epochs=2,
        bottleneck_dim=8,
        backbone=BackboneConfig(conv_channels=[4, 8], image_side=16),
        transformer=TransformerConfig(num_layers=1, num_heads=2, embed_dim=8),
        loss=LossConfig(),
        seed=0,
    )


@pytest.fixture(scope="session")
def small_benchmark():
    return make_benchmark(SplitMode.CLOSED, 3, seed=7, per_domain=48, eval_per_domain=24, image_side=16)


@pytest.fixture(scope="session")
def open_benchmark():
    return make_benchmark(SplitMode.OPEN, 4, seed=3, per_domain=40, eval_per_domain=20, image_side=16)
