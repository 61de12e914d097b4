import numpy as np
import pytest

from emgtoken import PipelineConfig


def make_blobs(n_per, centers, scale=1.0, seed=0):
    """Gaussian blobs around ``centers``; returns (X, true_labels)."""
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    X = np.vstack([c + scale * rng.standard_normal((n_per, centers.shape[1])) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per)
    return X, y


def separated_centers(k, dim=10, spacing=25.0, seed=0):
    """``k`` centers differing on every axis, pairwise at least ``spacing`` apart.

    Separation on every axis survives per-dimension standardization.
    """
    rng = np.random.default_rng(seed + 1000)
    while True:
        c = rng.uniform(-spacing, spacing, size=(k, dim))
        gaps = np.abs(c[:, None, :] - c[None, :, :]).min(axis=2)
        if gaps[~np.eye(k, dtype=bool)].min() >= spacing / 10 if k > 1 else True:
            return c


@pytest.fixture
def cfg():
    return PipelineConfig()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
