"""Shared fixtures: the 4-asset worked example, base universes, random SPD draws."""

from __future__ import annotations

import numpy as np
import pytest

from crisp_alloc import (
    CovarianceMatrix,
    RegimeSpec,
    Signal,
    build_tree,
    gen_regime,
    to_correlation,
)


@pytest.fixture(scope="session")
def four_asset():
    """Two sectors of two assets: vols (0.20, 0.25, 0.30, 0.15), within-sector
    correlation 0.80, cross-sector 0.20, and a mixed-sign signal."""
    vol = np.array([0.20, 0.25, 0.30, 0.15])
    corr = np.array(
        [
            [1.0, 0.8, 0.2, 0.2],
            [0.8, 1.0, 0.2, 0.2],
            [0.2, 0.2, 1.0, 0.8],
            [0.2, 0.2, 0.8, 1.0],
        ]
    )
    sigma = CovarianceMatrix(corr * np.outer(vol, vol))
    mu = Signal(np.array([0.03, -0.01, 0.02, -0.04]))
    tree = build_tree(to_correlation(sigma), "ward")
    return sigma, mu, tree


@pytest.fixture(scope="session")
def base100():
    return gen_regime(RegimeSpec("block_sector", n=100, seed=42))


@pytest.fixture(scope="session")
def base200():
    return gen_regime(RegimeSpec("block_sector", n=200, seed=42))


def random_spd(n: int, seed: int, kappa_max: float = 25.0) -> CovarianceMatrix:
    """Well-conditioned random SPD covariance with dispersed volatilities."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    eigs = np.exp(rng.uniform(0.0, np.log(kappa_max), n))
    m = (q * eigs) @ q.T
    vols = rng.uniform(0.1, 0.5, n)
    d = np.sqrt(np.diag(m))
    m = m / np.outer(d, d) * np.outer(vols, vols)
    return CovarianceMatrix(0.5 * (m + m.T))


@pytest.fixture
def rand_spd():
    return random_spd


# one line per acceptance criterion, echoed after the run (see test_acceptance)
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
