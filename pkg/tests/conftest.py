"""Shared fixtures: meshes are built once per session."""

import numpy as np
import pytest

from spectralab import (build_flat_torus, build_icosphere,
                        hexagonal_lattice, square_lattice)


@pytest.fixture(scope="session")
def ico1():
    return build_icosphere(1)


@pytest.fixture(scope="session")
def ico2():
    return build_icosphere(2)


@pytest.fixture(scope="session")
def ico3():
    return build_icosphere(3)


@pytest.fixture(scope="session")
def ico4():
    return build_icosphere(4)


@pytest.fixture(scope="session")
def torus16():
    return build_flat_torus(square_lattice(), 16)


@pytest.fixture(scope="session")
def torus24():
    return build_flat_torus(square_lattice(), 24)


@pytest.fixture(scope="session")
def torus32():
    return build_flat_torus(square_lattice(), 32)


@pytest.fixture(scope="session")
def hex32():
    return build_flat_torus(hexagonal_lattice(), 32)


def rel_err(value, target):
    return abs(value - target) / abs(target)


def spectra_rel_errors(values, targets):
    """Slot-by-slot errors, scaling zero slots by the window maximum."""
    values = np.asarray(values, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = min(len(values), len(targets))
    scale = max(float(np.max(np.abs(targets[:n]))), 1e-300)
    return np.array([abs(values[i] - targets[i])
                     / max(abs(targets[i]), scale) for i in range(n)])
