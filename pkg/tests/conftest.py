import math

import numpy as np
import pytest

from torsionlab import fem
from torsionlab.comparison import radial_interpolant
from torsionlab.geometry import (
    Disk,
    Ellipse,
    Rectangle,
    build_mesh,
    rescaled_to_area,
)

# Heavier artifacts are session-scoped: meshing and solving dominate the
# suite's runtime and every module probes the same canonical fields.


@pytest.fixture(scope="session")
def disk_mesh_coarse():
    return build_mesh(Disk(1.0), 0.1)


@pytest.fixture(scope="session")
def disk_mesh():
    return build_mesh(Disk(1.0), 0.05)


@pytest.fixture(scope="session")
def disk_field(disk_mesh):
    return fem.solve_torsion(disk_mesh, 1.0)


@pytest.fixture(scope="session")
def radial_field(disk_mesh):
    return radial_interpolant(disk_mesh, 1.0)


@pytest.fixture(scope="session")
def unit_square_mesh():
    return build_mesh(Rectangle(1.0, 1.0), 0.07)


@pytest.fixture(scope="session")
def x_field(unit_square_mesh):
    return fem.ScalarField(unit_square_mesh, unit_square_mesh.vertices[:, 0].copy())


@pytest.fixture(scope="session")
def ellipse_mesh():
    return build_mesh(rescaled_to_area(Ellipse(1.5, 1.0), math.pi), 0.05)


@pytest.fixture(scope="session")
def ellipse_field(ellipse_mesh):
    return fem.solve_torsion(ellipse_mesh, 1.0)


@pytest.fixture(scope="session")
def square_mesh():
    return build_mesh(rescaled_to_area(Rectangle(1.0, 1.0), math.pi), 0.05)


@pytest.fixture(scope="session")
def square_field(square_mesh):
    return fem.solve_torsion(square_mesh, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
