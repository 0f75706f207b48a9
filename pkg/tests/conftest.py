import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from perfhom.geometry import (Cavity, DomainSpec, Perforation, generate_perforation,
                              unit_disk_shape)


@pytest.fixture(scope="session")
def small_perforation():
    """A handful of disk cavities in the unit square, eps=0.1, eta=0.5."""
    return generate_perforation(DomainSpec.unit_square(), 0.1, 0.5,
                                (0.5, 1.0, 1.5), "fill", seed=7)


@pytest.fixture(scope="session")
def annulus_perforation():
    """Single cavity of radius 0.2 centered in the unit disk."""
    return Perforation(DomainSpec.disk(), 0.2, 1.0, (0.5, 1.0, 1.2),
                       (Cavity((0.0, 0.0), unit_disk_shape()),))


def h1_norm(mesh, values):
    from perfhom.solver import p1_mass, p1_stiffness
    values = np.asarray(values, dtype=complex)
    gram = p1_mass(mesh) + p1_stiffness(mesh)
    return float(np.sqrt(max(0.0, np.real(np.vdot(values, gram @ values)))))
