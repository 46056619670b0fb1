import numpy as np
import pytest

from stickyflow import ParticleInit, simulate

THIRD = 1.0 / 3.0


@pytest.fixture(scope="session")
def chase3_init():
    """Three equal masses; the outer right particle outruns the slow middle
    one, so the left particle catches the middle at (t=1, x=1)."""
    return ParticleInit([THIRD, THIRD, THIRD], [0.0, 1.0, 2.0], [1.0, 0.0, 1.0])


@pytest.fixture(scope="session")
def chase3(chase3_init):
    return simulate(chase3_init, 3.0)


@pytest.fixture(scope="session")
def collapse3_init():
    """Symmetric triple closing on the origin; everything merges at (1, 0)."""
    return ParticleInit([THIRD, THIRD, THIRD], [-1.0, 0.0, 1.0], [1.0, 0.0, -1.0])


@pytest.fixture(scope="session")
def collapse3(collapse3_init):
    return simulate(collapse3_init, 2.0)


@pytest.fixture(scope="session")
def single_init():
    return ParticleInit([1.0], [0.0], [0.7])


def positions_at(traj, t):
    return np.array([traj.position_at(i, t) for i in range(traj.n_particles)])
