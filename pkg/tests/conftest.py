import math

import numpy as np
import pytest

from wavepacket.fields import ComplexField, Grid1D, gaussian_packet, lp_norm
from wavepacket.potentials import builtin


@pytest.fixture(scope="session")
def grid2048():
    return Grid1D(2048, -40.0, 80.0 / 2048)


@pytest.fixture(scope="session")
def grid4096():
    return Grid1D(4096, -40.0, 80.0 / 4096)


@pytest.fixture(scope="session")
def all_potentials():
    return [
        builtin("zero"),
        builtin("linear", E=1.5),
        builtin("harmonic", omega=1.0),
        builtin("soft_branch"),
        builtin("breathing", omega0=1.0, a=0.3),
    ]


def random_schwartz_field(grid, rng, terms=4):
    """Random normalized superposition of modulated Gaussian packets."""
    vals = np.zeros(grid.n, dtype=np.complex128)
    for _ in range(terms):
        amp = rng.normal() + 1j * rng.normal()
        vals += amp * gaussian_packet(
            grid,
            x0=float(rng.uniform(-4, 4)),
            sigma=float(rng.uniform(0.7, 1.6)),
            xi0=float(rng.uniform(-4, 4)),
        ).values
    field = ComplexField(grid, vals)
    return field.with_values(field.values / lp_norm(field, 2))


def l2_distance(f, g):
    return math.sqrt(float(np.sum(np.abs(f.values - g.values) ** 2) * f.grid.dx))
