import numpy as np
import pytest

import helmsweep as hs
from helmsweep.mesh import PML, SPONGE, AbsorbingLayerSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pml(width=4, strength=20.0):
    return AbsorbingLayerSpec(PML, width, strength)


def sponge(width=36, strength=1.0):
    return AbsorbingLayerSpec(SPONGE, width, strength)


def constant_problem(dim=2, interior=32, layer=None, ppw=10.0, velocity=1.0):
    """Unit-box problem at the given points-per-wavelength."""
    h = 1.0 / interior
    mesh = hs.build_mesh(dim, interior, h, layer)
    freq = interior / ppw
    model = hs.WaveModel.constant(mesh, 2 * np.pi * freq, velocity)
    return mesh, model


def wedge_velocity_on(mesh):
    from helmsweep.cli import wedge_velocity
    return wedge_velocity(mesh.unknowns)
