"""Flux of the dual 4-form through flat 4-cycles never exceeds their volume."""
import itertools

import numpy as np

from g2moduli import PHI0
from g2moduli.path_geometry import FlatCycle4, cycle_flux_and_volume
from g2moduli.torus_moduli import Lattice, TorusModuliPoint

at = TorusModuliPoint(Lattice.unit(), PHI0)
for idx in itertools.combinations(range(7), 4):
    c = np.zeros((4, 7), dtype=int)
    c[range(4), idx] = 1
    flux, vol = cycle_flux_and_volume(FlatCycle4(c), at)
    if abs(flux) > 1e-12:
        print("plane", [i + 1 for i in idx], "flux", round(flux, 12), "volume", vol)
