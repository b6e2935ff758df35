"""Numerical geometry of G2 moduli: positive 3-forms, the Hessian metric of
-3 log Vol on flat 7-tori, path energies, Kummer-type energy certificates and
a toy Kähler-cone analogue."""

from .exterior7 import Form, InvalidMetricError, Metric7, hodge_star, wedge
from .g2_point import PHI0, THETA0, G2PointData, NotG2FormError, g2_point, is_positive
from .kahler_cone import IntersectionForm, classify_boundary, segment_energy, segment_length
from .kummer_cert import Certificate, KummerModel, energy_upper_bound
from .path_geometry import ModuliPath, PathReport, path_report
from .torus_moduli import Lattice, TorusModuliPoint, dF, hessian_F, potential_F

__version__ = "0.1.0"

__all__ = [
    "PHI0",
    "THETA0",
    "Certificate",
    "Form",
    "G2PointData",
    "IntersectionForm",
    "InvalidMetricError",
    "KummerModel",
    "Lattice",
    "Metric7",
    "ModuliPath",
    "NotG2FormError",
    "PathReport",
    "TorusModuliPoint",
    "classify_boundary",
    "dF",
    "energy_upper_bound",
    "g2_point",
    "hessian_F",
    "hodge_star",
    "is_positive",
    "path_report",
    "potential_F",
    "segment_energy",
    "segment_length",
    "wedge",
]
