"""Volume potential on a flat torus and the signature of its Hessian."""
import numpy as np

from g2moduli import PHI0
from g2moduli.exterior7 import Form
from g2moduli.torus_moduli import Lattice, TorusModuliPoint, dF, dF_finite_difference, hessian_F

pt = TorusModuliPoint(Lattice.unit(), PHI0)
eta = Form(3, np.random.default_rng(3).standard_normal(35))
print("dF exact", dF(pt, eta), "finite difference", dF_finite_difference(pt, eta))

report = hessian_F(pt)
print("signature", report.signature)
print("angle between negative space and type-7 span", report.negative_subspace_angle)
x = PHI0.coefficients
print("D2F(phi0, phi0) =", x @ report.matrix @ x)
