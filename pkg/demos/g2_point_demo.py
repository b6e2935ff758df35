"""Metric, volume and dual 4-form of a positive 3-form, and how they scale."""
import numpy as np

from g2moduli.g2_point import PHI0, g2_point, random_positive_form, theta, type_decompose
from g2moduli.exterior7 import Form, top_coefficient, wedge

at = g2_point(PHI0)
print("reference form: density", at.density, "metric is identity:", np.allclose(at.metric, np.eye(7)))

rng = np.random.default_rng(1)
phi = random_positive_form(rng, 0.3)
at = g2_point(phi)
print("perturbed form: density", at.density)
print("phi ^ Theta / Vol =", top_coefficient(wedge(phi, at.theta)) / at.density)

# doubling phi scales Theta by 2^(4/3)
ratio = theta(2 * phi).coefficients / at.theta.coefficients
print("Theta(2 phi) / Theta(phi) ~", np.median(ratio), "vs", 2 ** (4 / 3))

split = type_decompose(Form(3, rng.standard_normal(35)), at)
print("type pieces norms (1, 7, 27):", split.pi1.norm(), split.pi7.norm(), split.pi27.norm())
