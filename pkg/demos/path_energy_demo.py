"""Energy and length of paths, and the boundary-term identity for the energy."""
import math

from g2moduli import PHI0
from g2moduli.exterior7 import Form
from g2moduli.path_geometry import affine_path, cauchy_schwarz_check, exponential_path, path_report, power_path

ray = path_report(exponential_path(PHI0, 0.0, 1.0), 0.0, 1.0)
print("scaling ray: energy", ray.energy_direct, "length", ray.length, "sqrt(7) =", math.sqrt(7))

line = affine_path(PHI0, 0.5 * Form.basis((1, 2, 3)), 0.0, 1.0)
rep = path_report(line, 0.0, 1.0)
print("affine path: direct", rep.energy_direct, "boundary terms", rep.energy_prop21, "integral term", rep.integral_term)
print("Cauchy-Schwarz holds:", cauchy_schwarz_check(rep))

for tau in (0.5, 0.1, 0.01):
    r = path_report(power_path(PHI0, 3.0, tau, 1.0), tau, 1.0, "l2-pairing")
    print(f"t^3 phi0 on [{tau}, 1]: L2 energy {r.energy_direct:.6g}")
