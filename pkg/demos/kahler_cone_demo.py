"""Finite versus infinite distance to the boundary of a Kaehler cone."""
import math

from g2moduli.kahler_cone import IntersectionForm, length_series

Q = IntersectionForm.hyperbolic()
taus = [2.0**-k for k in (0, 5, 10, 20)]
# the finite class can be reached, so tau = 0 is included
cases = (([1, 1], [1, 1], taus + [0.0]), ([1, 0], [0, 1], taus))
for alpha, omega, ts in cases:
    s = length_series(alpha, omega, Q, ts)
    print(f"alpha={alpha}: {s.classification} distance, lengths", [round(x, 6) for x in s.lengths])
print("sqrt(2) log 2 =", math.sqrt(2) * math.log(2))
