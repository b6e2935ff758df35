"""Exact energy and length bounds for a degenerating Kummer family."""
import json

from g2moduli import cli
from g2moduli.kummer_cert import KummerModel, cross_check_with_path_geometry, energy_upper_bound

payload = json.loads(cli.bundled_path("kummer-typeI-unit").read_text())["payload"]
model = KummerModel.from_json(payload)
cert = energy_upper_bound(model)
print("\n".join(cert.audit_lines()))

check = cross_check_with_path_geometry(model, {"E1": lambda t: 1.0})
print("cross-check dominated:", check.dominated, "largest termwise value", max(check.termwise))
