"""Scenario runner: ``g2moduli run <file>`` and ``g2moduli list-examples``.

Exit codes: 0 success, 2 computation finished with a negative verdict,
1 input error (nothing written).  Settings precedence for the tunable
numbers is command-line flag, then scenario field, then library default.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import jsonschema
import numpy as np
import sympy as sp

from . import kahler_cone as kc
from . import kummer_cert as kcert
from . import path_geometry as pg
from .exterior7 import Form, top_coefficient, wedge
from .g2_point import PHI0, NotG2FormError, comass_sample, g2_point, is_positive
from .torus_moduli import FiniteDifferenceError, Lattice, TorusModuliPoint, hessian_F

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INPUT, EXIT_NEGATIVE = 0, 1, 2


class ScenarioError(ValueError):
    """Bad scenario input; reported with exit code 1."""


# ---------------------------------------------------------------- output


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if all(c not in s for c in ".en"):
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: floats with 17 significant digits, NaN/inf as null."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, sp.Basic):
        return json.dumps(str(obj))
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [inner + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def csv_text(header: Sequence[str], rows: Sequence[Sequence[float]]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_float(float(x)) if not isinstance(x, str) else x for x in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- input


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("schema.json").read_text(encoding="utf-8"))


def _field_path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return "/".join(parts) if parts else "<root>"


def validate_scenario(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = list(validator.iter_errors(doc))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        # descend into oneOf/anyOf branches to the most specific cause
        while err.context:
            err = jsonschema.exceptions.best_match(err.context)
        raise ScenarioError(f"field '{_field_path(err)}' violates rule '{err.validator}': {err.message}")


def bundled_names() -> list[str]:
    folder = resources.files(__package__).joinpath("scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    return resources.files(__package__).joinpath("scenarios", f"{name}.json")


def read_scenario(ref: str) -> tuple[str, dict]:
    path = Path(ref)
    if path.is_file():
        text, stem = path.read_text(encoding="utf-8"), path.stem
    elif ref in bundled_names():
        text, stem = bundled_path(ref).read_text(encoding="utf-8"), ref
    else:
        raise ScenarioError(f"scenario file {ref!r} not found and not a bundled example")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed JSON: {exc}") from exc
    validate_scenario(doc)
    return stem, doc


def parse_form(desc: Any) -> Form:
    if desc == "phi0":
        return PHI0
    scale = float(desc.get("scale", 1.0))
    if "coefficients" in desc:
        return scale * Form(3, np.asarray(desc["coefficients"], dtype=float))
    terms = {tuple(int(c) for c in key): float(v) for key, v in desc["terms"].items()}
    form = Form.from_terms(3, terms) + float(desc.get("plus_phi0", 0.0)) * PHI0
    return scale * form


def parse_lattice(desc: Any) -> Lattice:
    return Lattice.unit() if desc is None else Lattice(np.asarray(desc, dtype=float))


# ---------------------------------------------------------------- runners


@dataclass(frozen=True)
class Settings:
    seed: int = 0
    quad_nodes: int | None = None
    fd_step: float | None = None


@dataclass
class Outcome:
    result: dict
    negative: bool = False
    csv: str | None = None


def run_point(payload: Mapping, s: Settings) -> Outcome:
    phi = parse_form(payload["phi"])
    if not is_positive(phi):
        raise ScenarioError("field 'payload/phi' violates rule 'positive': the 3-form is not positive")
    g2 = g2_point(phi)
    identity = top_coefficient(wedge(phi, g2.theta)) / g2.density
    result = {**g2.to_json(), "phi_wedge_theta_over_volume": identity}
    trials = int(payload.get("comass_trials", 0))
    if trials:
        result["comass_sample"] = {"trials": trials, "seed": s.seed, "max_value": comass_sample(g2, trials, s.seed)}
    return Outcome(result)


def run_hessian(payload: Mapping, s: Settings) -> Outcome:
    pt = TorusModuliPoint(parse_lattice(payload.get("lattice_basis")), parse_form(payload["phi"]))
    if not is_positive(pt.phi):
        raise ScenarioError("field 'payload/phi' violates rule 'positive': the 3-form is not positive")
    report = hessian_F(pt, step=s.fd_step)
    result = {"point": pt.to_json(), **report.to_json()}
    negative = False
    expected = payload.get("expected_signature")
    if expected is not None:
        result["expected_signature"] = list(expected)
        negative = list(report.signature) != list(expected)
    return Outcome(result, negative, report.eigenvalues_csv())


def build_path(desc: Mapping, lattice: Lattice) -> pg.ModuliPath:
    lo, hi = float(desc["t_low"]), float(desc["t_high"])
    kind = desc["type"]
    if kind == "affine":
        return pg.affine_path(parse_form(desc["base"]), parse_form(desc["direction"]), lo, hi, lattice)
    if kind == "exponential":
        return pg.exponential_path(parse_form(desc["phi"]), lo, hi, float(desc.get("rate", 1.0)), lattice)
    if kind == "power":
        return pg.power_path(parse_form(desc["phi"]), float(desc["power"]), lo, hi, lattice)
    if kind == "scaling":
        return pg.power_path(parse_form(desc["phi"]), float(desc.get("power", 1.0)), lo, hi, lattice)
    return pg.polynomial_path([parse_form(c) for c in desc["coefficients"]], lo, hi, lattice)


def run_path(payload: Mapping, s: Settings) -> Outcome:
    path = build_path(payload["path"], parse_lattice(payload.get("lattice_basis")))
    tau = float(payload.get("tau", path.t_low))
    T = float(payload.get("T", path.t_high))
    form = payload.get("form", "hessian-form")
    quad = pg.QuadratureSpec() if s.quad_nodes is None else pg.QuadratureSpec(nodes_per_segment=s.quad_nodes)
    report = pg.path_report(path, tau, T, form, quad)
    result: dict = {"report": report.to_json()}
    negative = False
    if report.form_positive:
        cs = pg.cauchy_schwarz_check(report)
        result["cauchy_schwarz"] = {"length_squared": report.length**2, "duration_times_energy": (T - tau) * report.energy_direct, "holds": cs}
        negative |= not cs
    if "corollary" in payload:
        c = payload["corollary"]
        v = pg.corollary22_check(path, float(c["C"]), float(c["A_integral"]), samples=int(c.get("samples", 1024)))
        result["corollary"] = {
            "hypotheses_hold_on_samples": v.hypotheses_hold_on_samples,
            "energy_bound": v.energy_bound,
            "length_bound": v.length_bound,
            "witness_t": v.witness_t,
            "witness": v.witness,
            "samples": v.samples,
            "sample_based": v.sample_based,
        }
        negative |= not v.hypotheses_hold_on_samples
    if "flux_monitor" in payload:
        desc = payload["path"]
        if desc["type"] != "affine":
            raise ScenarioError("field 'payload/flux_monitor' violates rule 'affine': needs an affine path")
        series = pg.pd_flux_monitor(path, parse_form(desc["direction"]), payload["flux_monitor"]["t_samples"])
        result["flux_monitor"] = {
            "branch": series.branch,
            "triggered": series.triggered,
            "volume_exponent": series.volume_exponent,
            "flux_exponent": series.flux_exponent,
            "t": list(series.t),
            "flux": list(series.flux),
            "volume": list(series.volume),
        }
    n = int(payload.get("series_samples", 33))
    rows = []
    for k in range(n):
        t = tau + (T - tau) * (k + 0.5) / n
        rows.append((t, pg.speed_squared(path, t, form), pg.h_function(path, t)))
    return Outcome(result, negative, csv_text(["t", "speed_squared", "h"], rows))


def run_kummer(payload: Mapping, s: Settings) -> Outcome:
    model = kcert.KummerModel.from_json(payload)
    cert = kcert.energy_upper_bound(model)
    result = {**cert.to_json(), "audit": cert.audit_lines()}
    negative = not cert.valid
    if "cross_check" in payload and cert.valid:
        cc = payload["cross_check"]
        g = {k: (lambda t, v=float(v): v) for k, v in cc["constant_g"].items()}
        check = kcert.cross_check_with_path_geometry(model, g, taus=cc.get("taus"), nodes=s.quad_nodes or 16)
        result["cross_check"] = {
            "taus": list(check.taus),
            "energies": list(check.energies),
            "termwise": list(check.termwise),
            "energy_bound": check.energy_bound,
            "max_excess": check.max_excess,
            "dominated": check.dominated,
        }
        negative |= not check.dominated
        rows = list(zip(check.taus, check.energies, check.termwise))
        return Outcome(result, negative, csv_text(["tau", "energy", "termwise"], rows))
    return Outcome(result, negative)


def run_kahler(payload: Mapping, s: Settings) -> Outcome:
    Q = kc.IntersectionForm.from_json(payload["intersection_form"])
    alpha, omega = (np.asarray(payload[k], dtype=float) for k in ("alpha", "omega"))
    for key, vec in (("alpha", alpha), ("omega", omega)):
        if vec.size != Q.rank:
            raise ScenarioError(f"field 'payload/{key}' violates rule 'length': expected {Q.rank} entries")
    taus = payload.get("taus", [2.0**-k for k in range(0, 21)])
    series = kc.length_series(alpha, omega, Q, taus)
    result: dict = {
        "volume_alpha": kc.volume(alpha, Q),
        "classification": series.classification,
        "length_log_slope": series.log_slope,
        "taus": list(series.taus),
        "energies": list(series.energies),
        "lengths": list(series.lengths),
    }
    if payload.get("quadrature_check", True):
        residuals = []
        for tau, e in zip(series.taus, series.energies):
            q = kc.segment_energy_quadrature(alpha, omega, Q, tau)
            residuals.append(abs(q - e) / max(1.0, abs(e)))
        result["max_quadrature_residual"] = max(residuals)
    return Outcome(result, False, series.to_csv())


RUNNERS: dict[str, Callable[[Mapping, Settings], Outcome]] = {
    "point": run_point,
    "hessian": run_hessian,
    "path": run_path,
    "kummer": run_kummer,
    "kahler": run_kahler,
}


def execute(doc: Mapping, settings: Settings) -> Outcome:
    """Run a validated scenario document; domain errors become ScenarioError."""
    try:
        return RUNNERS[doc["kind"]](doc["payload"], settings)
    except ScenarioError:
        raise
    except (NotG2FormError, FiniteDifferenceError, kc.SegmentExitsCone, ValueError, np.linalg.LinAlgError) as exc:
        raise ScenarioError(f"{type(exc).__name__}: {exc}") from exc


def effective_settings(doc: Mapping, args: argparse.Namespace) -> Settings:
    file_settings = doc.get("settings", {})
    quad = args.quad_nodes if args.quad_nodes is not None else file_settings.get("quad_nodes")
    step = args.fd_step if args.fd_step is not None else file_settings.get("fd_step")
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    return Settings(seed=int(seed), quad_nodes=quad, fd_step=step)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        stem, doc = read_scenario(args.scenario)
        settings = effective_settings(doc, args)
        outcome = execute(doc, settings)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out_dir = Path(args.out) if args.out else Path.cwd()
    names = doc.get("output", {})
    status = "negative" if outcome.negative else "ok"
    document = {
        "schema_version": SCHEMA_VERSION,
        "scenario": stem,
        "kind": doc["kind"],
        "status": status,
        "settings": {"seed": settings.seed, "quad_nodes": settings.quad_nodes, "fd_step": settings.fd_step},
        "result": outcome.result,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / names.get("json", f"{stem}.json")
    json_path.write_text(dumps(document) + "\n", encoding="utf-8")
    written = [json_path]
    if outcome.csv is not None:
        csv_path = out_dir / names.get("csv", f"{stem}.csv")
        csv_path.write_text(outcome.csv, encoding="utf-8")
        written.append(csv_path)
    for line in outcome.result.get("audit", []):
        print(line)
    for p in written:
        print(p)
    print(f"status: {status}")
    return EXIT_NEGATIVE if outcome.negative else EXIT_OK


def list_examples() -> list[tuple[str, str]]:
    out = []
    for name in bundled_names():
        doc = json.loads(bundled_path(name).read_text(encoding="utf-8"))
        out.append((name, doc.get("description", "")))
    return out


def cmd_list(args: argparse.Namespace) -> int:
    catalog = list_examples()
    width = max(len(n) for n, _ in catalog)
    for name, desc in catalog:
        print(f"{name.ljust(width)}  {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="g2moduli", description="Run G2 moduli geometry scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file or bundled example name")
    run.add_argument("scenario")
    run.add_argument("--out", help="directory for artifacts (default: current directory)")
    run.add_argument("--quad-nodes", type=int, help="Gauss-Legendre nodes per segment (overrides settings.quad_nodes)")
    run.add_argument("--fd-step", type=float, help="finite-difference step (overrides settings.fd_step)")
    run.add_argument("--seed", type=int, help="random seed (overrides seed)")
    run.set_defaults(func=cmd_run)
    lst = sub.add_parser("list-examples", help="list bundled scenarios")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "quad_nodes", None) is not None and args.quad_nodes < 1:
        print("error: --quad-nodes must be positive", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "fd_step", None) is not None and not args.fd_step > 0:
        print("error: --fd-step must be positive", file=sys.stderr)
        return EXIT_INPUT
    return args.func(args)
