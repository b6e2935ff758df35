"""Acceptance criteria, one test per criterion.

Each test carries ``@pytest.mark.acceptance(number, title)``; the terminal
summary prints one PASS/FAIL line per criterion (see conftest.py).
Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest
import sympy as sp

from g2moduli import cli
from g2moduli.exterior7 import Form, top_coefficient, wedge
from g2moduli.g2_point import PHI0, metric_and_density, random_positive_form, theta
from g2moduli.kahler_cone import IntersectionForm, length_series, segment_energy, segment_length
from g2moduli.kummer_cert import KummerModel, cross_check_with_path_geometry, energy_upper_bound
from g2moduli.path_geometry import (
    FlatCycle4,
    QuadratureSpec,
    affine_path,
    cauchy_schwarz_check,
    cycle_flux_and_volume,
    energy_direct,
    exponential_path,
    path_report,
    polynomial_path,
    speed_squared,
)
from g2moduli.torus_moduli import Lattice, TorusModuliPoint, dF, dF_finite_difference, hessian_F

SEED = 20240607
COARSE = QuadratureSpec(nodes_per_segment=8, segments=16)


def random_lattice(rng):
    return Lattice(np.eye(7) + 0.2 * rng.standard_normal((7, 7)))


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def bundled_payload(name):
    return json.loads(cli.bundled_path(name).read_text())["payload"]


@pytest.mark.acceptance(1, "G2 algebra identities and scaling covariance")
def test_algebra_identities():
    rng = np.random.default_rng(SEED)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        phi = random_positive_form(rng, 0.3)
        c = float(rng.uniform(0.2, 5.0))
        g, vol = metric_and_density(phi)
        th = theta(phi)
        worst = max(worst, rel_err(top_coefficient(wedge(phi, th)), 7 * vol))
        gc, volc = metric_and_density(c * phi)
        worst = max(worst, np.abs(gc - c ** (2 / 3) * g).max() / np.abs(g).max())
        worst = max(worst, rel_err(volc, c ** (7 / 3) * vol))
        thc = theta(c * phi).coefficients
        worst = max(worst, np.abs(thc - c ** (4 / 3) * th.coefficients).max() / np.abs(c ** (4 / 3) * th.coefficients).max())
    elapsed = time.perf_counter() - start
    assert worst < 1e-9, f"worst relative error {worst:.3e}"
    assert elapsed < 10, f"took {elapsed:.1f}s"


@pytest.mark.acceptance(2, "dF agrees with finite differences of F")
def test_dF_oracle():
    rng = np.random.default_rng(SEED + 2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        pt = TorusModuliPoint(random_lattice(rng), random_positive_form(rng))
        for _ in range(100):
            eta = Form(3, rng.standard_normal(35))
            exact = dF(pt, eta)
            worst = max(worst, abs(exact - dF_finite_difference(pt, eta)) / max(1.0, abs(exact)))
    elapsed = time.perf_counter() - start
    assert worst < 1e-6, f"worst relative error {worst:.3e}"
    assert elapsed < 30, f"took {elapsed:.1f}s"


@pytest.mark.acceptance(3, "Hessian signature (28, 7, 0) with type-7 negative space")
def test_signature():
    rng = np.random.default_rng(SEED + 3)
    start = time.perf_counter()
    points = [TorusModuliPoint(Lattice.unit(), PHI0)]
    points += [TorusModuliPoint(random_lattice(rng), random_positive_form(rng)) for _ in range(5)]
    for pt in points:
        report = hessian_F(pt)
        assert report.signature == (28, 7, 0)
        assert report.negative_subspace_angle < 1e-4
    base = hessian_F(points[0])
    x = PHI0.coefficients
    assert abs(x @ base.matrix @ x - 7.0) <= 1e-5
    elapsed = time.perf_counter() - start
    assert elapsed < 120, f"took {elapsed:.1f}s"


def random_polynomial_paths(rng, count=20):
    paths = []
    for _ in range(count):
        degree = int(rng.integers(1, 4))
        coeffs = [PHI0] + [Form(3, 0.08 * rng.standard_normal(35) / math.sqrt(35)) for _ in range(degree)]
        paths.append(polynomial_path(coeffs, 0.0, 1.0, random_lattice(rng)))
    return paths


@pytest.mark.acceptance(4, "energy equals boundary terms plus acceleration integral")
def test_boundary_term_identity():
    rng = np.random.default_rng(SEED + 4)
    start = time.perf_counter()
    worst = 0.0
    for path in random_polynomial_paths(rng):
        report = path_report(path, 0.0, 1.0, "hessian-form")
        worst = max(worst, report.residual / max(1.0, abs(report.energy_direct)))
    for _ in range(5):
        eta = Form(3, 0.1 * rng.standard_normal(35) / math.sqrt(35))
        report = path_report(affine_path(PHI0, eta, 0.0, 1.0, random_lattice(rng)), 0.0, 1.0, "hessian-form")
        assert report.integral_term == 0.0
        worst = max(worst, report.residual / max(1.0, abs(report.energy_direct)))
    elapsed = time.perf_counter() - start
    assert worst < 1e-6, f"worst normalised residual {worst:.3e}"
    assert elapsed < 120, f"took {elapsed:.1f}s"


@pytest.mark.acceptance(5, "Cauchy-Schwarz and monotonicity of energy in tau")
def test_cauchy_schwarz_and_monotonicity():
    rng = np.random.default_rng(SEED + 5)
    paths = random_polynomial_paths(rng, 10)
    paths.append(exponential_path(PHI0, 0.0, 1.0))
    affine = [affine_path(PHI0, Form(3, 0.1 * rng.standard_normal(35) / math.sqrt(35)), 0.0, 1.0) for _ in range(3)]
    checked = 0
    for path in paths + affine:
        for form in ("l2-pairing", "hessian-form"):
            report = path_report(path, 0.0, 1.0, form, COARSE)
            if report.form_positive:
                assert cauchy_schwarz_check(report, duration=1.0, tol=1e-9)
                checked += 1
    assert checked >= len(paths) + len(affine)

    taus = [2.0**-k for k in range(21)]
    for path in affine:
        energies = [energy_direct(path, tau, 1.0, "l2-pairing", COARSE) for tau in taus]
        # tau decreases along the list, so the energy may only grow
        assert all(b >= a for a, b in zip(energies, energies[1:]))


@pytest.mark.acceptance(6, "calibration inequality on coordinate planes and integer cycles")
def test_calibration():
    at0 = TorusModuliPoint(Lattice.unit(), PHI0)
    for idx in itertools.combinations(range(7), 4):
        c = np.zeros((4, 7), dtype=int)
        c[range(4), idx] = 1
        flux, vol = cycle_flux_and_volume(FlatCycle4(c), at0)
        assert abs(flux) <= vol * (1 + 1e-9)
    c = np.zeros((4, 7), dtype=int)
    c[range(4), [3, 4, 5, 6]] = 1
    flux, vol = cycle_flux_and_volume(FlatCycle4(c), at0)
    assert abs(flux - vol) <= 1e-9 * vol

    rng = np.random.default_rng(SEED + 6)
    tested = 0
    for point in range(10):
        at = TorusModuliPoint(random_lattice(rng), random_positive_form(rng))
        while tested < 100 * (point + 1):
            cycle = FlatCycle4(rng.integers(-3, 4, (4, 7)))
            if np.linalg.matrix_rank(cycle.vectors(at.lattice)) < 4:
                continue
            flux, vol = cycle_flux_and_volume(cycle, at)
            assert abs(flux) <= vol * (1 + 1e-9)
            tested += 1
    assert tested == 1000


@pytest.mark.acceptance(7, "Kummer certificates are exact and dominate the cross-check")
def test_kummer_certificates():
    type_one = KummerModel.from_json(bundled_payload("kummer-typeI-unit"))
    cert = energy_upper_bound(type_one)
    assert cert.valid
    assert cert.energy_bound == 6
    assert sp.simplify(cert.length_bound - sp.sqrt(6)) == 0

    type_two = KummerModel.from_json(bundled_payload("kummer-typeII-unit"))
    assert energy_upper_bound(type_two).energy_bound == 15

    for model in (type_one, type_two):
        check = cross_check_with_path_geometry(model, {"E1": lambda t: 1.0})
        assert check.dominated and check.max_excess <= 1e-9


@pytest.mark.acceptance(8, "Kaehler cone finite and infinite distance boundaries")
def test_kahler_dichotomy():
    start = time.perf_counter()
    Q = IntersectionForm.hyperbolic()
    finite = ([1.0, 1.0], [1.0, 1.0])
    assert abs(segment_energy(*finite, Q, 0.0) - 1.0) <= 1e-7
    assert abs(segment_length(*finite, Q, 0.0) - math.sqrt(2) * math.log(2)) <= 1e-6

    alpha, omega = [1.0, 0.0], [0.0, 1.0]
    taus = [2.0**-k for k in range(1, 31)]
    series = length_series(alpha, omega, Q, taus)
    assert series.classification == "infinite"
    for tau, energy, length in zip(series.taus, series.energies, series.lengths):
        assert abs(energy - (1 / tau - 1)) <= 1e-7
        assert abs(length - math.log(1 / tau)) <= 1e-5
    elapsed = time.perf_counter() - start
    assert elapsed < 30, f"took {elapsed:.1f}s"


@pytest.mark.acceptance(9, "scaling ray has constant speed sqrt(7)")
def test_scaling_ray():
    start = time.perf_counter()
    path = exponential_path(PHI0, 0.0, 1.0)
    speeds = [math.sqrt(speed_squared(path, t, "hessian-form")) for t in np.linspace(0.0, 1.0, 101)]
    assert max(abs(s - math.sqrt(7)) for s in speeds) <= 1e-6
    assert abs(energy_direct(path, 0.0, 1.0, "hessian-form") - 7.0) <= 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 10, f"took {elapsed:.1f}s"


@pytest.mark.acceptance(10, "bundled scenarios reproduce byte-for-byte")
def test_determinism(tmp_path, capsys):
    names = cli.bundled_names()
    assert names
    for name in names:
        outputs = []
        for run in ("first", "second"):
            out = tmp_path / run / name
            assert cli.main(["run", name, "--out", str(out)]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outputs[0] == outputs[1], name
