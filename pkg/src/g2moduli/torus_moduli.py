"""Flat 7-torus testbed for the potential F = -3 log Vol.

A moduli point is a lattice together with a constant positive 3-form.  The
35 coefficients of the form serve as affine coordinates, so the flat
connection is the trivial one and all derivatives are ordinary partials.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import scipy.linalg

from .exterior7 import DIM, Form, _top_pairing, hodge_star, top_coefficient, wedge
from .g2_point import G2PointData, d_theta, d_theta_matrix, density_batch, g2_point

__all__ = [
    "FiniteDifferenceError",
    "HessianReport",
    "Lattice",
    "TorusModuliPoint",
    "dF",
    "dF_finite_difference",
    "hessian_F",
    "hessian_form",
    "hessian_form_matrix",
    "l2_pairing",
    "potential_F",
    "total_volume",
]

N_COORDS = math.comb(DIM, 3)


class FiniteDifferenceError(RuntimeError):
    """Raised when a finite-difference stencil is badly conditioned."""


@dataclass(frozen=True, eq=False)
class Lattice:
    """Lattice spanned by the columns of ``basis``."""

    basis: np.ndarray

    def __post_init__(self) -> None:
        b = np.array(self.basis, dtype=float)
        if b.shape != (DIM, DIM):
            raise ValueError(f"lattice basis must be {DIM}x{DIM}")
        if not np.all(np.isfinite(b)):
            raise ValueError("lattice basis must be finite")
        if abs(np.linalg.det(b)) == 0.0:
            raise ValueError("lattice basis is degenerate")
        b.flags.writeable = False
        object.__setattr__(self, "basis", b)

    @classmethod
    def unit(cls) -> Lattice:
        return cls(np.eye(DIM))

    @classmethod
    def scaled(cls, c: float) -> Lattice:
        return cls(c * np.eye(DIM))

    @property
    def covolume(self) -> float:
        return float(abs(np.linalg.det(self.basis)))


@dataclass(frozen=True, eq=False)
class TorusModuliPoint:
    lattice: Lattice
    phi: Form

    @cached_property
    def g2(self) -> G2PointData:
        return g2_point(self.phi)

    def to_json(self) -> dict:
        return {
            "lattice_basis": [[float(x) for x in row] for row in self.lattice.basis],
            "phi": self.phi.to_json(),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> TorusModuliPoint:
        return cls(Lattice(np.asarray(obj["lattice_basis"], dtype=float)), Form.from_json(obj["phi"]))


def total_volume(pt: TorusModuliPoint) -> float:
    return pt.lattice.covolume * pt.g2.density


def potential_F(pt: TorusModuliPoint) -> float:
    return -3.0 * math.log(total_volume(pt))


def _check_direction(eta: Form) -> None:
    if not isinstance(eta, Form) or eta.degree != 3:
        raise ValueError("tangent directions are 3-forms")


def dF(pt: TorusModuliPoint, eta: Form) -> float:
    """Differential of F: -(1/Vol) * integral of eta ∧ Theta."""
    _check_direction(eta)
    integral = pt.lattice.covolume * top_coefficient(wedge(eta, pt.g2.theta))
    return -integral / total_volume(pt)


def _potential_batch(covolume: float, coeffs: np.ndarray) -> np.ndarray:
    return -3.0 * np.log(covolume * density_batch(coeffs))


def default_step(phi: Form) -> float:
    return 1e-4 * (1.0 + phi.norm())


def dF_finite_difference(pt: TorusModuliPoint, eta: Form, h: float | None = None) -> float:
    """Central difference of F along phi + t*eta with one Richardson level."""
    _check_direction(eta)
    h = default_step(pt.phi) / max(eta.norm(), 1e-300) if h is None else h
    x, e = pt.phi.coefficients, eta.coefficients
    steps = np.array([h, -h, h / 2, -h / 2])
    f = _potential_batch(pt.lattice.covolume, x[None, :] + steps[:, None] * e[None, :])
    coarse = (f[0] - f[1]) / (2 * h)
    fine = (f[2] - f[3]) / h
    return float((4.0 * fine - coarse) / 3.0)


def hessian_form(pt: TorusModuliPoint, eta: Form, eta2: Form) -> float:
    """Closed-form second derivative of F from the linearisation of Theta.

    (1/(3 Vol^2)) (∫eta∧Theta)(∫eta2∧Theta) - (1/Vol) ∫eta ∧ dTheta(eta2)
    """
    _check_direction(eta)
    _check_direction(eta2)
    g2 = pt.g2
    cov, vol = pt.lattice.covolume, total_volume(pt)
    first = cov * top_coefficient(wedge(eta, g2.theta))
    second = cov * top_coefficient(wedge(eta2, g2.theta))
    cross = cov * top_coefficient(wedge(eta, d_theta(g2, eta2)))
    return first * second / (3.0 * vol**2) - cross / vol


def hessian_form_matrix(pt: TorusModuliPoint) -> np.ndarray:
    """``hessian_form`` on all pairs of coordinate 3-forms."""
    g2 = pt.g2
    cov, vol = pt.lattice.covolume, total_volume(pt)
    pairing = _top_pairing(3)
    grad = cov * (pairing @ g2.theta.coefficients)
    h = np.outer(grad, grad) / (3.0 * vol**2) - (cov / vol) * pairing @ d_theta_matrix(g2)
    return 0.5 * (h + h.T)


def l2_pairing(pt: TorusModuliPoint, eta: Form, eta2: Form) -> float:
    """Volume-normalised L2 pairing (1/Vol) ∫ eta ∧ *eta2."""
    _check_direction(eta)
    _check_direction(eta2)
    star = hodge_star(eta2, pt.g2.metric)
    return pt.lattice.covolume * top_coefficient(wedge(eta, star)) / total_volume(pt)


def l2_pairing_matrix(pt: TorusModuliPoint) -> np.ndarray:
    g = pt.g2.gram3
    return 0.5 * (g + g.T)


def _fd_hessian(cov: float, x: np.ndarray, h: float) -> np.ndarray:
    n = x.size
    iu, ju = np.triu_indices(n)
    eye = np.eye(n)
    shifts = []
    for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        shifts.append(si * eye[iu] + sj * eye[ju])
    pts = x[None, None, :] + h * np.stack(shifts)
    f = _potential_batch(cov, pts.reshape(-1, n)).reshape(4, -1)
    upper = (f[0] - f[1] - f[2] + f[3]) / (4.0 * h * h)
    out = np.zeros((n, n))
    out[iu, ju] = upper
    out[ju, iu] = upper
    return out


@dataclass(frozen=True, eq=False)
class HessianReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    signature: tuple[int, int, int]
    closed_form: np.ndarray = field(repr=False)
    closed_form_residual: float = 0.0
    negative_subspace_angle: float = float("nan")
    step: float = 0.0

    def to_json(self) -> dict:
        return {
            "signature": list(self.signature),
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "closed_form_residual": float(self.closed_form_residual),
            "negative_subspace_angle": float(self.negative_subspace_angle),
            "step": float(self.step),
            "matrix": [[float(x) for x in row] for row in self.matrix],
        }

    def eigenvalues_csv(self, fmt: str = ".17g") -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "eigenvalue"])
        for i, ev in enumerate(self.eigenvalues):
            writer.writerow([i, format(float(ev), fmt)])
        return buf.getvalue()


def signature_of(eigenvalues: np.ndarray, rtol: float = 1e-7) -> tuple[int, int, int]:
    tol = rtol * max(np.abs(eigenvalues).max(), 1e-300)
    pos = int(np.sum(eigenvalues > tol))
    neg = int(np.sum(eigenvalues < -tol))
    return pos, neg, len(eigenvalues) - pos - neg


def hessian_F(pt: TorusModuliPoint, step: float | None = None) -> HessianReport:
    """Finite-difference Hessian of F in the 35 coefficient coordinates.

    Central mixed differences at steps h and h/2 combined by one Richardson
    level, then compared with ``hessian_form_matrix``.
    """
    h = default_step(pt.phi) if step is None else float(step)
    if not h > 1e-7 * (1.0 + pt.phi.norm()):
        raise FiniteDifferenceError(
            f"step {h:g} is too small: roundoff in F would swamp the second differences"
        )
    cov, x = pt.lattice.covolume, pt.phi.coefficients
    coarse = _fd_hessian(cov, x, h)
    fine = _fd_hessian(cov, x, h / 2)
    matrix = (4.0 * fine - coarse) / 3.0
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues = np.linalg.eigvalsh(matrix)

    closed = hessian_form_matrix(pt)
    residual = float(np.linalg.norm(matrix - closed) / np.linalg.norm(closed))

    # negative directions relative to the L2 pairing, compared with the type-7 span
    gen_vals, gen_vecs = scipy.linalg.eigh(matrix, l2_pairing_matrix(pt))
    neg = gen_vecs[:, gen_vals < 0]
    if neg.shape[1]:
        angle = float(np.max(scipy.linalg.subspace_angles(neg, pt.g2.type7)))
    else:
        angle = float("nan")
    return HessianReport(
        matrix=matrix,
        eigenvalues=eigenvalues,
        signature=signature_of(eigenvalues),
        closed_form=closed,
        closed_form_residual=residual,
        negative_subspace_angle=angle,
        step=h,
    )
