"""Pointwise G2 algebra for constant 3-forms on R^7.

A 3-form is positive when the symmetric bilinear form

    B(u, v) = top coefficient of (u ⌟ phi) ∧ (v ⌟ phi) ∧ phi

is positive-definite.  With B/6 = density * g one gets
density = det(B/6)^(1/9), which fixes the metric and the volume density.
The normalisation is chosen so that the reference form ``PHI0`` induces the
identity metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exterior7 import (
    DIM,
    Form,
    Metric7,
    _interior_tensor,
    _top_pairing,
    _wedge_tensor,
    evaluate,
    hodge_star_matrix,
    induced_gram,
    metric_to_json,
)

__all__ = [
    "G2PointData",
    "NotG2FormError",
    "PHI0",
    "THETA0",
    "TypeSplit",
    "comass_sample",
    "d_theta",
    "d_theta_finite_difference",
    "g2_point",
    "is_positive",
    "metric_and_density",
    "positivity_form",
    "random_positive_form",
    "theta",
    "type7_basis",
    "type_decompose",
]

PHI0 = Form.from_terms(
    3,
    {
        (1, 2, 3): 1.0,
        (1, 4, 5): 1.0,
        (1, 6, 7): 1.0,
        (2, 4, 6): 1.0,
        (2, 5, 7): -1.0,
        (3, 4, 7): -1.0,
        (3, 5, 6): -1.0,
    },
)

THETA0 = Form.from_terms(
    4,
    {
        (4, 5, 6, 7): 1.0,
        (2, 3, 6, 7): 1.0,
        (2, 3, 4, 5): 1.0,
        (1, 3, 5, 7): 1.0,
        (1, 3, 4, 6): -1.0,
        (1, 2, 5, 6): -1.0,
        (1, 2, 4, 7): -1.0,
    },
)

POSITIVITY_RTOL = 1e-10


class NotG2FormError(ValueError):
    """Raised when a 3-form is not positive (not a G2-structure)."""


def _check_three_form(phi: Form) -> None:
    if not isinstance(phi, Form) or phi.degree != 3:
        raise ValueError("expected a 3-form")


def _positivity_batch(coeffs: np.ndarray) -> np.ndarray:
    """B matrices for a stack of 3-form coefficient vectors, shape (N, 7, 7)."""
    contracted = np.einsum("iab,na->nib", _interior_tensor(3), coeffs)
    with_phi = coeffs @ _top_pairing(4).T  # top(e^c ∧ phi) for 4-forms e^c
    pairing = np.einsum("abc,nc->nab", _wedge_tensor(2, 2), with_phi)
    return np.einsum("nia,nab,njb->nij", contracted, pairing, contracted)


def positivity_form(phi: Form) -> np.ndarray:
    """The 7x7 matrix B(e_i, e_j) of the positivity condition."""
    _check_three_form(phi)
    b = _positivity_batch(phi.coefficients[None, :])[0]
    return 0.5 * (b + b.T)


def is_positive(phi: Form) -> bool:
    b = positivity_form(phi)
    eig = np.linalg.eigvalsh(b)
    return bool(eig[0] > POSITIVITY_RTOL * max(np.abs(eig).max(), 1e-300))


def density_batch(coeffs: np.ndarray) -> np.ndarray:
    """Volume densities for a stack of (assumed positive) 3-forms.

    Skips the eigenvalue positivity test; meant for finite-difference
    stencils around a point already known to be positive.
    """
    coeffs = np.atleast_2d(coeffs)
    scale = np.linalg.norm(coeffs, axis=1)
    det = np.linalg.det(_positivity_batch(coeffs / scale[:, None]) / 6.0)
    if np.any(det <= 0):
        raise NotG2FormError("stencil left the positive cone; reduce the step")
    return scale ** (7.0 / 3.0) * det ** (1.0 / 9.0)


def metric_and_density(phi: Form) -> tuple[np.ndarray, float]:
    if not is_positive(phi):
        raise NotG2FormError("3-form is not positive")
    # work on the unit-norm form so det(B) cannot under/overflow
    scale = phi.norm()
    b6 = positivity_form(phi / scale) / 6.0
    unit_density = float(np.linalg.det(b6) ** (1.0 / 9.0))
    metric = scale ** (2.0 / 3.0) * (b6 / unit_density)
    return metric, scale ** (7.0 / 3.0) * unit_density


def theta(phi: Form) -> Form:
    """The dual 4-form *_phi phi."""
    return g2_point(phi).theta


@dataclass(frozen=True, eq=False)
class G2PointData:
    """A positive 3-form with its metric, volume density and dual 4-form.

    ``gram3`` and ``star3`` are the induced inner product and Hodge star on
    3-forms in coordinates, kept because every linearisation reuses them.
    """

    phi: Form
    metric: np.ndarray
    density: float
    theta: Form
    gram3: np.ndarray = field(repr=False)
    star3: np.ndarray = field(repr=False)

    @cached_property
    def type7(self) -> np.ndarray:
        return type7_basis(self.theta)

    def to_json(self) -> dict:
        return {
            "phi": self.phi.to_json(),
            "metric": metric_to_json(self.metric),
            "density": float(self.density),
            "theta": self.theta.to_json(),
        }


def g2_point(phi: Form) -> G2PointData:
    metric, density = metric_and_density(phi)
    metric = Metric7(metric)
    gram3 = induced_gram(metric, 3)
    star3 = hodge_star_matrix(metric, 3, gram3)
    th = Form(4, star3 @ phi.coefficients)
    return G2PointData(phi, metric.entries, density, th, gram3, star3)


def type7_basis(theta4: Form) -> np.ndarray:
    """35x7 matrix whose columns are e_i ⌟ theta."""
    return np.einsum("iab,a->bi", _interior_tensor(4), theta4.coefficients)


@dataclass(frozen=True, eq=False)
class TypeSplit:
    pi1: Form
    pi7: Form
    pi27: Form


def _split_coeffs(eta: np.ndarray, at: G2PointData) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gram = at.gram3
    phi = at.phi.coefficients
    pi1 = (eta @ gram @ phi) / (phi @ gram @ phi) * phi
    m = at.type7
    mg = m.T @ gram
    pi7 = m @ np.linalg.solve(mg @ m, mg @ eta)
    return pi1, pi7, eta - pi1 - pi7


def type_decompose(eta: Form, at: G2PointData) -> TypeSplit:
    """Split a 3-form into its components of type 1, 7 and 27 at ``at``."""
    _check_three_form(eta)
    p1, p7, p27 = _split_coeffs(eta.coefficients, at)
    return TypeSplit(Form(3, p1), Form(3, p7), Form(3, p27))


def d_theta(at: G2PointData, eta: Form) -> Form:
    """Linearisation of phi -> Theta(phi) at ``at`` in direction ``eta``.

    Uses (4/3) *pi1 + *pi7 - *pi27; checked against
    ``d_theta_finite_difference`` in the test-suite.
    """
    _check_three_form(eta)
    p1, p7, p27 = _split_coeffs(eta.coefficients, at)
    return Form(4, at.star3 @ (4.0 / 3.0 * p1 + p7 - p27))


def d_theta_matrix(at: G2PointData) -> np.ndarray:
    """35x35 matrix of ``d_theta`` in the coordinate bases."""
    eye = np.eye(35)
    cols = [_split_coeffs(eye[:, j], at) for j in range(35)]
    mixed = np.array([4.0 / 3.0 * p1 + p7 - p27 for p1, p7, p27 in cols]).T
    return at.star3 @ mixed


def d_theta_finite_difference(phi: Form, eta: Form, h: float = 1e-4) -> Form:
    plus = theta(phi + h * eta)
    minus = theta(phi - h * eta)
    return (plus - minus) / (2.0 * h)


def comass_sample(at: G2PointData, trials: int, seed: int) -> float:
    """Largest value of theta over random g-orthonormal 4-frames."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    frames = rng.standard_normal((trials, DIM, 4))
    chol = np.linalg.cholesky(at.metric)
    q, _ = np.linalg.qr(chol.T @ frames)
    orthonormal = np.linalg.solve(chol.T, q)
    return float(np.max(evaluate(at.theta, orthonormal)))


def random_positive_form(rng: np.random.Generator, max_perturbation: float = 0.3) -> Form:
    """PHI0 plus a random perturbation of Euclidean norm at most ``max_perturbation``."""
    direction = rng.standard_normal(35)
    direction /= np.linalg.norm(direction)
    radius = max_perturbation * rng.uniform() ** (1.0 / 35)
    phi = Form(3, PHI0.coefficients + radius * direction)
    if not is_positive(phi):
        raise NotG2FormError("perturbation left the positive cone")
    return phi


def scaling_exponents() -> dict[str, float]:
    """Homogeneity degrees of metric, density and theta in phi."""
    return {"metric": 2.0 / 3.0, "density": 7.0 / 3.0, "theta": 4.0 / 3.0}

