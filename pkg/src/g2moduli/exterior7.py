"""Dense exterior algebra on the oriented vector space R^7.

A k-form is stored as a dense coefficient vector over the strictly
increasing index tuples of length k, in lexicographic order.  Index labels
in the public helpers (``Form.basis``, ``Form.from_terms``) are 1-based to
match the usual ``e^{123}`` notation; array axes are 0-based.

The orientation is fixed once and for all: ``e^{1234567}`` is positive.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

DIM = 7

__all__ = [
    "DIM",
    "Form",
    "InvalidMetricError",
    "Metric7",
    "as_metric",
    "basis_tuples",
    "evaluate",
    "hodge_star",
    "hodge_star_matrix",
    "induced_gram",
    "inner",
    "interior",
    "metric_from_json",
    "metric_to_json",
    "top_coefficient",
    "volume_form",
    "wedge",
]


class InvalidMetricError(ValueError):
    """Raised when a matrix is not a symmetric positive-definite metric."""


@lru_cache(maxsize=None)
def basis_tuples(k: int) -> tuple[tuple[int, ...], ...]:
    """0-based increasing index tuples of length ``k``, lexicographic."""
    return tuple(itertools.combinations(range(DIM), k))


@lru_cache(maxsize=None)
def _rank(k: int) -> dict[tuple[int, ...], int]:
    return {idx: r for r, idx in enumerate(basis_tuples(k))}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _merge_sign(left: tuple[int, ...], right: tuple[int, ...]) -> int:
    # sign of the permutation sorting left+right; 0 on repeated indices
    if set(left) & set(right):
        return 0
    inversions = sum(1 for i in left for j in right if i > j)
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _wedge_tensor(k: int, l: int) -> np.ndarray:
    out = np.zeros((math.comb(DIM, k), math.comb(DIM, l), math.comb(DIM, k + l)))
    target = _rank(k + l)
    for a, left in enumerate(basis_tuples(k)):
        for b, right in enumerate(basis_tuples(l)):
            s = _merge_sign(left, right)
            if s:
                out[a, b, target[tuple(sorted(left + right))]] = s
    return _readonly(out)


@lru_cache(maxsize=None)
def _interior_tensor(k: int) -> np.ndarray:
    # out[i, a, b]: coefficient of e^{J_b} in e_i ⌟ e^{I_a}
    out = np.zeros((DIM, math.comb(DIM, k), math.comb(DIM, k - 1)))
    target = _rank(k - 1)
    for a, idx in enumerate(basis_tuples(k)):
        for slot, i in enumerate(idx):
            rest = idx[:slot] + idx[slot + 1 :]
            out[i, a, target[rest]] = -1.0 if slot % 2 else 1.0
    return _readonly(out)


@lru_cache(maxsize=None)
def _top_pairing(k: int) -> np.ndarray:
    """Matrix of top coefficients of e^I ∧ e^J, |I| = k, |J| = 7 - k."""
    return _readonly(np.ascontiguousarray(_wedge_tensor(k, DIM - k)[:, :, 0]))


@dataclass(frozen=True, eq=False)
class Form:
    """A constant-coefficient k-form on R^7."""

    degree: int
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        if not isinstance(self.degree, (int, np.integer)) or not 0 <= self.degree <= DIM:
            raise ValueError(f"degree must be an integer in 0..{DIM}, got {self.degree!r}")
        coeffs = np.array(self.coefficients, dtype=float).reshape(-1)
        if coeffs.size != math.comb(DIM, self.degree):
            raise ValueError(
                f"a {self.degree}-form needs {math.comb(DIM, self.degree)} coefficients, "
                f"got {coeffs.size}"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("form coefficients must be finite")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "coefficients", _readonly(coeffs))

    @classmethod
    def zero(cls, degree: int) -> Form:
        return cls(degree, np.zeros(math.comb(DIM, degree)))

    @classmethod
    def basis(cls, indices: Sequence[int]) -> Form:
        """The basis form e^{i1...ik} for 1-based, strictly increasing indices."""
        return cls.from_terms(len(indices), {tuple(indices): 1.0})

    @classmethod
    def from_terms(cls, degree: int, terms: Mapping[tuple[int, ...], float]) -> Form:
        """Build a form from ``{(i1, ..., ik): value}`` with 1-based labels.

        Unsorted index tuples are accepted and reordered with the
        corresponding permutation sign.
        """
        coeffs = np.zeros(math.comb(DIM, degree))
        for idx, value in terms.items():
            zero_based = tuple(i - 1 for i in idx)
            if len(zero_based) != degree or any(not 0 <= i < DIM for i in zero_based):
                raise ValueError(f"bad index tuple {idx!r} for a {degree}-form")
            if len(set(zero_based)) != degree:
                continue
            order = sorted(range(degree), key=lambda p: zero_based[p])
            sign = _perm_sign(order)
            coeffs[_rank(degree)[tuple(sorted(zero_based))]] += sign * value
        return cls(degree, coeffs)

    def terms(self, tol: float = 0.0) -> dict[tuple[int, ...], float]:
        """Nonzero coefficients keyed by 1-based index tuples."""
        return {
            tuple(i + 1 for i in idx): float(c)
            for idx, c in zip(basis_tuples(self.degree), self.coefficients)
            if abs(c) > tol
        }

    def norm(self) -> float:
        """Euclidean norm of the coefficient vector (not metric-dependent)."""
        return float(np.linalg.norm(self.coefficients))

    def to_json(self) -> dict:
        return {"degree": self.degree, "coefficients": [float(c) for c in self.coefficients]}

    @classmethod
    def from_json(cls, obj: Mapping) -> Form:
        return cls(int(obj["degree"]), np.asarray(obj["coefficients"], dtype=float))

    def allclose(self, other: Form, atol: float = 1e-12, rtol: float = 0.0) -> bool:
        return self.degree == other.degree and np.allclose(
            self.coefficients, other.coefficients, atol=atol, rtol=rtol
        )

    def _check_same_degree(self, other: Form) -> None:
        if not isinstance(other, Form) or other.degree != self.degree:
            raise ValueError("forms must have the same degree")

    def __add__(self, other: Form) -> Form:
        self._check_same_degree(other)
        return Form(self.degree, self.coefficients + other.coefficients)

    def __sub__(self, other: Form) -> Form:
        self._check_same_degree(other)
        return Form(self.degree, self.coefficients - other.coefficients)

    def __neg__(self) -> Form:
        return Form(self.degree, -self.coefficients)

    def __mul__(self, scalar: float) -> Form:
        if isinstance(scalar, Form):
            return NotImplemented
        return Form(self.degree, float(scalar) * self.coefficients)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> Form:
        return Form(self.degree, self.coefficients / float(scalar))

    def __repr__(self) -> str:
        parts = [
            f"{c:+.6g}*e{''.join(map(str, idx))}" for idx, c in self.terms(1e-15).items()
        ]
        return f"Form({self.degree}: {' '.join(parts) or '0'})"


def _perm_sign(order: Sequence[int]) -> int:
    inversions = sum(
        1 for i in range(len(order)) for j in range(i + 1, len(order)) if order[i] > order[j]
    )
    return -1 if inversions % 2 else 1


def volume_form() -> Form:
    """The positive unit volume form e^{1234567}."""
    return Form(DIM, np.ones(1))


def wedge(a: Form, b: Form) -> Form:
    if a.degree + b.degree > DIM:
        raise ValueError(f"wedge of degrees {a.degree} and {b.degree} exceeds {DIM}")
    t = _wedge_tensor(a.degree, b.degree)
    return Form(a.degree + b.degree, np.einsum("a,b,abc->c", a.coefficients, b.coefficients, t))


def interior(u: Iterable[float], a: Form) -> Form:
    """Contraction u ⌟ a into the first slot."""
    if a.degree == 0:
        raise ValueError("cannot contract a vector into a 0-form")
    u = np.asarray(u, dtype=float).reshape(DIM)
    if not np.all(np.isfinite(u)):
        raise ValueError("vector entries must be finite")
    return Form(a.degree - 1, np.einsum("i,iab,a->b", u, _interior_tensor(a.degree), a.coefficients))


def top_coefficient(a: Form) -> float:
    """Coefficient of e^{1234567} in a 7-form."""
    if a.degree != DIM:
        raise ValueError(f"expected a {DIM}-form, got degree {a.degree}")
    return float(a.coefficients[0])


@dataclass(frozen=True, eq=False)
class Metric7:
    """A validated symmetric positive-definite 7x7 matrix."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        g = np.array(self.entries, dtype=float)
        if g.shape != (DIM, DIM):
            raise InvalidMetricError(f"metric must be {DIM}x{DIM}, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InvalidMetricError("metric entries must be finite")
        scale = max(np.abs(g).max(), 1e-300)
        if np.abs(g - g.T).max() > 1e-12 * scale:
            raise InvalidMetricError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise InvalidMetricError("metric is not positive-definite") from exc
        object.__setattr__(self, "entries", _readonly(g))

    @property
    def sqrt_det(self) -> float:
        return float(np.sqrt(np.linalg.det(self.entries)))


def as_metric(g) -> Metric7:
    return g if isinstance(g, Metric7) else Metric7(g)


def metric_to_json(g) -> list[float]:
    return [float(x) for x in as_metric(g).entries.reshape(-1)]


def metric_from_json(entries: Sequence[float]) -> Metric7:
    arr = np.asarray(entries, dtype=float)
    if arr.size != DIM * DIM:
        raise InvalidMetricError(f"expected {DIM * DIM} row-major entries, got {arr.size}")
    return Metric7(arr.reshape(DIM, DIM))


def induced_gram(g, k: int) -> np.ndarray:
    """Gram matrix of the basis k-forms under the metric induced by ``g``.

    Entry (I, J) is det of the inverse metric restricted to rows I, columns J.
    """
    g = as_metric(g)
    if k == 0:
        return np.ones((1, 1))
    ginv = np.linalg.inv(g.entries)
    idx = np.array(basis_tuples(k))
    blocks = ginv[idx[:, None, :, None], idx[None, :, None, :]]
    gram = _small_det(blocks)
    return 0.5 * (gram + gram.T)


def _small_det(m: np.ndarray) -> np.ndarray:
    # closed-form determinants for the common small sizes; LAPACK otherwise
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0]
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if n == 3:
        return (
            m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
        )
    return np.linalg.det(m)


def inner(a: Form, b: Form, g) -> float:
    if a.degree != b.degree:
        raise ValueError(f"inner product needs equal degrees, got {a.degree} and {b.degree}")
    return float(a.coefficients @ induced_gram(g, a.degree) @ b.coefficients)


def hodge_star_matrix(g, k: int, gram: np.ndarray | None = None) -> np.ndarray:
    """Matrix S with coefficients of *b equal to S @ b for k-forms b.

    Solves a ∧ *b = <a, b> vol_g against every basis k-form a.  A
    precomputed ``induced_gram(g, k)`` may be passed in.
    """
    g = as_metric(g)
    gram = induced_gram(g, k) if gram is None else gram
    return np.linalg.solve(_top_pairing(k), g.sqrt_det * gram)


def hodge_star(a: Form, g) -> Form:
    return Form(DIM - a.degree, hodge_star_matrix(g, a.degree) @ a.coefficients)


def evaluate(a: Form, vectors) -> np.ndarray | float:
    """Evaluate a k-form on k vectors.

    ``vectors`` has shape (..., 7, k): columns are the arguments.  Batched
    inputs return an array over the leading axes.
    """
    v = np.asarray(vectors, dtype=float)
    if v.shape[-2:] != (DIM, a.degree):
        raise ValueError(f"expected vectors of shape (..., {DIM}, {a.degree}), got {v.shape}")
    if a.degree == 0:
        return float(a.coefficients[0]) if v.ndim == 2 else np.full(v.shape[:-2], a.coefficients[0])
    idx = np.array(basis_tuples(a.degree))
    minors = np.linalg.det(v[..., idx, :])
    out = minors @ a.coefficients
    return float(out) if np.ndim(out) == 0 else out
