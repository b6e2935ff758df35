"""Finite-energy certificates for gluing degenerations.

The model records, for each gluing component, the periods f(t) of the
evolving 3-form over a basis of 3-cycles supported in that component, and
an upper bound on the volume of the dual 4-cycles.  From these the
certificate bounds the boundary-term energy

    E <= (1/V0) * sum_a w_a * (sup|f_a'| + |f_a'(T)| + ∫_0^T |f_a''|),

where w_a = sum_b |pairing[a, b]| * factor * Vol(D_b).  With the identity
pairing this is the plain sum over classes.  Topological inputs (b1 = 0,
trivial boundary maps, metric domination) are taken as stated assertions
and echoed in the certificate; they are never inferred.

All bound arithmetic is exact (sympy rationals and radicals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy as sp

from .path_geometry import composite_gauss_legendre

__all__ = [
    "Certificate",
    "CoeffFunction",
    "CrossCheck",
    "GluingComponent",
    "HypothesesReport",
    "KummerClass",
    "KummerModel",
    "check_hypotheses",
    "cross_check_with_path_geometry",
    "dim4_factor",
    "dual_basis",
    "energy_upper_bound",
    "eval_coeff",
    "g_bound",
]

_t = sp.Symbol("t", real=True)


def exact(x) -> sp.Expr:
    """Convert a number (or numeric string such as "1/3") to an exact sympy value."""
    if isinstance(x, sp.Basic):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, (int, np.integer)):
        return sp.Integer(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError("non-finite coefficient")
        return sp.Rational(repr(float(x)))
    if isinstance(x, str):
        return sp.Rational(x)
    raise TypeError(f"cannot make {x!r} exact")


def _json_number(x: sp.Expr) -> dict:
    return {"exact": str(x), "value": float(x)}


def dual_basis(pairing, max_condition: float = 1e12) -> np.ndarray:
    """Inverse transpose of a nondegenerate pairing matrix."""
    p = np.asarray(pairing, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError("pairing must be a square matrix")
    cond = np.linalg.cond(p)
    if not cond < max_condition:
        raise np.linalg.LinAlgError(f"pairing is singular or ill-conditioned (condition ~ {cond:.3g})")
    return np.linalg.inv(p).T


@dataclass(frozen=True)
class CoeffFunction:
    """A polynomial period function f(t) with exact coefficients (ascending powers).

    Type I components give f = a + b t^2, type II give f = a t^2 + b t^3.
    """

    kind: str
    coefficients: tuple

    def __post_init__(self) -> None:
        if self.kind not in ("TypeI", "TypeII", "polynomial"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(self, "coefficients", tuple(exact(c) for c in self.coefficients))

    @classmethod
    def type_i(cls, a, b) -> CoeffFunction:
        return cls("TypeI", (a, 0, b))

    @classmethod
    def type_ii(cls, a, b) -> CoeffFunction:
        return cls("TypeII", (0, 0, a, b))

    @classmethod
    def polynomial(cls, coefficients: Sequence) -> CoeffFunction:
        return cls("polynomial", tuple(coefficients))

    @property
    def expr(self) -> sp.Expr:
        return sum((c * _t**k for k, c in enumerate(self.coefficients)), sp.Integer(0))

    def derivative(self, order: int = 1) -> sp.Expr:
        return sp.diff(self.expr, _t, order)

    def sup_abs_derivative(self, T) -> sp.Expr:
        """Exact sup of |f'| over (0, T] (attained on the closure [0, T])."""
        T = exact(T)
        d1, d2 = self.derivative(1), self.derivative(2)
        candidates = [sp.Integer(0), T] + _roots_inside(d2, T)
        return sp.Max(*[sp.Abs(d1.subs(_t, c)) for c in candidates])

    def int_abs_second(self, T) -> sp.Expr:
        """Exact ∫_0^T |f''| dt, splitting at the sign changes of f''."""
        T = exact(T)
        d1, d2 = self.derivative(1), self.derivative(2)
        cuts = [sp.Integer(0)] + _roots_inside(d2, T) + [T]
        return sum((sp.Abs(d1.subs(_t, b) - d1.subs(_t, a)) for a, b in zip(cuts, cuts[1:])), sp.Integer(0))

    def to_json(self) -> dict:
        if self.kind == "TypeI":
            return {"kind": "TypeI", "a": str(self.coefficients[0]), "b": str(self.coefficients[2])}
        if self.kind == "TypeII":
            return {"kind": "TypeII", "a": str(self.coefficients[2]), "b": str(self.coefficients[3])}
        return {"kind": "polynomial", "coefficients": [str(c) for c in self.coefficients]}

    @classmethod
    def from_json(cls, obj: Mapping) -> CoeffFunction:
        kind = obj["kind"]
        if kind == "TypeI":
            return cls.type_i(_parse(obj["a"]), _parse(obj["b"]))
        if kind == "TypeII":
            return cls.type_ii(_parse(obj["a"]), _parse(obj["b"]))
        if kind == "polynomial":
            return cls.polynomial([_parse(c) for c in obj["coefficients"]])
        raise ValueError(f"unknown coefficient kind {kind!r}")


def _parse(x):
    return exact(x) if not isinstance(x, str) else sp.Rational(x)


def _roots_inside(poly: sp.Expr, T: sp.Expr) -> list:
    """Distinct real roots of a polynomial strictly inside (0, T), ascending."""
    if poly == 0 or not poly.has(_t):
        return []
    roots = sp.Poly(poly, _t).real_roots()
    inside = sorted({r for r in roots if (r > 0) == sp.true and (r < T) == sp.true}, key=lambda r: float(r))
    return inside


def eval_coeff(f: CoeffFunction, t) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    """Exact (f(t), f'(t), f''(t))."""
    t = exact(t)
    return f.expr.subs(_t, t), f.derivative(1).subs(_t, t), f.derivative(2).subs(_t, t)


@dataclass(frozen=True)
class KummerClass:
    class_id: str
    coeff: CoeffFunction
    calib_volume_bound: sp.Expr

    def __post_init__(self) -> None:
        object.__setattr__(self, "calib_volume_bound", exact(self.calib_volume_bound))
        if self.calib_volume_bound < 0:
            raise ValueError(f"class {self.class_id}: calibrated volume bound must be >= 0")


@dataclass(frozen=True)
class GluingComponent:
    name: str
    singularity_type: str
    classes: tuple[KummerClass, ...]
    delta_trivial: bool
    metric_dominated: bool

    def __post_init__(self) -> None:
        if self.singularity_type not in ("I", "II"):
            raise ValueError("singularity_type must be 'I' or 'II'")
        object.__setattr__(self, "classes", tuple(self.classes))

    def find(self, class_id: str) -> KummerClass:
        for c in self.classes:
            if c.class_id == class_id:
                return c
        raise KeyError(f"component {self.name!r} has no class {class_id!r}")


def dim4_factor(equivalence_constant=2, dim: int = 4) -> sp.Expr:
    """Volume factor on dim-cycles from g~ <= c g: c^(dim/2)."""
    return exact(equivalence_constant) ** sp.Rational(dim, 2)


@dataclass(frozen=True)
class KummerModel:
    T: sp.Expr
    V0: sp.Expr
    components: tuple[GluingComponent, ...]
    b1_zero: bool
    metric_equivalence_dim4_factor: sp.Expr = sp.Integer(4)
    pairing: tuple | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "T", exact(self.T))
        object.__setattr__(self, "V0", exact(self.V0))
        object.__setattr__(self, "metric_equivalence_dim4_factor", exact(self.metric_equivalence_dim4_factor))
        object.__setattr__(self, "components", tuple(self.components))
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not self.V0 > 0:
            raise ValueError("V0 must be positive")
        ids = [c.class_id for c in self.classes()]
        if len(set(ids)) != len(ids):
            raise ValueError("class ids must be unique across components")
        if self.pairing is not None:
            rows = tuple(tuple(exact(x) for x in row) for row in self.pairing)
            if len(rows) != len(ids) or any(len(r) != len(ids) for r in rows):
                raise ValueError(f"pairing must be {len(ids)}x{len(ids)}")
            if sp.Matrix(rows).det() == 0:
                raise ValueError("pairing is degenerate")
            object.__setattr__(self, "pairing", rows)

    def classes(self) -> list[KummerClass]:
        return [c for comp in self.components for c in comp.classes]

    def pairing_matrix(self) -> sp.Matrix:
        n = len(self.classes())
        return sp.eye(n) if self.pairing is None else sp.Matrix(self.pairing)

    @classmethod
    def from_json(cls, obj: Mapping) -> KummerModel:
        comps = []
        for c in obj["components"]:
            classes = tuple(
                KummerClass(k["class_id"], CoeffFunction.from_json(k["coeff"]), _parse(k["calib_volume_bound"]))
                for k in c["classes"]
            )
            comps.append(
                GluingComponent(
                    name=c["name"],
                    singularity_type=c["singularity_type"],
                    classes=classes,
                    delta_trivial=bool(c["delta_trivial"]),
                    metric_dominated=bool(c["metric_dominated"]),
                )
            )
        pairing = obj.get("pairing")
        return cls(
            T=_parse(obj["T"]),
            V0=_parse(obj["V0"]),
            components=tuple(comps),
            b1_zero=bool(obj["b1_zero"]),
            metric_equivalence_dim4_factor=_parse(obj.get("metric_equivalence_dim4_factor", 4)),
            pairing=None if pairing is None else tuple(tuple(_parse(x) for x in row) for row in pairing),
        )


@dataclass(frozen=True)
class ClassEstimate:
    class_id: str
    sup_abs_first: sp.Expr
    end_abs_first: sp.Expr
    int_abs_second: sp.Expr


@dataclass(frozen=True)
class HypothesesReport:
    """Hypotheses (i)-(iii) of the finite-length criterion.

    (i) and (iii) echo the asserted flags; (ii) is verified exactly.
    """

    item_i: bool
    item_ii: bool
    item_iii: bool
    estimates: tuple[ClassEstimate, ...]
    failures: tuple[str, ...]

    @property
    def all_hold(self) -> bool:
        return self.item_i and self.item_ii and self.item_iii

    def to_json(self) -> dict:
        return {
            "i_b1_zero_and_delta_trivial": {"holds": self.item_i, "source": "asserted"},
            "ii_period_derivatives": {
                "holds": self.item_ii,
                "source": "verified exactly",
                "classes": {
                    e.class_id: {
                        "sup_abs_first_derivative": _json_number(e.sup_abs_first),
                        "abs_first_derivative_at_T": _json_number(e.end_abs_first),
                        "integral_abs_second_derivative": _json_number(e.int_abs_second),
                    }
                    for e in self.estimates
                },
            },
            "iii_metric_dominated": {"holds": self.item_iii, "source": "asserted"},
            "failures": list(self.failures),
        }


def check_hypotheses(model: KummerModel) -> HypothesesReport:
    failures = []
    item_i = model.b1_zero and all(c.delta_trivial for c in model.components)
    if not model.b1_zero:
        failures.append("(i) b1(M) = 0 is not asserted")
    for c in model.components:
        if not c.delta_trivial:
            failures.append(f"(i) boundary map of component {c.name!r} is not asserted trivial")
    estimates = []
    item_ii = True
    for k in model.classes():
        est = ClassEstimate(
            k.class_id,
            k.coeff.sup_abs_derivative(model.T),
            sp.Abs(k.coeff.derivative(1).subs(_t, model.T)),
            k.coeff.int_abs_second(model.T),
        )
        # polynomials on a bounded interval: both quantities are finite
        if not (est.sup_abs_first.is_finite and est.int_abs_second.is_finite):
            item_ii = False
            failures.append(f"(ii) class {k.class_id!r} has unbounded derivative data")
        estimates.append(est)
    item_iii = all(c.metric_dominated for c in model.components)
    for c in model.components:
        if not c.metric_dominated:
            failures.append(f"(iii) metric domination not asserted on component {c.name!r}")
    return HypothesesReport(item_i, item_ii, item_iii, tuple(estimates), tuple(failures))


def g_bound(model: KummerModel, component: GluingComponent, class_id: str) -> sp.Expr:
    """Cap on |g_ij(t)|: factor times the calibrated volume bound of D_ij."""
    return model.metric_equivalence_dim4_factor * component.find(class_id).calib_volume_bound


def _class_caps(model: KummerModel) -> list[sp.Expr]:
    return [g_bound(model, comp, k.class_id) for comp in model.components for k in comp.classes]


def _weights(model: KummerModel) -> list[sp.Expr]:
    caps = _class_caps(model)
    p = model.pairing_matrix()
    return [sum((sp.Abs(p[a, b]) * caps[b] for b in range(len(caps))), sp.Integer(0)) for a in range(len(caps))]


@dataclass(frozen=True)
class Certificate:
    hypotheses: HypothesesReport
    C_bound: sp.Expr
    endpoint_term: sp.Expr
    A_integral: sp.Expr
    energy_bound: sp.Expr
    length_bound: sp.Expr
    T: sp.Expr
    valid: bool
    reasons: tuple[str, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "hypotheses": self.hypotheses.to_json(),
            "bounds": {
                "C_bound": _json_number(self.C_bound),
                "endpoint_term": _json_number(self.endpoint_term),
                "A_integral": _json_number(self.A_integral),
                "energy_bound": _json_number(self.energy_bound),
                "length_bound": _json_number(self.length_bound),
                "T": _json_number(self.T),
            },
            "valid": self.valid,
            "reasons": list(self.reasons),
        }

    def audit_lines(self) -> list[str]:
        h = self.hypotheses
        lines = [
            f"(i)   b1 = 0 and trivial boundary maps [asserted]: {'ok' if h.item_i else 'FAIL'}",
            f"(ii)  period derivatives bounded / integrable [exact]: {'ok' if h.item_ii else 'FAIL'}",
        ]
        for e in h.estimates:
            lines.append(
                f"      {e.class_id}: sup|f'| = {e.sup_abs_first}, |f'(T)| = {e.end_abs_first}, "
                f"int|f''| = {e.int_abs_second}"
            )
        lines += [
            f"(iii) metric domination [asserted]: {'ok' if h.item_iii else 'FAIL'}",
            f"C bound        = {self.C_bound}",
            f"endpoint term  = {self.endpoint_term}",
            f"A integral     = {self.A_integral}",
            f"energy bound   = {self.energy_bound}",
            f"length bound   = {self.length_bound}",
            f"certificate    : {'VALID' if self.valid else 'INVALID'}",
        ]
        lines += [f"reason: {r}" for r in self.reasons]
        return lines


def energy_upper_bound(model: KummerModel) -> Certificate:
    hyp = check_hypotheses(model)
    weights = _weights(model)
    c_bound = sum((w * e.sup_abs_first for w, e in zip(weights, hyp.estimates)), sp.Integer(0)) / model.V0
    end = sum((w * e.end_abs_first for w, e in zip(weights, hyp.estimates)), sp.Integer(0)) / model.V0
    a_int = sum((w * e.int_abs_second for w, e in zip(weights, hyp.estimates)), sp.Integer(0)) / model.V0
    energy = sp.simplify(c_bound + end + a_int)
    length = sp.sqrt(model.T * energy)
    return Certificate(
        hypotheses=hyp,
        C_bound=sp.simplify(c_bound),
        endpoint_term=sp.simplify(end),
        A_integral=sp.simplify(a_int),
        energy_bound=energy,
        length_bound=length,
        T=model.T,
        valid=hyp.all_hold and energy.is_finite,
        reasons=hyp.failures,
    )


@dataclass(frozen=True)
class CrossCheck:
    taus: tuple[float, ...]
    energies: tuple[float, ...]
    termwise: tuple[float, ...]
    energy_bound: float
    max_excess: float
    dominated: bool


def cross_check_with_path_geometry(
    model: KummerModel,
    synthetic_g: Mapping[str, Callable[[float], float]],
    taus: Sequence[float] | None = None,
    volume: Callable[[float], float] | None = None,
    cap_samples: int = 2048,
    nodes: int = 16,
) -> CrossCheck:
    """Evaluate the boundary-term energy with user-supplied g_ij(t) profiles.

    The profiles must respect their caps on samples; the volume defaults to
    the lower bound V0 (the worst case).  Both the signed energy and the
    termwise sum |h(tau)| + |h(T)| + ∫|accel| are compared with the
    certificate bound; ``max_excess`` is the larger overshoot across ``taus``.
    """
    classes = model.classes()
    caps = [float(c) for c in _class_caps(model)]
    T = float(model.T)
    V0 = float(model.V0)
    volume = volume or (lambda t: V0)
    pairing = np.array(model.pairing_matrix().tolist(), dtype=float)
    profiles = [synthetic_g.get(k.class_id, lambda t: 0.0) for k in classes]
    d1 = [sp.lambdify(_t, k.coeff.derivative(1), "math") for k in classes]
    d2 = [sp.lambdify(_t, k.coeff.derivative(2), "math") for k in classes]

    for t in T * np.geomspace(1e-6, 1.0, cap_samples):
        for k, g, cap in zip(classes, profiles, caps):
            if abs(g(float(t))) > cap * (1 + 1e-12):
                raise ValueError(f"synthetic g for class {k.class_id!r} exceeds its cap {cap:g} at t={t:g}")

    def pairing_with(derivs, t):
        f = np.array([float(d(t)) for d in derivs])
        g = np.array([float(p(t)) for p in profiles])
        return float(f @ pairing @ g) / volume(t)

    taus = tuple(float(x) for x in (taus if taus is not None else T * 2.0 ** -np.arange(0, 21)))
    bound = float(energy_upper_bound(model).energy_bound)
    energies, termwise = [], []
    for tau in taus:
        if tau >= T:
            energies.append(0.0)
            termwise.append(0.0)
            continue
        both = composite_gauss_legendre(
            lambda s: np.array([pairing_with(d2, s), abs(pairing_with(d2, s))]), tau, T, nodes=nodes, segments=64
        )
        low, high = pairing_with(d1, tau), pairing_with(d1, T)
        energies.append(low - high + float(both[0]))
        termwise.append(abs(low) + abs(high) + float(both[1]))
    excess = max(max(abs(e) for e in energies), max(termwise)) - bound
    return CrossCheck(taus, tuple(energies), tuple(termwise), bound, float(excess), bool(excess <= 1e-9))
