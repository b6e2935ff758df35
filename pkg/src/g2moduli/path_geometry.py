"""Energy and length of paths of torus moduli points.

Two quadratic forms can measure the speed of a path on the torus testbed:

* ``"hessian-form"``: the second derivative of F = -3 log Vol.  It is
  indefinite on the torus (seven negative directions) but it is the form
  for which the boundary-term energy identity is exact.
* ``"l2-pairing"``: the volume-normalised L2 pairing, always positive.

Every report records which one was integrated.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exterior7 import Form, evaluate, top_coefficient, wedge
from .g2_point import G2PointData, g2_point
from .torus_moduli import Lattice, TorusModuliPoint, hessian_form, l2_pairing, potential_F

__all__ = [
    "FlatCycle4",
    "FluxSeries",
    "ImproperEnergy",
    "ModuliPath",
    "PathReport",
    "QuadratureError",
    "QuadratureSpec",
    "Verdict",
    "affine_path",
    "cauchy_schwarz_check",
    "composite_gauss_legendre",
    "corollary22_check",
    "cycle_flux_and_volume",
    "energy_direct",
    "energy_via_prop21",
    "exponential_path",
    "h_function",
    "improper_energy",
    "integrate",
    "path_length",
    "path_report",
    "pd_flux_monitor",
    "polynomial_path",
    "potential_second_differences",
    "power_path",
    "speed_squared",
]

FORMS = ("hessian-form", "l2-pairing")

FormLike = Form | np.ndarray


class QuadratureError(RuntimeError):
    """Node doubling did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


def _as_three_form(value: FormLike) -> Form:
    return value if isinstance(value, Form) else Form(3, np.asarray(value, dtype=float))


@dataclass(frozen=True, eq=False)
class ModuliPath:
    """A C^2 family of constant 3-forms on a fixed lattice.

    ``phi_of``, ``dphi_of`` and ``ddphi_of`` return the form and its first
    and second t-derivatives (as ``Form`` or a 35-vector).  The derivatives
    are checked against finite differences of ``phi_of`` on construction.
    """

    t_low: float
    t_high: float
    phi_of: Callable[[float], FormLike]
    dphi_of: Callable[[float], FormLike]
    ddphi_of: Callable[[float], FormLike]
    lattice: Lattice = field(default_factory=Lattice.unit)
    validate: bool = True

    def __post_init__(self) -> None:
        if not self.t_low < self.t_high:
            raise ValueError("path domain needs t_low < t_high")
        if self.validate:
            self._validate()

    def _validate(self) -> None:
        span = self.t_high - self.t_low
        h = 1e-4 * span
        for frac in (0.13, 0.31, 0.5, 0.77, 0.97):
            t = self.t_low + frac * span
            phi = self.phi(t)
            g2_point(phi)  # raises if not positive
            plus, minus = self.phi(t + h).coefficients, self.phi(t - h).coefficients
            scale = max(phi.norm(), 1e-300)
            d_fd = (plus - minus) / (2 * h)
            dd_fd = (plus - 2 * phi.coefficients + minus) / (h * h)
            for name, supplied, fd in (
                ("first", self.dphi(t).coefficients, d_fd),
                ("second", self.ddphi(t).coefficients, dd_fd),
            ):
                err = np.linalg.norm(supplied - fd)
                if err > 1e-5 * max(np.linalg.norm(supplied), scale):
                    raise ValueError(
                        f"supplied {name} derivative disagrees with finite differences at t={t:g} "
                        f"(error {err:.3g})"
                    )

    def phi(self, t: float) -> Form:
        return _as_three_form(self.phi_of(t))

    def dphi(self, t: float) -> Form:
        return _as_three_form(self.dphi_of(t))

    def ddphi(self, t: float) -> Form:
        return _as_three_form(self.ddphi_of(t))

    def point(self, t: float) -> TorusModuliPoint:
        return TorusModuliPoint(self.lattice, self.phi(t))

    def contains(self, t: float) -> bool:
        return self.t_low <= t <= self.t_high


def affine_path(base: Form, direction: Form, t_low: float, t_high: float, lattice: Lattice | None = None) -> ModuliPath:
    """phi_t = base + t * direction."""
    zero = Form.zero(3)
    return ModuliPath(
        t_low,
        t_high,
        lambda t: base + t * direction,
        lambda t: direction,
        lambda t: zero,
        lattice or Lattice.unit(),
    )


def exponential_path(phi: Form, t_low: float, t_high: float, rate: float = 1.0, lattice: Lattice | None = None) -> ModuliPath:
    """phi_t = exp(rate * t) * phi."""
    return ModuliPath(
        t_low,
        t_high,
        lambda t: math.exp(rate * t) * phi,
        lambda t: rate * math.exp(rate * t) * phi,
        lambda t: rate * rate * math.exp(rate * t) * phi,
        lattice or Lattice.unit(),
    )


def power_path(phi: Form, power: float, t_low: float, t_high: float, lattice: Lattice | None = None) -> ModuliPath:
    """phi_t = t**power * phi, for t > 0."""
    p = float(power)
    return ModuliPath(
        t_low,
        t_high,
        lambda t: t**p * phi,
        lambda t: p * t ** (p - 1) * phi,
        lambda t: p * (p - 1) * t ** (p - 2) * phi,
        lattice or Lattice.unit(),
    )


def polynomial_path(coefficients: Sequence[Form], t_low: float, t_high: float, lattice: Lattice | None = None) -> ModuliPath:
    """phi_t = sum_k coefficients[k] * t**k."""
    c = np.array([f.coefficients for f in coefficients])
    powers = np.arange(len(c))

    def phi(t):
        return (t ** powers) @ c

    def dphi(t):
        w = np.where(powers >= 1, powers * t ** np.maximum(powers - 1, 0), 0.0)
        return w @ c

    def ddphi(t):
        w = np.where(powers >= 2, powers * (powers - 1) * t ** np.maximum(powers - 2, 0), 0.0)
        return w @ c

    return ModuliPath(t_low, t_high, phi, dphi, ddphi, lattice or Lattice.unit())


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_segment: int = 16
    segments: int = 64
    target_rel_tol: float = 1e-8
    max_doublings: int = 3

    def __post_init__(self) -> None:
        if self.nodes_per_segment < 1 or self.segments < 1:
            raise ValueError("quadrature counts must be positive")


def _segment_edges(a: float, b: float, segments: int) -> np.ndarray:
    # geometric refinement toward the lower end, where model paths degenerate
    if a > 0:
        return np.geomspace(a, b, segments + 1)
    if a == 0 and b > 0:
        return np.concatenate([[0.0], b * 0.5 ** np.arange(segments - 1, -1, -1.0)])
    return np.linspace(a, b, segments + 1)


def composite_gauss_legendre(
    fn: Callable[[float], float | np.ndarray],
    a: float,
    b: float,
    nodes: int = 16,
    segments: int = 64,
) -> np.ndarray:
    """Composite Gauss-Legendre rule; ``fn`` may return a vector."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = _segment_edges(a, b, segments)
    lo, hi = edges[:-1, None], edges[1:, None]
    ts = (0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)).reshape(-1)
    weights = (0.5 * (hi - lo) * w[None, :]).reshape(-1)
    values = np.array([np.atleast_1d(fn(float(t))) for t in ts])
    return np.sum(weights[:, None] * values, axis=0)


def integrate(fn: Callable[[float], float | np.ndarray], a: float, b: float, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Integrate with node doubling until successive results agree."""
    quad = quad or QuadratureSpec()
    if a == b:
        return np.atleast_1d(fn(a)) * 0.0
    nodes = quad.nodes_per_segment
    prev = composite_gauss_legendre(fn, a, b, nodes, quad.segments)
    achieved = math.inf
    for _ in range(quad.max_doublings):
        nodes *= 2
        cur = composite_gauss_legendre(fn, a, b, nodes, quad.segments)
        if np.any(np.isnan(cur)):
            return cur
        diff = np.abs(cur - prev)
        scale = np.maximum(np.abs(cur), 1e-300)
        achieved = float(np.max(np.where(diff == 0, 0.0, diff / scale)))
        if np.all((diff <= quad.target_rel_tol * np.abs(cur)) | (diff <= 1e-15)):
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature did not reach rel tol {quad.target_rel_tol:g}; achieved {achieved:.3g}",
        achieved,
    )


def _check_interval(path: ModuliPath, tau: float, T: float) -> None:
    if not (path.t_low <= tau <= T <= path.t_high):
        raise ValueError(f"[{tau}, {T}] is not inside the path domain [{path.t_low}, {path.t_high}]")


def _pairing_with_theta(g2: G2PointData, eta: Form) -> float:
    """(1/Vol) * integral of eta ∧ Theta over the torus."""
    return top_coefficient(wedge(eta, g2.theta)) / g2.density


def h_function(path: ModuliPath, t: float) -> float:
    """(1/Vol(phi_t)) ∫ phi_t' ∧ Theta(phi_t); equals -dF(phi_t')."""
    if not path.contains(t):
        raise ValueError(f"t={t} outside the path domain")
    pt = path.point(t)
    return _pairing_with_theta(pt.g2, path.dphi(t))


def speed_squared(path: ModuliPath, t: float, form_used: str = "hessian-form") -> float:
    pt = path.point(t)
    v = path.dphi(t)
    if form_used == "hessian-form":
        return hessian_form(pt, v, v)
    if form_used == "l2-pairing":
        return l2_pairing(pt, v, v)
    raise ValueError(f"unknown form {form_used!r}; expected one of {FORMS}")


def energy_direct(
    path: ModuliPath, tau: float, T: float, form_used: str = "hessian-form", quad: QuadratureSpec | None = None
) -> float:
    _check_interval(path, tau, T)
    return float(integrate(lambda t: speed_squared(path, t, form_used), tau, T, quad)[0])


def path_length(
    path: ModuliPath, tau: float, T: float, form_used: str = "l2-pairing", quad: QuadratureSpec | None = None
) -> float:
    """Length; NaN if the chosen form is negative somewhere along the path."""
    _check_interval(path, tau, T)

    def root_speed(t):
        q = speed_squared(path, t, form_used)
        return math.sqrt(q) if q >= 0 else math.nan

    value = float(integrate(root_speed, tau, T, quad)[0]) if tau < T else 0.0
    return value


@dataclass(frozen=True)
class PathReport:
    tau: float
    T: float
    form_used: str
    energy_direct: float
    length: float
    form_positive: bool
    energy_prop21: float = math.nan
    boundary_term_low: float = math.nan
    boundary_term_high: float = math.nan
    integral_term: float = math.nan
    residual: float = math.nan

    def to_json(self) -> dict:
        return {k: (v if not isinstance(v, float) else float(v)) for k, v in self.__dict__.items()}


def _local_terms(path: ModuliPath, t: float, form_used: str) -> np.ndarray:
    pt = path.point(t)
    v, a = path.dphi(t), path.ddphi(t)
    q = hessian_form(pt, v, v) if form_used == "hessian-form" else l2_pairing(pt, v, v)
    accel = _pairing_with_theta(pt.g2, a)
    return np.array([q, accel, min(q, 0.0), math.sqrt(abs(q))])


def path_report(
    path: ModuliPath, tau: float, T: float, form_used: str = "hessian-form", quad: QuadratureSpec | None = None
) -> PathReport:
    """Energy by direct quadrature together with the boundary-term formula.

    The boundary-term energy h(tau) - h(T) + ∫ (1/Vol) ∫ phi'' ∧ Theta dt is
    always computed; it matches ``energy_direct`` for the Hessian form.
    The length is NaN when the form goes negative along the path.
    """
    if form_used not in FORMS:
        raise ValueError(f"unknown form {form_used!r}; expected one of {FORMS}")
    _check_interval(path, tau, T)
    low, high = h_function(path, tau), -h_function(path, T)
    if tau == T:
        energy = length = integral = 0.0
        positive = True
    else:
        energy, integral, negative_part, root = integrate(
            lambda t: _local_terms(path, t, form_used), tau, T, quad
        )
        positive = negative_part >= 0
        length = root if positive else math.nan
    prop21 = low + high + integral
    residual = abs(energy - prop21) if form_used == "hessian-form" else math.nan
    return PathReport(
        tau=tau,
        T=T,
        form_used=form_used,
        energy_direct=float(energy),
        length=float(length),
        form_positive=bool(positive),
        energy_prop21=float(prop21),
        boundary_term_low=float(low),
        boundary_term_high=float(high),
        integral_term=float(integral),
        residual=float(residual),
    )


def energy_via_prop21(path: ModuliPath, tau: float, T: float, quad: QuadratureSpec | None = None) -> PathReport:
    return path_report(path, tau, T, "hessian-form", quad)


def cauchy_schwarz_check(report: PathReport, duration: float | None = None, tol: float = 1e-9) -> bool:
    """length^2 <= duration * energy (duration defaults to T - tau)."""
    duration = report.T - report.tau if duration is None else duration
    if not report.form_positive or math.isnan(report.length):
        raise ValueError("Cauchy-Schwarz needs a form that is positive along the path")
    return bool(report.length**2 <= duration * report.energy_direct + tol)


@dataclass(frozen=True)
class Verdict:
    hypotheses_hold_on_samples: bool
    energy_bound: float
    length_bound: float
    witness_t: float | None = None
    witness: str | None = None
    samples: int = 0
    sample_based: bool = True

    def __bool__(self) -> bool:
        return self.hypotheses_hold_on_samples


def _sample_times(path: ModuliPath, samples: int) -> np.ndarray:
    span = path.t_high - path.t_low
    return path.t_low + span * np.geomspace(2.0**-40, 1.0, samples)


def corollary22_check(
    path: ModuliPath,
    C: float,
    A_integral_bound: float,
    A: Callable[[float], float] | None = None,
    samples: int = 1024,
) -> Verdict:
    """Check the two pairing bounds on samples and emit E <= 2C + ∫A.

    ``A`` defaults to the constant with integral ``A_integral_bound`` over
    the domain.  The verdict is only as strong as the samples (geometric
    toward ``t_low``).
    """
    span = path.t_high - path.t_low
    if A is None:
        level = A_integral_bound / span
        A = lambda t: level  # noqa: E731
    for t in _sample_times(path, samples):
        pt = path.point(float(t))
        first = abs(_pairing_with_theta(pt.g2, path.dphi(t)))
        if first > C * (1 + 1e-12) + 1e-12:
            return Verdict(False, math.inf, math.inf, float(t), f"|h(t)| = {first:.6g} > C", samples)
        second = abs(_pairing_with_theta(pt.g2, path.ddphi(t)))
        if second > A(float(t)) * (1 + 1e-12) + 1e-12:
            return Verdict(False, math.inf, math.inf, float(t), f"second-derivative pairing {second:.6g} > A(t)", samples)
    energy = 2.0 * C + A_integral_bound
    return Verdict(True, energy, math.sqrt(span * energy), samples=samples)


@dataclass(frozen=True, eq=False)
class FlatCycle4:
    """Flat 4-torus spanned by integer combinations of the lattice basis.

    ``coefficients`` is 4x7: row k gives the k-th spanning vector in
    lattice-basis coordinates.
    """

    coefficients: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.coefficients)
        if c.shape != (4, 7):
            raise ValueError("a 4-cycle needs 4 spanning vectors in lattice coordinates")
        if not np.all(c == np.round(c)):
            raise ValueError("spanning vectors must be integer combinations of the lattice basis")
        c = c.astype(np.int64)
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    def vectors(self, lattice: Lattice) -> np.ndarray:
        """7x4 array whose columns are the spanning vectors."""
        return lattice.basis @ self.coefficients.T


def cycle_flux_and_volume(cycle: FlatCycle4, at: TorusModuliPoint) -> tuple[float, float]:
    v = cycle.vectors(at.lattice)
    if np.linalg.matrix_rank(v) < 4:
        raise ValueError("cycle spanning vectors are linearly dependent")
    g2 = at.g2
    flux = float(evaluate(g2.theta, v))
    volume = float(math.sqrt(np.linalg.det(v.T @ g2.metric @ v)))
    return flux, volume


@dataclass(frozen=True)
class FluxSeries:
    t: tuple[float, ...]
    flux: tuple[float, ...]
    flux_over_volume: tuple[float, ...]
    volume: tuple[float, ...]
    volume_exponent: float
    flux_exponent: float
    branch: str
    triggered: bool

    def to_csv(self, fmt: str = ".17g") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "flux", "flux_over_volume", "volume"])
        for row in zip(self.t, self.flux, self.flux_over_volume, self.volume):
            w.writerow([format(x, fmt) for x in row])
        return buf.getvalue()


def _log_slope(t: np.ndarray, y: np.ndarray) -> float:
    mask = (t > 0) & (y > 0)
    if mask.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(t[mask]), np.log(y[mask]), 1)[0])


def pd_flux_monitor(
    path: ModuliPath, direction_class: Form, t_samples: Sequence[float], exponent_threshold: float = 0.25
) -> FluxSeries:
    """Track the calibrated lower bound on the volume of PD[phi'] along an affine path.

    The flux |∫ phi' ∧ Theta(phi_t)| bounds the volume of every 4-cycle
    representing the Poincare dual of phi' from below.  Growth exponents are
    fitted on the smallest quarter of the samples:

    * volume ~ t^p with p > threshold: ``volume-collapse`` (infinite distance
      through the volume factor);
    * otherwise flux ~ t^-q with q > threshold: ``flux-divergence``, the
      necessary condition for infinite distance is triggered;
    * otherwise ``bounded``.
    """
    ts = np.sort(np.asarray(t_samples, dtype=float))
    for t in ts:
        if not np.allclose(path.dphi(float(t)).coefficients, direction_class.coefficients, atol=1e-12, rtol=1e-10):
            raise ValueError(f"path velocity at t={t:g} differs from the supplied class; not affine")
    cov = path.lattice.covolume
    flux, vol = [], []
    for t in ts:
        g2 = path.point(float(t)).g2
        flux.append(abs(cov * top_coefficient(wedge(direction_class, g2.theta))))
        vol.append(cov * g2.density)
    flux_a, vol_a = np.array(flux), np.array(vol)
    tail = max(2, len(ts) // 4)
    p = _log_slope(ts[:tail], vol_a[:tail])
    q = -_log_slope(ts[:tail], flux_a[:tail])
    if p > exponent_threshold:
        branch = "volume-collapse"
    elif q > exponent_threshold:
        branch = "flux-divergence"
    else:
        branch = "bounded"
    return FluxSeries(
        t=tuple(float(x) for x in ts),
        flux=tuple(float(x) for x in flux_a),
        flux_over_volume=tuple(float(x) for x in flux_a / vol_a),
        volume=tuple(float(x) for x in vol_a),
        volume_exponent=p,
        flux_exponent=q,
        branch=branch,
        triggered=branch == "flux-divergence",
    )


@dataclass(frozen=True)
class ImproperEnergy:
    value: float
    converged: bool
    levels: int
    growth_exponent: float
    partial_sums: tuple[float, ...]


def improper_energy(
    path: ModuliPath,
    T: float,
    form_used: str = "l2-pairing",
    quad: QuadratureSpec | None = None,
    max_levels: int = 40,
) -> ImproperEnergy:
    """Energy over (t_low, T] as a limit over tau_k = t_low + (T - t_low) 2^-k.

    Stops once three consecutive dyadic pieces are below the relative
    target.  When it does not converge the fitted exponent s of
    piece_k ~ 2^(s k) is reported (s > 0: power divergence, s ~ 0: log).
    """
    quad = quad or QuadratureSpec(nodes_per_segment=16, segments=2)
    span = T - path.t_low
    total, small, pieces, sums = 0.0, 0, [], []
    for k in range(max_levels):
        hi = path.t_low + span * 2.0**-k
        lo = path.t_low + span * 2.0 ** -(k + 1)
        piece = float(integrate(lambda t: speed_squared(path, t, form_used), lo, hi, quad)[0])
        total += piece
        pieces.append(piece)
        sums.append(total)
        small = small + 1 if abs(piece) <= quad.target_rel_tol * abs(total) else 0
        if small >= 3:
            return ImproperEnergy(total, True, k + 1, 0.0, tuple(sums))
    tail = np.abs(np.array(pieces[-8:]))
    ks = np.arange(len(pieces))[-8:]
    growth = float(np.polyfit(ks, np.log2(np.maximum(tail, 1e-300)), 1)[0])
    return ImproperEnergy(total, False, max_levels, growth, tuple(sums))


def potential_second_differences(path: ModuliPath, ts: Sequence[float]) -> np.ndarray:
    """Second differences of F(phi_t) on an equally spaced grid ``ts``."""
    f = np.array([potential_F(path.point(float(t))) for t in ts])
    return f[2:] - 2 * f[1:-1] + f[:-2]
