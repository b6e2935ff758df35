"""Volume, Hessian potential and boundary distances on a toy Kähler cone.

Volumes come from a symmetric n-linear intersection form Q:
Vol(w) = Q(w, ..., w) / n!.  The metric is the Hessian of -log Vol.  The
"cone" is the connected positive-volume component containing a reference
class; no analytic cycles are modelled.

Along a segment w_t = alpha + t*omega the energy has the closed form
h(tau) - h(1) with h(t) = Q(omega, w_t, ..., w_t) / ((n-1)! Vol(w_t)).
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "IntersectionForm",
    "LengthSeries",
    "SegmentExitsCone",
    "classify_boundary",
    "hessian_along",
    "in_cone",
    "length_series",
    "segment_energy",
    "segment_energy_quadrature",
    "segment_length",
    "volume",
]

NULL_TOL = 1e-12


class SegmentExitsCone(ValueError):
    def __init__(self, t: float):
        super().__init__(f"segment leaves the positive cone at t={t:g}")
        self.t = t


@dataclass(frozen=True, eq=False)
class IntersectionForm:
    """Fully symmetric n-linear form on R^r stored as a dense array."""

    rank: int
    n: int
    tensor: np.ndarray

    def __post_init__(self) -> None:
        if not 2 <= self.n <= 3:
            raise ValueError("total degree n must be 2 or 3")
        if not 1 <= self.rank <= 8:
            raise ValueError("rank must be in 1..8")
        t = np.array(self.tensor, dtype=float)
        if t.shape != (self.rank,) * self.n:
            raise ValueError(f"tensor must have shape {(self.rank,) * self.n}")
        for perm in itertools.permutations(range(self.n)):
            if not np.array_equal(t, t.transpose(perm)):
                raise ValueError("intersection tensor is not symmetric")
        t.flags.writeable = False
        object.__setattr__(self, "tensor", t)

    @classmethod
    def from_entries(cls, rank: int, n: int, entries: Sequence[tuple[Sequence[int], float]]) -> IntersectionForm:
        """Build from (index tuple, value) pairs; every permutation gets the value."""
        t = np.zeros((rank,) * n)
        seen: dict[tuple[int, ...], float] = {}
        for idx, value in entries:
            key = tuple(sorted(int(i) for i in idx))
            if len(key) != n:
                raise ValueError(f"index tuple {idx!r} has the wrong length")
            if key in seen and seen[key] != value:
                raise ValueError(f"conflicting values for indices {key}")
            seen[key] = value
            for perm in set(itertools.permutations(key)):
                t[perm] = value
        return cls(rank, n, t)

    @classmethod
    def hyperbolic(cls) -> IntersectionForm:
        """r = 2, n = 2 with Q((x, y), (x', y')) = x y' + x' y."""
        return cls.from_entries(2, 2, [((0, 1), 1.0)])

    def __call__(self, *vectors) -> float:
        if len(vectors) != self.n:
            raise ValueError(f"needs {self.n} arguments")
        out = self.tensor
        for v in vectors:
            out = np.tensordot(out, np.asarray(v, dtype=float), axes=([0], [0]))
        return float(out)

    def to_json(self) -> dict:
        entries = []
        for idx in itertools.combinations_with_replacement(range(self.rank), self.n):
            v = float(self.tensor[idx])
            if v != 0.0:
                entries.append({"indices": list(idx), "value": v})
        return {"rank": self.rank, "n": self.n, "entries": entries}

    @classmethod
    def from_json(cls, obj: Mapping) -> IntersectionForm:
        return cls.from_entries(
            int(obj["rank"]), int(obj["n"]), [(e["indices"], float(e["value"])) for e in obj["entries"]]
        )


def volume(w, Q: IntersectionForm) -> float:
    return Q(*([w] * Q.n)) / math.factorial(Q.n)


def in_cone(w, Q: IntersectionForm, reference, samples: int = 65) -> bool:
    """Positive volume, and joined to ``reference`` by a positive-volume segment."""
    w, ref = np.asarray(w, dtype=float), np.asarray(reference, dtype=float)
    if not volume(ref, Q) > 0:
        raise ValueError("reference class must have positive volume")
    for s in np.linspace(0.0, 1.0, samples):
        if not volume((1 - s) * ref + s * w, Q) > 0:
            return False
    return True


def classify_boundary(alpha, Q: IntersectionForm) -> str:
    """'infinite' if the boundary class has zero volume, 'finite' otherwise."""
    v = volume(alpha, Q)
    if v < -NULL_TOL:
        raise ValueError(f"volume {v:g} < 0: not a boundary class of the positive component")
    return "infinite" if abs(v) <= NULL_TOL else "finite"


def _polarised(Q: IntersectionForm, omega, w, k: int) -> float:
    """Q(omega (k times), w (n-k times))."""
    return Q(*([omega] * k + [w] * (Q.n - k)))


def _h(alpha, omega, Q: IntersectionForm, t: float) -> float:
    w = alpha + t * omega
    return _polarised(Q, omega, w, 1) / (math.factorial(Q.n - 1) * volume(w, Q))


def hessian_along(alpha, omega, Q: IntersectionForm, t: float) -> float:
    """Second t-derivative of -log Vol(alpha + t omega)."""
    w = np.asarray(alpha, dtype=float) + t * np.asarray(omega, dtype=float)
    vol = volume(w, Q)
    d1 = _polarised(Q, omega, w, 1) / math.factorial(Q.n - 1)
    d2 = _polarised(Q, omega, w, 2) / math.factorial(Q.n - 2)
    return (d1 / vol) ** 2 - d2 / vol


def _check_segment(alpha, omega, Q: IntersectionForm, tau: float, samples: int = 65) -> None:
    if not 0 <= tau <= 1:
        raise ValueError("tau must lie in [0, 1]")
    for t in np.linspace(tau, 1.0, samples):
        if not volume(alpha + t * omega, Q) > 0:
            raise SegmentExitsCone(float(t))


def segment_energy(alpha, omega, Q: IntersectionForm, tau: float) -> float:
    """Closed-form energy of t -> alpha + t*omega over (tau, 1]."""
    alpha, omega = np.asarray(alpha, dtype=float), np.asarray(omega, dtype=float)
    if tau == 1:
        return 0.0
    _check_segment(alpha, omega, Q, tau)
    return _h(alpha, omega, Q, tau) - _h(alpha, omega, Q, 1.0)


def _quad(fn, tau: float) -> float:
    # substitute t = e^s when tau > 0: power-law integrands become smooth
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=500)
    if tau > 0:
        value, _ = integrate.quad(lambda s: fn(math.exp(s)) * math.exp(s), math.log(tau), 0.0, **opts)
    else:
        value, _ = integrate.quad(fn, 0.0, 1.0, **opts)
    return value


def segment_energy_quadrature(alpha, omega, Q: IntersectionForm, tau: float) -> float:
    """Energy by adaptive quadrature of the Hessian of -log Vol."""
    alpha, omega = np.asarray(alpha, dtype=float), np.asarray(omega, dtype=float)
    if tau == 1:
        return 0.0
    _check_segment(alpha, omega, Q, max(tau, 1e-300))
    return _quad(lambda t: hessian_along(alpha, omega, Q, t), tau)


def segment_length(alpha, omega, Q: IntersectionForm, tau: float) -> float:
    alpha, omega = np.asarray(alpha, dtype=float), np.asarray(omega, dtype=float)
    if tau == 1:
        return 0.0
    _check_segment(alpha, omega, Q, max(tau, 1e-300))

    def speed(t):
        q = hessian_along(alpha, omega, Q, t)
        if q < -1e-12 * max(1.0, abs(q)):
            raise ValueError(f"Hessian of -log Vol is negative at t={t:g}")
        return math.sqrt(max(q, 0.0))

    return _quad(speed, tau)


@dataclass(frozen=True)
class LengthSeries:
    taus: tuple[float, ...]
    energies: tuple[float, ...]
    lengths: tuple[float, ...]
    classification: str
    log_slope: float

    def to_csv(self, fmt: str = ".17g") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tau", "energy", "length"])
        for row in zip(self.taus, self.energies, self.lengths):
            w.writerow([format(x, fmt) for x in row])
        return buf.getvalue()


def length_series(alpha, omega, Q: IntersectionForm, taus: Sequence[float]) -> LengthSeries:
    """Energies and lengths over (tau, 1] for decreasing tau.

    ``log_slope`` is d(length)/d(log 1/tau) over the last two samples:
    close to 0 when the length stabilises, positive for logarithmic growth.
    """
    taus = tuple(float(t) for t in taus)
    energies = tuple(segment_energy(alpha, omega, Q, t) for t in taus)
    lengths = tuple(segment_length(alpha, omega, Q, t) for t in taus)
    if len(taus) >= 2 and taus[-1] > 0 and taus[-2] > 0 and taus[-1] != taus[-2]:
        slope = (lengths[-1] - lengths[-2]) / (math.log(taus[-2]) - math.log(taus[-1]))
    else:
        slope = 0.0
    return LengthSeries(taus, energies, lengths, classify_boundary(alpha, Q), float(slope))
