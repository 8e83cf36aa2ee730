"""Point-delay linear operators and their imaginary spectrum.

A linear part ``L z_t = sum_k b_k z(t + theta_k)`` has characteristic
function ``Delta(lam) = lam - sum_k b_k exp(lam theta_k)``.  This module
designs such operators so that a prescribed set of imaginary numbers are
roots, counts roots by the argument principle, and builds the adjoint
normalization used by every projection onto the center space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ._kernels import char_values

R_CHECK = 50
RELATION_TOL = 1e-9


class SpectrumError(ValueError):
    """Spectral hypothesis violated; ``report`` holds the diagnostics."""

    def __init__(self, message: str, report: "SpectrumReport | None" = None):
        super().__init__(message)
        self.report = report


class DesignError(ValueError):
    pass


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class SpectrumSpec:
    p: int
    includes_zero: bool
    omegas: Tuple[float, ...]
    r: float
    r_check: int = R_CHECK

    def __post_init__(self):
        omegas = tuple(float(w) for w in self.omegas)
        object.__setattr__(self, "omegas", omegas)
        if self.p < 0 or len(omegas) != self.p:
            raise ValueError(f"expected {self.p} frequencies, got {len(omegas)}")
        if self.p == 0 and not self.includes_zero:
            raise ValueError("empty spectrum")
        if any(w <= 0 for w in omegas):
            raise ValueError("frequencies must be positive")
        if len(set(omegas)) != len(omegas):
            raise ValueError("frequencies must be pairwise distinct")
        if not self.r > 0:
            raise ValueError("delay horizon r must be positive")
        relation = integer_relation(omegas, self.r_check)
        if relation is not None:
            raise ValueError(f"frequencies satisfy the integer relation {relation} (|sum| <= {RELATION_TOL})")

    @property
    def kappa(self) -> int:
        return 2 * self.p + int(self.includes_zero)

    @property
    def d(self) -> int:
        return self.p + int(self.includes_zero)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Diagonal of B in slot order (0?, i w1, -i w1, ...)."""
        out = [0j] if self.includes_zero else []
        for w in self.omegas:
            out += [1j * w, -1j * w]
        return np.array(out, dtype=complex)

    def to_json(self) -> dict:
        return {"p": self.p, "includesZero": self.includes_zero, "omegas": list(self.omegas), "r": self.r}


def integer_relation(omegas: Sequence[float], bound: int = R_CHECK):
    """Search sum n_j w_j = 0 with 0 < max|n_j| <= bound; return n or None.

    This is a bounded heuristic, not a proof of rational independence.
    """
    w = np.asarray(omegas, dtype=float)
    p = w.size
    if p < 2:
        return None
    # keep the search to ~1e7 candidates
    while (2 * bound + 1) ** (p - 1) > 10_000_000 and bound > 1:
        bound //= 2
    rng = np.arange(-bound, bound + 1)
    # fix n_1 >= 0 by symmetry; enumerate the rest on a grid
    tail = np.array(np.meshgrid(*([rng] * (p - 1)), indexing="ij")).reshape(p - 1, -1)
    partial = w[1:] @ tail
    for n1 in range(0, bound + 1):
        vals = np.abs(n1 * w[0] + partial)
        nonzero = (n1 != 0) | np.any(tail != 0, axis=0)
        hit = np.nonzero((vals <= RELATION_TOL) & nonzero)[0]
        if hit.size:
            return (n1,) + tuple(int(x) for x in tail[:, hit[0]])
    return None


@dataclass(frozen=True)
class DelayLinearOperator:
    thetas: Tuple[float, ...]
    coeffs: Tuple[float, ...]

    def __post_init__(self):
        th = tuple(float(t) for t in self.thetas)
        bs = tuple(float(b) for b in self.coeffs)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "coeffs", bs)
        if not th or len(th) != len(bs):
            raise ValueError("need at least one (theta, b) term with matching lengths")
        if len(set(th)) != len(th):
            raise ValueError("delay positions must be pairwise distinct")
        if any(t > 0 for t in th):
            raise ValueError("delay positions must be <= 0")

    @classmethod
    def from_terms(cls, terms: Sequence[Tuple[float, float]]) -> "DelayLinearOperator":
        return cls(tuple(t for t, _ in terms), tuple(b for _, b in terms))

    @property
    def horizon(self) -> float:
        return -min(self.thetas)

    def char_value(self, lam: complex) -> Tuple[complex, complex]:
        d, dd = char_values(np.array(self.thetas), np.array(self.coeffs), np.array([lam], dtype=complex))
        return complex(d[0]), complex(dd[0])

    def char_values(self, lams) -> Tuple[np.ndarray, np.ndarray]:
        return char_values(np.array(self.thetas), np.array(self.coeffs), np.atleast_1d(lams))

    def apply(self, fn) -> complex:
        """L applied to a callable history fn(theta)."""
        return sum(b * fn(t) for t, b in zip(self.thetas, self.coeffs))

    def to_json(self) -> dict:
        return {"terms": [{"theta": t, "b": b} for t, b in zip(self.thetas, self.coeffs)]}

    @classmethod
    def from_json(cls, data: dict) -> "DelayLinearOperator":
        return cls.from_terms([(d["theta"], d["b"]) for d in data["terms"]])


@dataclass(frozen=True)
class AdjointVector:
    u0: float | None
    u: Tuple[complex, ...]

    @property
    def slots(self) -> np.ndarray:
        """Psi(0) as a vector in slot order (u0?, u1, conj u1, ...)."""
        out = [complex(self.u0)] if self.u0 is not None else []
        for uj in self.u:
            out += [complex(uj), complex(uj).conjugate()]
        return np.array(out, dtype=complex)

    def to_json(self) -> dict:
        return {"u0": self.u0, "u": [[z.real, z.imag] for z in self.u]}


def char_value(L: DelayLinearOperator, lam: complex) -> Tuple[complex, complex]:
    return L.char_value(lam)


# --------------------------------------------------------------------------
# design


def design_linear(spec: SpectrumSpec, positions: Sequence[float], verify: bool = True,
                  **verify_kwargs) -> DelayLinearOperator:
    """Coefficients b_k placing every element of the target spectrum on Delta = 0."""
    th = np.asarray(positions, dtype=float)
    if th.size == 0:
        raise DesignError("no delay positions given")
    if len(set(th.tolist())) != th.size:
        raise DesignError("delay positions must be pairwise distinct; choose different positions")
    if np.any(th > 0) or np.any(th < -spec.r - 1e-12):
        raise DesignError(f"delay positions must lie in [-{spec.r}, 0]")
    rows, rhs = [], []
    for w in spec.omegas:
        rows.append(-np.cos(w * th))
        rhs.append(0.0)
        rows.append(-np.sin(w * th))
        rhs.append(-w)
    if spec.includes_zero:
        rows.append(-np.ones_like(th))
        rhs.append(0.0)
    A = np.array(rows)
    y = np.array(rhs)
    sv = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    if rank < th.size:
        raise DesignError(f"design system is rank deficient (rank {rank} < {th.size} unknowns); "
                          "choose different delay positions")
    b, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.max(np.abs(A @ b - y)))
    if resid > 1e-9 * (1 + np.max(np.abs(y))):
        raise DesignError(f"design system is inconsistent (residual {resid:.3e}); "
                          "use as many positions as real conditions")
    L = DelayLinearOperator(tuple(th), tuple(b))
    if verify:
        verify_spectrum(L, spec, **verify_kwargs)
    return L


# --------------------------------------------------------------------------
# argument principle


def _contour_winding(L: DelayLinearOperator, re0, re1, im0, im1, max_step=0.25, max_points=400_000):
    corners = np.array([re0 + 1j * im0, re1 + 1j * im0, re1 + 1j * im1, re0 + 1j * im1])
    # parameter s in [0, 4): side k goes from corners[k] to corners[k+1]
    s = np.linspace(0.0, 4.0, 257)
    th = np.array(L.thetas)
    bs = np.array(L.coeffs)

    def points(s):
        k = np.minimum(np.floor(s).astype(int), 3)
        frac = s - k
        return corners[k] + frac * (corners[(k + 1) % 4] - corners[k])

    vals, _ = char_values(th, bs, points(s))
    while True:
        dphase = np.angle(vals[1:] / vals[:-1])
        bad = np.nonzero(np.abs(dphase) > max_step)[0]
        if bad.size == 0 or s.size > max_points:
            break
        mids = 0.5 * (s[bad] + s[bad + 1])
        mvals, _ = char_values(th, bs, points(mids))
        s = np.insert(s, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mvals)
    winding = float(np.sum(dphase)) / (2 * math.pi)
    return winding, float(np.min(np.abs(vals))), s.size


def count_roots_in_rectangle(L: DelayLinearOperator, re_range: Tuple[float, float],
                             im_range: Tuple[float, float], tol: float = 1e-8,
                             max_retries: int = 6) -> int:
    """Number of zeros of Delta inside the rectangle (argument principle)."""
    re0, re1 = map(float, re_range)
    im0, im1 = map(float, im_range)
    if not (re1 > re0 and im1 > im0):
        raise ValueError("degenerate rectangle")
    size = max(re1 - re0, im1 - im0)
    for attempt in range(max_retries + 1):
        jitter = attempt * 1e-4 * size * np.array([-1.0, 1.3, -0.7, 1.1])
        w, vmin, _ = _contour_winding(L, re0 + jitter[0], re1 + jitter[1], im0 + jitter[2], im1 + jitter[3])
        if vmin < tol:
            continue
        n = round(w)
        if abs(w - n) > 0.1:
            continue
        return int(n)
    raise SpectrumError("contour passes too close to a root; argument principle failed after retries")


@dataclass
class SpectrumReport:
    passed: bool
    strip_count: int
    expected: int
    delta: float
    omega_max: float
    roots: List[dict] = field(default_factory=list)
    messages: List[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "stripCount": self.strip_count,
            "expected": self.expected,
            "strip": {"delta": self.delta, "omegaMax": self.omega_max},
            "roots": self.roots,
            "messages": self.messages,
        }


def default_strip_height(L: DelayLinearOperator, spec: SpectrumSpec, delta: float) -> float:
    # any root with Re >= -delta obeys |lam| <= sum |b_k| exp(delta r)
    bound = sum(abs(b) for b in L.coeffs) * math.exp(delta * L.horizon)
    return max(bound, 1.5 * max(spec.omegas, default=0.0)) + 1.0


def verify_spectrum(L: DelayLinearOperator, spec: SpectrumSpec, delta: float = 1e-3,
                    omega_max: float | None = None, root_tol: float = 1e-8,
                    simple_tol: float = 1e-6, raise_on_failure: bool = True) -> SpectrumReport:
    """Check that the imaginary-strip roots of Delta are exactly the target spectrum."""
    if omega_max is None:
        omega_max = default_strip_height(L, spec, delta)
    if omega_max <= max(spec.omegas, default=0.0):
        raise ValueError("strip height must exceed the largest target frequency")
    lams = spec.eigenvalues
    vals, dvals = L.char_values(lams)
    msgs = []
    roots = []
    ok = True
    for lam, v, dv in zip(lams, vals, dvals):
        roots.append({"lambda": [lam.real, lam.imag], "absDelta": float(abs(v)),
                      "dDelta": [dv.real, dv.imag], "absdDelta": float(abs(dv))})
        if abs(v) > root_tol * (1 + abs(lam)):
            ok = False
            msgs.append(f"Delta({lam:.6g}) = {v:.3e} is not zero")
        if abs(dv) <= simple_tol:
            ok = False
            msgs.append(f"non-simple root at {lam:.6g} (|Delta'| = {abs(dv):.3e})")
    count = count_roots_in_rectangle(L, (-delta, delta), (-omega_max, omega_max))
    if count != lams.size:
        ok = False
        msgs.append(f"strip contains {count} roots, expected {lams.size}")
    report = SpectrumReport(ok, count, int(lams.size), delta, omega_max, roots, msgs)
    if not ok and raise_on_failure:
        raise SpectrumError("; ".join(msgs), report)
    return report


# --------------------------------------------------------------------------
# adjoint normalization


def adjoint_vector(L: DelayLinearOperator, spec: SpectrumSpec, tol: float = 1e-12) -> AdjointVector:
    """Psi(0) entries 1/Delta'(lam) for lam in the target spectrum."""
    u = []
    for w in spec.omegas:
        _, dd = L.char_value(1j * w)
        if abs(dd) < tol:
            raise SpectrumError(f"Delta'(i{w}) vanishes: eigenvalue is not simple")
        u.append(1.0 / dd)
    u0 = None
    if spec.includes_zero:
        _, dd = L.char_value(0.0)
        if abs(dd) < tol:
            raise SpectrumError("Delta'(0) vanishes: zero eigenvalue is not simple")
        u0 = float((1.0 / dd).real)
    return AdjointVector(u0, tuple(u))


def bilinear_form(psi, phi, L: DelayLinearOperator) -> complex:
    """Pairing psi(0)phi(0) + sum_k b_k int_{theta_k}^0 psi(zeta - theta_k) phi(zeta) dzeta.

    ``psi`` and ``phi`` are exponential polynomials on [0, r] and [-r, 0].
    """
    total = complex(psi.eval_at(0.0) * phi.eval_at(0.0))
    for t, b in zip(L.thetas, L.coeffs):
        if t == 0:
            continue
        integrand = psi.shifted(-t) * phi
        total += b * integrand.integrate(t, 0.0)
    return total
