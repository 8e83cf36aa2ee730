"""Exponential polynomials on a delay interval and the Q-component solver.

Functions of the form sum_k P_k(theta) exp(gamma_k theta) are closed under
every operation the normal-form computation needs, so all functions on
[-r, 0] (and the adjoint ones on [0, r]) are kept in this exact form.
"""

from __future__ import annotations

import csv
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .linsys import AdjointVector, DelayLinearOperator, SpectrumSpec, bilinear_form

GAMMA_MERGE_TOL = 1e-9
COLLISION_TOL = 1e-8
ZERO_GAMMA_TOL = 1e-12
DOMAIN_SLACK = 1e-12


class ResonanceError(ArithmeticError):
    """Raised when a homological equation is (nearly) unsolvable."""


def _trim(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return np.zeros(0, dtype=complex)
    return c[: nz[-1] + 1].copy()


def _poly_shift(c: np.ndarray, a: float) -> np.ndarray:
    """Coefficients of P(theta + a)."""
    if c.size == 0:
        return c
    out = np.zeros(1, dtype=complex)
    for coef in c[::-1]:
        out = npoly.polymul(out, [a, 1.0])
        out[0] += coef
    return out[: c.size]


class ExpPolyFunction:
    """Finite sum of polynomial(theta) * exp(gamma * theta) terms."""

    __slots__ = ("terms", "domain")

    def __init__(self, terms: Iterable[Tuple[complex, Sequence[complex]]] = (), domain=(-np.inf, np.inf)):
        merged: List[Tuple[complex, np.ndarray]] = []
        for g, c in terms:
            g = complex(g)
            if abs(g) < ZERO_GAMMA_TOL:
                g = 0j
            c = np.asarray(c, dtype=complex)
            for idx, (g2, c2) in enumerate(merged):
                if abs(g - g2) < GAMMA_MERGE_TOL:
                    merged[idx] = (g2, npoly.polyadd(c2, c))
                    break
            else:
                merged.append((g, c))
        cleaned = [(g, _trim(c)) for g, c in merged]
        cleaned = [(g, c) for g, c in cleaned if c.size]
        cleaned.sort(key=lambda t: (round(t[0].real, 9), round(t[0].imag, 9)))
        self.terms = cleaned
        self.domain = (float(domain[0]), float(domain[1]))

    # constructors ----------------------------------------------------------
    @classmethod
    def exponential(cls, gamma: complex, coeff: complex = 1.0, domain=(-np.inf, np.inf)) -> "ExpPolyFunction":
        return cls([(gamma, [coeff])], domain)

    @classmethod
    def zero(cls, domain=(-np.inf, np.inf)) -> "ExpPolyFunction":
        return cls([], domain)

    # algebra ---------------------------------------------------------------
    def _dom(self, other: "ExpPolyFunction"):
        return (max(self.domain[0], other.domain[0]), min(self.domain[1], other.domain[1]))

    def __add__(self, other: "ExpPolyFunction") -> "ExpPolyFunction":
        return ExpPolyFunction(self.terms + other.terms, self._dom(other))

    def __neg__(self) -> "ExpPolyFunction":
        return ExpPolyFunction([(g, -c) for g, c in self.terms], self.domain)

    def __sub__(self, other: "ExpPolyFunction") -> "ExpPolyFunction":
        return self + (-other)

    def scale(self, a: complex) -> "ExpPolyFunction":
        return ExpPolyFunction([(g, a * c) for g, c in self.terms], self.domain)

    def __mul__(self, other):
        if isinstance(other, ExpPolyFunction):
            out = []
            for g1, c1 in self.terms:
                for g2, c2 in other.terms:
                    out.append((g1 + g2, npoly.polymul(c1, c2)))
            return ExpPolyFunction(out, self._dom(other))
        return self.scale(other)

    __rmul__ = __mul__

    def derivative(self) -> "ExpPolyFunction":
        out = []
        for g, c in self.terms:
            d = npoly.polyder(c) if c.size > 1 else np.zeros(0, dtype=complex)
            out.append((g, npoly.polyadd(d, g * c) if d.size else g * c))
        return ExpPolyFunction(out, self.domain)

    def shifted(self, a: float) -> "ExpPolyFunction":
        """The function theta -> f(theta + a)."""
        out = [(g, np.exp(g * a) * _poly_shift(c, a)) for g, c in self.terms]
        return ExpPolyFunction(out, (self.domain[0] - a, self.domain[1] - a))

    def with_domain(self, domain) -> "ExpPolyFunction":
        return ExpPolyFunction(self.terms, domain)

    # evaluation ------------------------------------------------------------
    def __call__(self, theta):
        return self.eval_at(theta)

    def eval_at(self, theta):
        th = np.asarray(theta, dtype=float)
        lo, hi = self.domain
        if np.any(th < lo - DOMAIN_SLACK) or np.any(th > hi + DOMAIN_SLACK):
            raise ValueError(f"theta outside domain [{lo}, {hi}]")
        total = np.zeros(th.shape, dtype=complex)
        for g, c in self.terms:
            total = total + npoly.polyval(th, c) * np.exp(g * th)
        return complex(total) if total.ndim == 0 else total

    def integrate(self, a: float, b: float) -> complex:
        """Exact definite integral over [a, b]."""
        total = 0j
        for g, c in self.terms:
            if g == 0:
                anti = npoly.polyint(c)
                total += npoly.polyval(b, anti) - npoly.polyval(a, anti)
                continue
            # antiderivative Q e^{g t} with Q = sum_k (-1)^k P^(k) / g^(k+1)
            q = np.zeros(c.size, dtype=complex)
            deriv = c
            sign = 1.0
            for k in range(c.size):
                q[: deriv.size] += sign * deriv / g ** (k + 1)
                deriv = npoly.polyder(deriv) if deriv.size > 1 else np.zeros(0, dtype=complex)
                sign = -sign
                if deriv.size == 0:
                    break
            total += npoly.polyval(b, q) * np.exp(g * b) - npoly.polyval(a, q) * np.exp(g * a)
        return complex(total)

    # misc ------------------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def norm(self) -> float:
        return max((float(np.max(np.abs(c))) for _, c in self.terms), default=0.0)

    def max_poly_degree(self) -> int:
        return max((c.size - 1 for _, c in self.terms), default=-1)

    def __repr__(self) -> str:
        parts = [f"[{', '.join(f'{x:.4g}' for x in c)}]*exp({g:.4g}*t)" for g, c in self.terms]
        return "ExpPolyFunction(" + " + ".join(parts) + ")"

    def to_json(self) -> dict:
        return {
            "domain": list(self.domain),
            "terms": [
                {"gamma": [g.real, g.imag], "coeffs": [[float(x.real), float(x.imag)] for x in c]}
                for g, c in self.terms
            ],
        }


def eval_at(f: ExpPolyFunction, theta):
    return f.eval_at(theta)


# --------------------------------------------------------------------------
# center-space building blocks


def phi_functions(spec: SpectrumSpec) -> List[ExpPolyFunction]:
    """Columns of Phi(theta) on [-r, 0], in slot order."""
    dom = (-spec.r, 0.0)
    return [ExpPolyFunction.exponential(lam, 1.0, dom) for lam in spec.eigenvalues]


def adjoint_eigenfunction(lam: complex, u: complex, r: float) -> ExpPolyFunction:
    """psi(s) = u exp(-lam s) on [0, r]."""
    return ExpPolyFunction.exponential(-lam, u, (0.0, r))


def psi_functions(spec: SpectrumSpec, adj: AdjointVector) -> List[ExpPolyFunction]:
    """Rows of Psi(s) on [0, r], in slot order."""
    return [adjoint_eigenfunction(lam, u, spec.r) for lam, u in zip(spec.eigenvalues, adj.slots)]


def project_coordinates(phi: ExpPolyFunction, L: DelayLinearOperator, spec: SpectrumSpec,
                        adj: AdjointVector) -> np.ndarray:
    """(Psi, phi): the center coordinates of a function on [-r, 0]."""
    return np.array([bilinear_form(psi, phi, L) for psi in psi_functions(spec, adj)])


def _resonant_slot(lam: complex, spec: SpectrumSpec) -> int | None:
    for c, lc in enumerate(spec.eigenvalues):
        if abs(lam - lc) < COLLISION_TOL:
            return c
    return None


def boundary_operator(h: ExpPolyFunction, L: DelayLinearOperator) -> complex:
    """h'(0) - L h."""
    dh0 = h.derivative().eval_at(0.0)
    return dh0 - sum(b * h.eval_at(t) for t, b in zip(L.thetas, L.coeffs))


# --------------------------------------------------------------------------
# homological equation in Q


def solve_q_homological(lam: complex, c: complex, L: DelayLinearOperator, spec: SpectrumSpec,
                        adj: AdjointVector, forcing: ExpPolyFunction | None = None,
                        tol: float = 1e-9) -> ExpPolyFunction:
    """Solve (lam - A_Q) h = (I - pi)(X0 c + forcing) for h in Q.

    Concretely h satisfies, on [-r, 0],
        h' = lam h - forcing + Phi [ (Psi, forcing) + Psi(0) c ],
    together with the boundary identity h'(0) - L h = c.  With no
    ``forcing`` this is the equation for one monomial of the Q-component of
    a normal-form transformation.
    """
    dom = (-spec.r, 0.0)
    lam = complex(lam)
    forcing = forcing if forcing is not None else ExpPolyFunction.zero(dom)
    if c == 0 and forcing.is_zero():
        return ExpPolyFunction.zero(dom)

    weights = adj.slots * c
    if not forcing.is_zero():
        weights = weights + project_coordinates(forcing, L, spec, adj)
    src_terms = [(lc, [w]) for lc, w in zip(spec.eigenvalues, weights)]
    src = ExpPolyFunction(src_terms, dom) - forcing

    slot = _resonant_slot(lam, spec)
    if slot is not None:
        lam = spec.eigenvalues[slot]

    # particular solution of h' - lam h = src, term by term
    part = []
    for g, P in src.terms:
        beta = g - lam
        if abs(beta) < COLLISION_TOL:
            part.append((lam, npoly.polyint(P)))
            continue
        Q = np.zeros(P.size, dtype=complex)
        deriv = P
        sign = 1.0
        for k in range(P.size):
            Q[: deriv.size] += sign * deriv / beta ** (k + 1)
            deriv = npoly.polyder(deriv) if deriv.size > 1 else np.zeros(0, dtype=complex)
            sign = -sign
            if deriv.size == 0:
                break
        part.append((g, Q))
    hp = ExpPolyFunction(part, dom)

    defect = c - boundary_operator(hp, L)
    scale = 1.0 + abs(c) + forcing.norm()
    if slot is not None:
        if abs(defect) > tol * scale:
            raise ResonanceError(f"resonant forcing at lambda={lam:.6g} is not in the range "
                                 f"(consistency scalar {abs(defect):.3e})")
        psi = adjoint_eigenfunction(lam, adj.slots[slot], spec.r)
        xi = -bilinear_form(psi, hp, L)
    else:
        delta, _ = L.char_value(lam)
        if abs(delta) < 1e-10:
            raise ResonanceError(f"characteristic function nearly vanishes at non-resonant lambda={lam:.6g}")
        xi = defect / delta
    return hp + ExpPolyFunction.exponential(lam, xi, dom)


def q_residuals(h: ExpPolyFunction, lam: complex, c: complex, L: DelayLinearOperator, spec: SpectrumSpec,
                adj: AdjointVector, forcing: ExpPolyFunction | None = None, npts: int = 100) -> Dict[str, float]:
    """Sup-norm residuals of the interior ODE and the boundary identity."""
    dom = (-spec.r, 0.0)
    forcing = forcing if forcing is not None else ExpPolyFunction.zero(dom)
    weights = adj.slots * c
    if not forcing.is_zero():
        weights = weights + project_coordinates(forcing, L, spec, adj)
    rhs = ExpPolyFunction([(lc, [w]) for lc, w in zip(spec.eigenvalues, weights)], dom) - forcing
    theta = np.linspace(-spec.r, 0.0, npts)
    interior = h.derivative().eval_at(theta) - lam * h.eval_at(theta) - rhs.eval_at(theta)
    boundary = boundary_operator(h, L) - c
    proj = project_coordinates(h, L, spec, adj)
    return {
        "interior": float(np.max(np.abs(interior))),
        "boundary": float(abs(boundary)),
        "projection": float(np.max(np.abs(proj))),
    }


def dump_samples(h: ExpPolyFunction, path, npts: int = 201) -> None:
    """Write theta, Re h, Im h samples to CSV."""
    lo, hi = h.domain
    theta = np.linspace(lo, hi, npts)
    vals = h.eval_at(theta)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "re", "im"])
        for t, v in zip(theta, vals):
            w.writerow([f"{t:.12g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
