"""Basis catalogs, the homological operator, and the averaging/radial projections.

Torus and reflection actions are never materialized as matrices: every
monomial carries an integer torus weight, and an element ``x^m e_c`` is
invariant exactly when its weight equals the weight of slot ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .linsys import SpectrumSpec
from .polyring import (
    Monomial,
    Poly,
    VariableSpace,
    VectorPoly,
    compose_linear,
    graded_lex_key,
    monomials_of_degree,
    substitute,
    torus_weight,
)

TAGS = ("H_center", "H_torus", "H_radial", "V", "Vhat", "V_d", "W_hat")


# --------------------------------------------------------------------------
# K matrix


@dataclass(frozen=True)
class KMatrix:
    K: np.ndarray
    K_inv: np.ndarray

    @property
    def d(self) -> int:
        return self.K.shape[0]


def k_matrix(d: int) -> KMatrix:
    """K[j, k] = -1 when j + k > d + 1 (1-based indices), +1 otherwise."""
    j, k = np.meshgrid(np.arange(1, d + 1), np.arange(1, d + 1), indexing="ij")
    K = np.where(j + k > d + 1, -1.0, 1.0)
    return KMatrix(K, np.linalg.inv(K))


# --------------------------------------------------------------------------
# catalogs


@dataclass(frozen=True)
class BasisCatalog:
    """Ordered basis of one graded piece.

    ``elements`` holds ``(component, monomial)`` pairs for monomial bases and
    :class:`Poly` objects for the delayed-variable bases.  ``mu_degrees``
    records the parameter degree of each element so the parameter splitting
    can be read off directly.
    """

    tag: str
    order: int
    space: VariableSpace
    elements: Tuple
    mu_degrees: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.elements)

    def index(self) -> Dict[Tuple[int, Monomial], int]:
        return {el: i for i, el in enumerate(self.elements)}

    @property
    def n_mu_free(self) -> int:
        return sum(1 for q in self.mu_degrees if q == 0)

    def to_json(self) -> dict:
        if self.elements and isinstance(self.elements[0], Poly):
            els = [p.to_json() for p in self.elements]
        else:
            els = [{"component": c, "exponents": list(m)} for c, m in self.elements]
        return {"tag": self.tag, "order": self.order, "variables": list(self.space.names), "elements": els}


def _label_exponents(p: int, includes_zero: bool, s: int, j: int):
    """(component, exponent tuple) pairs shared by the V and radial bases.

    Exponents are over (rho0?, rho1..rhop, mu); the same tuples index the
    delayed variables (v0?, v1..vp, mu) because v_i is paired with rho_i.
    """
    off = int(includes_zero)
    out = []
    for mu_deg in range(0, j + 1):
        qs = list(monomials_of_degree(s, mu_deg)) if s else ([()] if mu_deg == 0 else [])
        for q in qs:
            rest = j - mu_deg
            # Hopf slots: rho0^k0 rho~^{2k} rho_c
            for k0 in range(0, rest + 1 if includes_zero else 1):
                even = rest - k0 - 1
                if even >= 0 and even % 2 == 0:
                    for k in monomials_of_degree(p, even // 2):
                        for c in range(p):
                            e = [2 * ki for ki in k]
                            e[c] += 1
                            out.append((off + c, tuple(([k0] if includes_zero else []) + e) + tuple(q)))
                if includes_zero:
                    even = rest - k0
                    if even >= 0 and even % 2 == 0:
                        for k in monomials_of_degree(p, even // 2):
                            out.append((0, tuple([k0] + [2 * ki for ki in k]) + tuple(q)))
    nv = p + off
    out.sort(key=lambda t: (sum(t[1][nv:]) > 0, t[0], graded_lex_key(t[1])))
    return out


def radial_space(spec: SpectrumSpec, s: int) -> VariableSpace:
    return VariableSpace.radial(spec.p, spec.includes_zero, s)


def center_space(spec: SpectrumSpec, s: int) -> VariableSpace:
    return VariableSpace.center(spec.p, spec.includes_zero, s)


def delayed_space(spec: SpectrumSpec, s: int) -> VariableSpace:
    return VariableSpace.delayed(spec.d, s)


def enumerate_basis(tag: str, spec: SpectrumSpec, order: int, s: int = 0) -> BasisCatalog:
    if tag not in TAGS:
        raise ValueError(f"unknown basis tag {tag!r}; expected one of {TAGS}")
    if order < 0:
        raise ValueError("order must be non-negative")
    if tag in ("H_center", "H_torus"):
        space = center_space(spec, s)
        kappa = space.n
        cw = space.component_weights
        els = []
        for c in range(kappa):
            for m in monomials_of_degree(space.nvars, order):
                if tag == "H_torus" and torus_weight(space, m) != tuple(cw[c]):
                    continue
                els.append((c, m))
        mu = tuple(sum(m[space.mu_slice]) for _, m in els)
        return BasisCatalog(tag, order, space, tuple(els), mu)

    labels = _label_exponents(spec.p, spec.includes_zero, s, order)
    nv = spec.d
    mu = tuple(sum(m[nv:]) for _, m in labels)
    if tag == "H_radial":
        return BasisCatalog(tag, order, radial_space(spec, s), tuple(labels), mu)

    dspace = delayed_space(spec, s)
    keep = {
        "V": lambda q: True,
        "Vhat": lambda q: True,
        "V_d": lambda q: q == 0,
        "W_hat": lambda q: q > 0,
    }[tag]
    polys, mus = [], []
    kinv = k_matrix(spec.d).K_inv
    for (_, m), q in zip(labels, mu):
        if not keep(q):
            continue
        b = Poly.monomial(dspace, m)
        if tag != "V":
            b = compose_linear(b, kinv, dspace)
        polys.append(b)
        mus.append(q)
    return BasisCatalog(tag, order, dspace, tuple(polys), tuple(mus))


# --------------------------------------------------------------------------
# homological operator and averaging


def homological_eigenvalue(m: Sequence[int], c: int, spec: SpectrumSpec) -> complex:
    """Eigenvalue of L_B on x^m e_c: sum_j w_j(m) i w_j - lambda_c.

    Evaluated from integer torus-weight differences, so resonant elements
    get exactly zero.
    """
    space = center_space(spec, 0)
    kappa = spec.kappa
    diff = np.subtract(torus_weight(space, tuple(m[:kappa])), space.component_weights[c])
    return complex(0.0, float(np.dot(diff, spec.omegas))) if diff.size else 0j


def is_resonant(space: VariableSpace, m: Monomial, c: int) -> bool:
    return torus_weight(space, m) == tuple(space.component_weights[c])


def project_a(f: VectorPoly) -> VectorPoly:
    """Torus average: keep exactly the resonant monomials of each component."""
    space = f.space
    if space.kind != "center":
        raise ValueError("averaging acts on center-variable polynomials")
    comps = []
    for c, comp in enumerate(f.components):
        comps.append(Poly(space, {m: v for m, v in comp.terms.items() if is_resonant(space, m, c)}))
    return VectorPoly(space, tuple(comps))


def apply_homological(f: VectorPoly, spec: SpectrumSpec) -> VectorPoly:
    """L_B f = D_x f . Bx - B f; diagonal on monomials since B is diagonal."""
    space = f.space
    comps = []
    for c, comp in enumerate(f.components):
        comps.append(Poly(space, {m: v * homological_eigenvalue(m, c, spec) for m, v in comp.terms.items()}))
    return VectorPoly(space, tuple(comps))


def _matrix_of(op, catalog: BasisCatalog) -> np.ndarray:
    idx = catalog.index()
    n = len(catalog)
    mat = np.zeros((n, n), dtype=complex)
    for col, (c, m) in enumerate(catalog.elements):
        f = VectorPoly.from_terms(catalog.space, [(c, m, 1.0)])
        for comp, mono, val in op(f).terms():
            mat[idx[(comp, mono)], col] += val
    return mat


def averaging_matrix(spec: SpectrumSpec, order: int, s: int = 0) -> np.ndarray:
    return _matrix_of(project_a, enumerate_basis("H_center", spec, order, s))


def homological_matrix(spec: SpectrumSpec, order: int, s: int = 0) -> np.ndarray:
    return _matrix_of(lambda f: apply_homological(f, spec), enumerate_basis("H_center", spec, order, s))


# --------------------------------------------------------------------------
# radial projection


def project_pi(g: VectorPoly, spec: SpectrumSpec | None = None, gamma: Sequence[float] | None = None,
               tol: float = 1e-10) -> VectorPoly:
    """Radial part C gamma g(gamma^{-1} R, mu) of an equivariant field.

    ``gamma`` lists torus angles (phi_1..phi_p); the result does not depend
    on it for equivariant input.  Component j of the output is
    Re(a_j) rho_j where a_j x_j is the x_j-component of ``g``.
    """
    space = g.space
    if space.kind != "center" or space.n_w:
        raise ValueError("radial projection needs a center-variable field without w variables")
    scale = max(1.0, g.norm())
    if (g - project_a(g)).norm() > tol * scale:
        raise ValueError("radial projection requires a torus-equivariant field")
    p, iz = space.p, space.includes_zero
    angles = np.zeros(p) if gamma is None else np.asarray(gamma, dtype=float)
    rspace = VariableSpace.radial(p, iz, space.s)
    off = int(iz)
    images = []
    slot_phase = []
    if iz:
        images.append(Poly.variable(rspace, 0))
        slot_phase.append(1.0)
    for j in range(p):
        ph = np.exp(1j * angles[j])
        images.append(Poly.variable(rspace, off + j, 1.0 / ph))
        images.append(Poly.variable(rspace, off + j, ph))
        slot_phase += [ph, 1.0 / ph]
    for k in range(space.s):
        images.append(Poly.variable(rspace, rspace.mu_slice.start + k))
    pulled = [substitute(comp, images, rspace).scale(ph) for comp, ph in zip(g.components, slot_phase)]
    out = []
    if iz:
        out.append(pulled[0])
    for j in range(p):
        out.append((pulled[off + 2 * j] + pulled[off + 2 * j + 1]).scale(0.5))
    worst = max((abs(c.imag) for comp in out for c in comp.terms.values()), default=0.0)
    if worst > tol * scale:
        raise ValueError(f"radial projection produced an imaginary part {worst:.3e}")
    return VectorPoly(rspace, tuple(comp.real_part().chop(0.0) for comp in out))


def radial_coordinates(h: VectorPoly, catalog: BasisCatalog) -> np.ndarray:
    """Coordinates of a radial field in a radial catalog; raises on leftovers."""
    idx = catalog.index()
    vec = np.zeros(len(catalog))
    for comp, m, val in h.terms():
        key = (comp, m)
        if key not in idx:
            if abs(val) > 1e-12:
                raise ValueError(f"term {m} in component {comp} is outside the catalog")
            continue
        vec[idx[key]] = val.real
    return vec


def radial_from_coordinates(vec: Sequence[float], catalog: BasisCatalog) -> VectorPoly:
    return VectorPoly.from_terms(catalog.space, [(c, m, float(v)) for (c, m), v in zip(catalog.elements, vec)])


# --------------------------------------------------------------------------
# dimensions


def source_dimension(n_delays: int, order: int) -> int:
    """Enumerated dim of real polynomials in n variables with degrees 2..order."""
    return sum(sum(1 for _ in monomials_of_degree(n_delays, j)) for j in range(2, order + 1))


def source_dimension_closed_form(n_delays: int, order: int) -> int:
    return comb(n_delays + order, n_delays) - 1 - n_delays


def double_hopf_target_closed_form(order: int) -> int:
    big_l, _ = divmod(order, 2)
    return big_l * (big_l + 3)


def _rank(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > 1e-8 * sv[0])) if sv.size and sv[0] > 0 else 0


def catalog_rank(catalog: BasisCatalog) -> int:
    """Rank of the coefficient matrix of a polynomial catalog."""
    if not len(catalog):
        return 0
    monos = sorted({m for b in catalog.elements for m in b.terms}, key=graded_lex_key)
    col = {m: i for i, m in enumerate(monos)}
    mat = np.zeros((len(catalog), len(monos)), dtype=complex)
    for i, b in enumerate(catalog.elements):
        for m, v in b.terms.items():
            mat[i, col[m]] = v
    return _rank(mat)


def dims(spec: SpectrumSpec, order: int, s: int = 0, n_delays: int | None = None) -> dict:
    """Enumerated catalog sizes and closed-form counts, per grade and cumulative."""
    if order < 2:
        raise ValueError("order must be at least 2")
    n_delays = spec.d if n_delays is None else n_delays
    grades = {}
    for j in range(2, order + 1):
        vhat = enumerate_basis("Vhat", spec, j, s)
        grades[j] = {
            "H_center": len(enumerate_basis("H_center", spec, j, s)),
            "H_torus": len(enumerate_basis("H_torus", spec, j, s)),
            "H_radial": len(enumerate_basis("H_radial", spec, j, s)),
            "V": len(enumerate_basis("V", spec, j, s)),
            "Vhat": catalog_rank(vhat),
            "V_d": len(enumerate_basis("V_d", spec, j, s)),
            "W_hat": len(enumerate_basis("W_hat", spec, j, s)),
        }
    target = sum(len(enumerate_basis("H_radial", spec, j, 0)) for j in range(2, order + 1))
    source = source_dimension(n_delays, order)
    report = {
        "order": order,
        "s": s,
        "nDelays": n_delays,
        "d": spec.d,
        "grades": {str(j): v for j, v in grades.items()},
        "sourceDim": source,
        "sourceDimClosedForm": source_dimension_closed_form(n_delays, order),
        "targetDim": target,
        "restricted": source < target,
        "summary": f"{source} < {target}, not surjective" if source < target
        else f"{source} >= {target}, surjectivity not excluded by counting",
    }
    if not spec.includes_zero and spec.p == 2:
        report["doubleHopf"] = {
            "sourceOneDelayClosedForm": order - 1,
            "targetClosedForm": double_hopf_target_closed_form(order),
            "targetEnumerated": target,
            "closedFormMatches": double_hopf_target_closed_form(order) == target,
        }
    return report
