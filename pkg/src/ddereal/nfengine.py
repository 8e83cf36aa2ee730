"""Center-manifold normal forms of scalar DDE models, order by order.

The reduced flow is obtained from the invariance equation of a
parametrized center manifold ``z_t = W(x, mu)``:

* translation:  d/dtheta W(x)(theta) = DW(x) g(x)   on [-r, 0]
* boundary:     d/dtheta W(x)(0)     = L W(x) + F(W(x)(tau_1), ...)

with ``g(x) = Bx + g_2 + g_3 + ...``.  At order j each monomial x^m gives a
linear problem whose center part is diagonal (the homological operator) and
whose complementary part is a scalar boundary-value problem solved in
closed form by :mod:`ddereal.qsolver`.  Resonant terms go into ``g_j``;
the center part of ``W_j`` carries no resonant component.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .linsys import AdjointVector, DelayLinearOperator, SpectrumSpec, bilinear_form
from .polyring import (
    Monomial,
    Poly,
    VariableSpace,
    VectorPoly,
    compose_linear,
    graded_lex_key,
    substitute,
    unit,
)
from .qsolver import ExpPolyFunction, ResonanceError, psi_functions, solve_q_homological
from .symmetry import center_space, is_resonant, project_a, project_pi

HOMOLOGICAL_TOL = 1e-8


class ModelError(ValueError):
    pass


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class DDEModel:
    """z'(t) = L z_t + eta(v) + xi(v, mu) with v_i = z(t + tau_i)."""

    L: DelayLinearOperator
    delays: Tuple[float, ...]
    eta: Poly
    xi: Poly
    s: int = 0

    def __post_init__(self):
        delays = tuple(float(t) for t in self.delays)
        object.__setattr__(self, "delays", delays)
        space = VariableSpace.delayed(len(delays), self.s)
        if not delays:
            raise ModelError("at least one delay is required")
        if len(set(delays)) != len(delays):
            raise ModelError("delays must be pairwise distinct")
        if any(t > 0 for t in delays):
            raise ModelError("delays must be <= 0")
        if self.eta.space != space or self.xi.space != space:
            raise ModelError("eta and xi must live in the delayed space (v1..vn, mu1..mus)")
        for m in self.eta.terms:
            if sum(m[space.mu_slice]):
                raise ModelError("eta must not depend on parameters")
            if sum(m) < 2:
                raise ModelError("eta must start at degree 2")
        for m in self.xi.terms:
            if not sum(m[space.mu_slice]):
                raise ModelError("xi must vanish at mu = 0")
            if sum(m) < 2:
                raise ModelError("xi must start at degree 2 (no constant or pure mu-linear terms)")

    @classmethod
    def build(cls, L: DelayLinearOperator, delays: Sequence[float], s: int = 0,
              eta: Mapping[Tuple[int, ...], float] | None = None,
              xi: Mapping[Tuple[int, ...], float] | None = None) -> "DDEModel":
        space = VariableSpace.delayed(len(delays), s)
        return cls(L, tuple(delays), Poly(space, eta or {}), Poly(space, xi or {}), s)

    @property
    def space(self) -> VariableSpace:
        return self.eta.space

    @property
    def nonlinearity(self) -> Poly:
        return self.eta + self.xi

    def is_empty(self) -> bool:
        return self.eta.is_zero() and self.xi.is_zero()

    def with_terms(self, eta: Poly | None = None, xi: Poly | None = None) -> "DDEModel":
        return DDEModel(self.L, self.delays, self.eta if eta is None else eta, self.xi if xi is None else xi, self.s)

    def with_parameters(self, s: int) -> "DDEModel":
        """Same model viewed with ``s`` parameters (adds or drops trailing mu's)."""
        space = VariableSpace.delayed(len(self.delays), s)
        n = len(self.delays)

        def lift(p: Poly) -> Poly:
            out = {}
            for m, c in p.terms.items():
                mu = m[n:]
                if any(mu[s:]):
                    raise ModelError("cannot drop a parameter the model depends on")
                out[m[:n] + tuple(mu[:s]) + (0,) * max(0, s - len(mu))] = c
            return Poly(space, out)

        return DDEModel(self.L, self.delays, lift(self.eta), lift(self.xi), s)

    def to_json(self) -> dict:
        return {
            "linear": self.L.to_json(),
            "delays": list(self.delays),
            "s": self.s,
            "eta": [{"exponents": list(m), "value": c.real} for m, c in self.eta.items()],
            "xi": [{"exponents": list(m), "value": c.real} for m, c in self.xi.items()],
        }


def build_e(spec: SpectrumSpec, taus: Sequence[float]) -> np.ndarray:
    """Rows Phi(tau_i) = (exp(lambda_c tau_i))_c."""
    taus = np.asarray(taus, dtype=float)
    return np.exp(np.multiply.outer(taus, spec.eigenvalues))


# --------------------------------------------------------------------------
# graded terms


def graded_terms(model: DDEModel, spec: SpectrumSpec, adj: AdjointVector, order: int) -> Dict[int, Tuple[VectorPoly, Poly]]:
    """Grade-j pieces of Psi(0) F(Phi(tau) x + w, mu) over (x, w, mu).

    Returns ``{j: (f1_j, scalar_j)}`` where ``scalar_j`` is the grade-j part
    of the scalar nonlinearity; the complementary component of the
    forcing is (I - pi) X0 times that scalar.
    """
    n = len(model.delays)
    space = VariableSpace.center(spec.p, spec.includes_zero, model.s, n_w=n)
    E = build_e(spec, model.delays)
    images = []
    for i in range(n):
        terms = {unit(space.nvars, c): E[i, c] for c in range(spec.kappa)}
        terms[unit(space.nvars, space.w_slice.start + i)] = 1.0
        images.append(Poly(space, terms))
    for k in range(model.s):
        images.append(Poly.variable(space, space.mu_slice.start + k))
    full = substitute(model.nonlinearity, images, space, max_degree=order)
    psi0 = adj.slots
    out = {}
    for j in range(2, order + 1):
        scalar = full.grade(j)
        out[j] = (VectorPoly(space, tuple(scalar.scale(u) for u in psi0)), scalar)
    return out


# --------------------------------------------------------------------------
# result


@dataclass
class OrderRecord:
    g: VectorPoly
    center_shift: VectorPoly
    q_part: Dict[Monomial, ExpPolyFunction]
    forcing: VectorPoly
    direct: VectorPoly

    @property
    def corrections(self) -> VectorPoly:
        return self.forcing - self.direct


@dataclass
class NormalFormResult:
    spec: SpectrumSpec
    order: int
    s: int
    radial: VectorPoly
    angular: List[Poly]
    g: Dict[int, VectorPoly]
    records: Dict[int, OrderRecord] = field(default_factory=dict)

    @property
    def transformations(self) -> Dict[int, dict]:
        out = {}
        for j, rec in self.records.items():
            out[j] = {
                "U1": rec.center_shift.mu_free(),
                "W1": rec.center_shift.mu_part(),
                "U2": {m: h for m, h in rec.q_part.items() if not sum(m[rec.g.space.mu_slice])},
                "W2": {m: h for m, h in rec.q_part.items() if sum(m[rec.g.space.mu_slice])},
            }
        return out

    @property
    def corrections(self) -> Dict[int, Tuple[VectorPoly, VectorPoly]]:
        """Per order (Y_j, Z_j): parameter-free and parameter-dependent corrections."""
        return {j: (rec.corrections.mu_free(), rec.corrections.mu_part()) for j, rec in self.records.items()}

    def radial_coefficient(self, component: int, exponents: Sequence[int]) -> float:
        return self.radial[component].coefficient(tuple(exponents)).real

    def radial_grade(self, j: int) -> VectorPoly:
        return self.radial.grade(j)

    def to_json(self) -> dict:
        rspace = self.radial.space
        return {
            "order": self.order,
            "variables": list(rspace.names),
            "radial": [{"component": c, "exponents": list(m), "value": v.real} for c, m, v in self.radial.terms()],
            "angular": [
                [{"exponents": list(m), "value": v.real} for m, v in k.items()] for k in self.angular
            ],
            "corrections": {
                str(j): {"Y": y.to_json(), "Z": z.to_json()} for j, (y, z) in self.corrections.items()
            },
        }


# --------------------------------------------------------------------------
# engine


class NormalFormEngine:
    """Stateful order-by-order solver; orders must be advanced in sequence."""

    def __init__(self, model: DDEModel, spec: SpectrumSpec, adj: AdjointVector, order: int):
        if order < 2:
            raise ValueError("order must be at least 2")
        if model.L.horizon > spec.r + 1e-12 or any(t < -spec.r - 1e-12 for t in model.delays):
            raise ModelError("delays and linear part must lie within [-r, 0]")
        if not spec.includes_zero:
            for m in model.nonlinearity.terms:
                if not any(m[: len(model.delays)]):
                    raise ModelError("pure-parameter terms need a zero eigenvalue")
        self.model = model
        self.spec = spec
        self.adj = adj
        self.order = order
        self.space = center_space(spec, model.s)
        self.kappa = spec.kappa
        self.lams = spec.eigenvalues
        self.psi0 = adj.slots
        self.psis = psi_functions(spec, adj)
        self.dom = (-spec.r, 0.0)
        self.E = build_e(spec, model.delays)
        self.F = model.nonlinearity
        nv = self.space.nvars
        self.W: Dict[int, Dict[Monomial, ExpPolyFunction]] = {
            1: {unit(nv, c): ExpPolyFunction.exponential(lam, 1.0, self.dom) for c, lam in enumerate(self.lams)}
        }
        self.W_at_tau: Dict[int, List[Poly]] = {1: [self._eval_w(1, t) for t in model.delays]}
        self.records: Dict[int, OrderRecord] = {}
        self.g: Dict[int, VectorPoly] = {}
        self.done = 1

    # helpers ---------------------------------------------------------------
    def _eval_w(self, k: int, tau: float) -> Poly:
        return Poly(self.space, {m: f.eval_at(tau) for m, f in self.W[k].items()})

    def _delayed_images(self, upto: int) -> List[Poly]:
        images = []
        for i in range(len(self.model.delays)):
            acc = Poly.zero(self.space)
            for k in range(1, upto + 1):
                acc = acc + self.W_at_tau[k][i]
            images.append(acc)
        for k in range(self.model.s):
            images.append(Poly.variable(self.space, self.space.mu_slice.start + k))
        return images

    def _translation_forcing(self, j: int) -> Dict[Monomial, ExpPolyFunction]:
        """Grade-j part of sum_{i=2}^{j-1} DW_i . g_{j+1-i}."""
        acc: Dict[Monomial, List[ExpPolyFunction]] = {}
        for i in range(2, j):
            gk = self.g.get(j + 1 - i)
            if gk is None or gk.is_zero():
                continue
            for m, fn in self.W[i].items():
                for c in range(self.kappa):
                    if m[c] == 0 or gk[c].is_zero():
                        continue
                    base = list(m)
                    base[c] -= 1
                    for m2, coef in gk[c].terms.items():
                        mm = tuple(a + b for a, b in zip(base, m2))
                        acc.setdefault(mm, []).append(fn.scale(m[c] * coef))
        out = {}
        for m, parts in acc.items():
            total = ExpPolyFunction([t for f in parts for t in f.terms], self.dom)
            if not total.is_zero():
                out[m] = total
        return out

    def _resonant_slot(self, m: Monomial) -> int | None:
        for c in range(self.kappa):
            if is_resonant(self.space, m, c):
                return c
        return None

    # main step ---------------------------------------------------------------
    def compute_order(self, j: int, F: Poly | None = None):
        """Solve order ``j`` from stored lower orders; nothing is stored."""
        if j != self.done + 1:
            raise RuntimeError(f"order {j} requested but {self.done} orders are done")
        F = self.F if F is None else F
        images = self._delayed_images(j - 1)
        fpoly = substitute(F, images, self.space, max_degree=j).grade(j)
        r = self._translation_forcing(j)
        monos = sorted(set(fpoly.terms) | set(r), key=graded_lex_key)
        space = self.space
        comps_g = [dict() for _ in range(self.kappa)]
        comps_x = [dict() for _ in range(self.kappa)]
        comps_r = [dict() for _ in range(self.kappa)]
        q_part: Dict[Monomial, ExpPolyFunction] = {}
        w_new: Dict[Monomial, ExpPolyFunction] = {}
        for m in monos:
            f_m = fpoly.coefficient(m)
            r_m = r.get(m)
            R = self.psi0 * f_m
            if r_m is not None:
                R = R - np.array([bilinear_form(psi, r_m, self.model.L) for psi in self.psis])
            slot = self._resonant_slot(m)
            lam_m = self.lams[slot] if slot is not None else complex(np.dot(m[: self.kappa], self.lams))
            center_terms = []
            for c in range(self.kappa):
                comps_r[c][m] = R[c]
                if c == slot:
                    comps_g[c][m] = R[c]
                    continue
                ev = lam_m - self.lams[c]
                if abs(ev) < HOMOLOGICAL_TOL:
                    raise ResonanceError(f"near-zero homological eigenvalue for monomial {m} in slot {c}")
                comps_x[c][m] = R[c] / ev
                center_terms.append((self.lams[c], [R[c] / ev]))
            forcing = -r_m if r_m is not None else None
            h = solve_q_homological(lam_m, f_m, self.model.L, self.spec, self.adj, forcing=forcing)
            q_part[m] = h
            w_new[m] = ExpPolyFunction(center_terms, self.dom) + h
        g = VectorPoly(space, tuple(Poly(space, d) for d in comps_g))
        X = VectorPoly(space, tuple(Poly(space, d) for d in comps_x))
        Rv = VectorPoly(space, tuple(Poly(space, d) for d in comps_r))
        direct_scalar = compose_linear(F.grade(j), self.E, space)
        direct = VectorPoly(space, tuple(direct_scalar.scale(u) for u in self.psi0))
        rec = OrderRecord(g=g, center_shift=X, q_part=q_part, forcing=Rv, direct=direct)
        return rec, w_new

    def commit(self, j: int, rec: OrderRecord, w_new: Dict[Monomial, ExpPolyFunction]) -> None:
        self.records[j] = rec
        self.g[j] = rec.g
        self.W[j] = w_new
        self.W_at_tau[j] = [self._eval_w(j, t) for t in self.model.delays]
        self.done = j

    def step(self) -> OrderRecord:
        j = self.done + 1
        rec, w_new = self.compute_order(j)
        self.commit(j, rec, w_new)
        return rec

    def run(self) -> "NormalFormResult":
        while self.done < self.order:
            self.step()
        return self.result()

    def set_nonlinearity(self, F: Poly) -> None:
        self.F = F

    # output ------------------------------------------------------------------
    def reduced_field(self) -> VectorPoly:
        total = VectorPoly.zero(self.space)
        for gj in self.g.values():
            total = total + gj
        return total

    def result(self) -> "NormalFormResult":
        total = self.reduced_field()
        radial = project_pi(total, self.spec)
        angular = angular_part(total, self.spec)
        return NormalFormResult(self.spec, self.done, self.model.s, radial, angular, dict(self.g), dict(self.records))

    # diagnostics -------------------------------------------------------------
    def invariance_residual(self, j: int, npts: int = 50) -> float:
        """Sup residual of the order-j translation and boundary equations."""
        rec = self.records[j]
        r = self._translation_forcing(j)
        images = self._delayed_images(j - 1)
        fpoly = substitute(self.F, images, self.space, max_degree=j).grade(j)
        theta = np.linspace(-self.spec.r, 0.0, npts)
        worst = 0.0
        for m, w in self.W[j].items():
            lam_m = complex(np.dot(m[: self.kappa], self.lams))
            gm = np.array([rec.g[c].coefficient(m) for c in range(self.kappa)])
            rhs = lam_m * w.eval_at(theta) + np.exp(np.multiply.outer(theta, self.lams)) @ gm
            if m in r:
                rhs = rhs + r[m].eval_at(theta)
            worst = max(worst, float(np.max(np.abs(w.derivative().eval_at(theta) - rhs))))
            bnd = w.derivative().eval_at(0.0) - self.model.L.apply(w.eval_at) - fpoly.coefficient(m)
            worst = max(worst, abs(bnd))
        return worst


def angular_part(g: VectorPoly, spec: SpectrumSpec) -> List[Poly]:
    """k_j(rho, mu) = omega_j + Im a_j for each Hopf slot."""
    space = g.space
    rspace = VariableSpace.radial(spec.p, spec.includes_zero, space.s)
    off = int(spec.includes_zero)
    out = []
    for j in range(spec.p):
        slot = off + 2 * j
        terms = {(0,) * rspace.nvars: spec.omegas[j]}
        for m, v in g[slot].terms.items():
            rho = ([m[0]] if off else []) + [m[off + 2 * i] + m[off + 2 * i + 1] - (i == j) for i in range(spec.p)]
            key = tuple(rho) + tuple(m[space.mu_slice])
            terms[key] = terms.get(key, 0.0) + v.imag
        out.append(Poly(rspace, terms))
    return out


def reduce_to_normal_form(model: DDEModel, spec: SpectrumSpec, adj: AdjointVector, order: int) -> NormalFormResult:
    return NormalFormEngine(model, spec, adj, order).run()


# --------------------------------------------------------------------------
# independent Hopf coefficient


def _symmetric_tensors(model: DDEModel):
    n = len(model.delays)
    A2 = np.zeros((n, n))
    A3 = np.zeros((n, n, n))
    for m, c in model.eta.terms.items():
        deg = sum(m[:n])
        idx = [i for i, e in enumerate(m[:n]) for _ in range(e)]
        perms = set(itertools.permutations(idx))
        if deg == 2:
            for pm in perms:
                A2[pm] += c.real / len(perms)
        elif deg == 3:
            for pm in perms:
                A3[pm] += c.real / len(perms)
        else:
            raise ModelError("the Hopf oracle handles nonlinearities up to degree 3")
    return A2, A3


def hopf_oracle(model: DDEModel, spec: SpectrumSpec) -> complex:
    """First Lyapunov coefficient c1(0) of a single Hopf pair.

    Uses the classical graph-style center manifold with closed-form
    second-order coefficients W20, W11, independent of the engine above.
    """
    if spec.p != 1 or spec.includes_zero:
        raise ValueError("the Hopf oracle needs exactly one Hopf pair and no zero eigenvalue")
    L = model.L
    w = spec.omegas[0]
    _, dd = L.char_value(1j * w)
    u = 1.0 / dd
    taus = np.asarray(model.delays)
    q = np.exp(1j * w * taus)
    qb = q.conj()
    A2, A3 = _symmetric_tensors(model)
    F20 = 2 * q @ A2 @ q
    F11 = 2 * q @ A2 @ qb
    F02 = 2 * qb @ A2 @ qb
    g20, g11, g02 = u * F20, u * F11, u * F02
    d2, _ = L.char_value(2j * w)
    d0, _ = L.char_value(0.0)
    E20 = F20 / d2
    E11 = F11 / d0
    W20 = (1j * g20 / w) * q + (1j * np.conj(g02) / (3 * w)) * qb + E20 * np.exp(2j * w * taus)
    W11 = (-1j * g11 / w) * q + (1j * np.conj(g11) / w) * qb + E11
    cubic = 6 * np.einsum("ijk,i,j,k->", A3, q, q, qb)
    g21 = u * (4 * q @ A2 @ W11 + 2 * qb @ A2 @ W20 + cubic)
    return 1j / (2 * w) * (g20 * g11 - 2 * abs(g11) ** 2 - abs(g02) ** 2 / 3) + g21 / 2
