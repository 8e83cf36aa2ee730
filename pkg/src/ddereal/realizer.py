"""Realization of prescribed radial normal forms by delayed polynomial terms.

For each grade j the linear map from delayed monomials to radial
coefficients is ``v -> Pi A (Psi(0) v(E_tau x))``.  On the transformed basis
(``Vhat``) it is square, and at generic delays invertible, so prescribed
radial coefficients can be hit order by order once the lower-order
corrections are known.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np
import scipy.linalg

from .linsys import AdjointVector, DelayLinearOperator, SpectrumSpec, adjoint_vector
from .nfengine import DDEModel, NormalFormEngine, build_e, reduce_to_normal_form
from .polyring import Poly, VariableSpace, VectorPoly, compose_linear, monomials_of_degree
from .symmetry import (
    BasisCatalog,
    center_space,
    enumerate_basis,
    project_a,
    project_pi,
    radial_coordinates,
    radial_space,
)

log = logging.getLogger(__name__)

COND_LIMIT = 1e8
FORWARD_TOL = 1e-8
DET_THRESHOLD = 1e-6


class RealizationError(RuntimeError):
    pass


class SingularMatrixError(RealizationError):
    pass


class SliceMismatchError(RealizationError):
    pass


class ScanError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# the linear map


def _columns(spec: SpectrumSpec, psi0: np.ndarray, E: np.ndarray, sources: Sequence[Poly],
             codomain: BasisCatalog) -> np.ndarray:
    cspace = center_space(spec, codomain.space.s)
    mat = np.zeros((len(codomain), len(sources)))
    for k, b in enumerate(sources):
        scalar = compose_linear(b, E, cspace)
        vec = VectorPoly(cspace, tuple(scalar.scale(u) for u in psi0))
        mat[:, k] = radial_coordinates(project_pi(project_a(vec), spec), codomain)
    return mat


@dataclass
class RealizabilityMatrix:
    order: int
    taus: tuple
    domain: BasisCatalog
    codomain: BasisCatalog
    matrix: np.ndarray

    @property
    def n_mu_free(self) -> int:
        return self.codomain.n_mu_free

    @property
    def mu_free_block(self) -> np.ndarray:
        k = self.n_mu_free
        return self.matrix[:k, :k]

    @property
    def mu_block(self) -> np.ndarray:
        k = self.n_mu_free
        return self.matrix[k:, k:]

    @property
    def cross_blocks(self) -> tuple[np.ndarray, np.ndarray]:
        k = self.n_mu_free
        return self.matrix[:k, k:], self.matrix[k:, :k]

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix)) if self.matrix.size else 1.0

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.matrix)) if self.matrix.size else 1.0

    def row_normalized_determinant(self) -> float:
        """|det| after scaling each row to unit norm; lies in [0, 1]."""
        if not self.matrix.size:
            return 1.0
        norms = np.linalg.norm(self.matrix, axis=1)
        if np.any(norms == 0):
            return 0.0
        return float(abs(np.linalg.det(self.matrix / norms[:, None])))

    def normalized_determinant(self) -> float:
        """Row-normalized |det| after equilibrating columns.

        The domain basis has no preferred scale, so columns are brought to
        unit norm first; the score is then invariant under rescaling of
        either basis.
        """
        if not self.matrix.size:
            return 1.0
        cols = np.linalg.norm(self.matrix, axis=0)
        if np.any(cols == 0):
            return 0.0
        scaled = self.matrix / cols[None, :]
        rows = np.linalg.norm(scaled, axis=1)
        if np.any(rows == 0):
            return 0.0
        return float(abs(np.linalg.det(scaled / rows[:, None])))

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "taus": list(self.taus),
            "matrix": self.matrix.tolist(),
            "determinant": self.determinant,
            "condition": self.condition,
        }


def assemble_n(spec: SpectrumSpec, adj: AdjointVector | None, taus: Sequence[float] | None, order: int,
               s: int = 0, psi0: np.ndarray | None = None, M: np.ndarray | None = None,
               domain: str = "Vhat") -> RealizabilityMatrix:
    """Matrix of v -> Pi A(Psi(0) v(M x)) from a delayed basis to the radial basis.

    ``M`` defaults to the delay matrix of ``taus``; ``psi0`` defaults to the
    adjoint row of ``adj``.  Both overrides exist for synthetic checks.
    """
    if domain not in ("Vhat", "V"):
        raise ValueError("domain must be 'Vhat' or 'V'")
    E = build_e(spec, taus) if M is None else np.asarray(M, dtype=complex)
    if E.shape != (spec.d, spec.kappa):
        raise ValueError(f"delay matrix must be {spec.d} x {spec.kappa}")
    psi0 = adj.slots if psi0 is None else np.asarray(psi0, dtype=complex)
    dom = enumerate_basis(domain, spec, order, s)
    cod = enumerate_basis("H_radial", spec, order, s)
    mat = _columns(spec, psi0, E, dom.elements, cod)
    return RealizabilityMatrix(order, tuple(taus) if taus is not None else (), dom, cod, mat)


def linear_part(spec: SpectrumSpec, adj: AdjointVector, taus: Sequence[float], order: int):
    """Exact grade-wise linear map from all delayed monomials (any number of delays)."""
    taus = tuple(float(t) for t in taus)
    dspace = VariableSpace.delayed(len(taus), 0)
    E = build_e(spec, taus)
    blocks = {}
    for j in range(2, order + 1):
        sources = [Poly.monomial(dspace, m) for m in monomials_of_degree(len(taus), j)]
        cod = enumerate_basis("H_radial", spec, j, 0)
        blocks[j] = (sources, cod, _columns(spec, adj.slots, E, sources, cod))
    return blocks


# --------------------------------------------------------------------------
# delay scan


@dataclass
class ScanResult:
    best_tau: np.ndarray
    best_score: float
    fraction: float
    samples: np.ndarray
    scores: np.ndarray
    orders: tuple
    threshold: float
    seed: int | None
    row_only_fraction: float = float("nan")

    def to_json(self) -> dict:
        return {
            "bestTau": self.best_tau.tolist(),
            "bestScore": self.best_score,
            "fraction": self.fraction,
            "rowOnlyFraction": self.row_only_fraction,
            "nSamples": int(self.samples.shape[0]),
            "orders": list(self.orders),
            "threshold": self.threshold,
            "seed": self.seed,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"tau{i + 1}" for i in range(self.samples.shape[1])] + [f"det{j}" for j in self.orders])
            for tau, row in zip(self.samples, self.scores):
                w.writerow([f"{t:.12g}" for t in tau] + [f"{v:.12g}" for v in row])


def _sample_delays(spec: SpectrumSpec, sampler: str, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    d = spec.d
    if sampler == "random":
        return rng.uniform(-spec.r, 0.0, size=(n_samples, d))
    if sampler == "grid":
        per = max(2, int(np.ceil(n_samples ** (1.0 / d))))
        axis = np.linspace(-spec.r, 0.0, per + 1)[:-1]
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)[:n_samples]
    raise ValueError("sampler must be 'random' or 'grid'")


def scan_tau(spec: SpectrumSpec, adj: AdjointVector, order: int, n_samples: int = 1000,
             sampler: str = "random", seed: int | None = 0, s: int = 0, threads: int = 1,
             threshold: float = DET_THRESHOLD) -> ScanResult:
    """Score delay vectors by min_j of the row-normalized |det N_j|."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    samples = _sample_delays(spec, sampler, n_samples, rng)
    orders = tuple(j for j in range(2, order + 1) if len(enumerate_basis("H_radial", spec, j, s)))

    def score(tau):
        mats = [assemble_n(spec, adj, tau, j, s) for j in orders]
        return [m.normalized_determinant() for m in mats] + [m.row_normalized_determinant() for m in mats]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = np.array(list(pool.map(score, samples)))
        # ThreadPoolExecutor.map preserves order, so results stay deterministic
    else:
        scores = np.array([score(t) for t in samples])
    scores = scores.reshape(len(samples), 2 * len(orders))
    scores, row_scores = scores[:, : len(orders)], scores[:, len(orders):]
    overall = scores.min(axis=1) if orders else np.ones(len(samples))
    row_overall = row_scores.min(axis=1) if orders else np.ones(len(samples))
    if not np.any(overall > threshold):
        raise ScanError("every sampled delay vector is degenerate; try a larger r or other frequencies")
    best = int(np.argmax(overall))
    return ScanResult(samples[best], float(overall[best]), float(np.mean(overall > threshold)),
                      samples, scores, orders, threshold, seed, float(np.mean(row_overall > threshold)))


# --------------------------------------------------------------------------
# realization


@dataclass
class RealizationProblem:
    """Target radial field (parameter-free and parameter-dependent parts together)."""

    spec: SpectrumSpec
    L: DelayLinearOperator
    taus: tuple
    order: int
    target: VectorPoly
    s: int = 0
    pinned: Dict[int, Poly] = field(default_factory=dict)

    def __post_init__(self):
        self.taus = tuple(float(t) for t in self.taus)
        if len(self.taus) != self.spec.d:
            raise ValueError(f"realization needs exactly {self.spec.d} delays")
        rspace = radial_space(self.spec, self.s)
        if self.target.space != rspace:
            raise ValueError("target must live in the radial space of the spectrum")
        dspace = VariableSpace.delayed(self.spec.d, self.s)
        for j, p in self.pinned.items():
            if p.space != dspace:
                raise ValueError("pinned terms must live in the delayed space")
            if any(sum(m) != j for m in p.terms) or not p.mu_part().is_zero():
                raise ValueError(f"pinned order {j} must be a parameter-free homogeneous polynomial")
        if self.target.truncate(1).norm() or self.target.degree() > self.order:
            raise ValueError("target must consist of grades 2..order")

    @property
    def target_h(self) -> VectorPoly:
        return self.target.mu_free()

    @property
    def target_q(self) -> VectorPoly:
        return self.target.mu_part()


@dataclass
class OrderDiagnostics:
    order: int
    condition_mu_free: float
    condition_mu: float
    determinant: float
    correction_norm: float
    pinned: bool

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "conditionMuFree": self.condition_mu_free,
            "conditionMu": self.condition_mu,
            "determinant": self.determinant,
            "correctionNorm": self.correction_norm,
            "pinned": self.pinned,
        }


@dataclass
class RealizationResult:
    model: DDEModel
    eta: Poly
    xi: Poly
    achieved: VectorPoly
    forward_error: float
    diagnostics: List[OrderDiagnostics]

    def to_json(self) -> dict:
        return {
            "eta": [{"exponents": list(m), "value": c.real} for m, c in self.eta.items()],
            "xi": [{"exponents": list(m), "value": c.real} for m, c in self.xi.items()],
            "achieved": [{"component": c, "exponents": list(m), "value": v.real} for c, m, v in self.achieved.terms()],
            "forwardError": self.forward_error,
            "forwardCheck": self.forward_error < FORWARD_TOL,
            "orders": [d.to_json() for d in self.diagnostics],
        }


def _solve_block(block: np.ndarray, rhs: np.ndarray, order: int, label: str,
                 cond_limit: float = COND_LIMIT) -> tuple[np.ndarray, float]:
    if not block.size:
        return np.zeros(0), 1.0
    cond = float(np.linalg.cond(block))
    if not np.isfinite(cond) or cond >= cond_limit:
        raise SingularMatrixError(f"order {order} {label} block is singular (condition {cond:.3e})")
    q, r, piv = scipy.linalg.qr(block, pivoting=True)
    y = scipy.linalg.solve_triangular(r, q.T @ rhs)
    x = np.empty_like(y)
    x[piv] = y
    return x, cond


def _combine(elements: Sequence[Poly], coeffs: np.ndarray, space: VariableSpace) -> Poly:
    out = Poly.zero(space)
    for b, c in zip(elements, coeffs):
        if c != 0.0:
            out = out + b.scale(float(c))
    return out.real_part()


def realize(problem: RealizationProblem, forward_tol: float = FORWARD_TOL,
            cond_limit: float = COND_LIMIT) -> RealizationResult:
    spec, s = problem.spec, problem.s
    adj_model = DDEModel(problem.L, problem.taus, Poly.zero(VariableSpace.delayed(spec.d, s)),
                         Poly.zero(VariableSpace.delayed(spec.d, s)), s)
    adj = adjoint_vector(problem.L, spec)
    engine = NormalFormEngine(adj_model, spec, adj, problem.order)
    dspace = adj_model.space
    eta = Poly.zero(dspace)
    xi = Poly.zero(dspace)
    diagnostics = []
    for j in range(2, problem.order + 1):
        nmat = assemble_n(spec, adj, problem.taus, j, s)
        cod = nmat.codomain
        k = nmat.n_mu_free
        engine.set_nonlinearity(eta + xi)
        rec, _ = engine.compute_order(j)
        base = radial_coordinates(project_pi(rec.g, spec), cod) if len(cod) else np.zeros(0)
        goal = radial_coordinates(problem.target.grade(j), cod) if len(cod) else np.zeros(0)
        pinned = j in problem.pinned
        if pinned:
            eta_j = problem.pinned[j]
            cond0 = float("nan")
        else:
            coeff0, cond0 = _solve_block(nmat.mu_free_block, goal[:k] - base[:k], j, "parameter-free", cond_limit)
            eta_j = _combine(nmat.domain.elements[:k], coeff0, dspace)
        coeff1, cond1 = _solve_block(nmat.mu_block, goal[k:] - base[k:], j, "parameter", cond_limit)
        xi_j = _combine(nmat.domain.elements[k:], coeff1, dspace)
        eta = eta + eta_j
        xi = xi + xi_j
        engine.set_nonlinearity(eta + xi)
        rec, w_new = engine.compute_order(j)
        engine.commit(j, rec, w_new)
        diagnostics.append(OrderDiagnostics(j, cond0, cond1, nmat.determinant, float(np.linalg.norm(base)), pinned))
        log.debug("order %d: cond %.3g / %.3g", j, cond0, cond1)

    model = DDEModel(problem.L, problem.taus, eta.chop(1e-15), xi.chop(1e-15), s)
    achieved = reduce_to_normal_form(model, spec, adj, problem.order).radial
    err = _forward_error(achieved, problem)
    if err > forward_tol:
        raise RealizationError(f"forward check failed: max coefficient error {err:.3e}")
    return RealizationResult(model, model.eta, model.xi, achieved, err, diagnostics)


def _forward_error(achieved: VectorPoly, problem: RealizationProblem) -> float:
    diff = achieved - problem.target
    worst = 0.0
    for _, m, v in diff.terms():
        j = sum(m)
        if j in problem.pinned and not sum(m[achieved.space.mu_slice]):
            continue
        worst = max(worst, abs(v))
    return worst


def realize_unfolding(base: DDEModel, spec: SpectrumSpec, target: VectorPoly, order: int,
                      tol: float = 1e-8, forward_tol: float = FORWARD_TOL,
                      cond_limit: float = COND_LIMIT) -> RealizationResult:
    """Add parameter terms to ``base`` so the unfolded radial field is ``target``."""
    if not base.xi.is_zero():
        raise ValueError("the base model must not depend on parameters")
    s = target.space.s
    base = base.with_parameters(s)
    adj = adjoint_vector(base.L, spec)
    slice0 = reduce_to_normal_form(base.with_parameters(0), spec, adj, order).radial
    mismatch = 0.0
    target0 = target.mu_free()
    for comp, m, v in (target0 - _lift(slice0, target.space)).terms():
        mismatch = max(mismatch, abs(v))
    if mismatch > tol:
        raise SliceMismatchError(f"target at mu = 0 differs from the base radial field by {mismatch:.3e}")
    pinned = {j: base.eta.grade(j) for j in range(2, order + 1)}
    problem = RealizationProblem(spec, base.L, base.delays, order, target, s, pinned)
    return realize(problem, forward_tol=forward_tol, cond_limit=cond_limit)


def _lift(v: VectorPoly, space: VariableSpace) -> VectorPoly:
    pad = space.s - v.space.s
    return VectorPoly.from_terms(space, [(c, m + (0,) * pad, val) for c, m, val in v.terms()])


# --------------------------------------------------------------------------
# submersion and restriction analytics


@dataclass
class JacobianReport:
    jacobian: np.ndarray
    exact: np.ndarray
    rank: int
    exact_rank: int
    singular_values: np.ndarray
    source_dim: int
    target_dim: int

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "exactRank": self.exact_rank,
            "sourceDim": self.source_dim,
            "targetDim": self.target_dim,
            "singularValues": self.singular_values.tolist(),
        }


def _rank(mat: np.ndarray) -> tuple[int, np.ndarray]:
    if not mat.size:
        return 0, np.zeros(0)
    sv = np.linalg.svd(mat, compute_uv=False)
    return (int(np.sum(sv > 1e-8 * sv[0])) if sv[0] > 0 else 0), sv


def submersion_jacobian(spec: SpectrumSpec, L: DelayLinearOperator, taus: Sequence[float], order: int,
                        eta: Poly | None = None, step: float = 1e-6) -> JacobianReport:
    """Jacobian of eta -> parameter-free radial field, by central differences."""
    taus = tuple(float(t) for t in taus)
    adj = adjoint_vector(L, spec)
    dspace = VariableSpace.delayed(len(taus), 0)
    eta = Poly.zero(dspace) if eta is None else eta
    blocks = linear_part(spec, adj, taus, order)
    sources = [b for j in blocks for b in blocks[j][0]]
    cods = [(j, blocks[j][1]) for j in blocks]
    n_rows = sum(len(c) for _, c in cods)

    def radial_vector(e: Poly) -> np.ndarray:
        rad = reduce_to_normal_form(DDEModel(L, taus, e, Poly.zero(dspace)), spec, adj, order).radial
        return np.concatenate([radial_coordinates(rad.grade(j), c) for j, c in cods]) if cods else np.zeros(0)

    jac = np.zeros((n_rows, len(sources)))
    for k, b in enumerate(sources):
        jac[:, k] = (radial_vector(eta + b.scale(step)) - radial_vector(eta - b.scale(step))) / (2 * step)
    exact = scipy.linalg.block_diag(*[blocks[j][2] for j in blocks]) if blocks else np.zeros((0, 0))
    rank, sv = _rank(jac)
    exact_rank, _ = _rank(exact)
    return JacobianReport(jac, exact, rank, exact_rank, sv, len(sources), n_rows)


REQUIRED_SIGN_PATTERNS = 12


def double_hopf_one_delay_analysis(spec: SpectrumSpec, L: DelayLinearOperator, tau: float,
                                   grid: int = 201, extent: float = 1.0, zero_tol: float = 1e-9) -> dict:
    """Cubic radial coefficients a_ij(b2, b3) = alpha_ij b2^2 + beta_ij b3 for eta = b2 v^2 + b3 v^3."""
    if spec.p != 2 or spec.includes_zero:
        raise ValueError("this analysis is for a double Hopf point")
    adj = adjoint_vector(L, spec)
    dspace = VariableSpace.delayed(1, 0)
    cod = enumerate_basis("H_radial", spec, 3, 0)

    def cubic(b2: float, b3: float) -> np.ndarray:
        eta = Poly(dspace, {(2,): b2, (3,): b3})
        rad = reduce_to_normal_form(DDEModel(L, (tau,), eta, Poly.zero(dspace)), spec, adj, 3).radial
        return radial_coordinates(rad.grade(3), cod)

    alpha = cubic(1.0, 0.0)
    beta = linear_part(spec, adj, (tau,), 3)[3][2][:, 0]
    beta_forward = cubic(0.0, 1.0)
    check = cubic(2.0, 3.0)
    consistency = float(np.max(np.abs(check - (4 * alpha + 3 * beta))))
    axis = np.linspace(-extent, extent, grid)
    b2, b3 = np.meshgrid(axis, axis, indexing="ij")
    coeffs = alpha[None, None, :] * (b2 ** 2)[..., None] + beta[None, None, :] * b3[..., None]
    scale = float(np.max(np.abs(coeffs)))
    valid = np.all(np.abs(coeffs) > zero_tol * scale, axis=-1)
    signs = np.sign(coeffs[valid]).astype(int)
    patterns = sorted({tuple(row) for row in signs})
    count = len(patterns)
    return {
        "alpha": alpha.tolist(),
        "beta": beta.tolist(),
        "betaForwardError": float(np.max(np.abs(beta - beta_forward))),
        "consistencyError": consistency,
        "signRegionCount": count,
        "signPatterns": [list(p) for p in patterns],
        "requiredPatterns": REQUIRED_SIGN_PATTERNS,
        "verdict": "restricted" if count < REQUIRED_SIGN_PATTERNS else "unrestricted",
        "coefficientOrder": [f"{c}:{list(m)}" for c, m in cod.elements],
    }


def realize_target(spec: SpectrumSpec, L: DelayLinearOperator, taus: Sequence[float], order: int,
                   target: Mapping | VectorPoly, s: int = 0, pinned: Mapping[int, Poly] | None = None) -> RealizationResult:
    """Convenience wrapper building the problem from a coefficient table."""
    if not isinstance(target, VectorPoly):
        target = VectorPoly.from_terms(radial_space(spec, s), [(c, m, v) for (c, m), v in target.items()])
    return realize(RealizationProblem(spec, L, tuple(taus), order, target, s, dict(pinned or {})))
