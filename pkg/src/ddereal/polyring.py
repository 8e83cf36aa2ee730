"""Multigraded polynomials over center, delayed-value and radial variables.

Scalar polynomials (:class:`Poly`) map exponent tuples to complex
coefficients.  :class:`VectorPoly` stacks one scalar polynomial per
component of the phase space.  All operations return new objects.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

Monomial = Tuple[int, ...]

DEFAULT_DEGREE_CAP = 7


# --------------------------------------------------------------------------
# variable spaces


@dataclass(frozen=True)
class VariableSpace:
    """Ordered variable set.

    ``kind`` is ``"center"`` (x0?, x1, xb1, ..., w1.., mu..),
    ``"delayed"`` (v1..vn, mu..) or ``"radial"`` (rho0?, rho1.., mu..).
    Center spaces may carry ``n_w`` extra real variables standing for the
    delayed values w_i = y(tau_i) of the infinite-dimensional component.
    """

    kind: str
    p: int
    includes_zero: bool
    s: int
    n: int
    n_w: int = 0

    @staticmethod
    def center(p: int, includes_zero: bool = False, s: int = 0, n_w: int = 0) -> "VariableSpace":
        return VariableSpace("center", p, includes_zero, s, 2 * p + int(includes_zero), n_w)

    @staticmethod
    def delayed(n: int, s: int = 0) -> "VariableSpace":
        return VariableSpace("delayed", 0, False, s, n)

    @staticmethod
    def radial(p: int, includes_zero: bool = False, s: int = 0) -> "VariableSpace":
        return VariableSpace("radial", p, includes_zero, s, p + int(includes_zero))

    def __post_init__(self):
        if self.kind not in ("center", "delayed", "radial"):
            raise ValueError(f"unknown variable-space kind {self.kind!r}")
        if self.s < 0 or self.n < 0 or self.n_w < 0:
            raise ValueError("negative variable count")
        if self.kind == "center" and self.n != 2 * self.p + int(self.includes_zero):
            raise ValueError("center space needs kappa = 2p (+1 with a zero eigenvalue)")
        if self.kind == "radial" and self.n != self.p + int(self.includes_zero):
            raise ValueError("radial space needs d = p (+1 with a zero eigenvalue)")
        if self.kind != "center" and self.n_w:
            raise ValueError("w variables only exist in center spaces")

    # sizes -----------------------------------------------------------------
    @property
    def n_state(self) -> int:
        """Number of phase-space variables (kappa, delays, or d)."""
        return self.n

    @property
    def nvars(self) -> int:
        return self.n + self.n_w + self.s

    @property
    def mu_slice(self) -> slice:
        return slice(self.n + self.n_w, self.nvars)

    @property
    def w_slice(self) -> slice:
        return slice(self.n, self.n + self.n_w)

    @property
    def n_components(self) -> int:
        return self.n

    # naming ----------------------------------------------------------------
    @property
    def names(self) -> Tuple[str, ...]:
        out: List[str] = []
        if self.kind == "center":
            if self.includes_zero:
                out.append("x0")
            for j in range(1, self.p + 1):
                out += [f"x{j}", f"xb{j}"]
            out += [f"w{i}" for i in range(1, self.n_w + 1)]
        elif self.kind == "delayed":
            out += [f"v{i}" for i in range(1, self.n + 1)]
        else:
            if self.includes_zero:
                out.append("rho0")
            out += [f"rho{j}" for j in range(1, self.p + 1)]
        out += [f"mu{k}" for k in range(1, self.s + 1)]
        return tuple(out)

    # torus weights ---------------------------------------------------------
    @property
    def variable_weights(self) -> np.ndarray:
        """Integer torus weight of every variable, shape (nvars, p)."""
        w = np.zeros((self.nvars, self.p), dtype=np.int64)
        if self.kind == "center":
            off = int(self.includes_zero)
            for j in range(self.p):
                w[off + 2 * j, j] = 1
                w[off + 2 * j + 1, j] = -1
        return w

    @property
    def component_weights(self) -> np.ndarray:
        """Torus weight of every component slot, shape (n, p)."""
        if self.kind == "center":
            return self.variable_weights[: self.n]
        return np.zeros((self.n, self.p), dtype=np.int64)

    def conjugate_index(self, idx: int) -> int:
        """Index of the conjugate variable (identity for real variables)."""
        if self.kind == "center" and idx < self.n:
            off = int(self.includes_zero)
            if idx >= off:
                return off + ((idx - off) ^ 1)
        return idx

    def with_parameters(self, s: int) -> "VariableSpace":
        return VariableSpace(self.kind, self.p, self.includes_zero, s, self.n, self.n_w)


# --------------------------------------------------------------------------
# monomial helpers


def degree(m: Monomial) -> int:
    return sum(m)


def graded_lex_key(m: Monomial):
    return (sum(m), tuple(-e for e in m))


def torus_weight(space: VariableSpace, m: Monomial) -> Tuple[int, ...]:
    """Torus weight (exp(x_j) - exp(xb_j))_j; zero outside center spaces."""
    if space.kind != "center":
        return (0,) * space.p
    off = int(space.includes_zero)
    return tuple(m[off + 2 * j] - m[off + 2 * j + 1] for j in range(space.p))


def monomials_of_degree(nvars: int, deg: int) -> Iterator[Monomial]:
    """All exponent tuples of total degree ``deg`` in graded-lex order."""
    for combo in itertools.combinations_with_replacement(range(nvars), deg):
        e = [0] * nvars
        for i in combo:
            e[i] += 1
        yield tuple(e)


def unit(nvars: int, i: int) -> Monomial:
    e = [0] * nvars
    e[i] = 1
    return tuple(e)


def _add_exps(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


# --------------------------------------------------------------------------
# scalar polynomials


class Poly:
    """Sparse scalar polynomial with complex coefficients."""

    __slots__ = ("space", "terms")

    def __init__(self, space: VariableSpace, terms: Mapping[Monomial, complex] | None = None):
        self.space = space
        clean: Dict[Monomial, complex] = {}
        if terms:
            nv = space.nvars
            for m, c in terms.items():
                m = tuple(int(e) for e in m)
                if len(m) != nv:
                    raise ValueError(f"monomial {m} has wrong length for space with {nv} variables")
                if any(e < 0 for e in m):
                    raise ValueError(f"negative exponent in {m}")
                c = complex(c)
                if c != 0:
                    clean[m] = clean.get(m, 0) + c
            clean = {m: c for m, c in clean.items() if c != 0}
        self.terms = clean

    # constructors ----------------------------------------------------------
    @classmethod
    def zero(cls, space: VariableSpace) -> "Poly":
        return cls(space)

    @classmethod
    def constant(cls, space: VariableSpace, c: complex) -> "Poly":
        return cls(space, {(0,) * space.nvars: c})

    @classmethod
    def variable(cls, space: VariableSpace, idx: int, coeff: complex = 1.0) -> "Poly":
        return cls(space, {unit(space.nvars, idx): coeff})

    @classmethod
    def monomial(cls, space: VariableSpace, exps: Sequence[int], coeff: complex = 1.0) -> "Poly":
        return cls(space, {tuple(exps): coeff})

    # queries ---------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def min_degree(self) -> int:
        return min((sum(m) for m in self.terms), default=-1)

    def coefficient(self, m: Sequence[int]) -> complex:
        return self.terms.get(tuple(m), 0j)

    def items(self) -> List[Tuple[Monomial, complex]]:
        """Terms in graded-lex order."""
        return sorted(self.terms.items(), key=lambda kv: graded_lex_key(kv[0]))

    def norm(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def mu_degree(self, m: Monomial) -> int:
        return sum(m[self.space.mu_slice])

    # grading ---------------------------------------------------------------
    def truncate(self, max_degree: int) -> "Poly":
        return Poly(self.space, {m: c for m, c in self.terms.items() if sum(m) <= max_degree})

    def grade(self, j: int) -> "Poly":
        return Poly(self.space, {m: c for m, c in self.terms.items() if sum(m) == j})

    def mu_free(self) -> "Poly":
        sl = self.space.mu_slice
        return Poly(self.space, {m: c for m, c in self.terms.items() if not any(m[sl])})

    def mu_part(self) -> "Poly":
        sl = self.space.mu_slice
        return Poly(self.space, {m: c for m, c in self.terms.items() if any(m[sl])})

    def chop(self, tol: float) -> "Poly":
        return Poly(self.space, {m: c for m, c in self.terms.items() if abs(c) > tol})

    def real_part(self) -> "Poly":
        return Poly(self.space, {m: c.real for m, c in self.terms.items()})

    # arithmetic ------------------------------------------------------------
    def _check(self, other: "Poly"):
        if other.space != self.space:
            raise ValueError("variable-space mismatch")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(self.space, out)

    def __neg__(self) -> "Poly":
        return Poly(self.space, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, a: complex) -> "Poly":
        return Poly(self.space, {m: a * c for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Poly):
            return multiply(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        out = Poly.constant(self.space, 1.0)
        for _ in range(k):
            out = multiply(out, self)
        return out

    def conj(self) -> "Poly":
        """Complex conjugate with conjugate-pair variables swapped."""
        space = self.space
        perm = [space.conjugate_index(i) for i in range(space.nvars)]
        out = {}
        for m, c in self.terms.items():
            out[tuple(m[perm[i]] for i in range(space.nvars))] = c.conjugate()
        return Poly(space, out)

    def derivative(self, idx: int) -> "Poly":
        out = {}
        for m, c in self.terms.items():
            if m[idx]:
                mm = list(m)
                mm[idx] -= 1
                out[tuple(mm)] = c * m[idx]
        return Poly(self.space, out)

    def __call__(self, values) -> complex:
        values = np.asarray(values)
        total = 0j
        for m, c in self.terms.items():
            total = total + c * np.prod([values[..., i] ** e for i, e in enumerate(m) if e], axis=0)
        return total

    def evaluate_batch(self, values: np.ndarray) -> np.ndarray:
        """Evaluate at many points; ``values`` has shape (npts, nvars)."""
        values = np.asarray(values)
        if not self.terms:
            return np.zeros(values.shape[0], dtype=complex)
        exps = np.array(list(self.terms.keys()))
        coefs = np.array(list(self.terms.values()))
        powers = np.prod(values[:, None, :] ** exps[None, :, :], axis=2)
        return powers @ coefs

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and other.space == self.space and other.terms == self.terms

    def allclose(self, other: "Poly", tol: float = 1e-12) -> bool:
        return (self - other).norm() <= tol

    def __repr__(self) -> str:
        if not self.terms:
            return "Poly(0)"
        names = self.space.names
        parts = []
        for m, c in self.items():
            mon = "*".join(f"{names[i]}^{e}" if e > 1 else names[i] for i, e in enumerate(m) if e)
            parts.append(f"({c:.6g})" + (f"*{mon}" if mon else ""))
        return " + ".join(parts)

    def to_json(self) -> list:
        return [
            {"exponents": list(m), "re": float(c.real), "im": float(c.imag)}
            for m, c in self.items()
        ]

    @classmethod
    def from_json(cls, space: VariableSpace, data: Iterable[dict]) -> "Poly":
        return cls(space, {tuple(d["exponents"]): complex(d.get("re", 0.0), d.get("im", 0.0)) for d in data})


def multiply(a: Poly, b: Poly, max_degree: int | None = None) -> Poly:
    """Product of two scalar polynomials, optionally truncated."""
    a._check(b)
    out: Dict[Monomial, complex] = {}
    if max_degree is None:
        for ma, ca in a.terms.items():
            for mb, cb in b.terms.items():
                m = _add_exps(ma, mb)
                out[m] = out.get(m, 0) + ca * cb
    else:
        bl = [(mb, cb, sum(mb)) for mb, cb in b.terms.items()]
        for ma, ca in a.terms.items():
            da = sum(ma)
            for mb, cb, db in bl:
                if da + db <= max_degree:
                    m = _add_exps(ma, mb)
                    out[m] = out.get(m, 0) + ca * cb
    return Poly(a.space, out)


def substitute(h: Poly, images: Sequence[Poly], target: VariableSpace,
               max_degree: int | None = None) -> Poly:
    """Replace every variable of ``h`` by the matching polynomial in ``images``."""
    if len(images) != h.space.nvars:
        raise ValueError(f"need {h.space.nvars} images, got {len(images)}")
    for im in images:
        if im.space != target:
            raise ValueError("image lives in the wrong space")
    powers: List[List[Poly]] = [[Poly.constant(target, 1.0)] for _ in images]

    def power(i: int, k: int) -> Poly:
        cache = powers[i]
        while len(cache) <= k:
            cache.append(multiply(cache[-1], images[i], max_degree))
        return cache[k]

    out: Dict[Monomial, complex] = {}
    for m, c in h.terms.items():
        term = Poly.constant(target, c)
        for i, e in enumerate(m):
            if e:
                term = multiply(term, power(i, e), max_degree)
                if term.is_zero():
                    break
        for mm, cc in term.terms.items():
            out[mm] = out.get(mm, 0) + cc
    return Poly(target, out)


def compose_linear(h: Poly, M: np.ndarray, target: VariableSpace) -> Poly:
    """Evaluate h(x M^T, mu): each state variable v_i becomes sum_c M[i, c] x_c.

    Parameter variables are carried over unchanged, so ``target`` must have
    the same parameter count as ``h``.
    """
    M = np.asarray(M, dtype=complex)
    src = h.space
    if M.shape != (src.n_state, target.n_state):
        raise ValueError(f"matrix shape {M.shape} does not match ({src.n_state}, {target.n_state})")
    if src.s != target.s:
        raise ValueError("parameter counts differ")
    images = []
    for i in range(src.n_state):
        images.append(Poly(target, {unit(target.nvars, c): M[i, c] for c in range(target.n_state)}))
    for k in range(src.s):
        images.append(Poly.variable(target, target.mu_slice.start + k))
    return substitute(h, images, target)


# --------------------------------------------------------------------------
# vector-valued polynomials


@dataclass(frozen=True)
class VectorPoly:
    space: VariableSpace
    components: Tuple[Poly, ...] = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            comps = tuple(Poly.zero(self.space) for _ in range(self.space.n_components))
        if len(comps) != self.space.n_components:
            raise ValueError(f"expected {self.space.n_components} components, got {len(comps)}")
        for c in comps:
            if c.space != self.space:
                raise ValueError("component lives in the wrong space")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, space: VariableSpace) -> "VectorPoly":
        return cls(space)

    @classmethod
    def from_terms(cls, space: VariableSpace, terms: Iterable[Tuple[int, Sequence[int], complex]]) -> "VectorPoly":
        comps: List[Dict[Monomial, complex]] = [{} for _ in range(space.n_components)]
        for comp, m, c in terms:
            m = tuple(m)
            comps[comp][m] = comps[comp].get(m, 0) + c
        return cls(space, tuple(Poly(space, d) for d in comps))

    @property
    def component_weights(self) -> np.ndarray:
        return self.space.component_weights

    def __getitem__(self, i: int) -> Poly:
        return self.components[i]

    def __len__(self) -> int:
        return len(self.components)

    def map(self, fn) -> "VectorPoly":
        return VectorPoly(self.space, tuple(fn(c) for c in self.components))

    def __add__(self, other: "VectorPoly") -> "VectorPoly":
        if other.space != self.space:
            raise ValueError("variable-space mismatch")
        return VectorPoly(self.space, tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorPoly") -> "VectorPoly":
        if other.space != self.space:
            raise ValueError("variable-space mismatch")
        return VectorPoly(self.space, tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self) -> "VectorPoly":
        return self.map(lambda c: -c)

    def scale(self, a: complex) -> "VectorPoly":
        return self.map(lambda c: c.scale(a))

    def truncate(self, max_degree: int) -> "VectorPoly":
        return self.map(lambda c: c.truncate(max_degree))

    def grade(self, j: int) -> "VectorPoly":
        return self.map(lambda c: c.grade(j))

    def mu_free(self) -> "VectorPoly":
        return self.map(Poly.mu_free)

    def mu_part(self) -> "VectorPoly":
        return self.map(Poly.mu_part)

    def chop(self, tol: float) -> "VectorPoly":
        return self.map(lambda c: c.chop(tol))

    def degree(self) -> int:
        return max((c.degree() for c in self.components), default=-1)

    def norm(self) -> float:
        return max((c.norm() for c in self.components), default=0.0)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def terms(self) -> List[Tuple[int, Monomial, complex]]:
        return [(i, m, c) for i, comp in enumerate(self.components) for m, c in comp.items()]

    def reality_defect(self) -> float:
        """Largest violation of the conjugate-pair reality structure."""
        sp = self.space
        worst = 0.0
        if sp.kind == "center":
            for i, comp in enumerate(self.components):
                j = sp.conjugate_index(i)
                worst = max(worst, (comp.conj() - self.components[j]).norm())
        else:
            for comp in self.components:
                worst = max(worst, max((abs(c.imag) for c in comp.terms.values()), default=0.0))
        return worst

    def check_reality(self, tol: float = 1e-10) -> None:
        defect = self.reality_defect()
        if defect > tol * max(1.0, self.norm()):
            raise ValueError(f"reality invariant violated (defect {defect:.3e})")

    def allclose(self, other: "VectorPoly", tol: float = 1e-12) -> bool:
        return (self - other).norm() <= tol

    def __eq__(self, other) -> bool:
        return isinstance(other, VectorPoly) and self.space == other.space and self.components == other.components

    def to_json(self) -> list:
        rows = []
        for i, comp in enumerate(self.components):
            for m, c in comp.items():
                rows.append({"component": i, "exponents": list(m), "re": float(c.real), "im": float(c.imag)})
        return rows

    @classmethod
    def from_json(cls, space: VariableSpace, rows: Iterable[dict]) -> "VectorPoly":
        return cls.from_terms(space, [(r["component"], r["exponents"], complex(r.get("re", 0.0), r.get("im", 0.0)))
                                      for r in rows])


def add(a: VectorPoly, b: VectorPoly) -> VectorPoly:
    return a + b


def truncate_grade(f: VectorPoly, max_degree: int) -> VectorPoly:
    if max_degree < 0:
        raise ValueError("truncation degree must be non-negative")
    return f.truncate(max_degree)
