import numpy as np
import pytest

from ddereal.linsys import SpectrumSpec
from ddereal.polyring import Poly, VariableSpace, VectorPoly
from ddereal.symmetry import (
    averaging_matrix,
    catalog_rank,
    dims,
    double_hopf_target_closed_form,
    enumerate_basis,
    homological_eigenvalue,
    homological_matrix,
    k_matrix,
    project_a,
    project_pi,
    source_dimension,
    source_dimension_closed_form,
)

HOPF = SpectrumSpec(p=1, includes_zero=False, omegas=(1.3,), r=1.0)
SH = SpectrumSpec(p=1, includes_zero=True, omegas=(1.0,), r=5.0)
DH = SpectrumSpec(p=2, includes_zero=False, omegas=(1.0, np.sqrt(2.0)), r=3.0)


def _rank(mat):
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > 1e-9 * max(1.0, sv[0]))) if sv.size else 0


def test_k_matrix():
    km = k_matrix(3)
    assert km.K.tolist() == [[1, 1, 1], [1, 1, -1], [1, -1, -1]]
    assert np.allclose(km.K @ km.K_inv, np.eye(3))
    assert k_matrix(2).K.tolist() == [[1, 1], [1, -1]]


def test_basis_examples():
    one = SpectrumSpec(p=1, includes_zero=False, omegas=(1.0,), r=1.0)
    v = enumerate_basis("V", one, 3)
    assert [b.terms for b in v.elements] == [{(3,): 1.0}]
    radial = enumerate_basis("H_radial", DH, 3)
    assert radial.elements == ((0, (3, 0)), (0, (1, 2)), (1, (2, 1)), (1, (0, 3)))
    vhat = enumerate_basis("Vhat", DH, 3)
    kinv = np.linalg.inv([[1, 1], [1, -1]])
    w1 = lambda v1, v2: kinv[0, 0] * v1 + kinv[0, 1] * v2
    w2 = lambda v1, v2: kinv[1, 0] * v1 + kinv[1, 1] * v2
    pt = (0.37, -1.21)
    expected = [w1(*pt) ** 3, w1(*pt) * w2(*pt) ** 2, w1(*pt) ** 2 * w2(*pt), w2(*pt) ** 3]
    assert [b(pt) for b in vhat.elements] == pytest.approx(expected)


def test_unknown_tag():
    with pytest.raises(ValueError):
        enumerate_basis("nope", HOPF, 3)


def test_enumeration_is_deterministic():
    a = enumerate_basis("H_torus", DH, 3, 1)
    b = enumerate_basis("H_torus", DH, 3, 1)
    assert a.elements == b.elements and a.to_json() == b.to_json()


def test_homological_eigenvalue_examples():
    w = 1.3
    assert homological_eigenvalue((2, 1), 0, HOPF) == 0
    assert homological_eigenvalue((3, 0), 0, HOPF) == pytest.approx(2j * w)
    assert homological_eigenvalue((1, 1, 0), 0, SH) == pytest.approx(1j)


def test_project_a_examples():
    sp = VariableSpace.center(1, s=1)
    f = VectorPoly.from_terms(sp, [(0, (3, 0, 0), 1.0)])
    assert project_a(f).is_zero()
    g = VectorPoly.from_terms(sp, [(0, (2, 1, 0), 1.0), (0, (3, 0, 0), 1.0)])
    assert project_a(g) == VectorPoly.from_terms(sp, [(0, (2, 1, 0), 1.0)])
    h = VectorPoly.from_terms(sp, [(0, (1, 0, 1), 1.0)])
    assert project_a(h) == h


def test_project_pi_examples():
    sp = VariableSpace.center(1)
    g = VectorPoly.from_terms(sp, [(0, (2, 1), 2 + 5j), (1, (1, 2), 2 - 5j)])
    out = project_pi(g)
    assert out[0].terms == {(3,): 2.0}
    assert project_pi(VectorPoly.from_terms(sp, [(0, (2, 1), 1j), (1, (1, 2), -1j)])).is_zero()
    sp3 = VariableSpace.center(1, True)
    g0 = VectorPoly.from_terms(sp3, [(0, (2, 0, 0), 1.0)])
    assert project_pi(g0)[0].terms == {(2, 0): 1.0}


def test_project_pi_rejects_non_equivariant():
    sp = VariableSpace.center(1)
    with pytest.raises(ValueError):
        project_pi(VectorPoly.from_terms(sp, [(0, (3, 0), 1.0), (1, (0, 3), 1.0)]))


def _conjugate(space, c, m):
    perm = [space.conjugate_index(i) for i in range(space.nvars)]
    return space.conjugate_index(c), tuple(m[perm[i]] for i in range(space.nvars))


def _random_equivariant(spec, order, s, rng):
    cat = enumerate_basis("H_torus", spec, order, s)
    terms = {}
    space = cat.space
    for c, m in cat.elements:
        # pair each element with its conjugate to keep the field real
        conj_c, conj_m = _conjugate(space, c, m)
        if (conj_c, conj_m) in terms:
            terms[(c, m)] = np.conj(terms[(conj_c, conj_m)])
        else:
            terms[(c, m)] = complex(*rng.standard_normal(2))
            if (conj_c, conj_m) == (c, m):
                terms[(c, m)] = terms[(c, m)].real
    return VectorPoly.from_terms(space, [(c, m, v) for (c, m), v in terms.items()])


def test_project_pi_independent_of_gamma():
    rng = np.random.default_rng(4)
    g = _random_equivariant(DH, 3, 1, rng)
    a = project_pi(g)
    b = project_pi(g, gamma=(0.7, -2.1))
    assert (a - b).norm() < 1e-12


@pytest.mark.parametrize("spec", [HOPF, SH, DH], ids=["hopf", "steady-hopf", "double-hopf"])
@pytest.mark.parametrize("order", [2, 3, 4, 5])
def test_averaging_decomposition(spec, order):
    A = averaging_matrix(spec, order)
    LB = homological_matrix(spec, order)
    assert np.array_equal(A @ A, A)
    assert np.max(np.abs(A @ LB)) < 1e-12
    assert _rank(A) + _rank(LB) == A.shape[0]


def test_project_a_is_idempotent_on_random_fields():
    rng = np.random.default_rng(0)
    sp = VariableSpace.center(2, s=1)
    terms = []
    cat = enumerate_basis("H_center", DH, 3, 1)
    for c, m in cat.elements[::7]:
        terms.append((c, m, complex(*rng.standard_normal(2))))
    f = VectorPoly.from_terms(sp, terms)
    assert project_a(project_a(f)) == project_a(f)


def test_haar_average_quadrature_converges_like_one_over_t():
    """Time average of e^{Bs} f(e^{-Bs} x) approaches project_a(f)(x)."""
    rng = np.random.default_rng(2)
    spec = HOPF
    sp = VariableSpace.center(1)
    f = VectorPoly.from_terms(sp, [(0, (2, 1), 0.8 - 0.3j), (0, (3, 0), 1.1), (0, (0, 2), 0.5j),
                                    (1, (1, 2), 0.8 + 0.3j), (1, (0, 3), 1.1), (1, (2, 0), -0.5j)])
    lam = np.array(spec.eigenvalues)
    z = complex(*rng.standard_normal(2))
    x = np.array([z, np.conj(z)])
    exact = np.array([c(x) for c in project_a(f).components])
    errors = []
    Ts = [1e2, 1e3, 1e4]
    for T in Ts:
        # the integrand is a trigonometric polynomial, so each term integrates in closed form;
        # the error oscillates in T, so take its envelope over [T, 1.5T]
        worst = 0.0
        for horizon in np.linspace(T, 1.5 * T, 64):
            acc = np.zeros(2, dtype=complex)
            for comp, m, val in f.terms():
                freq = -(m[0] * lam[0] + m[1] * lam[1]) + lam[comp]
                mono = val * x[0] ** m[0] * x[1] ** m[1]
                acc[comp] += mono if freq == 0 else mono * (np.exp(-freq * horizon) - 1) / (-freq * horizon)
            worst = max(worst, np.max(np.abs(acc - exact)))
        errors.append(worst)
    slope = np.polyfit(np.log(Ts), np.log(errors), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.2)


def test_parameter_splitting_preserved():
    rng = np.random.default_rng(9)
    g = _random_equivariant(SH, 3, 1, rng)
    out = project_pi(g)
    mu_free_in = g.mu_free()
    assert (project_pi(mu_free_in) - out.mu_free()).norm() < 1e-12


def test_projection_surjective_onto_radial_catalog():
    for spec, order in [(HOPF, 3), (SH, 2), (SH, 3), (DH, 3), (DH, 5)]:
        torus = enumerate_basis("H_torus", spec, order, 1)
        radial = enumerate_basis("H_radial", spec, order, 1)
        idx = radial.index()
        mat = np.zeros((len(radial), len(torus)))
        for col, (c, m) in enumerate(torus.elements):
            f = VectorPoly.from_terms(torus.space, [(c, m, 1.0), (*_conjugate(torus.space, c, m), 1.0)])
            try:
                out = project_pi(f)
            except ValueError:
                continue
            for comp, mono, val in out.terms():
                mat[idx[(comp, mono)], col] += val.real
        assert _rank(mat) == len(radial)


@pytest.mark.parametrize("spec", [HOPF, SH, DH], ids=["hopf", "steady-hopf", "double-hopf"])
def test_vhat_matches_equivariant_radial_dimension(spec):
    for order in range(2, 6):
        assert catalog_rank(enumerate_basis("Vhat", spec, order, 1)) == len(enumerate_basis("H_radial", spec, order, 1))


def test_dims_example_double_hopf_cubic():
    rep = dims(DH, 3, 0, 1)
    assert rep["sourceDim"] == 2 and rep["targetDim"] == 4
    assert rep["restricted"]
    assert rep["summary"] == "2 < 4, not surjective"


def test_double_hopf_closed_form_holds_for_odd_orders():
    for order in range(2, 10):
        enumerated = dims(DH, order)["targetDim"]
        big_l = order // 2
        if order % 2:
            assert enumerated == double_hopf_target_closed_form(order) == big_l * (big_l + 3)
        else:
            assert enumerated == (big_l - 1) * (big_l + 2)


def test_source_dimension_closed_form():
    for n in range(1, 5):
        for order in range(2, 7):
            assert source_dimension(n, order) == source_dimension_closed_form(n, order)
    assert source_dimension(1, 3) == 2
