"""Eigensolver, characteristic polynomial and vectorization contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epkit import linalg
from epkit.errors import DimensionTooLarge
from epkit.models import SIGMA_X, SIGMA_Z, basic_liouvillian, pt_hamiltonian, PTParams


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def det_bruteforce(a):
    """Permutation-sum determinant; independent of any LAPACK path (dim<=4)."""
    import itertools

    n = a.shape[0]
    total = 0.0 + 0.0j
    for perm in itertools.permutations(range(n)):
        sign = 1
        seen = list(perm)
        for i in range(n):
            for j in range(i + 1, n):
                if seen[i] > seen[j]:
                    sign = -sign
        term = sign
        for i in range(n):
            term = term * a[i, perm[i]]
        total += term
    return total


# -- kron and vec -----------------------------------------------------------


def test_kron_identity_case():
    eye2 = np.eye(2, dtype=complex)
    assert np.array_equal(linalg.kron(eye2, eye2), np.eye(4, dtype=complex))


def test_vec_row_product_identity_random_triples():
    # vec_row(A X B) == (A kron B^T) vec_row(X), checked against direct
    # matrix products for 50 random 2x2 triples.
    rng = np.random.default_rng(1234)
    for _ in range(50):
        a, x, b = (random_complex(rng, 2, 2) for _ in range(3))
        lhs = linalg.vec_row(a @ x @ b)
        rhs = linalg.kron(a, b.T) @ linalg.vec_row(x)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_unvec_round_trip():
    rng = np.random.default_rng(0)
    x = random_complex(rng, 3, 3)
    assert np.array_equal(linalg.unvec_row(linalg.vec_row(x)), x)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(2, 3),
    st.integers(2, 3),
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.integers(0, 2**31 - 1),
)
def test_kron_bilinearity_property(da, db, s, t, seed):
    rng = np.random.default_rng(seed)
    a1, a2 = random_complex(rng, da, da), random_complex(rng, da, da)
    b = random_complex(rng, db, db)
    lhs = linalg.kron(s * a1 + t * a2, b)
    rhs = s * linalg.kron(a1, b) + t * linalg.kron(a2, b)
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * (1 + np.max(np.abs(rhs)))


# -- eig --------------------------------------------------------------------


def test_eig_diagonal_case():
    d = linalg.eig(np.diag([1.0, 2.0j]))
    by_val = {complex(v): i for i, v in enumerate(d.eigenvalues)}
    assert set(by_val) == {1.0 + 0j, 2.0j}
    for val, i in by_val.items():
        e = np.zeros(2, dtype=complex)
        e[0 if val == 1.0 else 1] = 1.0
        assert np.max(np.abs(d.right[:, i] - e)) < 1e-12


def test_eig_pt_hamiltonian_real_pair():
    # J=1, Gamma=1 sits in the unbroken regime: eigenvalues +-sqrt(3)/2.
    d = linalg.eig(pt_hamiltonian(PTParams(J=1.0, Gamma=1.0)))
    expected = np.sqrt(3.0) / 2.0
    assert abs(d.eigenvalues[0] - expected) < 1e-12
    assert abs(d.eigenvalues[1] + expected) < 1e-12
    assert not d.defective.any()


def test_eig_liouvillian_defective_pair():
    # Gamma = 8J makes the two fast modes coalesce: {0, -1/2, -3/4, -3/4}
    # with the -3/4 pair defective.
    d = linalg.eig(basic_liouvillian(J=0.125, Gamma=1.0))
    expected = np.array([0.0, -0.5, -0.75, -0.75])
    assert np.max(np.abs(np.sort(d.eigenvalues.real)[::-1] - np.sort(expected)[::-1])) < 1e-6
    assert np.max(np.abs(d.eigenvalues.imag)) < 1e-6
    pair = [i for i, v in enumerate(d.eigenvalues) if abs(v + 0.75) < 1e-4]
    assert len(pair) == 2
    assert d.defective[pair].all()
    assert not d.defective[[i for i in range(4) if i not in pair]].any()
    assert d.ep_condition > 1e6


def test_eig_rejects_large_and_nonfinite():
    with pytest.raises(DimensionTooLarge):
        linalg.eig(np.eye(17))
    with pytest.raises(ValueError):
        linalg.eig(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(ValueError):
        linalg.eig(np.array([[np.inf, 0], [0, 1]]))


def test_eig_deterministic_output():
    rng = np.random.default_rng(7)
    m = random_complex(rng, 5, 5)
    d1, d2 = linalg.eig(m), linalg.eig(m)
    assert np.array_equal(d1.eigenvalues, d2.eigenvalues)
    assert np.array_equal(d1.right, d2.right)
    assert np.array_equal(d1.left, d2.left)


def test_eig_phase_convention():
    rng = np.random.default_rng(11)
    m = random_complex(rng, 4, 4)
    d = linalg.eig(m)
    for mat in (d.right, d.left):
        for j in range(4):
            col = mat[:, j]
            mags = np.abs(col)
            anchor = np.argmax(mags >= 1e-8 * mags.max())
            assert abs(col[anchor].imag) < 1e-12
            assert col[anchor].real > 0


# -- invariants on random ensembles ----------------------------------------


@pytest.mark.parametrize("dim", [2, 3, 4, 8])
def test_eig_residuals_trace_det_biorthogonality(dim):
    rng = np.random.default_rng(100 + dim)
    for _ in range(250):
        m = random_complex(rng, dim, dim)
        d = linalg.eig(m)
        fro = np.linalg.norm(m)
        tol = 1e-9 * (1.0 + fro)
        for i in range(dim):
            if d.defective[i]:
                continue
            v = d.right[:, i]
            assert np.linalg.norm(m @ v - d.eigenvalues[i] * v) <= tol
            w = d.left[:, i]
            assert (
                np.linalg.norm(m.conj().T @ w - d.eigenvalues[i].conjugate() * w)
                <= tol
            )
        assert abs(d.eigenvalues.sum() - np.trace(m)) <= 1e-9 * (1.0 + fro)
        if dim <= 4:
            det = det_bruteforce(m)
            assert abs(np.prod(d.eigenvalues) - det) <= 1e-8 * (1.0 + abs(det))
        if not d.defective.any() and d.ep_condition < 1e6:
            b = linalg.biorthogonal_matrix(d)
            assert np.max(np.abs(b - np.eye(dim))) < 1e-8


# -- char_poly ---------------------------------------------------------------


def test_char_poly_identity():
    # (lambda - 1)^2 = lambda^2 - 2 lambda + 1
    c = linalg.char_poly(np.eye(2))
    assert np.max(np.abs(c - np.array([1.0, -2.0, 1.0]))) < 1e-14


def test_char_poly_pt_hamiltonian():
    # lambda^2 - (J^2 - Gamma^2/4)
    J, Gamma = 0.8, 1.1
    c = linalg.char_poly(J * SIGMA_X - 0.5j * Gamma * SIGMA_Z)
    expected = np.array([1.0, 0.0, -(J**2 - Gamma**2 / 4.0)])
    assert np.max(np.abs(c - expected)) < 1e-12


def test_char_poly_matches_principal_minors():
    # Coefficient of lambda^(n-k) is (-1)^k * (sum of k x k principal minors).
    import itertools

    rng = np.random.default_rng(42)
    m = random_complex(rng, 4, 4)
    c = linalg.char_poly(m)
    for k in range(1, 5):
        total = 0.0 + 0.0j
        for rows in itertools.combinations(range(4), k):
            sub = m[np.ix_(rows, rows)]
            total += det_bruteforce(sub)
        assert abs(c[k] - (-1) ** k * total) < 1e-10 * (1 + abs(total))


def test_char_poly_small_at_eigenvalues():
    rng = np.random.default_rng(5)
    for dim in (2, 4, 8):
        m = random_complex(rng, dim, dim)
        c = linalg.char_poly(m)
        d = linalg.eig(m)
        bound = 1e-8 * (1.0 + np.linalg.norm(m)) ** dim
        for lam in d.eigenvalues:
            assert abs(np.polyval(c, lam)) <= bound


# -- coalescence ------------------------------------------------------------


def test_coalescence_hermitian_orthogonal():
    rng = np.random.default_rng(3)
    a = random_complex(rng, 3, 3)
    h = a + a.conj().T
    d = linalg.eig(h)
    for i in range(3):
        for j in range(i + 1, 3):
            assert linalg.coalescence_measure(d, i, j) < 1e-10


def test_coalescence_at_ep_limit():
    # Just off the exceptional point J = Gamma/2 the eigenvectors are fully
    # aligned to within the offset itself.
    for off in (1 + 1e-9, 1 - 1e-9):
        d = linalg.eig(pt_hamiltonian(PTParams(J=0.5 * off, Gamma=1.0)))
        assert linalg.coalescence_measure(d, 0, 1) > 1.0 - 1e-6


def test_coalescence_analytic_value():
    # |<psi_+|psi_->| = Gamma / (2 J) away from the EP.
    d = linalg.eig(pt_hamiltonian(PTParams(J=1.0, Gamma=1.0)))
    assert abs(linalg.coalescence_measure(d, 0, 1) - 0.5) < 1e-12


# -- batch path --------------------------------------------------------------


def test_eig_batch_matches_scalar_order():
    rng = np.random.default_rng(17)
    mats = random_complex(rng, 10, 4, 4)
    vals, vecs = linalg.eig_batch(mats)
    for k in range(10):
        d = linalg.eig(mats[k])
        assert np.max(np.abs(vals[k] - d.eigenvalues)) < 1e-12
        # residuals of the batch vectors under the batch values
        for i in range(4):
            r = mats[k] @ vecs[k][:, i] - vals[k][i] * vecs[k][:, i]
            assert np.linalg.norm(r) < 1e-9 * (1 + np.linalg.norm(mats[k]))
