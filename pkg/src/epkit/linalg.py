"""Dense complex linear algebra for small matrices (dim <= 16).

Provides the full right/left eigendecomposition with biorthogonal pairing,
coalescence diagnostics for locating non-diagonalizable (exceptional) points,
the characteristic polynomial, and row-major vectorization helpers used to
represent superoperators as matrices.

Conventions
-----------
* Eigenvalues are sorted by descending real part, ties by ascending
  imaginary part, so the slowest-decaying mode of a generator comes first.
* Right and left eigenvectors have unit Euclidean norm and the first
  significant component rotated onto the positive real axis, which makes
  outputs deterministic across runs.
* Left eigenvectors are right eigenvectors of the conjugate transpose,
  index-matched to the right ones by maximal |<l|r>| (eigenvalue proximity
  breaks ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionTooLarge, NonConvergence

MAX_DIM = 16

# Clusters closer than EIG_CLUSTER_TOL * (1 + ||m||_F) with eigenvector
# overlap above 1 - COALESCENCE_TOL are flagged defective; this matches the
# accuracy attainable in double precision near a square-root branch point.
EIG_CLUSTER_TOL = 1e-7
COALESCENCE_TOL = 1e-6

# ep_condition = 1/sigma_min of the right-eigenvector matrix, capped here.
EP_CONDITION_CAP = 1e16


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues with paired right/left eigenvectors and EP diagnostics.

    Attributes:
        eigenvalues: shape (dim,), canonical order (Re desc, Im asc).
        right: shape (dim, dim), right eigenvectors as columns.
        left: shape (dim, dim), left eigenvectors as columns; left[:, i]
            satisfies m^dag @ left[:, i] = conj(eigenvalues[i]) * left[:, i].
        defective: shape (dim,) bools, True for members of a coalescing
            eigenvalue cluster.
        ep_condition: inverse of the minimal singular value of ``right``,
            capped at EP_CONDITION_CAP.  Large values signal proximity to an
            exceptional point.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    defective: np.ndarray
    ep_condition: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


def _require_finite(m: np.ndarray, what: str = "matrix") -> None:
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{what} contains NaN or Inf entries")


def as_matrix(m) -> np.ndarray:
    """Validate and return a square complex matrix."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    _require_finite(a)
    return a


def kron(a, b) -> np.ndarray:
    """Kronecker product; satisfies vec_row(A X B) = (A kron B^T) vec_row(X)."""
    return np.kron(as_matrix(a), as_matrix(b))


def vec_row(rho) -> np.ndarray:
    """Row-major vectorization: a 2x2 matrix maps to (r11, r12, r21, r22)."""
    a = np.asarray(rho, dtype=complex)
    return a.reshape(-1)


def unvec_row(v) -> np.ndarray:
    """Inverse of vec_row."""
    a = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(a.size)))
    if d * d != a.size:
        raise ValueError(f"vector length {a.size} is not a perfect square")
    return a.reshape(d, d)


def canonical_order(values: np.ndarray) -> np.ndarray:
    """Index array sorting eigenvalues by Re descending, then Im ascending."""
    return np.lexsort((values.imag, -values.real))


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first significant component is real positive.

    Columns are assumed unit-norm.  "Significant" means at least 1e-8 of the
    largest component, so the anchor does not jump under tiny perturbations.
    """
    v = np.array(vectors, dtype=complex)
    for j in range(v.shape[1]):
        col = v[:, j]
        mags = np.abs(col)
        anchor = np.argmax(mags >= 1e-8 * mags.max())
        a = col[anchor]
        if abs(a) > 0:
            col *= a.conjugate() / abs(a)
    return v


def char_poly(m) -> np.ndarray:
    """Monic characteristic polynomial coefficients, highest power first.

    Uses the Faddeev-LeVerrier recursion; exact in rational arithmetic, and
    well conditioned for the small dimensions supported here.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if n > MAX_DIM:
        raise DimensionTooLarge(f"dim {n} exceeds the supported maximum {MAX_DIM}")
    coeffs = np.empty(n + 1, dtype=complex)
    coeffs[0] = 1.0
    aux = np.zeros_like(a)
    eye = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        aux = a @ aux + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ aux) / k
    return coeffs


def eig(m) -> SpectralDecomposition:
    """Full right/left eigendecomposition with coalescence diagnostics.

    Eigenvectors come from the LAPACK Hessenberg-QR path, which meets the
    residual contract ||m v - lambda v|| <= 1e-9 (1 + ||m||_F) for all
    non-defective eigenpairs.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if n > MAX_DIM:
        raise DimensionTooLarge(f"dim {n} exceeds the supported maximum {MAX_DIM}")

    try:
        vals_r, vecs_r = np.linalg.eig(a)
        vals_l, vecs_l = np.linalg.eig(a.conj().T)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc

    order = canonical_order(vals_r)
    vals_r = vals_r[order]
    vecs_r = fix_phase(vecs_r[:, order])

    # Pair left eigenvectors to right ones: maximal overlap wins, eigenvalue
    # proximity acts as a tie-break (both go into one assignment cost).
    overlap = np.abs(vecs_l.conj().T @ vecs_r)
    scale = 1.0 + np.abs(vals_r).max()
    dist = np.abs(vals_l.conj()[:, None] - vals_r[None, :]) / scale
    cost = (1.0 - overlap) + 1e-6 * dist
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(n, dtype=int)
    perm[cols] = rows
    vecs_l = fix_phase(vecs_l[:, perm])

    fro = float(np.linalg.norm(a))
    defective = _flag_defective(vals_r, vecs_r, fro)

    smin = float(np.linalg.svd(vecs_r, compute_uv=False)[-1])
    ep_condition = min(1.0 / smin if smin > 0 else np.inf, EP_CONDITION_CAP)

    return SpectralDecomposition(
        eigenvalues=vals_r,
        right=vecs_r,
        left=vecs_l,
        defective=defective,
        ep_condition=float(ep_condition),
    )


def _flag_defective(values: np.ndarray, rights: np.ndarray, fro: float) -> np.ndarray:
    n = values.shape[0]
    flags = np.zeros(n, dtype=bool)
    tol = EIG_CLUSTER_TOL * (1.0 + fro)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) < tol:
                if abs(np.vdot(rights[:, i], rights[:, j])) > 1.0 - COALESCENCE_TOL:
                    flags[i] = flags[j] = True
    return flags


def coalescence_measure(d: SpectralDecomposition, i: int, j: int) -> float:
    """|<right_i|right_j>| for unit-norm eigenvectors; 1 means coalescence."""
    return float(abs(np.vdot(d.right[:, i], d.right[:, j])))


def biorthogonal_matrix(d: SpectralDecomposition) -> np.ndarray:
    """<left_i|right_j> rescaled so the diagonal is one.

    Away from defective clusters this is the identity within 1e-8; near an
    exceptional point the off-diagonal entries blow up together with
    ``ep_condition``.
    """
    b = d.left.conj().T @ d.right
    diag = np.diagonal(b).copy()
    diag[np.abs(diag) < 1e-300] = 1.0
    return b / diag[:, None]


def eig_batch(mats: np.ndarray):
    """Eigenvalues and right eigenvectors for a stacked array of matrices.

    Returns (values, vectors) with values sorted in the canonical order per
    matrix.  This is the bulk path used by the parameter-plane scanners; no
    left vectors or defect diagnostics are computed here.
    """
    mats = np.asarray(mats, dtype=complex)
    vals, vecs = np.linalg.eig(mats)
    order = np.lexsort((vals.imag, -vals.real), axis=-1)
    vals = np.take_along_axis(vals, order, axis=-1)
    vecs = np.take_along_axis(vecs, order[..., None, :], axis=-1)
    return vals, vecs
