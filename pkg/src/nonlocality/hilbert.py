"""Dense complex linear algebra for the small Hilbert spaces used here.

Matrices and state vectors are plain ``numpy`` complex arrays. The helpers in
this module add the checks the rest of the package relies on (Hermiticity,
normalization, orthonormality) and a self-contained Hermitian eigensolver.

Tensor-product convention: ``tensor_product(a, b)`` puts ``a`` in the left
slot. Everywhere in the package the left slot is Alice's system and the right
slot is Bob's.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotNormalized, NotOrthonormal

DEFAULT_TOL = 1e-10
CLUSTER_TOL = 1e-8

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    return a


def as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=complex)
    if a.ndim != 1 or a.size == 0:
        raise DimensionMismatch(f"expected a non-empty vector, got shape {a.shape}")
    return a


def identity(n: int) -> np.ndarray:
    return np.eye(n, dtype=complex)


def hermiticity_error(m) -> float:
    a = as_matrix(m)
    return float(np.max(np.abs(a - a.conj().T)))


def is_hermitian(m, tol: float = DEFAULT_TOL) -> bool:
    return hermiticity_error(m) <= tol


def require_hermitian(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    a = as_matrix(m)
    err = hermiticity_error(a)
    if err > tol:
        raise NotHermitian(f"max|M - M^dagger| = {err:.3e} exceeds {tol:.1e}")
    return a


def is_normalized(v, tol: float = DEFAULT_TOL) -> bool:
    return abs(np.linalg.norm(as_vector(v)) - 1.0) <= tol


def require_normalized(v, tol: float = DEFAULT_TOL) -> np.ndarray:
    a = as_vector(v)
    norm = np.linalg.norm(a)
    if abs(norm - 1.0) > tol:
        raise NotNormalized(f"vector norm {norm!r} differs from 1 by more than {tol:.1e}")
    return a


def orthonormality_error(vectors) -> float:
    """max |<v_i|v_j> - delta_ij| over the rows of ``vectors``."""
    b = np.asarray(vectors, dtype=complex)
    gram = b.conj() @ b.T
    return float(np.max(np.abs(gram - np.eye(b.shape[0]))))


def require_orthonormal_basis(vectors, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Return ``vectors`` as an (N, N) array whose rows form an orthonormal basis."""
    b = np.asarray(vectors, dtype=complex)
    if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] == 0:
        raise DimensionMismatch(f"a basis of C^N needs N vectors of length N, got shape {b.shape}")
    err = orthonormality_error(b)
    if err > tol:
        raise NotOrthonormal(f"basis deviates from orthonormality by {err:.3e}")
    return b


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product: entry (i*dim(b)+k, j*dim(b)+l) is a[i,j]*b[k,l]."""
    return np.kron(as_matrix(a), as_matrix(b))


def tensor_vectors(*vectors) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vectors:
        out = np.kron(out, as_vector(v))
    return out


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot commute {a.shape} with {b.shape}")
    return a @ b - b @ a


def fix_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate ``v`` by a global phase so its first non-negligible entry is real positive."""
    for x in v:
        if abs(x) > tol:
            return v * (abs(x) / x)
    return v


def equal_up_to_phase(a, b, tol: float = 1e-9) -> bool:
    a, b = as_vector(a), as_vector(b)
    if a.shape != b.shape:
        return False
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if abs(na - nb) > tol:
        return False
    if na == 0:
        return True
    return abs(abs(np.vdot(a, b)) - na * nb) <= tol


def _jacobi_hermitian(a: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi for a complex Hermitian matrix.

    Each (p, q) rotation first removes the phase of a[p, q] with a diagonal
    unitary, then applies the real symmetric Jacobi rotation that zeroes it.
    Returns (eigenvalues, eigenvectors as columns), unsorted.
    """
    a = 0.5 * (a + a.conj().T)
    n = a.shape[0]
    vecs = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a[offdiag]))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                theta = 0.5 * math.atan2(2.0 * r, a[q, q].real - a[p, p].real)
                c, s = math.cos(theta), math.sin(theta)
                g = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vecs[:, idx] = vecs[:, idx] @ g
    return np.real(np.diag(a)).copy(), vecs


def eigendecompose(m, tol: float = DEFAULT_TOL) -> list[tuple[float, np.ndarray]]:
    """Eigenpairs of a Hermitian matrix, eigenvalues ascending.

    Eigenvectors whose eigenvalues agree within ``CLUSTER_TOL`` are
    re-orthonormalized together; inside such a cluster only the spanned
    subspace is meaningful. Each eigenvector has its first non-negligible
    component made real positive, and ties are ordered lexicographically on
    the (real, imaginary) parts of the components.
    """
    a = require_hermitian(m, tol)
    vals, vecs = _jacobi_hermitian(a.copy())
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]

    pairs: list[tuple[float, np.ndarray]] = []
    for cluster in _cluster_indices(vals):
        block = vecs[:, cluster]
        if len(cluster) > 1:
            block, _ = np.linalg.qr(block)
        members = [fix_phase(block[:, k]) for k in range(len(cluster))]
        members.sort(key=lambda v: tuple(np.column_stack([v.real, v.imag]).ravel()))
        lam = float(np.mean(vals[cluster]))
        pairs.extend((lam, v) for v in members)
    return pairs


def _cluster_indices(sorted_vals: Sequence[float], tol: float = CLUSTER_TOL) -> list[list[int]]:
    clusters: list[list[int]] = []
    for i, lam in enumerate(sorted_vals):
        if clusters and abs(lam - sorted_vals[clusters[-1][-1]]) <= tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def spectral_projectors(m, tol: float = DEFAULT_TOL) -> list[tuple[float, np.ndarray]]:
    """(eigenvalue, projector) for each eigenvalue cluster of a Hermitian matrix."""
    pairs = eigendecompose(m, tol)
    out: list[tuple[float, np.ndarray]] = []
    for lam, v in pairs:
        p = np.outer(v, v.conj())
        if out and abs(out[-1][0] - lam) <= CLUSTER_TOL:
            out[-1] = (out[-1][0], out[-1][1] + p)
        else:
            out.append((lam, p))
    return out


def eigenvalues(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    return np.array([lam for lam, _ in eigendecompose(m, tol)])


def reconstruct(pairs: Iterable[tuple[float, np.ndarray]]) -> np.ndarray:
    pairs = list(pairs)
    n = pairs[0][1].shape[0]
    out = np.zeros((n, n), dtype=complex)
    for lam, v in pairs:
        out += lam * np.outer(v, v.conj())
    return out


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (x + x.conj().T)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(x)
    d = np.diag(r)
    return q * (d / np.abs(d))


def matrix_to_json(m) -> dict:
    a = as_matrix(m)
    return {
        "dim": int(a.shape[0]),
        "re": [float(x) for x in a.real.ravel()],
        "im": [float(x) for x in a.imag.ravel()],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        n = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", [0.0] * (n * n)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if n <= 0 or re.size != n * n or im.size != n * n:
        raise DimensionMismatch(f"matrix JSON with dim={n} needs {n * n} re/im entries")
    return (re + 1j * im).reshape(n, n)


def vector_to_json(v) -> dict:
    a = as_vector(v)
    return {"re": [float(x) for x in a.real], "im": [float(x) for x in a.imag]}


def vector_from_json(obj: dict) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", [0.0] * re.size), dtype=float)
    if re.shape != im.shape or re.ndim != 1:
        raise DimensionMismatch("vector JSON re/im arrays differ in length")
    return re + 1j * im
