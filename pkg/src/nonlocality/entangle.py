"""Maximally entangled states, the anti-unitary map they define, and partner observables.

An :class:`EntangledState` stores a Schmidt form

    Psi = sum_n c_n  psi_n (x) phi_n

with ``psi_n`` (Alice, left tensor slot) and ``phi_n`` (Bob, right slot) as
rows of two orthonormal bases. When every ``c_n`` equals ``1/sqrt(N)`` the
state fixes an anti-unitary ``U`` with ``U phi_n = psi_n``; conjugating an
observable ``O`` on Bob's side by ``U`` gives the observable on Alice's side
that is perfectly correlated with it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from .errors import DimensionMismatch, NotMaximallyEntangled, NotNormalized
from .hilbert import DEFAULT_TOL


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EntangledState:
    """Schmidt-form bipartite pure state on C^N (x) C^N.

    Attributes:
        basis_alice: (N, N) array, row n is psi_n.
        basis_bob: (N, N) array, row n is phi_n.
        coeffs: the N non-negative Schmidt coefficients c_n.
    """

    basis_alice: np.ndarray
    basis_bob: np.ndarray
    coeffs: np.ndarray
    tol: float = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        alice = hilbert.require_orthonormal_basis(self.basis_alice, self.tol)
        bob = hilbert.require_orthonormal_basis(self.basis_bob, self.tol)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if not (alice.shape == bob.shape and coeffs.shape == (alice.shape[0],)):
            raise DimensionMismatch(
                f"bases {alice.shape}/{bob.shape} and coefficients {coeffs.shape} disagree"
            )
        if np.any(coeffs < 0):
            raise ValueError("Schmidt coefficients must be non-negative")
        total = float(np.sum(coeffs**2))
        if abs(total - 1.0) > self.tol:
            raise NotNormalized(f"sum of squared Schmidt coefficients is {total!r}")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "basis_alice", _frozen(alice))
        object.__setattr__(self, "basis_bob", _frozen(bob))
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return int(self.coeffs.size)

    @property
    def maximally_entangled(self) -> bool:
        return bool(np.all(np.abs(self.coeffs - 1.0 / np.sqrt(self.dim)) <= self.tol))

    def amplitudes(self) -> np.ndarray:
        """The N^2 amplitudes in the product of the two standard bases."""
        m = np.einsum("n,ni,nj->ij", self.coeffs, self.basis_alice, self.basis_bob)
        return m.ravel()

    def key(self) -> str:
        """Fingerprint of the physical state, insensitive to the Schmidt basis choice."""
        amps = hilbert.fix_phase(self.amplitudes())
        return np.round(amps, 9).tobytes().hex()[:32]

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "coeffs": [float(c) for c in self.coeffs],
            "basis_alice": [hilbert.vector_to_json(v) for v in self.basis_alice],
            "basis_bob": [hilbert.vector_to_json(v) for v in self.basis_bob],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EntangledState":
        try:
            state = cls(
                basis_alice=np.array([hilbert.vector_from_json(v) for v in obj["basis_alice"]]),
                basis_bob=np.array([hilbert.vector_from_json(v) for v in obj["basis_bob"]]),
                coeffs=np.asarray(obj["coeffs"], dtype=float),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed entangled-state JSON: {exc}") from exc
        if "dim" in obj and int(obj["dim"]) != state.dim:
            raise DimensionMismatch(f"declared dim {obj['dim']} but found {state.dim}")
        return state


@dataclass(frozen=True, eq=False)
class AntiUnitary:
    """Anti-unitary ``U = C Ũ`` with ``C`` the complex conjugation in Bob's basis.

    ``unitary_factor`` is Ũ written in the coordinates of ``conjugation_basis``
    (rows are the phi_n). Acting on a vector means: take its phi-coordinates,
    multiply by Ũ, conjugate, and map back.
    """

    unitary_factor: np.ndarray
    conjugation_basis: np.ndarray

    def __post_init__(self):
        u = hilbert.as_matrix(self.unitary_factor)
        err = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
        if err > DEFAULT_TOL:
            raise ValueError(f"unitary factor fails U^dagger U = 1 by {err:.3e}")
        object.__setattr__(self, "unitary_factor", _frozen(u))
        object.__setattr__(self, "conjugation_basis", _frozen(self.conjugation_basis))

    def standard_form(self) -> np.ndarray:
        """W with U x = W conj(x), conjugation taken in the standard basis."""
        phi = self.conjugation_basis.T  # columns phi_n
        return phi @ self.unitary_factor.conj() @ phi.T

    def __call__(self, x) -> np.ndarray:
        x = hilbert.as_vector(x)
        phi = self.conjugation_basis.T
        coords = phi.conj().T @ x
        return phi @ np.conj(self.unitary_factor @ coords)

    def inverse(self, y) -> np.ndarray:
        w = self.standard_form()
        return np.conj(w.conj().T @ hilbert.as_vector(y))

    def conjugate_operator(self, o) -> np.ndarray:
        """U o U^-1 as an ordinary matrix."""
        w = self.standard_form()
        return w @ hilbert.as_matrix(o).conj() @ w.conj().T


def _require_max(state: EntangledState) -> None:
    if not state.maximally_entangled:
        raise NotMaximallyEntangled(f"Schmidt coefficients {state.coeffs} are not all 1/sqrt(N)")


def make_max_entangled(basis_alice, basis_bob) -> EntangledState:
    alice = np.asarray(basis_alice, dtype=complex)
    n = alice.shape[0] if alice.ndim == 2 else 0
    return EntangledState(alice, basis_bob, np.full(n, 1.0 / np.sqrt(n)))


def singlet() -> EntangledState:
    """(|up,down> - |down,up>)/sqrt(2) in the Schmidt bases psi = (-down, up), phi = (up, down)."""
    return make_max_entangled([-hilbert.DOWN, hilbert.UP], [hilbert.UP, hilbert.DOWN])


def _gram_schmidt_against(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for _ in range(2):
        for b in basis:
            v = v - np.vdot(b, v) * b
    return v


def schmidt_decompose(v, tol: float = DEFAULT_TOL) -> EntangledState:
    """Schmidt form of a normalized vector on C^N (x) C^N.

    Alice's basis comes from the eigenvectors of the reduced matrix M M^dagger,
    where M is the amplitude vector reshaped to N x N. Coefficients are sorted
    descending. Within degenerate coefficients the bases are not unique.
    """
    v = hilbert.require_normalized(v, tol)
    n = int(round(np.sqrt(v.size)))
    if n * n != v.size:
        raise DimensionMismatch(f"vector of length {v.size} is not on a square product space")
    m = v.reshape(n, n)
    pairs = hilbert.eigendecompose(m @ m.conj().T, tol=1e-8)
    psi = [vec for _, vec in reversed(pairs)]

    # c_k phi_k = M^T conj(psi_k); its norm is a more accurate c_k than sqrt(eigenvalue).
    images = [m.T @ p.conj() for p in psi]
    coeffs = np.array([np.linalg.norm(w) for w in images])
    order = np.argsort(-coeffs, kind="stable")
    phi: list[np.ndarray] = []
    for k in order:
        cand = images[k] / coeffs[k] if coeffs[k] > 1e-13 else None
        if cand is not None:
            cand = _gram_schmidt_against(cand, phi)
        if cand is None or np.linalg.norm(cand) < 0.5:
            residuals = [_gram_schmidt_against(e, phi) for e in np.eye(n, dtype=complex)]
            cand = max(residuals, key=np.linalg.norm)
        phi.append(cand / np.linalg.norm(cand))
    coeffs = coeffs[order]
    coeffs = coeffs / np.sqrt(np.sum(coeffs**2))
    return EntangledState(np.array([psi[k] for k in order]), np.array(phi), coeffs)


def build_U(state: EntangledState) -> AntiUnitary:
    """The anti-unitary with U phi_n = psi_n."""
    _require_max(state)
    phi_cols = state.basis_bob.T
    psi_cols = state.basis_alice.T
    u_tilde = phi_cols.T @ psi_cols.conj()
    return AntiUnitary(u_tilde, state.basis_bob)


def partner_operator(state: EntangledState, o, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Observable on Alice's side perfectly correlated with ``o`` on Bob's side."""
    o = hilbert.require_hermitian(o, tol)
    _require_max(state)
    if o.shape[0] != state.dim:
        raise DimensionMismatch(f"operator of dim {o.shape[0]} on a state of dim {state.dim}")
    o_tilde = build_U(state).conjugate_operator(o)
    return 0.5 * (o_tilde + o_tilde.conj().T)


def correlation_residual(state: EntangledState, o_alice, o_bob) -> float:
    """|| (o_alice (x) 1 - 1 (x) o_bob) Psi ||."""
    n = state.dim
    a = hilbert.tensor_product(o_alice, hilbert.identity(n))
    b = hilbert.tensor_product(hilbert.identity(n), o_bob)
    return float(np.linalg.norm((a - b) @ state.amplitudes()))


def check_perfect_correlation(state: EntangledState, o, tol: float = DEFAULT_TOL) -> float:
    """Residual of the perfect-correlation identity for ``o`` and its partner.

    The partner acts in the left (Alice) slot and ``o`` in the right (Bob) slot.
    """
    return correlation_residual(state, partner_operator(state, o, tol), o)


def swap_roles(state: EntangledState) -> EntangledState:
    """The same Schmidt data with Alice's and Bob's bases exchanged."""
    return EntangledState(state.basis_bob, state.basis_alice, state.coeffs)


def product_of_entangled(a: EntangledState, b: EntangledState) -> EntangledState:
    """Psi_a (x) Psi_b regrouped as (A_a (x) A_b) (x) (B_a (x) B_b)."""
    _require_max(a)
    _require_max(b)
    alice = np.array([np.kron(x, y) for x in a.basis_alice for y in b.basis_alice])
    bob = np.array([np.kron(x, y) for x in a.basis_bob for y in b.basis_bob])
    coeffs = np.array([x * y for x in a.coeffs for y in b.coeffs])
    return EntangledState(alice, bob, coeffs)


def reshuffle_product(amp_a, amp_b, n_a: int, n_b: int) -> np.ndarray:
    """Regroup the raw amplitudes of Psi_a (x) Psi_b into (A_a A_b)(B_a B_b) order."""
    t = np.kron(amp_a, amp_b).reshape(n_a, n_a, n_b, n_b)
    return t.transpose(0, 2, 1, 3).ravel()


def verify_basis_invariance(state: EntangledState, new_basis, tol: float = DEFAULT_TOL) -> float:
    """|| Psi - (1/sqrt N) sum_k U chi_k (x) chi_k || for an orthonormal basis chi."""
    _require_max(state)
    chi = hilbert.require_orthonormal_basis(new_basis, tol)
    if chi.shape[0] != state.dim:
        raise DimensionMismatch(f"basis of dim {chi.shape[0]} for a state of dim {state.dim}")
    u = build_U(state)
    rebuilt = sum(np.kron(u(x), x) for x in chi) / np.sqrt(state.dim)
    return float(np.linalg.norm(state.amplitudes() - rebuilt))
