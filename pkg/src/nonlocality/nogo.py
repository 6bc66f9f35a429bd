"""Non-existence of non-contextual value maps, by two independent routes.

Sum rule (spin-1, dimension 3): for an orthogonal triad x, y, z the squared
spin components have eigenvalues {0, 1} and add up to 2, so a value map must
give exactly one of them the value 0. Colouring rays with v(S_u^2) in {0, 1}
under that rule is impossible on the 33-ray Peres set; :func:`search_coloring`
proves this by exhaustive backtracking.

Product rule (two qubits, dimension 4): the Mermin square is a 3x3 grid of
commuting +-1 observables whose row and column products multiply to -1,
while any +-1 assignment gives +1. :func:`refute_product_valuemap` checks all
512 assignments.
"""
from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import hilbert
from .errors import InconsistentState, InvalidRaySet, InvalidSquare, NotOrthonormal
from .hilbert import SIGMA_X, SIGMA_Y, SIGMA_Z
from .measure import EPRTrialRecord

ORTHO_TOL = 1e-9

SPIN1_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / np.sqrt(2)
SPIN1_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / np.sqrt(2)
SPIN1_Z = np.diag([1, 0, -1]).astype(complex)


def spin1_squares(frame, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """S_u^2 for each row u of an orthonormal triad in R^3 (hbar = 1)."""
    f = np.asarray(frame, dtype=float)
    if f.shape != (3, 3) or np.max(np.abs(f @ f.T - np.eye(3))) > tol:
        raise NotOrthonormal("frame must be three orthonormal vectors in R^3")
    out = []
    for u in f:
        s = u[0] * SPIN1_X + u[1] * SPIN1_Y + u[2] * SPIN1_Z
        out.append(s @ s)
    return tuple(out)


# --- rays -----------------------------------------------------------------


@dataclass(frozen=True)
class Ray:
    id: int
    direction: tuple[float, float, float]


@dataclass(frozen=True)
class RaySet:
    """Rays in R^3 with their complete orthogonality structure.

    ``triples`` are all mutually orthogonal index triples; ``pairs`` are the
    orthogonal pairs that do not sit inside any triple. ``neighbors[i]`` lists
    every ray orthogonal to ray i.
    """

    rays: tuple[Ray, ...]
    triples: tuple[tuple[int, int, int], ...]
    pairs: tuple[tuple[int, int], ...]
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)

    @classmethod
    def from_vectors(cls, vectors) -> "RaySet":
        vecs = np.asarray(vectors, dtype=float)
        if vecs.size == 0:
            vecs = vecs.reshape(0, 3)
        if vecs.ndim != 2 or vecs.shape[1] != 3:
            raise InvalidRaySet(f"rays must be 3-vectors, got shape {vecs.shape}")
        if not np.all(np.isfinite(vecs)):
            raise InvalidRaySet("ray components must be finite")
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(norms < 1e-12):
            raise InvalidRaySet("zero vector is not a ray")
        unit = vecs / norms[:, None]
        n = len(unit)
        gram = np.abs(unit @ unit.T)
        for i, j in zip(*np.nonzero(np.triu(gram > 1 - 1e-12, k=1))):
            raise InvalidRaySet(f"rays {i} and {j} are the same projective ray")
        ortho = gram <= ORTHO_TOL
        neighbors = tuple(tuple(int(j) for j in np.nonzero(ortho[i])[0] if j != i) for i in range(n))
        triples = []
        in_triple = set()
        for i in range(n):
            for j in neighbors[i]:
                if j <= i:
                    continue
                for k in neighbors[j]:
                    if k > j and ortho[i, k]:
                        triples.append((i, j, k))
                        in_triple.update({(i, j), (i, k), (j, k)})
        pairs = [(i, j) for i in range(n) for j in neighbors[i] if j > i and (i, j) not in in_triple]
        rays = tuple(Ray(i, tuple(float(x) for x in unit[i])) for i in range(n))
        return cls(rays, tuple(triples), tuple(pairs), neighbors)

    def __len__(self) -> int:
        return len(self.rays)

    def vectors(self) -> np.ndarray:
        return np.array([r.direction for r in self.rays]).reshape(-1, 3)

    def subset(self, ids: Iterable[int]) -> "RaySet":
        return RaySet.from_vectors(self.vectors()[sorted(ids)])

    def validate(self) -> None:
        """Recompute the structure by an independent O(n^3) scan and compare."""
        v = self.vectors()
        n = len(v)
        if any(r.id != i for i, r in enumerate(self.rays)):
            raise InvalidRaySet("ray ids must be 0..n-1 in order")
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1) > 1e-12):
            raise InvalidRaySet("rays must be unit vectors")

        def orth(a, b):
            return abs(float(np.dot(v[a], v[b]))) <= ORTHO_TOL

        triples = {
            (i, j, k)
            for i in range(n)
            for j in range(i + 1, n)
            for k in range(j + 1, n)
            if orth(i, j) and orth(i, k) and orth(j, k)
        }
        covered = {p for t in triples for p in itertools.combinations(t, 2)}
        pairs = {(i, j) for i in range(n) for j in range(i + 1, n) if orth(i, j)} - covered
        if set(self.triples) != triples or set(self.pairs) != pairs:
            raise InvalidRaySet("stored triples/pairs do not match the orthogonality relations")

    def to_json(self) -> dict:
        return {"rays": [list(r.direction) for r in self.rays]}

    @classmethod
    def from_json(cls, obj) -> "RaySet":
        if not isinstance(obj, dict) or "rays" not in obj:
            raise InvalidRaySet('ray file must be a JSON object with a "rays" list')
        try:
            return cls.from_vectors(obj["rays"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidRaySet):
                raise
            raise InvalidRaySet(f"malformed rays: {exc}") from exc


def load_rayset(path) -> RaySet:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidRaySet(f"cannot read ray file {path}: {exc}") from exc
    return RaySet.from_json(obj)


def _projective_key(v: np.ndarray) -> tuple:
    v = v / np.linalg.norm(v)
    first = next(x for x in v if abs(x) > 1e-12)
    v = v if first > 0 else -v
    return tuple(np.round(v, 12) + 0.0)


def peres_rays() -> RaySet:
    """The 33 Peres rays.

    They are the orbits, under permutations and sign changes of the axes, of
    (0,0,1), (0,1,1), (0,1,sqrt2) and (1,1,sqrt2): 3 + 6 + 12 + 12 rays.
    """
    r2 = np.sqrt(2.0)
    seeds = [(0.0, 0.0, 1.0), (0.0, 1.0, 1.0), (0.0, 1.0, r2), (1.0, 1.0, r2)]
    found: dict[tuple, np.ndarray] = {}
    for seed in seeds:
        for perm in itertools.permutations(seed):
            for signs in itertools.product((1.0, -1.0), repeat=3):
                v = np.array(perm) * np.array(signs)
                key = _projective_key(v)
                found.setdefault(key, np.array(key))
    return RaySet.from_vectors(sorted(found.values(), key=lambda v: tuple(-abs(v))))


def coordinate_triad() -> RaySet:
    return RaySet.from_vectors(np.eye(3))


# --- colouring search -------------------------------------------------------


@dataclass(frozen=True)
class Coloring:
    """assignment[i] is 1 (v(S_u^2) = 1), 0 (v(S_u^2) = 0) or None (unassigned)."""

    assignment: tuple[int | None, ...]

    @property
    def complete(self) -> bool:
        return all(a is not None for a in self.assignment)

    def to_json(self) -> dict:
        return {"sat": True, "coloring": list(self.assignment)}


@dataclass(frozen=True)
class UnsatCertificate:
    nodes: int
    exhausted: int
    max_depth: int

    def to_json(self) -> dict:
        return {"unsat": True, "nodes": self.nodes, "max_depth": self.max_depth, "exhausted": self.exhausted}


def coloring_violations(rs: RaySet, values: Sequence[int | None]) -> list[str]:
    """Every violated constraint of a (complete) colouring, as readable strings."""
    problems = []
    if len(values) != len(rs):
        return [f"colouring has {len(values)} entries for {len(rs)} rays"]
    for i, x in enumerate(values):
        if x not in (0, 1):
            problems.append(f"ray {i} has value {x!r}")
    for t in rs.triples:
        if [values[i] for i in t].count(0) != 1:
            problems.append(f"triple {t} has values {[values[i] for i in t]}")
    for i, j in rs.pairs:
        if values[i] == 0 and values[j] == 0:
            problems.append(f"orthogonal pair {(i, j)} both 0")
    return problems


class _Search:
    def __init__(self, rs: RaySet):
        self.rs = rs
        self.n = len(rs)
        self.triples_of: list[list[tuple[int, int, int]]] = [[] for _ in range(self.n)]
        for t in rs.triples:
            for i in t:
                self.triples_of[i].append(t)
        self.nodes = 0
        self.exhausted = 0
        self.max_depth = 0

    def assign(self, values: list[int], ray: int, value: int) -> bool:
        """Set ``ray`` and run unit propagation. False on conflict."""
        queue = [(ray, value)]
        while queue:
            i, x = queue.pop()
            if values[i] == x:
                continue
            if values[i] != -1:
                return False
            values[i] = x
            if x == 0:
                queue.extend((j, 1) for j in self.rs.neighbors[i])
                continue
            for t in self.triples_of[i]:
                others = [k for k in t if k != i]
                vals = [values[k] for k in others]
                if vals == [1, 1]:
                    return False
                if 1 in vals and -1 in vals:
                    queue.append((others[vals.index(-1)], 0))
        return True

    def pick(self, values: list[int]) -> int:
        """Unassigned ray in the most triples that still lack a 0; lowest id on ties."""
        best, best_score = -1, -1
        for i in range(self.n):
            if values[i] != -1:
                continue
            score = sum(1 for t in self.triples_of[i] if all(values[k] != 0 for k in t))
            if score > best_score:
                best, best_score = i, score
        return best

    def run(self, values: list[int], depth: int) -> list[int] | None:
        self.max_depth = max(self.max_depth, depth)
        ray = self.pick(values)
        if ray == -1:
            return values
        for x in (0, 1):
            self.nodes += 1
            child = values.copy()
            if not self.assign(child, ray, x):
                self.exhausted += 1
                continue
            found = self.run(child, depth + 1)
            if found is not None:
                return found
        return None


def search_coloring(rs: RaySet) -> Coloring | UnsatCertificate:
    """Exhaustive backtracking search for a valid {0,1} colouring.

    Returns a complete :class:`Coloring` if one exists. Otherwise every branch
    has been refuted and an :class:`UnsatCertificate` is returned.
    """
    if not isinstance(rs, RaySet):
        raise InvalidRaySet(f"expected a RaySet, got {type(rs).__name__}")
    rs.validate()
    search = _Search(rs)
    found = search.run([-1] * len(rs), 0)
    if found is None:
        return UnsatCertificate(search.nodes, search.exhausted, search.max_depth)
    return Coloring(tuple(found))


def count_colorings_bruteforce(rs: RaySet) -> int:
    """Number of valid colourings, by checking all 2^n assignments."""
    n = len(rs)
    if n > 22:
        raise ValueError(f"brute force over 2^{n} assignments is not supported")
    bits = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    ok = np.ones(2**n, dtype=bool)
    for t in rs.triples:
        ok &= (bits[:, list(t)] == 0).sum(axis=1) == 1
    for i, j in rs.pairs:
        ok &= ~((bits[:, i] == 0) & (bits[:, j] == 0))
    return int(ok.sum())


# --- Mermin square -----------------------------------------------------------

_PAULI = {"I": hilbert.identity(2), "X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}
MERMIN_LABELS = (("ZI", "IZ", "ZZ"), ("IX", "XI", "XX"), ("ZX", "XZ", "YY"))


def pauli_string(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, _PAULI[ch])
    return out


@dataclass(frozen=True, eq=False)
class MagicSquare:
    cells: tuple[tuple[np.ndarray, ...], ...]
    row_signs: tuple[int, int, int]
    col_signs: tuple[int, int, int]
    labels: tuple[tuple[str, ...], ...] | None = None

    def lines(self) -> list[tuple[str, list[tuple[int, int]], int]]:
        """(name, cell coordinates, sign target) for the three rows then three columns."""
        rows = [(f"row{r}", [(r, c) for c in range(3)], self.row_signs[r]) for r in range(3)]
        cols = [(f"col{c}", [(r, c) for r in range(3)], self.col_signs[c]) for c in range(3)]
        return rows + cols

    def product_errors(self) -> dict[str, float]:
        """max-entry deviation of each line product from sign * identity."""
        errs = {}
        for name, coords, sign in self.lines():
            prod = hilbert.identity(4)
            for r, c in coords:
                prod = prod @ self.cells[r][c]
            errs[name] = float(np.max(np.abs(prod - sign * hilbert.identity(4))))
        return errs

    def violations(self, tol: float = 1e-10) -> list[str]:
        problems = []
        for r, c in itertools.product(range(3), range(3)):
            m = self.cells[r][c]
            if m.shape != (4, 4) or not hilbert.is_hermitian(m, tol):
                problems.append(f"cell {(r, c)} is not a Hermitian 4x4 matrix")
            elif np.max(np.abs(m @ m - hilbert.identity(4))) > tol:
                problems.append(f"cell {(r, c)} does not square to the identity")
        if problems:
            return problems
        for name, coords, _ in self.lines():
            for (r1, c1), (r2, c2) in itertools.combinations(coords, 2):
                if np.max(np.abs(hilbert.commutator(self.cells[r1][c1], self.cells[r2][c2]))) > tol:
                    problems.append(f"{name}: cells {(r1, c1)} and {(r2, c2)} do not commute")
        for name, err in self.product_errors().items():
            if err > tol:
                problems.append(f"{name}: product differs from its sign target by {err:.3e}")
        if int(np.prod(self.row_signs)) * int(np.prod(self.col_signs)) != -1:
            problems.append("product of the six sign targets is not -1")
        return problems

    def validate(self, tol: float = 1e-10) -> None:
        problems = self.violations(tol)
        if problems:
            raise InvalidSquare("; ".join(problems))


def mermin_square() -> MagicSquare:
    cells = tuple(tuple(pauli_string(lab) for lab in row) for row in MERMIN_LABELS)
    sq = MagicSquare(cells, (1, 1, 1), (1, 1, -1), MERMIN_LABELS)
    sq.validate()
    return sq


@dataclass(frozen=True)
class RefutationReport:
    total_assignments: int
    satisfying: int
    parity_product: int
    line_product_always_plus_one: bool
    product_errors: dict[str, float]
    first_satisfying: tuple[int, ...] | None = None

    def to_json(self) -> dict:
        return {
            "total_assignments": self.total_assignments,
            "satisfying": self.satisfying,
            "parity_product": self.parity_product,
            "line_product_always_plus_one": self.line_product_always_plus_one,
            "product_errors": self.product_errors,
        }


def refute_product_valuemap(sq: MagicSquare, require_valid: bool = True) -> RefutationReport:
    """Try every +-1 assignment to the nine cells against the six line targets.

    ``require_valid=False`` skips the operator checks so hypothetical sign
    targets can be explored.
    """
    if require_valid:
        sq.validate()
    lines = sq.lines()
    satisfying, first = 0, None
    always_plus = True
    for values in itertools.product((1, -1), repeat=9):
        grid = [values[0:3], values[3:6], values[6:9]]
        products = [int(np.prod([grid[r][c] for r, c in coords])) for _, coords, _ in lines]
        always_plus &= int(np.prod(products)) == 1
        if all(p == sign for p, (_, _, sign) in zip(products, lines)):
            satisfying += 1
            first = first or values
    parity = int(np.prod([sign for _, _, sign in lines]))
    errors = sq.product_errors() if require_valid else {}
    return RefutationReport(512, satisfying, parity, always_plus, errors, first)


# --- value maps from EPR data ---------------------------------------------


@dataclass
class PartialValueMap:
    """Values v(O) inferred, trial by trial, from Alice's partner measurements.

    ``values[(seed, observable_id)]`` is the partner outcome. ``witnesses``
    lists (seed, observable_id) keys that received two different values, and
    ``mismatches`` lists records where Bob's own result disagreed with the
    inferred value.
    """

    values: dict[tuple[int, str], float] = field(default_factory=dict)
    witnesses: list[tuple[int, str]] = field(default_factory=list)
    mismatches: list[EPRTrialRecord] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.witnesses and not self.mismatches

    def trial(self, seed: int) -> dict[str, float]:
        return {obs: v for (s, obs), v in self.values.items() if s == seed}

    def observables(self) -> set[str]:
        return {obs for _, obs in self.values}


def valuemap_from_trials(records: Sequence[EPRTrialRecord], observables: Iterable[str] | None = None) -> PartialValueMap:
    keys = {r.state_key for r in records}
    if len(keys) > 1:
        raise InconsistentState(f"records come from {len(keys)} different entangled states")
    wanted = set(observables) if observables is not None else None
    vm = PartialValueMap()
    for r in records:
        if wanted is not None and r.observable_id not in wanted:
            continue
        key = (r.rng_seed, r.observable_id)
        if key in vm.values and vm.values[key] != r.alice_value:
            vm.witnesses.append(key)
        vm.values.setdefault(key, r.alice_value)
        if r.bob_value != r.alice_value:
            vm.mismatches.append(r)
    return vm


def line_products_by_trial(vm: PartialValueMap, ids: Sequence[str]) -> dict[int, int]:
    """Product of the inferred values of ``ids`` for every trial that covers all of them."""
    out: dict[int, int] = {}
    by_seed: dict[int, dict[str, float]] = defaultdict(dict)
    for (seed, obs), v in vm.values.items():
        by_seed[seed][obs] = v
    for seed, vals in by_seed.items():
        if all(k in vals for k in ids):
            out[seed] = int(round(np.prod([vals[k] for k in ids])))
    return out
