"""Born-rule measurement, projective collapse and the sequential EPR protocol.

Randomness: every stochastic call takes an explicit integer seed and draws
from ``numpy.random.Generator(PCG64(seed))``. Ensembles use seeds
``seed, seed + 1, ...`` for consecutive trials, so any single trial can be
replayed from its CSV row.
"""
from __future__ import annotations

import bisect
import csv
import io
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import stats

from . import hilbert
from .entangle import EntangledState, _require_max, partner_operator
from .errors import DimensionMismatch, EigenvalueNotInSpectrum, ZeroProbabilityOutcome
from .hilbert import CLUSTER_TOL, DEFAULT_TOL

Slot = Literal["alice", "bob"]
Order = Literal["alice_first", "bob_first"]

# Outcomes whose Born weight is at or below this are treated as impossible.
ZERO_PROB = 1e-12


@dataclass(frozen=True)
class MeasurementOutcome:
    eigenvalue: float
    post_state: np.ndarray
    probability: float


@dataclass(frozen=True)
class EPRTrialRecord:
    observable_id: str
    alice_value: float
    bob_value: float
    order: str
    rng_seed: int
    state_key: str = ""


def _lift(projector: np.ndarray, subsystem: Slot, total_dim: int) -> np.ndarray:
    d = projector.shape[0]
    if total_dim % d:
        raise DimensionMismatch(f"operator of dim {d} does not divide state dim {total_dim}")
    other = hilbert.identity(total_dim // d)
    if subsystem == "alice":
        return np.kron(projector, other)
    if subsystem == "bob":
        return np.kron(other, projector)
    raise ValueError(f"subsystem must be 'alice' or 'bob', got {subsystem!r}")


def _outcomes(state, projectors, subsystem: Slot) -> list[MeasurementOutcome]:
    out = []
    for lam, p in projectors:
        proj = _lift(p, subsystem, state.size) @ state
        prob = float(np.real(np.vdot(proj, proj)))
        post = proj / np.sqrt(prob) if prob > ZERO_PROB else proj
        out.append(MeasurementOutcome(lam, post, prob))
    return out


def measurement_outcomes(state, o, subsystem: Slot, tol: float = DEFAULT_TOL) -> list[MeasurementOutcome]:
    """Every eigenvalue cluster of ``o`` with its Born weight and collapsed state."""
    state = hilbert.require_normalized(state, tol)
    return _outcomes(state, hilbert.spectral_projectors(o, tol), subsystem)


def born_distribution(state, o, subsystem: Slot, tol: float = DEFAULT_TOL) -> list[tuple[float, float]]:
    return [(m.eigenvalue, m.probability) for m in measurement_outcomes(state, o, subsystem, tol)]


def collapse(state, o, subsystem: Slot, eigenvalue: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    for m in measurement_outcomes(state, o, subsystem, tol):
        if abs(m.eigenvalue - eigenvalue) <= CLUSTER_TOL:
            if m.probability <= ZERO_PROB:
                raise ZeroProbabilityOutcome(f"outcome {eigenvalue} has probability {m.probability:.3e}")
            return m.post_state
    raise EigenvalueNotInSpectrum(f"{eigenvalue} is not an eigenvalue of the observable")


def _sample(outcomes: Sequence[MeasurementOutcome], u: float) -> int:
    probs = np.array([m.probability for m in outcomes])
    cdf = np.cumsum(probs / probs.sum())
    idx = int(np.searchsorted(cdf, u, side="right"))
    idx = min(idx, len(outcomes) - 1)
    while outcomes[idx].probability <= ZERO_PROB:
        idx -= 1
    return idx


class EPRExperiment:
    """Repeated EPR measurements of ``o`` (Bob) and its partner (Alice) on one state.

    The spectral data and the collapsed state for each first-side outcome are
    computed once; each trial then draws the first outcome by the Born rule
    and the second one from the corresponding collapsed state.
    """

    def __init__(self, state: EntangledState, o, observable_id: str = "O", tol: float = DEFAULT_TOL):
        _require_max(state)
        self.state = state
        self.observable = hilbert.require_hermitian(o, tol)
        self.partner = partner_operator(state, self.observable, tol)
        self.observable_id = observable_id
        self._psi = state.amplitudes()
        self._proj = {
            "bob": hilbert.spectral_projectors(self.observable, tol),
            "alice": hilbert.spectral_projectors(self.partner, tol),
        }
        self._spectrum = [lam for lam, _ in self._proj["bob"]]
        self._tables: dict[Order, tuple] = {}
        self._key = state.key()

    def label(self, lam: float) -> float:
        """Name an eigenvalue by the matching entry of the observable's own spectrum."""
        best = min(self._spectrum, key=lambda x: abs(x - lam))
        if abs(best - lam) > 1e-7:
            raise EigenvalueNotInSpectrum(f"{lam} does not match the observable's spectrum")
        return best

    def _table(self, order: Order):
        """Per-order lookup: first-side outcomes and, for each, the second-side outcomes.

        Entries are (cdf, labels) so a trial only needs two bisections.
        """
        if order not in self._tables:
            first, second = ("alice", "bob") if order == "alice_first" else ("bob", "alice")
            head = _outcomes(self._psi, self._proj[first], first)
            tails = [
                _outcomes(m.post_state, self._proj[second], second) if m.probability > ZERO_PROB else None
                for m in head
            ]
            self._tables[order] = (first, self._lookup(head), [t and self._lookup(t) for t in tails])
        return self._tables[order]

    def _lookup(self, outcomes: Sequence[MeasurementOutcome]) -> tuple[list[float], list[float]]:
        probs = np.array([m.probability if m.probability > ZERO_PROB else 0.0 for m in outcomes])
        cdf = np.cumsum(probs / probs.sum())
        cdf[-1] = 1.0
        return cdf.tolist(), [self.label(m.eigenvalue) for m in outcomes]

    def trial(self, rng_seed: int, order: Order = "alice_first") -> EPRTrialRecord:
        if order not in ("alice_first", "bob_first"):
            raise ValueError(f"unknown order {order!r}")
        first, (cdf, labels), tails = self._table(order)
        u1, u2 = np.random.Generator(np.random.PCG64(rng_seed)).random(2).tolist()
        i = bisect.bisect_right(cdf, u1)
        tail_cdf, tail_labels = tails[i]
        v1, v2 = labels[i], tail_labels[bisect.bisect_right(tail_cdf, u2)]
        alice, bob = (v1, v2) if first == "alice" else (v2, v1)
        return EPRTrialRecord(self.observable_id, alice, bob, order, int(rng_seed), self._key)

    def run(self, trials: int, seed: int = 0, order: Order = "alice_first") -> list[EPRTrialRecord]:
        return [self.trial(seed + i, order) for i in range(trials)]


def run_epr_trial(state: EntangledState, o, order: Order, rng_seed: int, observable_id: str = "O") -> EPRTrialRecord:
    return EPRExperiment(state, o, observable_id).trial(rng_seed, order)


def run_epr_ensemble(
    state: EntangledState, o, trials: int, seed: int = 0, order: Order = "alice_first", observable_id: str = "O"
) -> list[EPRTrialRecord]:
    return EPRExperiment(state, o, observable_id).run(trials, seed, order)


class ContextExperiment:
    """Joint measurement of a set of commuting observables of Bob via their partners.

    Alice measures every partner in turn (collapsing after each), then Bob
    measures the observables themselves. Each trial yields one record per
    observable, all sharing the trial seed.
    """

    def __init__(self, state: EntangledState, observables: dict[str, np.ndarray], tol: float = DEFAULT_TOL):
        _require_max(state)
        self.state = state
        self.ids = list(observables)
        self.experiments = {k: EPRExperiment(state, o, k, tol) for k, o in observables.items()}
        self._psi = state.amplitudes()
        self._key = state.key()

    def trial(self, rng_seed: int) -> list[EPRTrialRecord]:
        rng = np.random.Generator(np.random.PCG64(rng_seed))
        psi = self._psi
        alice, bob = {}, {}
        for slot, store in (("alice", alice), ("bob", bob)):
            for k in self.ids:
                outs = _outcomes(psi, self.experiments[k]._proj[slot], slot)
                m = outs[_sample(outs, rng.random())]
                store[k] = self.experiments[k].label(m.eigenvalue)
                psi = m.post_state
        return [
            EPRTrialRecord(k, alice[k], bob[k], "alice_first", int(rng_seed), self._key) for k in self.ids
        ]


def match_count(records: Iterable[EPRTrialRecord]) -> int:
    return sum(r.alice_value == r.bob_value for r in records)


def marginals(records: Sequence[EPRTrialRecord], side: Slot = "bob") -> dict[float, float]:
    counts = Counter(r.bob_value if side == "bob" else r.alice_value for r in records)
    return {lam: counts[lam] / len(records) for lam in sorted(counts)}


def order_independence_pvalue(first: Sequence[EPRTrialRecord], second: Sequence[EPRTrialRecord]) -> float:
    """Chi-square homogeneity test of the joint (alice, bob) outcome counts."""
    ca = Counter((r.alice_value, r.bob_value) for r in first)
    cb = Counter((r.alice_value, r.bob_value) for r in second)
    cells = sorted(set(ca) | set(cb))
    if len(cells) < 2:
        return 1.0
    table = np.array([[ca[c] for c in cells], [cb[c] for c in cells]])
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def trials_csv(records: Iterable[EPRTrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "observable", "order", "alice", "bob"])
    for r in records:
        w.writerow([r.rng_seed, r.observable_id, r.order, repr(r.alice_value), repr(r.bob_value)])
    return buf.getvalue()


def ensemble_summary(records: Sequence[EPRTrialRecord]) -> dict:
    return {
        "trials": len(records),
        "match_count": match_count(records),
        "marginals": {
            side: {repr(k): v for k, v in marginals(records, side).items()} for side in ("alice", "bob")
        },
    }


def record_to_json(r: EPRTrialRecord) -> dict:
    return asdict(r)
