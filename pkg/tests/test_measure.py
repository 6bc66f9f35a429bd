import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocality import entangle, hilbert, measure
from nonlocality.errors import EigenvalueNotInSpectrum, NotMaximallyEntangled, ZeroProbabilityOutcome
from nonlocality.hilbert import DOWN, SIGMA_Z, UP

seeds = st.integers(0, 2**32 - 1)


def random_state(n, rng):
    return entangle.make_max_entangled(hilbert.random_unitary(n, rng).T, hilbert.random_unitary(n, rng).T)


@pytest.mark.parametrize("side", ["alice", "bob"])
def test_singlet_born_rule(side):
    dist = measure.born_distribution(entangle.singlet().amplitudes(), SIGMA_Z, side)
    assert [lam for lam, _ in dist] == pytest.approx([-1.0, 1.0])
    assert [p for _, p in dist] == pytest.approx([0.5, 0.5], abs=1e-14)


def test_eigenstate_gives_certain_outcome():
    dist = dict(measure.born_distribution(np.kron(UP, UP), SIGMA_Z, "bob"))
    assert dist[1.0] == pytest.approx(1.0) and dist[-1.0] == pytest.approx(0.0)


def test_born_weights_are_schmidt_squares(rng):
    c = np.sqrt([0.5, 0.3, 0.2])
    s = entangle.EntangledState(hilbert.random_unitary(3, rng).T, hilbert.random_unitary(3, rng).T, c)
    lams = [3.0, -1.0, 0.5]
    o = s.basis_bob.T @ np.diag(lams) @ s.basis_bob.conj()
    dist = dict((round(lam, 9), p) for lam, p in measure.born_distribution(s.amplitudes(), o, "bob"))
    # oracle: ||(1 (x) |phi_k><phi_k|) Psi||^2 by explicit projector
    for k, lam in enumerate(lams):
        p = np.kron(np.eye(3), np.outer(s.basis_bob[k], s.basis_bob[k].conj()))
        expected = np.linalg.norm(p @ s.amplitudes()) ** 2
        assert dist[lam] == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(c[k] ** 2, abs=1e-12)


def test_collapse_singlet():
    post = measure.collapse(entangle.singlet().amplitudes(), SIGMA_Z, "alice", 1.0)
    assert hilbert.equal_up_to_phase(post, np.kron(UP, DOWN))
    post = measure.collapse(entangle.singlet().amplitudes(), SIGMA_Z, "bob", 1.0)
    assert hilbert.equal_up_to_phase(post, np.kron(DOWN, UP))


def test_collapse_eigenstate_unchanged_and_errors():
    v = np.kron(UP, DOWN).astype(complex)
    assert np.allclose(measure.collapse(v, SIGMA_Z, "bob", -1.0), v)
    with pytest.raises(ZeroProbabilityOutcome):
        measure.collapse(v, SIGMA_Z, "bob", 1.0)
    with pytest.raises(EigenvalueNotInSpectrum):
        measure.collapse(v, SIGMA_Z, "bob", 0.3)


def test_collapse_partner_gives_schmidt_pair(rng):
    s = random_state(3, rng)
    o = hilbert.random_hermitian(3, rng)
    p = entangle.partner_operator(s, o)
    lam = hilbert.eigenvalues(o)[1]
    post = measure.collapse(s.amplitudes(), p, "alice", lam)
    # Bob's side is then certain to read the same value
    dist = dict((round(l, 8), q) for l, q in measure.born_distribution(post, o, "bob"))
    assert dist[round(lam, 8)] == pytest.approx(1.0, abs=1e-10)


def test_epr_trial_is_deterministic():
    s = entangle.singlet()
    a = measure.run_epr_trial(s, SIGMA_Z, "alice_first", 42)
    b = measure.run_epr_trial(s, SIGMA_Z, "alice_first", 42)
    assert a == b
    assert a.alice_value == a.bob_value and a.rng_seed == 42


def test_epr_identity_observable():
    recs = measure.run_epr_ensemble(entangle.singlet(), np.eye(2), 50)
    assert all(r.alice_value == 1.0 and r.bob_value == 1.0 for r in recs)


def test_epr_requires_max_entangled():
    partial = entangle.EntangledState(np.eye(2), np.eye(2), [np.sqrt(0.9), np.sqrt(0.1)])
    with pytest.raises(NotMaximallyEntangled):
        measure.EPRExperiment(partial, SIGMA_Z)


@pytest.mark.parametrize("order", ["alice_first", "bob_first"])
def test_singlet_ensemble(order):
    recs = measure.run_epr_ensemble(entangle.singlet(), SIGMA_Z, 10_000, seed=7, order=order)
    assert measure.match_count(recs) == len(recs)
    m = measure.marginals(recs, "bob")
    assert abs(m[1.0] - 0.5) <= 5 * 0.5 / np.sqrt(len(recs))
    # Alice measures the partner -sigma_z, so the spins themselves are anti-correlated
    exp = measure.EPRExperiment(entangle.singlet(), SIGMA_Z)
    assert np.allclose(exp.partner, -SIGMA_Z)


@settings(max_examples=10)
@given(seed=seeds, n=st.integers(2, 4))
def test_random_observable_always_matches(seed, n):
    rng = np.random.Generator(np.random.PCG64(seed))
    s = random_state(n, rng)
    o = hilbert.random_hermitian(n, rng)
    exp = measure.EPRExperiment(s, o)
    spectrum = set(exp._spectrum)
    for order in ("alice_first", "bob_first"):
        recs = exp.run(200, seed=seed % 1000, order=order)
        assert measure.match_count(recs) == len(recs)
        assert {r.bob_value for r in recs} <= spectrum


def test_marginals_uniform_on_random_observable(rng):
    s = random_state(3, rng)
    o = hilbert.random_hermitian(3, rng)
    n = 20_000
    for order in ("alice_first", "bob_first"):
        m = measure.marginals(measure.run_epr_ensemble(s, o, n, order=order, seed=0 if order == "alice_first" else n))
        for p in m.values():
            assert abs(p - 1 / 3) <= 5 * np.sqrt(2 / 9 / n)


def test_order_independence():
    s = entangle.singlet()
    a = measure.run_epr_ensemble(s, SIGMA_Z, 20_000, seed=0, order="alice_first")
    b = measure.run_epr_ensemble(s, SIGMA_Z, 20_000, seed=20_000, order="bob_first")
    assert measure.order_independence_pvalue(a, b) > 1e-3


def test_context_experiment_mermin_row():
    from nonlocality import nogo

    s = entangle.product_of_entangled(entangle.singlet(), entangle.singlet())
    sq = nogo.mermin_square()
    ids = [sq.labels[0][c] for c in range(3)]
    exp = measure.ContextExperiment(s, {k: sq.cells[0][c] for c, k in enumerate(ids)})
    for seed in range(30):
        recs = exp.trial(seed)
        assert all(r.alice_value == r.bob_value for r in recs)
        assert np.prod([r.bob_value for r in recs]) == sq.row_signs[0]


def test_csv_and_summary_format():
    recs = measure.run_epr_ensemble(entangle.singlet(), SIGMA_Z, 4, seed=3)
    lines = measure.trials_csv(recs).splitlines()
    assert lines[0] == "seed,observable,order,alice,bob"
    assert lines[1].startswith("3,O,alice_first,")
    summ = measure.ensemble_summary(recs)
    assert summ["trials"] == 4 and summ["match_count"] == 4
    assert set(summ["marginals"]) == {"alice", "bob"}
    assert measure.record_to_json(recs[0])["rng_seed"] == 3
