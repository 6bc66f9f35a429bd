"""Acceptance criteria 1-11, each at its stated tolerance and runtime budget.

Every test prints one PASS/FAIL line; the lines are repeated in the terminal
summary at the end of the run.
"""
import contextlib
import itertools
import json
import time
from importlib import resources

import jsonschema
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from nonlocality import bohm, cli, entangle, hilbert, measure, nogo
from nonlocality.bohm import BohmParams, Procedure, SpinorPacketState
from nonlocality.hilbert import SIGMA_Z


@contextlib.contextmanager
def criterion(num: int, text: str, budget: float | None = None):
    info = {}
    start = time.perf_counter()
    ok = False
    try:
        yield info
        elapsed = time.perf_counter() - start
        info["runtime_s"] = round(elapsed, 2)
        if budget is not None:
            assert elapsed < budget, f"runtime {elapsed:.2f}s exceeds {budget}s"
        ok = True
    finally:
        extra = ", ".join(f"{k}={v}" for k, v in info.items())
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {text} ({extra})"
        ACCEPTANCE_LINES.append(line)
        print(line)


def gen(seed):
    return np.random.Generator(np.random.PCG64(seed))


def random_state(n, rng):
    return entangle.make_max_entangled(hilbert.random_unitary(n, rng).T, hilbert.random_unitary(n, rng).T)


def test_criterion_01_perfect_correlations():
    with criterion(1, "perfect correlations, 200 random observables, N=2..5, residual <= 1e-9", 5.0) as info:
        rng = gen(1)
        worst = 0.0
        for n in (2, 3, 4, 5):
            for _ in range(50):
                s = random_state(n, rng)
                worst = max(worst, entangle.check_perfect_correlation(s, hilbert.random_hermitian(n, rng)))
        info["worst_residual"] = f"{worst:.2e}"
        assert worst <= 1e-9


def test_criterion_02_singlet_partner_fixture():
    with criterion(2, "singlet fixture partner equals -O entrywise <= 1e-14", 1.0) as info:
        p = entangle.partner_operator(entangle.singlet(), SIGMA_Z)
        err = float(np.abs(p + SIGMA_Z).max())
        info["max_error"] = f"{err:.1e}"
        assert err <= 1e-14


def test_criterion_03_basis_invariance():
    with criterion(3, "basis invariance, 50 random rotations at N=3, residual <= 1e-9") as info:
        rng = gen(3)
        s = random_state(3, rng)
        worst = max(entangle.verify_basis_invariance(s, hilbert.random_unitary(3, rng).T) for _ in range(50))
        info["worst_residual"] = f"{worst:.2e}"
        assert worst <= 1e-9


def test_criterion_04_product_of_singlets():
    with criterion(4, "two singlets: maximally entangled, Schmidt coefficients 1/2 +- 1e-10") as info:
        pair = entangle.product_of_entangled(entangle.singlet(), entangle.singlet())
        re = entangle.schmidt_decompose(pair.amplitudes())
        dev = float(np.abs(re.coeffs - 0.5).max())
        info["max_deviation"] = f"{dev:.1e}"
        assert pair.maximally_entangled and re.maximally_entangled
        assert re.dim == 4 and dev <= 1e-10


def test_criterion_05_epr_protocol():
    with criterion(5, "EPR 1e5 singlet trials: match 1.0, marginals 0.5+-0.008, order p > 0.001", 10.0) as info:
        n = 100_000
        exp = measure.EPRExperiment(entangle.singlet(), SIGMA_Z)
        a = exp.run(n, seed=0, order="alice_first")
        b = exp.run(n, seed=n, order="bob_first")
        rates = [measure.match_count(r) / n for r in (a, b)]
        margs = [measure.marginals(r, side)[1.0] for r in (a, b) for side in ("alice", "bob")]
        p = measure.order_independence_pvalue(a, b)
        info.update(match_rates=rates, worst_marginal_dev=f"{max(abs(m - 0.5) for m in margs):.4f}", p=f"{p:.3f}")
        assert rates == [1.0, 1.0]
        assert all(abs(m - 0.5) <= 0.008 for m in margs)
        assert p > 1e-3


def test_criterion_06_spin1_constraints():
    with criterion(6, "spin-1 squares in 100 random frames: spectra, commutators, sum = 2") as info:
        rng = gen(6)
        worst_eig = worst_comm = worst_sum = 0.0
        for _ in range(100):
            q, r = np.linalg.qr(rng.normal(size=(3, 3)))
            squares = nogo.spin1_squares((q * np.sign(np.diag(r))).T)
            for s in squares:
                ev = np.linalg.eigvalsh(s)
                worst_eig = max(worst_eig, float(np.min(np.abs(ev[:, None] - np.array([0.0, 1.0])), axis=1).max()))
            for x, y in itertools.combinations(squares, 2):
                worst_comm = max(worst_comm, float(np.abs(hilbert.commutator(x, y)).max()))
            worst_sum = max(worst_sum, float(np.abs(sum(squares) - 2 * np.eye(3)).max()))
        info.update(eig=f"{worst_eig:.1e}", comm=f"{worst_comm:.1e}", sum=f"{worst_sum:.1e}")
        assert worst_eig <= 1e-10 and worst_comm <= 1e-10 and worst_sum <= 1e-12


def _triad_grown_subset(rays, rng, size):
    ids = set()
    triples = list(rays.triples)
    while len(ids) < size:
        t = triples[int(rng.integers(len(triples)))]
        ids.update(int(i) for i in t)
    return sorted(ids)[:size] if len(ids) > size else sorted(ids)


@pytest.mark.slow
def test_criterion_07_ks_noncolorability():
    with criterion(7, "Peres-33 UNSAT; search agrees with enumeration on subsets of <= 12 rays", 60.0) as info:
        rays = nogo.peres_rays()
        assert isinstance(nogo.search_coloring(rays), nogo.UnsatCertificate)
        checked = disagreements = 0

        def agree(ids):
            rs = rays.subset(ids)
            res = nogo.search_coloring(rs)
            count = nogo.count_colorings_bruteforce(rs)
            if isinstance(res, nogo.Coloring):
                return count > 0 and not nogo.coloring_violations(rs, res.assignment)
            return count == 0

        # exhaustive for every subset of up to 4 rays
        for k in range(1, 5):
            for ids in itertools.combinations(range(33), k):
                checked += 1
                disagreements += not agree(ids)
        exhaustive = checked
        # seeded draws for sizes 5..12, half uniform and half grown from orthogonal triads
        rng = gen(7)
        for k in range(5, 13):
            for j in range(3000):
                ids = rng.choice(33, size=k, replace=False) if j % 2 else _triad_grown_subset(rays, rng, k)
                checked += 1
                disagreements += not agree(ids)
        info.update(exhaustive=exhaustive, sampled=checked - exhaustive, disagreements=disagreements)
        assert disagreements == 0


def test_criterion_08_mermin_refutation():
    with criterion(8, "Mermin square: 0 of 512 assignments; six products within 1e-10", 1.0) as info:
        rep = nogo.refute_product_valuemap(nogo.mermin_square())
        worst = max(rep.product_errors.values())
        info.update(satisfying=rep.satisfying, worst_product_error=f"{worst:.1e}")
        assert rep.total_assignments == 512 and rep.satisfying == 0
        assert len(rep.product_errors) == 6 and worst <= 1e-10


@pytest.mark.slow
def test_criterion_09_bohm_noncrossing():
    with criterion(9, "1e4 trajectories: no sign change, contextual product -1; Born 0.5+-0.008 at 1e5", 30.0) as info:
        params = BohmParams()
        mags = np.linspace(0.01, 4.0, 5000) * params.sigma
        z0 = np.concatenate([mags, -mags])
        std = bohm.integrate_batch(SpinorPacketState.from_params(params, Procedure.STANDARD), z0, params.t_end, params.dt)
        rev = bohm.integrate_batch(SpinorPacketState.from_params(params, Procedure.REVERSED), z0, params.t_end, params.dt)
        products = std.outcomes * rev.outcomes
        ens = bohm.born_ensemble(params.coarsest(), 100_000, rng_seed=9)
        info.update(
            trajectories=z0.size,
            sign_changes=std.sign_changes + rev.sign_changes,
            product_minus_one=int(np.sum(products == -1)),
            born_up_freq=f"{ens.up_freq:.4f}",
        )
        assert std.sign_changes == 0 and rev.sign_changes == 0
        assert np.all(products == -1)
        assert ens.sign_changes == 0 and abs(ens.up_freq - 0.5) <= 0.008


@pytest.mark.slow
def test_criterion_10_two_particle_dependence():
    with criterion(10, "two particles: b flips with A's procedure for 50 zA0, B inputs identical") as info:
        flips = 0
        values = np.concatenate([np.linspace(0.05, 3.0, 25), -np.linspace(0.05, 3.0, 25)])
        for za0 in values:
            std = bohm.two_particle_demo(float(za0), Procedure.STANDARD)
            rev = bohm.two_particle_demo(float(za0), Procedure.REVERSED)
            assert std.b_inputs == rev.b_inputs
            flips += std.b_outcome == -rev.b_outcome
        info.update(cases=values.size, flips=flips)
        assert flips == values.size


def test_criterion_11_end_to_end(capsys, tmp_path):
    with criterion(11, "report exits 0 and validates; injected fault exits 2") as info:
        schema = json.loads(resources.files("nonlocality").joinpath("schemas/report.schema.json").read_text())
        out = tmp_path / "report.json"
        code = cli.main(["report", "--reproducible", "--out", str(out)])
        capsys.readouterr()
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema)
        fault = cli.main(["report", "--reproducible", "--inject-fault", "partner"])
        capsys.readouterr()
        info.update(exit_code=code, fault_exit_code=fault, locality_untenable=report["conclusion"]["locality_untenable"])
        assert code == 0 and report["passed"] and report["conclusion"]["locality_untenable"]
        assert fault == 2
