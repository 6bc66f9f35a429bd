"""Command-line entry point.

Every subcommand prints a JSON report on stdout (and writes it to ``--out``
when given). Exit codes: 0 success, 1 usage or input error, 2 a checked
contract failed.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, bohm, entangle, hilbert, measure, nogo
from .errors import NonlocalityError
from .jsonio import dumps

DEFAULT_SEED = 0
EXIT_OK, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- configuration -----------------------------------------------------------

_COMMON = {"seed": DEFAULT_SEED, "tol": 1e-9, "out": None, "reproducible": False}
_PARAMS: dict[str, dict[str, Any]] = {
    "epr": {"trials": 10000, "dim": 2, "observable": "sigma_z", "order": "both", "csv": None},
    "partner": {"operator": "sigma_z", "state": "auto", "dim": 2},
    "ks": {"set": "peres33", "crosscheck": False},
    "mermin": {},
    "bohm": {
        "action": "context",
        "z0": 0.5,
        "zb0": 0.5,
        "proc": "standard",
        "n": 10000,
        "sigma": 1.0,
        "speed": 1.0,
        "t_end": 6.0,
        "dt": None,
        "data_dir": None,
    },
    "report": {"trials": 2000, "context_trials": 200, "inject_fault": None},
}


@dataclass
class RunConfig:
    """A validated subcommand invocation.

    ``params`` holds every option of the command; unspecified ones take the
    documented defaults. Unknown keys are rejected.
    """

    command: str
    params: dict[str, Any] = field(default_factory=dict)
    output_path: str | None = None

    @classmethod
    def build(cls, command: str, **params) -> "RunConfig":
        if command not in _PARAMS:
            raise UsageError(f"unknown command {command!r}")
        known = {**_COMMON, **_PARAMS[command]}
        unknown = set(params) - set(known)
        if unknown:
            raise UsageError(f"unknown option(s) for {command}: {', '.join(sorted(unknown))}")
        merged = {**known, **params}
        if merged["seed"] is None or int(merged["seed"]) < 0:
            raise UsageError("seed must be a non-negative integer")
        return cls(command, merged, merged["out"])

    def __getitem__(self, key):
        return self.params[key]


# --- shared helpers ----------------------------------------------------------


def _check(name: str, passed: bool, **details) -> dict:
    return {"name": name, "passed": bool(passed), "details": details}


def _report(config: RunConfig, checks: list[dict], **body) -> dict:
    out = {"command": config.command, "version": __version__, "seed": int(config["seed"])}
    if not config["reproducible"]:
        out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    out.update(body)
    out["checks"] = checks
    out["passed"] = all(c["passed"] for c in checks)
    return out


def _random_max_state(dim: int, rng: np.random.Generator) -> entangle.EntangledState:
    return entangle.make_max_entangled(hilbert.random_unitary(dim, rng).T, hilbert.random_unitary(dim, rng).T)


def _load_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


# --- commands ----------------------------------------------------------------


def cmd_epr(config: RunConfig) -> dict:
    trials, dim = int(config["trials"]), int(config["dim"])
    if trials < 1 or dim < 1:
        raise UsageError("trials and dim must be at least 1")
    rng = np.random.Generator(np.random.PCG64(config["seed"]))
    if config["observable"] == "sigma_z":
        if dim != 2:
            raise UsageError("observable sigma_z needs --dim 2")
        state, o = entangle.singlet(), hilbert.SIGMA_Z
    elif config["observable"] == "random":
        state = entangle.singlet() if dim == 2 else _random_max_state(dim, rng)
        o = hilbert.random_hermitian(dim, rng)
    else:
        raise UsageError(f"unknown observable {config['observable']!r}")
    orders = ["alice_first", "bob_first"] if config["order"] == "both" else [config["order"]]
    if any(x not in ("alice_first", "bob_first") for x in orders):
        raise UsageError(f"unknown order {config['order']!r}")

    exp = measure.EPRExperiment(state, o, config["observable"])
    seed = int(config["seed"])
    runs = {order: exp.run(trials, seed + k * trials, order) for k, order in enumerate(orders)}
    records = [r for rs in runs.values() for r in rs]
    if config["csv"]:
        Path(config["csv"]).write_text(measure.trials_csv(records))

    n = 1.0 / len(exp._spectrum)
    bound = 5 * np.sqrt(n * (1 - n) / trials) if n < 1 else 0.0
    checks = []
    for order, rs in runs.items():
        rate = measure.match_count(rs) / len(rs)
        checks.append(_check(f"match_rate[{order}]", rate == 1.0, match_rate=rate))
        marg = measure.marginals(rs)
        if trials >= 100:
            worst = max(abs(f - n) for f in marg.values()) if len(marg) == len(exp._spectrum) else 1.0
            checks.append(_check(f"marginals[{order}]", worst <= bound, worst_deviation=worst, bound=bound))
    body = {
        "observable": config["observable"],
        "dim": state.dim,
        "trials": trials,
        "match_rate": measure.match_count(records) / len(records),
        "summary": {order: measure.ensemble_summary(rs) for order, rs in runs.items()},
    }
    if len(runs) == 2:
        p = measure.order_independence_pvalue(runs["alice_first"], runs["bob_first"])
        body["order_independence_p"] = p
        checks.append(_check("order_independence", p > 1e-3, p_value=p))
    if config["observable"] == "sigma_z":
        # Alice's raw sigma_z reading is -alice_value because her partner observable is -sigma_z.
        partner_is_minus = np.max(np.abs(exp.partner + hilbert.SIGMA_Z)) <= config["tol"]
        anti = all(-r.alice_value * r.bob_value == -1 for r in records)
        checks.append(_check("spin_anticorrelation", partner_is_minus and anti))
    return _report(config, checks, **body)


def _operator_from(config: RunConfig, rng) -> tuple[str, np.ndarray]:
    spec = config["operator"]
    dim = int(config["dim"])
    if spec == "sigma_z":
        return spec, hilbert.SIGMA_Z.copy()
    if spec == "identity":
        return spec, hilbert.identity(dim)
    if spec == "random":
        return spec, hilbert.random_hermitian(dim, rng)
    try:
        return spec, hilbert.matrix_from_json(_load_json(spec))
    except (ValueError, NonlocalityError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_partner(config: RunConfig) -> dict:
    rng = np.random.Generator(np.random.PCG64(config["seed"]))
    name, o = _operator_from(config, rng)
    if not hilbert.is_hermitian(o):
        raise UsageError(f"operator {name} is not Hermitian")
    n = o.shape[0]
    spec = config["state"]
    if spec in ("auto", "singlet"):
        state = entangle.singlet() if n == 2 else _random_max_state(n, rng)
        if spec != "auto" and n != 2:
            raise UsageError(f"state {spec} is two-dimensional, operator has dim {n}")
    else:
        try:
            state = entangle.EntangledState.from_json(_load_json(spec))
        except (ValueError, NonlocalityError) as exc:
            raise UsageError(str(exc)) from exc
    if state.dim != n:
        raise UsageError(f"state of dim {state.dim} and operator of dim {n}")
    if not state.maximally_entangled:
        raise UsageError("state is not maximally entangled")

    o_tilde = entangle.partner_operator(state, o)
    spec_o, spec_t = hilbert.eigenvalues(o), hilbert.eigenvalues(o_tilde)
    spectral_gap = float(np.max(np.abs(spec_o - spec_t)))
    residual = entangle.check_perfect_correlation(state, o)
    tol = float(config["tol"])
    checks = [
        _check("spectrum_preserved", spectral_gap <= tol, max_difference=spectral_gap),
        _check("perfect_correlation", residual <= tol, residual=residual),
    ]
    body = {
        "operator": name,
        "partner": hilbert.matrix_to_json(o_tilde),
        "spectrum": spec_o.tolist(),
        "partner_spectrum": spec_t.tolist(),
        "residual": residual,
    }
    if name == "sigma_z":
        err = float(np.max(np.abs(o_tilde + o)))
        checks.append(_check("partner_is_minus_O", err <= 1e-14, max_error=err))
    return _report(config, checks, **body)


def _rayset_from(name: str) -> nogo.RaySet:
    if name == "peres33":
        return nogo.peres_rays()
    if name == "coordinate-triad":
        return nogo.coordinate_triad()
    try:
        return nogo.load_rayset(name)
    except NonlocalityError as exc:
        raise UsageError(str(exc)) from exc


def cmd_ks(config: RunConfig) -> dict:
    rs = _rayset_from(config["set"])
    result = nogo.search_coloring(rs)
    checks = []
    body = {"set": config["set"], "rays": len(rs), "triples": len(rs.triples), "pairs": len(rs.pairs)}
    if isinstance(result, nogo.Coloring):
        problems = nogo.coloring_violations(rs, result.assignment)
        checks.append(_check("coloring_verified", not problems, violations=problems))
        body.update(result="SAT", coloring=list(result.assignment))
    else:
        body.update(result="UNSAT", certificate=result.to_json())
    if config["crosscheck"]:
        if len(rs) > 22:
            raise UsageError("--crosscheck enumerates 2^n colourings and is limited to 22 rays")
        count = nogo.count_colorings_bruteforce(rs)
        agree = (count > 0) == isinstance(result, nogo.Coloring)
        checks.append(_check("enumeration_agrees", agree, enumerated_colorings=count))
    return _report(config, checks, **body)


def cmd_mermin(config: RunConfig) -> dict:
    sq = nogo.mermin_square()
    rep = nogo.refute_product_valuemap(sq)
    tol = 1e-10
    checks = [
        _check(f"product[{name}]", err <= tol, max_error=err, target=sign)
        for (name, _, sign), err in zip(sq.lines(), rep.product_errors.values())
    ]
    checks.append(_check("no_product_value_map", rep.satisfying == 0, satisfying=rep.satisfying, of=512))
    checks.append(_check("parity", rep.parity_product == -1 and rep.line_product_always_plus_one))
    body = {"labels": [list(r) for r in nogo.MERMIN_LABELS], "refutation": rep.to_json()}
    return _report(config, checks, **body)


def cmd_bohm(config: RunConfig) -> dict:
    action = config["action"]
    try:
        dt = config["dt"]
        if dt is None:
            dt = float(config["sigma"]) / (100 * float(config["speed"])) if action == "ensemble" else 1e-3
        params = bohm.BohmParams(float(config["sigma"]), float(config["speed"]), float(config["t_end"]), float(dt))
        proc = bohm.Procedure(config["proc"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    data_dir = Path(config["data_dir"]) if config["data_dir"] else None
    if data_dir:
        data_dir.mkdir(parents=True, exist_ok=True)

    def save(name: str, traj: bohm.Trajectory):
        if data_dir:
            (data_dir / f"{name}.csv").write_text(traj.to_csv())
            (data_dir / f"{name}.json").write_text(dumps(traj.manifest()) + "\n")

    checks = []
    try:
        if action == "trajectory":
            traj = bohm.run_procedure(float(config["z0"]), proc, params)
            save(f"trajectory_{proc.value}", traj)
            crossed = bool(np.any(traj.positions * np.sign(traj.initial_z) <= 0))
            checks.append(_check("no_crossing", not crossed))
            body = {"action": action, "trajectory": traj.manifest()}
        elif action == "context":
            z0 = float(config["z0"])
            std = bohm.run_procedure(z0, bohm.Procedure.STANDARD, params)
            rev = bohm.run_procedure(z0, bohm.Procedure.REVERSED, params)
            save("context_standard", std)
            save("context_reversed", rev)
            prod = std.calibrated_outcome * rev.calibrated_outcome
            checks.append(_check("contextual", prod == -1, product=prod))
            body = {"action": action, "z0": z0, "outcomes": [std.calibrated_outcome, rev.calibrated_outcome]}
        elif action == "ensemble":
            n = int(config["n"])
            rep = bohm.born_ensemble(params, n, int(config["seed"]), proc)
            bound = 5 * np.sqrt(0.25 / n)
            checks.append(_check("born_frequency", abs(rep.up_freq - 0.5) <= bound, bound=bound))
            checks.append(_check("no_crossing", rep.sign_changes == 0, sign_changes=rep.sign_changes))
            if data_dir:
                (data_dir / "ensemble.json").write_text(dumps(rep.to_json()) + "\n")
            body = {"action": action, "procedure": proc.value, "dt": params.dt, "ensemble": rep.to_json()}
        elif action == "pair":
            res = bohm.two_particle_demo(float(config["z0"]), proc, params, float(config["zb0"]))
            save(f"pair_A_{proc.value}", res.a_trajectory)
            save(f"pair_B_after_{proc.value}", res.b_trajectory)
            checks.append(_check("anticorrelated", res.a_outcome == -res.b_outcome))
            body = {"action": action, "procedure_at_A": proc.value, "a": res.a_outcome, "b": res.b_outcome}
        else:
            raise UsageError(f"unknown bohm action {action!r}")
    except (ValueError, NonlocalityError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(str(exc)) from exc
    return _report(config, checks, **body)


def cmd_nonlocality_report(config: RunConfig) -> dict:
    """Chain the verified premises and the two impossibility proofs."""
    seed = int(config["seed"])
    tol = float(config["tol"])
    fault = config["inject_fault"]
    if fault not in (None, "partner"):
        raise UsageError(f"unknown fault {fault!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    checks = []

    # Premise: perfect correlations, for the singlet and for arbitrary observables.
    s = entangle.singlet()
    exp = measure.EPRExperiment(s, hilbert.SIGMA_Z, "sigma_z")
    records = exp.run(int(config["trials"]), seed)
    rate = measure.match_count(records) / len(records)
    checks.append(_check("epr_singlet_match_rate", rate == 1.0, match_rate=rate, trials=len(records)))

    worst = 0.0
    for dim in (2, 3, 4, 5):
        for _ in range(5):
            state = _random_max_state(dim, rng)
            o = hilbert.random_hermitian(dim, rng)
            o_tilde = entangle.partner_operator(state, o)
            if fault == "partner":
                o_tilde = o_tilde + 0.1 * hilbert.identity(dim)
            worst = max(worst, entangle.correlation_residual(state, o_tilde, o))
    checks.append(_check("perfect_correlation_random", worst <= tol, worst_residual=worst))

    vm = nogo.valuemap_from_trials(records)
    checks.append(_check("value_map_from_locality", vm.consistent, trials=len(vm.values)))

    # Contexts of the Mermin square, measured on two singlets (dimension 4).
    pair = entangle.product_of_entangled(s, s)
    sq = nogo.mermin_square()
    ops = {sq.labels[r][c]: sq.cells[r][c] for r in range(3) for c in range(3)}
    context_ok = True
    contexts = {}
    for name, coords, sign in sq.lines():
        ids = [sq.labels[r][c] for r, c in coords]
        ctx = measure.ContextExperiment(pair, {k: ops[k] for k in ids})
        recs = [r for t in range(int(config["context_trials"])) for r in ctx.trial(seed + t)]
        cvm = nogo.valuemap_from_trials(recs)
        products = set(nogo.line_products_by_trial(cvm, ids).values())
        ok = cvm.consistent and products == {sign}
        context_ok &= ok
        contexts[name] = {"observables": ids, "target": sign, "observed_products": sorted(products)}
    checks.append(_check("mermin_context_predictions", context_ok, contexts=contexts))

    # Impossibility of a non-contextual value map.
    rep = nogo.refute_product_valuemap(sq)
    checks.append(_check("mermin_no_value_map", rep.satisfying == 0, satisfying=rep.satisfying, of=512))

    rays = nogo.peres_rays()
    worst_ks = 0.0
    for t in rays.triples:
        squares = nogo.spin1_squares(rays.vectors()[list(t)])
        worst_ks = max(worst_ks, float(np.max(np.abs(sum(squares) - 2 * hilbert.identity(3)))))
    checks.append(_check("spin1_sum_rule", worst_ks <= 1e-12, worst_error=worst_ks))
    ks = nogo.search_coloring(rays)
    unsat = isinstance(ks, nogo.UnsatCertificate)
    checks.append(_check("ks_peres33_unsat", unsat, certificate=ks.to_json() if unsat else None))

    names = {c["name"]: c["passed"] for c in checks}
    premises = all(
        names[k] for k in ("epr_singlet_match_rate", "perfect_correlation_random", "value_map_from_locality",
                           "mermin_context_predictions")
    )
    impossible = names["mermin_no_value_map"] and names["ks_peres33_unsat"] and names["spin1_sum_rule"]
    conclusion = {
        "premises_verified": premises,
        "value_map_impossible": impossible,
        "locality_untenable": premises and impossible,
        "statement": (
            "Perfect correlations plus locality imply a non-contextual value map; "
            "no such map exists; hence locality fails."
            if premises and impossible
            else "Chain incomplete: at least one check failed."
        ),
    }
    return _report(config, checks, conclusion=conclusion)


COMMANDS: dict[str, Callable[[RunConfig], dict]] = {
    "epr": cmd_epr,
    "partner": cmd_partner,
    "ks": cmd_ks,
    "mermin": cmd_mermin,
    "bohm": cmd_bohm,
    "report": cmd_nonlocality_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--tol", type=float, default=_COMMON["tol"], help="contract tolerance")
    common.add_argument("--out", help="also write the JSON report to this path")
    common.add_argument("--reproducible", action="store_true", help="omit the timestamp field")

    parser = _Parser(prog="nonlocality", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("epr", parents=[common], help="EPR trials on a maximally entangled state")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--observable", choices=["sigma_z", "random"], default="sigma_z")
    p.add_argument("--order", choices=["alice_first", "bob_first", "both"], default="both")
    p.add_argument("--csv", help="write per-trial rows to this CSV file")

    p = sub.add_parser("partner", parents=[common], help="partner observable and correlation residual")
    p.add_argument("--operator", default="sigma_z", help="sigma_z | identity | random | path to matrix JSON")
    p.add_argument("--state", default="auto", help="auto | singlet | path to state JSON")
    p.add_argument("--dim", type=int, default=2)

    p = sub.add_parser("ks", parents=[common], help="Kochen-Specker colouring search")
    p.add_argument("--set", default="peres33", help="peres33 | coordinate-triad | path to ray JSON")
    p.add_argument("--crosscheck", action="store_true", help="compare against full 2^n enumeration")

    sub.add_parser("mermin", parents=[common], help="Mermin square product-rule refutation")

    p = sub.add_parser("bohm", parents=[common], help="pilot-wave spin measurement")
    p.add_argument("action", choices=["trajectory", "context", "ensemble", "pair"])
    p.add_argument("--z0", type=float, default=0.5)
    p.add_argument("--zb0", type=float, default=0.5, help="initial position of particle B (pair)")
    p.add_argument("--proc", choices=["standard", "reversed"], default="standard")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--speed", type=float, default=1.0)
    p.add_argument("--t-end", dest="t_end", type=float, default=6.0)
    p.add_argument("--dt", type=float, default=None, help="default 1e-3; sigma/(100 speed) for ensemble")
    p.add_argument("--data-dir", dest="data_dir", help="directory for CSV/JSON trajectory files")

    p = sub.add_parser("report", parents=[common], help="full nonlocality argument")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--context-trials", dest="context_trials", type=int, default=200)
    p.add_argument("--inject-fault", dest="inject_fault", choices=["partner"], help=argparse.SUPPRESS)
    return parser


def run(config: RunConfig) -> tuple[int, dict]:
    report = COMMANDS[config.command](config)
    return (EXIT_OK if report["passed"] else EXIT_CONTRACT), report


def main(argv: list[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    try:
        config = RunConfig.build(command, **args)
        code, report = run(config)
    except UsageError as exc:
        print(f"nonlocality {command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dumps(report) + "\n"
    sys.stdout.write(text)
    if config.output_path:
        Path(config.output_path).write_text(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
