"""EPR match rates and marginals for random observables over a range of dimensions.

    python3 scripts/epr_statistics.py --dims 2 3 4 5 --trials 20000
"""
import argparse

import numpy as np

from nonlocality import entangle, hilbert, measure


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dims", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.Generator(np.random.PCG64(args.seed))
    print(f"{'N':>3} {'match':>7} {'max|p-1/N|':>11} {'5 sigma':>8} {'order p':>8}")
    for n in args.dims:
        state = entangle.make_max_entangled(hilbert.random_unitary(n, rng).T, hilbert.random_unitary(n, rng).T)
        exp = measure.EPRExperiment(state, hilbert.random_hermitian(n, rng))
        a = exp.run(args.trials, args.seed, "alice_first")
        b = exp.run(args.trials, args.seed + args.trials, "bob_first")
        rate = (measure.match_count(a) + measure.match_count(b)) / (2 * args.trials)
        dev = max(abs(p - 1 / n) for p in measure.marginals(a).values())
        bound = 5 * np.sqrt((1 / n) * (1 - 1 / n) / args.trials)
        p = measure.order_independence_pvalue(a, b)
        print(f"{n:>3} {rate:>7.4f} {dev:>11.5f} {bound:>8.5f} {p:>8.3f}")


if __name__ == "__main__":
    main()
