"""Fan of pilot-wave trajectories for the two spin-measurement procedures.

Writes one CSV per procedure with columns t, z0, z (long format), plus a
small JSON summary of final signs. Pass --plot to also save PNG figures
(needs matplotlib, which the package itself does not depend on).

    python3 scripts/trajectory_fan.py --out runs/fan --count 21
"""
import argparse
import csv
import json
from pathlib import Path

import numpy as np

from nonlocality.bohm import BohmParams, Procedure, SpinorPacketState, integrate_trajectory


def fan(procedure: Procedure, z0s, params: BohmParams):
    state = SpinorPacketState.from_params(params, procedure)
    return [integrate_trajectory(state, float(z), params.t_end, params.dt) for z in z0s]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/fan")
    ap.add_argument("--count", type=int, default=21, help="trajectories per procedure")
    ap.add_argument("--zmax", type=float, default=2.5, help="initial positions span [-zmax, zmax] (sigma units)")
    ap.add_argument("--stride", type=int, default=20, help="keep every stride-th time sample")
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args(argv)

    params = BohmParams()
    z0s = np.linspace(-args.zmax, args.zmax, args.count) * params.sigma
    z0s = z0s[z0s != 0]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for proc in Procedure:
        trajs = fan(proc, z0s, params)
        stride = args.stride
        with open(out / f"fan_{proc.value}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "z0", "z"])
            for tr in trajs:
                for t, z in zip(tr.times[::stride], tr.positions[::stride]):
                    w.writerow([f"{t:.6g}", f"{tr.initial_z:.6g}", f"{z:.10g}"])
        summary[proc.value] = [tr.manifest() for tr in trajs]
        if args.plot:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt

            fig, ax = plt.subplots(figsize=(5, 4))
            for tr in trajs:
                ax.plot(tr.times, tr.positions, color="C0" if tr.calibrated_outcome > 0 else "C3", lw=0.8)
            ax.axhline(0, color="k", lw=0.5)
            ax.set_xlabel("t")
            ax.set_ylabel("z")
            ax.set_title(f"{proc.value} procedure")
            fig.tight_layout()
            fig.savefig(out / f"fan_{proc.value}.png", dpi=120)
            plt.close(fig)
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    for name, rows in summary.items():
        ups = sum(r["outcome"] == 1 for r in rows)
        print(f"{name}: {ups}/{len(rows)} trajectories report +1")


if __name__ == "__main__":
    main()
