"""Accuracy and cost of plain FE, full convolution and the hybrid on the notched plate.

Runs the bundled ``notch_ramp`` scenario to the end of the loading ramp with
four discretizations (the plain FE reference on a mesh refined four times
per direction, plain FE, convolution everywhere, convolution around the
notch only) and prints the notch-tip errors against the reference together
with setup and per-step wall-clock times.  Takes a few minutes.

    python3 demos/notch_comparison.py [--csv histories.csv]
"""

import argparse

import numpy as np

from chidenn.benchmark import notch_scenario, relative_errors, run_monitored


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", help="write the sampled von Mises histories here")
    args = parser.parse_args()

    runs = {}
    for name in ("reference", "fem", "full", "hybrid"):
        sc = notch_scenario(name)
        print(f"{name}: {sc.mesh.n_elements} elements, dt {sc.solver.dt:g}, {sc.solver.steps} steps ...", flush=True)
        runs[name] = run_monitored(sc, name=name)

    print(f"\n{'':10s}{'err u_x':>10s}{'err u_y':>10s}{'err vM':>10s}{'setup s':>10s}{'ms/step':>10s}")
    for name, run in runs.items():
        errs = relative_errors(run, runs["reference"]) if name != "reference" else np.zeros(3)
        print(f"{name:10s}" + "".join(f"{100 * e:9.3f}%" for e in errs) + f"{run.setup:10.2f}{1e3 * run.per_step:10.2f}")
    fem = relative_errors(runs["fem"], runs["reference"])
    for name in ("full", "hybrid"):
        ratio = fem / relative_errors(runs[name], runs["reference"])
        print(f"plain FE error / {name} error: " + ", ".join(f"{r:.2f}" for r in ratio))

    if args.csv:
        t = runs["full"].t
        cols = [np.interp(t, r.t, r.values[:, 2]) for r in runs.values()]
        np.savetxt(args.csv, np.column_stack([t] + cols), delimiter=",",
                   header="t," + ",".join(f"von_mises_{n}" for n in runs), comments="")


if __name__ == "__main__":
    main()
