"""Manufactured-solution convergence of plain FE and the convolution basis.

    python3 demos/convergence_rates.py [--problem bar1d|plate2d] [--refinements 4 8 16 32]
"""

import argparse

from chidenn.convergence import convergence_study


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--problem", choices=["bar1d", "plate2d"], default="bar1d")
    parser.add_argument("--refinements", type=int, nargs="+", default=[4, 8, 16, 32])
    args = parser.parse_args()
    print(convergence_study(args.problem, args.refinements).table())


if __name__ == "__main__":
    main()
