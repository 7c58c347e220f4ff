"""Plot-free tour of 1D convolution shape functions.

Prints, for a four-node line mesh with unit spacing, the shape functions of
the second element sampled across it for plain FE and for the convolution
basis with patch size 1 and reproducing order 2, then the partition-of-unity
and quadratic-reproduction errors.

    python3 demos/shape_functions_1d.py [--points 9]
"""

import argparse

import numpy as np

from chidenn.interp import ConvolutionConfig, build_patch_bases, element_shapes
from chidenn.meshgen import line_mesh


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=9)
    args = parser.parse_args()

    mesh = line_mesh(3, 3.0)
    xi = np.linspace(-1.0, 1.0, args.points)[:, None]
    cfg = ConvolutionConfig(s=1, a=1.0, p=2, kernel="lagrange1d")
    bases = build_patch_bases(mesh, cfg)
    for label, b in (("plain FE", None), ("convolution s=1 p=2", bases)):
        nodes, N, dN, _, X = element_shapes(mesh, 1, xi, b)
        print(f"\n{label}: element 1, patch nodes {nodes.tolist()}")
        print("     X  " + "".join(f"   N{n:<6d}" for n in nodes))
        for x, row in zip(X[:, 0], N):
            print(f"{x:6.3f}  " + "".join(f"{v:9.5f}" for v in row))
        unity = np.abs(N.sum(axis=1) - 1).max()
        quad = np.abs(N @ mesh.nodes[nodes, 0] ** 2 - X[:, 0] ** 2).max()
        print(f"partition of unity error {unity:.2e}; x^2 reproduction error {quad:.2e}")


if __name__ == "__main__":
    main()
