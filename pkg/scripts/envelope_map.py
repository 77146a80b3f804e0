"""Compare the effective dissipation with a brute-force convex envelope on a grid.

Writes a two-panel PNG (values and absolute error) when --png is given.

    python scripts/envelope_map.py [--shape ball|ellipsoid] [--n 256] [--png map.png]
"""
import argparse

import numpy as np

from softrelax.geometry import Ball, Ellipsoid, H_eff, SqrtPotential, envelope_oracle
from softrelax.tensors import DevTensor2

SHAPES = {
    "ball": (Ball(1.0), SqrtPotential(0.5)),
    "ellipsoid": (Ellipsoid(1.0, 0.5), SqrtPotential(0.25)),
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--shape", choices=sorted(SHAPES), default="ball")
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--png")
    args = ap.parse_args()

    K, V = SHAPES[args.shape]
    direction = DevTensor2(1 / np.sqrt(2), 0.0)
    env = envelope_oracle(K, V, direction, n_s=args.n, n_theta=args.n)
    S, T = np.meshgrid(env.s, env.theta, indexing="ij")
    exact = H_eff(K, V, S[..., None] * direction.as_array(), T)
    err = np.abs(env.values - exact)
    tol = 3 * env.spacing * K.outer_radius
    print(f"{args.shape}: max |envelope - H_eff| = {err.max():.3e}  (3 h B = {tol:.3e})")

    if args.png:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(1, 2, figsize=(10, 4))
        ext = (env.theta[0], env.theta[-1], env.s[0], env.s[-1])
        im = ax[0].imshow(exact, origin="lower", extent=ext, aspect="auto")
        ax[0].set(xlabel="theta", ylabel="s", title="H_eff(s e, theta)")
        fig.colorbar(im, ax=ax[0])
        im = ax[1].imshow(err, origin="lower", extent=ext, aspect="auto")
        ax[1].set(xlabel="theta", ylabel="s", title="|envelope - H_eff|")
        fig.colorbar(im, ax=ax[1])
        fig.tight_layout()
        fig.savefig(args.png, dpi=120)


if __name__ == "__main__":
    main()
