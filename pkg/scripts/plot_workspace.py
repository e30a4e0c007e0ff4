#!/usr/bin/env python3
"""Plot both stations' reachability rasters with their target ellipses.

Usage: python scripts/plot_workspace.py [--resolution 0.25] [--out workspace.png]
"""

import argparse
import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tactorsim.config import FINGERS, station
from tactorsim.geometry import compute_workspace


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--resolution", type=float, default=0.25)
    ap.add_argument("--out", default="workspace.png")
    args = ap.parse_args()

    fig, axes = plt.subplots(1, len(FINGERS), figsize=(11, 5.5), sharey=True)
    for ax, name in zip(np.atleast_1d(axes), FINGERS):
        st = station(name)
        grid = compute_workspace(st.lower, st.upper, args.resolution, st.ellipse)
        # 0 = neither, 1 = lower only, 2 = upper only, 3 = both
        field = grid.lower.astype(int) + 2 * grid.upper.astype(int)
        extent = (grid.x0, grid.x0 + grid.nx * grid.resolution,
                  grid.y0, grid.y0 + grid.ny * grid.resolution)
        ax.imshow(field.T, origin="lower", extent=extent,
                  cmap="Blues", vmin=0, vmax=3, interpolation="nearest")
        ph = np.linspace(0.0, 2.0 * math.pi, 200)
        ell = grid.target_ellipse
        ax.plot(ell.center.x + ell.semi_x * np.cos(ph),
                ell.center.y + ell.semi_y * np.sin(ph), "r-", lw=1.2)
        ax.set_title(f"{name}: both {grid.intersection_area_mm2():.0f} mm$^2$")
        ax.set_xlabel("x (mm)")
        ax.set_aspect("equal")
    np.atleast_1d(axes)[0].set_ylabel("y (mm)")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
