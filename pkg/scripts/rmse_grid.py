"""RMSE over (alpha, beta) for the truncate-y and iterative pipelines on the 36-voxel perimeter scene."""
import argparse

import numpy as np

from roadrti.experiments import RmseGridConfig, run_rmse_grid

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--sigma", type=float, default=0.5)
ap.add_argument("--realizations", type=int, default=100)
ap.add_argument("--seed", type=int, default=0)
a = ap.parse_args()

res = run_rmse_grid(RmseGridConfig(sigma=a.sigma, realizations=a.realizations, seed=a.seed))
cfg = res.config
np.set_printoptions(precision=3, linewidth=160)
for p in cfg.pipelines:
    print(f"\n{p}: mean RMSE, rows alpha, columns beta = {cfg.betas}")
    for al, row in zip(cfg.alphas, res.mean(p)):
        print(f"  alpha={al:9.3g}  {row}")
    i, j = res.best_cell(p)
    print(f"  best {res.mean(p)[i, j]:.4f} at alpha={cfg.alphas[i]:.3g}, beta={cfg.betas[j]}")
