"""Velocity recovery and stacked-vs-single RMSE on random moving boxes."""
import argparse

import numpy as np

from roadrti.experiments import MotionConfig, run_motion_trials

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--trials", type=int, default=30)
ap.add_argument("--sigma", type=float, default=4.0)
ap.add_argument("--seed", type=int, default=0)
a = ap.parse_args()

rows = run_motion_trials(MotionConfig(trials=a.trials, sigma=a.sigma, seed=a.seed))
print("noiseless recovery", np.mean([r["v_hat_noiseless"] == r["v_true"] for r in rows]))
print("noisy recovery    ", np.mean([r["v_hat"] == r["v_true"] for r in rows]))
print("stacked beats single",
      np.mean([r["rmse_stacked"] < r["rmse_single"] for r in rows]))
