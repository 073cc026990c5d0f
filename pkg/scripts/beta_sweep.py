"""Single-frame detection and RMSE against the bias weight beta on the roadside mustang scene."""
import argparse

from roadrti.experiments import BetaSweepConfig, run_beta_sweep

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--realizations", type=int, default=20)
ap.add_argument("--seed", type=int, default=0)
a = ap.parse_args()

print(f"{'beta':>7} {'rmse':>7} {'nonzero':>8} {'pd':>6} {'pf':>6}")
for r in run_beta_sweep(BetaSweepConfig(realizations=a.realizations, seed=a.seed)):
    print(f"{r['beta']:7.1f} {r['rmse']:7.3f} {r['nonzero_fraction']:8.3f} {r['pd']:6.3f} {r['pf']:6.3f}")
