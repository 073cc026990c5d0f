"""Policy costs against the exhaustive nonnegative optimum on small random systems."""
import argparse

import numpy as np

from roadrti.experiments import OracleConfig, run_oracle_battery

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--instances", type=int, default=200)
ap.add_argument("--seed", type=int, default=0)
a = ap.parse_args()

rows = run_oracle_battery(OracleConfig(instances=a.instances, seed=a.seed))
o = np.array([r["oracle"] for r in rows])
for p in ("trunc-x", "trunc-y-clamped", "iterative", "pgm"):
    c = np.array([r[p] for r in rows])
    gap = c - o
    print(f"{p:16} mean gap {gap.mean():.3g}  max gap {gap.max():.3g}  "
          f"within 1e-4: {np.mean(gap <= 1e-4):.2%}")
it = np.array([r["iterative"] for r in rows])
tx = np.array([r["trunc-x"] for r in rows])
# equal costs can differ in the last bit
print(f"iterative <= trunc-x on {np.mean(it <= tx + 1e-12 * np.maximum(1, np.abs(tx))):.1%} of instances")
