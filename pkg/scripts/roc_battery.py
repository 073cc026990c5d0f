"""Average ROC of each negative-data policy over the moving-mustang runs."""
import argparse

from roadrti.experiments import RocConfig, run_roc_battery

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--alpha", type=float, default=0.3)
ap.add_argument("--sigma", type=float, default=4.0)
ap.add_argument("--weights", default="line", help="magnitude model")
a = ap.parse_args()

cfg = RocConfig(seed=a.seed, alpha=a.alpha, sigma=a.sigma, magnitude=a.weights)
res = run_roc_battery(cfg)
print("pf     " + " ".join(f"{p:>9}" for p in cfg.policies))
for k, pf in enumerate(res["pf"]):
    print(f"{pf:5.2f}  " + " ".join(f"{res['pd'][p][k]:9.3f}" for p in cfg.policies))
