"""Nine-run vehicle classification battery with frame stacking and velocity search."""
import argparse

from roadrti.experiments import AtrConfig, run_atr_battery

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seeds", type=int, default=1, help="number of seeds, starting at --seed")
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--alpha", type=float, default=0.3)
a = ap.parse_args()

for s in range(a.seed, a.seed + a.seeds):
    res = run_atr_battery(AtrConfig(seed=s, alpha=a.alpha))
    print(f"seed {s}: {res['score']}/{res['total']}")
    for r in res["runs"]:
        mark = "" if r["correct"] else "  <-- wrong"
        print(f"  run {r['run']}: {r['vehicle']:12} frames={r['frames']:2d} "
              f"v={r['v_true']:4.1f} v_hat={r['v_hat']:3d} -> {r['winner']}{mark}")
