"""A reduced structural-misspecification power study (M1..M4 crossed).

Run with --full for B=200, V=1000 at N = 50, 100, 274 (about half a minute).
"""

import sys

from npdcat import power

scale = 1.0 if "--full" in sys.argv else 0.25
sizes = (50, 100, 274) if "--full" in sys.argv else (50, 274)

scenarios = power.build_structural_grid(sizes, scale=scale)
results = power.run_grid(scenarios, master_seed=0, progress=lambda m: print("  ..", m))

# --- Power table: rows generating model, columns tested model ---
for N in sizes:
    print(f"\nN = {N} (B = {scenarios[0].B})  npd / chi2")
    print("       " + "".join(f"{m:>14}" for m in ("M1", "M2", "M3", "M4")))
    for g in ("M1", "M2", "M3", "M4"):
        cells = [r for r in results if r.scenario.N == N and r.scenario.true_value == g]
        print(f"  {g:>4} " + "".join(f"{r.power_npd:>7.2f}/{r.power_chi2:<5.2f} " for r in cells))

path = power.write_power_csv(results, "power_structural_demo.csv")
print("\nwritten to", path)
