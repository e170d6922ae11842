"""Toenail case study: model checks with npd percentile bands.

Uses the real data if NPDCAT_TOENAIL_CSV points at a converted file
(see convert_toenail.py), otherwise a synthetic dataset with the same
visit schedule simulated from the final model.
"""

import os
from pathlib import Path

import numpy as np

from npdcat import SeedSpec, calibrate, io, presets, report, simulate_dataset
from npdcat.stattests import InapplicableTestError, check_balanced

out = Path("toenail_report")
out.mkdir(exist_ok=True)

src = os.environ.get("NPDCAT_TOENAIL_CSV")
if src:
    data = io.parse_dataset(src, time_factor=0.25)  # weeks -> months
    print(f"real data: {data.design.N} subjects, {len(data)} rows")
else:
    data = simulate_dataset(presets.TOENAIL_FINAL, presets.toenail_like_design(), SeedSpec(10))
    print(f"synthetic data: {data.design.N} subjects, {len(data)} rows")

try:
    check_balanced(data.design)
except InapplicableTestError as exc:
    print("Chi-square test not applicable:", exc)

# --- Marginal predictions of the final model ---
cal = calibrate(presets.TOENAIL_FINAL, data.design, B=200, V=1000, master_seed=0)
p1 = 1 - cal.marginal.F[:, 0]
for arm in (0, 1):
    sel = data.design.obs_covariate("trt") == arm
    first = p1[sel & (data.design.obs_time == 0)].mean()
    last = p1[sel & (data.design.obs_time == 12)].mean()
    print(f"arm {'AB'[arm]}: predicted P(no infection) {first:.2f} at month 0, {last:.2f} at 12")

# --- Both models, global and stratified npd tests, bands ---
for name in ("constant_toenail", "final_toenail"):
    c = calibrate(presets.get_model(name), data.design, B=200, V=1000, master_seed=0)
    v = c.npd(data)
    g, s = c.test_npd(v), c.test_stratified(v)
    print(f"{name}: global D={g.statistic:.4f} (threshold {g.threshold:.4f}) reject={g.reject}; "
          f"stratified reject={s.reject}")
    bands = report.percentile_bands(v, c.plan, 1000, 0)
    outside = int((~bands.inside()).sum())
    print(f"  {outside} of {bands.inside().size} observed percentiles outside their bands")
    report.render(bands, out / f"bands_{name}")
report.render(report.observed_proportions(data, cal.plan), out / "proportions")
print("plots in", out)
