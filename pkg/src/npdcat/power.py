"""Power study: misspecification grids and nested simulation.

A scenario pairs a generating model with a tested model on a balanced
design.  Datasets drawn under a generating model are shared by every
tested model, and the calibration of a tested model is shared by every
generating model, so a grid costs one simulation set per distinct model.
All seeds are independent of N, hence the first 50 subjects of the N=274
datasets are the N=50 datasets (common random numbers across N).
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import presets, rng
from .model import ModelSpec
from .simulate import Design, simulate_dataset
from .stattests import Calibration, calibrate


@dataclass(frozen=True)
class Scenario:
    id: str
    grid: str
    generating: ModelSpec
    tested: ModelSpec
    N: int
    varied: str
    true_value: object
    tested_value: object
    B: int = 200
    V: int = 1000
    times: tuple[float, ...] = presets.STUDY_TIMES

    def __post_init__(self):
        if self.generating.categories != self.tested.categories:
            raise ValueError("generating and tested models need the same categories")

    @property
    def null(self) -> bool:
        return self.generating.key() == self.tested.key()

    def design(self) -> Design:
        return Design.balanced(self.N, self.times)


@dataclass(frozen=True)
class PowerResult:
    scenario: Scenario
    power_npd: float
    power_chi2: float
    power_npd_stratified: float
    B: int

    def mc_se(self, p: float) -> float:
        return math.sqrt(p * (1 - p) / self.B)

    @property
    def mc_se_npd(self) -> float:
        return self.mc_se(self.power_npd)

    @property
    def mc_se_chi2(self) -> float:
        return self.mc_se(self.power_chi2)

    @property
    def mc_se_npd_stratified(self) -> float:
        return self.mc_se(self.power_npd_stratified)


def _scaled(B: int, V: int, scale: float) -> tuple[int, int]:
    return max(20, int(round(B * scale))), max(50, int(round(V * scale)))


def build_parameter_grid(sample_sizes: Sequence[int] = presets.SAMPLE_SIZES,
                         B: int = 200, V: int = 1000, scale: float = 1.0) -> list[Scenario]:
    """One parameter moved at a time: 5 parameters x 5 true x 5 tested values per N."""
    B, V = _scaled(B, V, scale)
    out = []
    for N in sample_sizes:
        for name, values in presets.PARAMETER_GRID.items():
            for g in values:
                gen = presets.with_parameter(presets.TABLE1, name, g)
                for v in values:
                    tested = presets.with_parameter(presets.TABLE1, name, v)
                    out.append(Scenario(f"param-{name}-{g:g}-vs-{v:g}-N{N}", "parameter",
                                        gen, tested, N, name, g, v, B, V))
    return out


def build_structural_grid(sample_sizes: Sequence[int] = presets.SAMPLE_SIZES,
                          B: int = 200, V: int = 1000, scale: float = 1.0) -> list[Scenario]:
    """M1-M4 crossed as generating x tested model: 16 scenarios per N."""
    B, V = _scaled(B, V, scale)
    out = []
    for N in sample_sizes:
        for g, gen in presets.STRUCTURAL.items():
            for v, tested in presets.STRUCTURAL.items():
                out.append(Scenario(f"struct-{g}-vs-{v}-N{N}", "structural",
                                    gen, tested, N, "shape", g, v, B, V))
    return out


def _data_seed(master_seed: int, model: ModelSpec) -> int:
    return rng.derive_seed(master_seed, "data", model.key())


def _calibration_seed(master_seed: int, model: ModelSpec) -> int:
    return rng.derive_seed(master_seed, "calibration", model.key())


def _evaluate_group(args):
    """All scenarios sharing one generating model, N, B and V."""
    generating, design, B, master_seed, calibrations = args
    seed = _data_seed(master_seed, generating)
    jitter_seed = rng.derive_seed(seed, "jitter")
    counts = np.zeros((len(calibrations), 3), dtype=np.int64)
    for r in range(B):
        data = simulate_dataset(generating, design, rng.SeedSpec(seed, (r, 0)))
        for c, cal in enumerate(calibrations):
            res = cal.evaluate(data, replicate=r, jitter_seed=jitter_seed)
            counts[c] += (res["npd"].reject, res["chi2"].reject, res["npd_stratified"].reject)
    return counts


def run_grid(scenarios: Iterable[Scenario], master_seed: int = 0,
             workers: int = 1, progress=None) -> list[PowerResult]:
    """Rejection rates of every scenario, in input order."""
    scenarios = list(scenarios)
    cals: dict[tuple, Calibration] = {}
    groups: dict[tuple, list[int]] = defaultdict(list)
    for i, s in enumerate(scenarios):
        groups[(s.generating.key(), s.N, s.B, s.V, s.times)].append(i)
        ck = (s.tested.key(), s.N, s.B, s.V, s.times)
        if ck not in cals:
            cals[ck] = calibrate(s.tested, s.design(), s.B, s.V,
                                 _calibration_seed(master_seed, s.tested), chi2=True,
                                 workers=workers, cache=False)
            if progress:
                progress(f"calibrated {s.tested.name or s.tested.key()} N={s.N}")
    jobs, order = [], []
    for (gkey, N, B, V, times), idx in groups.items():
        first = scenarios[idx[0]]
        group_cals = [cals[(scenarios[i].tested.key(), N, B, V, times)] for i in idx]
        jobs.append((first.generating, group_cals[0].design, B, master_seed, group_cals))
        order.append(idx)
    if workers <= 1:
        outputs = map(_evaluate_group, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        outputs = pool.map(_evaluate_group, jobs)
    results: list[PowerResult | None] = [None] * len(scenarios)
    try:
        for idx, counts in zip(order, outputs):
            for i, c in zip(idx, counts):
                s = scenarios[i]
                results[i] = PowerResult(s, float(c[0] / s.B), float(c[1] / s.B),
                                         float(c[2] / s.B), s.B)
            if progress:
                progress(f"evaluated {scenarios[idx[0]].generating.name} N={scenarios[idx[0]].N}")
    finally:
        if workers > 1:
            pool.shutdown()
    return results


def run_scenario(s: Scenario, master_seed: int = 0, workers: int = 1) -> PowerResult:
    return run_grid([s], master_seed, workers)[0]


CSV_COLUMNS = ("scenario", "grid", "N", "varied", "true_value", "tested_value", "B", "V",
               "power_npd", "mc_se_npd", "power_chi2", "mc_se_chi2",
               "power_npd_stratified", "mc_se_npd_stratified")


def write_power_csv(results: Sequence[PowerResult], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in results:
            s = r.scenario
            w.writerow([s.id, s.grid, s.N, s.varied, s.true_value, s.tested_value, s.B, s.V,
                        repr(r.power_npd), repr(r.mc_se_npd), repr(r.power_chi2),
                        repr(r.mc_se_chi2), repr(r.power_npd_stratified),
                        repr(r.mc_se_npd_stratified)])
    return path


def read_power_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
