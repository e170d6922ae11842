"""KS and Chi-square tests with simulation-calibrated thresholds.

Observations within a subject are correlated, so the usual critical
values do not apply.  Every threshold here is an empirical percentile of
the statistic over ``B`` datasets simulated under the tested model.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import special

from . import rng
from .model import ModelSpec
from .npd import MarginalCdf, NpdVector, compute_npd, estimate_marginal_cdf
from .simulate import Dataset, Design, simulate_dataset


class InapplicableTestError(ValueError):
    """The test's design assumptions do not hold for this dataset."""


@dataclass(frozen=True)
class KsResult:
    D: float
    n: int


def ks_statistic(values, cdf=special.ndtr) -> KsResult:
    """One-sample KS distance between the sample and ``cdf`` (default N(0,1)).

    Exact, from the order statistics:
    ``max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)``.
    """
    x = values.npd if isinstance(values, NpdVector) else values
    x = np.sort(np.asarray(x, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("KS statistic of an empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("KS statistic needs finite values")
    F = cdf(x)
    i = np.arange(1, n + 1)
    D = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    return KsResult(float(min(max(D, 0.0), 1.0)), n)


def empirical_threshold(sorted_stats: np.ndarray, alpha: float) -> float:
    """Value exceeded by exactly ``floor(alpha * B)`` of the (untied) statistics."""
    B = sorted_stats.size
    k = int(math.floor(alpha * B + 1e-9))
    return float(sorted_stats[B - k - 1])


@dataclass(frozen=True, eq=False)
class NullDistribution:
    """Sorted statistics simulated under H0 and their upper ``alpha`` threshold."""

    statistics: np.ndarray
    alpha: float = 0.05
    n_obs: int | None = None
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        s = np.sort(np.asarray(self.statistics, dtype=float))
        object.__setattr__(self, "statistics", s)
        if s.size < 1:
            raise ValueError("empty null distribution")
        if s.size < 100:
            warnings.warn(f"null distribution from only B={s.size} replicates", stacklevel=3)

    @property
    def B(self) -> int:
        return int(self.statistics.size)

    @property
    def threshold(self) -> float:
        return empirical_threshold(self.statistics, self.alpha)

    def n_exceeding(self, value: float | None = None) -> int:
        v = self.threshold if value is None else value
        return int(np.sum(self.statistics > v))

    def p_value(self, statistic: float) -> float:
        """``(1 + #{null >= statistic}) / (B + 1)``."""
        return (1 + int(np.sum(self.statistics >= statistic))) / (self.B + 1)

    def save(self, path) -> Path:
        path = Path(path)
        meta = {"alpha": self.alpha, "B": self.B, "n_obs": self.n_obs,
                "threshold": self.threshold, **dict(self.provenance)}
        lines = [f"# {k}: {json.dumps(v)}" for k, v in meta.items()]
        lines += [repr(float(v)) for v in self.statistics]
        try:
            path.write_text("\n".join(lines) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write null distribution to {path}: {exc}") from exc
        return path

    @classmethod
    def load(cls, path) -> "NullDistribution":
        meta, stats = {}, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].partition(":")
                meta[k.strip()] = json.loads(v)
            elif line.strip():
                stats.append(float(line))
        alpha = meta.pop("alpha")
        n_obs = meta.pop("n_obs")
        meta.pop("B", None)
        meta.pop("threshold", None)
        return cls(np.asarray(stats), alpha, n_obs, meta)


@dataclass(frozen=True)
class TestDecision:
    kind: str
    reject: bool
    statistic: float | tuple
    threshold: float | tuple
    empirical_p: float | None = None
    strata: tuple = ()
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {"test": self.kind, "reject": bool(self.reject),
             "statistic": self.statistic, "threshold": self.threshold,
             "empirical_p": self.empirical_p}
        if self.strata:
            d["strata"] = [list(s) if isinstance(s, tuple) else s for s in self.strata]
        if self.warnings:
            d["warnings"] = list(self.warnings)
        return d

    def report(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def corrected_ks_test(observed: KsResult, null: NullDistribution) -> TestDecision:
    """Reject when ``D`` exceeds the calibrated threshold."""
    if null.n_obs is not None and observed.n != null.n_obs:
        raise ValueError(f"statistic from {observed.n} observations but null "
                         f"calibrated on {null.n_obs}")
    thr = null.threshold
    return TestDecision("ks", observed.D > thr, observed.D, thr, null.p_value(observed.D))


# ------------------------------------------------------------------ strata


@dataclass(frozen=True, eq=False)
class StratumPlan:
    """Partition of observations into (visit time, covariate combination) cells.

    The Bonferroni level is ``alpha / (n_visits * n_combos)`` whether or not
    every cell is populated.
    """

    cells: tuple[tuple, ...]
    obs_stratum: np.ndarray
    n_visits: int
    n_combos: int
    variables: tuple[str, ...] = ()
    alpha: float = 0.05

    @classmethod
    def from_design(cls, design: Design, stratify: Sequence[str] = ("trt",),
                    alpha: float = 0.05) -> "StratumPlan":
        stratify = tuple(stratify)
        cov = np.column_stack([design.obs_covariate(v) for v in stratify]) if stratify \
            else np.zeros((design.n_obs, 0))
        times = design.obs_time
        visits = np.unique(times)
        combos = sorted({tuple(row) for row in cov.tolist()})
        keys = [(float(t), tuple(c)) for t, c in zip(times.tolist(), cov.tolist())]
        cells = sorted(set(keys))
        index = {c: j for j, c in enumerate(cells)}
        obs_stratum = np.fromiter((index[k] for k in keys), dtype=np.int64, count=len(keys))
        return cls(tuple(cells), obs_stratum, len(visits), max(len(combos), 1), stratify, alpha)

    @property
    def n_strata(self) -> int:
        return len(self.cells)

    @property
    def alpha_j(self) -> float:
        return self.alpha / (self.n_visits * self.n_combos)

    def members(self) -> list[np.ndarray]:
        order = np.argsort(self.obs_stratum, kind="stable")
        bounds = np.searchsorted(self.obs_stratum[order], np.arange(self.n_strata + 1))
        return [order[bounds[j]:bounds[j + 1]] for j in range(self.n_strata)]


def check_balanced(design: Design, plan: StratumPlan | None = None):
    """Raise unless every subject is observed at the same visit times."""
    if not design.subjects:
        return
    ref = design.subjects[0]
    for s in design.subjects[1:]:
        if s.times != ref.times:
            raise InapplicableTestError(
                "Chi-square test needs all subjects observed at the same times; subject "
                f"{s.id!r} is seen at {list(s.times)} but subject {ref.id!r} at "
                f"{list(ref.times)}")


def stratum_ks(npd: np.ndarray, members: list[np.ndarray]) -> np.ndarray:
    return np.array([ks_statistic(npd[m]).D for m in members])


def expected_probabilities(marginal: MarginalCdf, members: list[np.ndarray]) -> np.ndarray:
    p = marginal.probabilities
    return np.array([p[m].mean(axis=0) for m in members])


def pearson_statistics(y: np.ndarray, members: list[np.ndarray],
                       expected: np.ndarray) -> np.ndarray:
    """Per-stratum ``sum_k (O_k - E_k)^2 / E_k``."""
    K = expected.shape[1]
    out = np.empty(len(members))
    for j, m in enumerate(members):
        O = np.bincount(y[m], minlength=K).astype(float)
        E = m.size * expected[j]
        pos = E > 0
        if np.any(O[~pos] > 0):
            out[j] = np.inf
        else:
            out[j] = float(np.sum((O[pos] - E[pos]) ** 2 / E[pos]))
    return out


# ------------------------------------------------------------ calibration


@dataclass(frozen=True, eq=False)
class Calibration:
    """Everything needed to test datasets against one model on one design."""

    model: ModelSpec
    design: Design
    plan: StratumPlan
    marginal: MarginalCdf
    ks_null: NullDistribution
    strata_ks: tuple[NullDistribution, ...]
    strata_chi2: tuple[NullDistribution, ...] | None
    expected: np.ndarray
    seed: int

    def npd(self, data: Dataset, replicate: int = 0, jitter_seed: int | None = None) -> NpdVector:
        js = rng.derive_seed(self.seed, "jitter") if jitter_seed is None else jitter_seed
        return compute_npd(data, self.model, marginal=self.marginal, jitter_seed=js,
                           replicate=replicate, master_seed=self.seed)

    def test_npd(self, npd: NpdVector) -> TestDecision:
        return corrected_ks_test(ks_statistic(npd), self.ks_null)

    def test_stratified(self, npd: NpdVector) -> TestDecision:
        return stratified_npd_test(npd, self.plan, self.strata_ks)

    def test_chi2(self, data: Dataset) -> TestDecision:
        if self.strata_chi2 is None:
            raise InapplicableTestError("Chi-square test was not calibrated for this design")
        stats = pearson_statistics(data.y, self.plan.members(), self.expected)
        return _stratified_decision("chi2", stats, self.strata_chi2, self.plan)

    def evaluate(self, data: Dataset, replicate: int = 0,
                 jitter_seed: int | None = None) -> dict[str, TestDecision]:
        v = self.npd(data, replicate, jitter_seed)
        out = {"npd": self.test_npd(v), "npd_stratified": self.test_stratified(v)}
        if self.strata_chi2 is not None:
            out["chi2"] = self.test_chi2(data)
        return out


def _null_batch(args):
    model, design, marginal, members, expected, sim_seed, jitter_seed, reps, chi2 = args
    out = []
    for r in reps:
        data = simulate_dataset(model, design, rng.SeedSpec(sim_seed, (r, 0)))
        v = compute_npd(data, model, marginal=marginal, jitter_seed=jitter_seed,
                        replicate=r, master_seed=sim_seed)
        D = ks_statistic(v.npd).D
        Dj = stratum_ks(v.npd, members)
        cj = pearson_statistics(data.y, members, expected) if chi2 else None
        out.append((D, Dj, cj))
    return out


def _cache_dir(cache) -> Path | None:
    if cache is False:
        return None
    if cache is None:
        env = os.environ.get("NPDCAT_CACHE_DIR")
        return Path(env) if env else None
    return Path(cache)


def calibrate(model: ModelSpec, design: Design, B: int = 200, V: int = 1000,
              master_seed: int = 0, plan: StratumPlan | None = None,
              chi2: bool | None = None, workers: int = 1, cache=None,
              marginal: MarginalCdf | None = None) -> Calibration:
    """Simulate ``B`` datasets under ``model`` and collect every null statistic.

    ``chi2=None`` calibrates the Chi-square test only when the design is
    balanced.  ``cache`` is a directory (default ``$NPDCAT_CACHE_DIR``) where
    null distributions are stored keyed by model, design, B, V and seed;
    ``cache=False`` disables it.
    """
    if B < 100:
        warnings.warn(f"B={B} calibration replicates; at least 100 are recommended",
                      stacklevel=2)
    plan = plan or StratumPlan.from_design(design)
    if chi2 is None:
        try:
            check_balanced(design, plan)
            chi2 = True
        except InapplicableTestError:
            chi2 = False
    elif chi2:
        check_balanced(design, plan)
    if marginal is None:
        marginal = estimate_marginal_cdf(model, design, V, rng.derive_seed(master_seed, "marginal"))
    members = plan.members()
    expected = expected_probabilities(marginal, members)
    aj = plan.alpha_j
    prov = {"model": model.key(), "design": design.key(), "V": V, "seed": master_seed}

    cdir = _cache_dir(cache)
    tag = hashlib.sha256(json.dumps(
        [model.key(), design.key(), B, V, master_seed, plan.variables, plan.alpha],
        sort_keys=True).encode()).hexdigest()[:20]
    labels = ["ks"] + [f"ks_{j}" for j in range(plan.n_strata)]
    if chi2:
        labels += [f"chi2_{j}" for j in range(plan.n_strata)]
    paths = [cdir / f"null_{tag}_{lab}.csv" for lab in labels] if cdir else []
    if paths and all(p.exists() for p in paths):
        nulls = [NullDistribution.load(p) for p in paths]
    else:
        D, Dj, cj = _run_nulls(model, design, marginal, members, expected, B,
                               rng.derive_seed(master_seed, "null"),
                               rng.derive_seed(master_seed, "null-jitter"), chi2, workers)
        nulls = [NullDistribution(D, 0.05, design.n_obs, {**prov, "statistic": "ks"})]
        nulls += [NullDistribution(Dj[:, j], aj, len(members[j]),
                                   {**prov, "statistic": f"ks_stratum_{j}"})
                  for j in range(plan.n_strata)]
        if chi2:
            nulls += [NullDistribution(cj[:, j], aj, len(members[j]),
                                       {**prov, "statistic": f"chi2_stratum_{j}"})
                      for j in range(plan.n_strata)]
        if cdir:
            cdir.mkdir(parents=True, exist_ok=True)
            for nd, p in zip(nulls, paths):
                nd.save(p)
    S = plan.n_strata
    return Calibration(model, design, plan, marginal, nulls[0], tuple(nulls[1:1 + S]),
                       tuple(nulls[1 + S:]) if chi2 else None, expected, master_seed)


def _run_nulls(model, design, marginal, members, expected, B, sim_seed, jitter_seed,
               chi2, workers):
    chunks = np.array_split(np.arange(B), max(1, min(B, 4 * workers)))
    jobs = [(model, design, marginal, members, expected, sim_seed, jitter_seed,
             c.tolist(), chi2) for c in chunks if c.size]
    if workers <= 1:
        results = [_null_batch(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_null_batch, jobs))
    flat = [r for batch in results for r in batch]
    D = np.array([r[0] for r in flat])
    Dj = np.array([r[1] for r in flat])
    cj = np.array([r[2] for r in flat]) if chi2 else None
    return D, Dj, cj


def calibrate_null(model: ModelSpec, design: Design, B: int = 200, V: int = 1000,
                   master_seed: int = 0, workers: int = 1, cache=None) -> NullDistribution:
    """Null distribution of the global KS statistic of the npd."""
    return calibrate(model, design, B, V, master_seed, chi2=False, workers=workers,
                     cache=cache).ks_null


def _stratified_decision(kind, stats, nulls, plan, warn=()) -> TestDecision:
    thr = tuple(nd.threshold for nd in nulls)
    exceed = [s > t for s, t in zip(stats, thr)]
    p = min(nd.p_value(s) for nd, s in zip(nulls, stats)) if len(stats) else None
    return TestDecision(kind, bool(any(exceed)), tuple(float(s) for s in stats), thr,
                        p, plan.cells, tuple(warn))


def chi_square_stratified(data: Dataset, model: ModelSpec, plan: StratumPlan | None = None,
                          B: int = 200, V: int = 1000, master_seed: int = 0,
                          workers: int = 1, cache=None) -> TestDecision:
    """Bonferroni-stratified Pearson test with simulated per-stratum thresholds.

    Raises :class:`InapplicableTestError` for unbalanced designs.
    """
    plan = plan or StratumPlan.from_design(data.design)
    check_balanced(data.design, plan)
    cal = calibrate(model, data.design, B, V, master_seed, plan=plan, chi2=True,
                    workers=workers, cache=cache)
    return cal.test_chi2(data)


def stratified_npd_test(npd: NpdVector, plan: StratumPlan,
                        nulls: Sequence[NullDistribution], alpha: float | None = None) -> TestDecision:
    """Per-stratum KS statistics against per-stratum calibrated thresholds."""
    if len(nulls) != plan.n_strata:
        raise ValueError(f"{len(nulls)} null distributions for {plan.n_strata} strata")
    if alpha is not None and any(abs(nd.alpha - alpha / (plan.n_visits * plan.n_combos)) > 1e-12
                                 for nd in nulls):
        raise ValueError("null distributions were not calibrated at the Bonferroni level")
    members = plan.members()
    warn = [f"stratum {plan.cells[j]} has only {m.size} observations"
            for j, m in enumerate(members) if m.size < 5]
    stats = stratum_ks(npd.npd, members)
    return _stratified_decision("npd_stratified", stats, nulls, plan, warn)
