"""Monte Carlo marginal CDFs, jittered prediction discrepancies and npd."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import rng
from .model import ModelError, ModelSpec, cumulative_from_eta, eta
from .simulate import Dataset, Design, DesignError


class DegenerateIntervalError(ValueError):
    """Observed category has zero predicted probability."""


@dataclass(frozen=True, eq=False)
class MarginalCdf:
    """Per-observation marginal CDF ``F[j, l] = P(Y_j <= c_{l+1})``.

    ``F[:, -1]`` is exactly 1.  ``se`` is the Monte Carlo standard error of
    each entry (zero where the entry is exact).
    """

    F: np.ndarray
    se: np.ndarray
    mc_count: int
    design: Design
    model_key: str = ""

    def interval(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(F(c_{l-1}), F(c_l))`` for observed codes ``y`` (``F(c_0) = 0``)."""
        y = np.asarray(y)
        rows = np.arange(self.F.shape[0])
        upper = self.F[rows, y]
        lower = np.where(y > 0, self.F[rows, np.maximum(y - 1, 0)], 0.0)
        return lower, upper

    @property
    def probabilities(self) -> np.ndarray:
        """Per-observation marginal category probabilities."""
        return np.diff(self.F, axis=1, prepend=0.0)


def _subject_draws(model: ModelSpec, master_seed: int, i: int, V: int) -> np.ndarray:
    z = rng.substream(master_seed, rng.MARGINAL, i).standard_normal((V, 2))
    return np.asarray(model.mu) + np.asarray(model.omega) * z


def _check_inputs(model: ModelSpec, design: Design, V: int):
    if V < 1:
        raise ValueError(f"V must be >= 1, got {V}")
    if V < 1000:
        warnings.warn(f"V={V} Monte Carlo draws is below the recommended 1000", stacklevel=3)
    if design.N == 0:
        raise DesignError("design has no subjects")


def estimate_marginal_cdf(model: ModelSpec, design: Design, V: int,
                          master_seed: int) -> MarginalCdf:
    """Smoothed Monte Carlo estimate of every observation's marginal CDF.

    For each subject, ``V`` parameter vectors are drawn from the population
    distribution and the conditional cumulative probabilities are averaged
    over them.  Subject ``i`` always uses stream ``i`` of ``master_seed``.
    """
    _check_inputs(model, design, V)
    K = model.K
    F = np.ones((design.n_obs, K))
    se = np.zeros((design.n_obs, K))
    x = design.model_covariate(model)
    exact = not any(model.omega)
    pos = 0
    for i, s in enumerate(design.subjects):
        n = len(s.times)
        t = np.asarray(s.times)
        if exact:
            F[pos:pos + n, :-1] = cumulative_from_eta(model, eta(model, model.mu[0], model.mu[1], x[i], t))
        else:
            theta = _subject_draws(model, master_seed, i, V)
            g = cumulative_from_eta(model, eta(model, theta[:, :1], theta[:, 1:], x[i], t[None, :]))
            F[pos:pos + n, :-1] = g.mean(axis=0)
            if V > 1:
                se[pos:pos + n, :-1] = g.std(axis=0, ddof=1) / np.sqrt(V)
        pos += n
    # averaging monotone curves keeps order; guard against rounding only
    np.maximum.accumulate(F, axis=1, out=F)
    np.minimum(F, 1.0, out=F)
    return MarginalCdf(F, se, V, design, model.key())


def counting_marginal_cdf(model: ModelSpec, design: Design, V: int,
                          master_seed: int) -> MarginalCdf:
    """Counting estimator: fraction of simulated outcomes ``<= c_l``.

    Uses the same parameter draws as :func:`estimate_marginal_cdf` plus
    one outcome per draw, so the two estimates differ only by the outcome
    sampling noise.  Kept as an oracle for the smoothed estimator.
    """
    _check_inputs(model, design, V)
    K = model.K
    F = np.ones((design.n_obs, K))
    se = np.zeros((design.n_obs, K))
    x = design.model_covariate(model)
    pos = 0
    for i, s in enumerate(design.subjects):
        n = len(s.times)
        t = np.asarray(s.times)
        theta = _subject_draws(model, master_seed, i, V)
        g = cumulative_from_eta(model, eta(model, theta[:, :1], theta[:, 1:], x[i], t[None, :]))
        u = rng.substream(master_seed, rng.OUTCOME_ORACLE, i).random((V, n))
        y = (u[..., None] > g).sum(axis=-1)
        for k in range(K - 1):
            c = (y <= k).sum(axis=0)
            F[pos:pos + n, k] = c / V
            # continuity-adjusted so an all-or-nothing count keeps a positive SE
            pa = (c + 0.5) / (V + 1)
            se[pos:pos + n, k] = np.sqrt(pa * (1 - pa) / V)
        pos += n
    return MarginalCdf(F, se, V, design, model.key())


def open_uniform(g: np.random.Generator, size=None) -> np.ndarray:
    """Uniform draws on the open interval (0, 1)."""
    bits = g.integers(0, 1 << 53, size=size, dtype=np.int64)
    return (bits + 0.5) * 2.0 ** -53


def sample_pd(F_lower: float, F_upper: float, stream: rng.SeedSpec) -> float:
    """Jittered prediction discrepancy, uniform on ``(F_lower, F_upper)``."""
    if not 0.0 <= F_lower < F_upper <= 1.0:
        raise DegenerateIntervalError(
            f"empty or invalid interval ({F_lower}, {F_upper}): observed category "
            "has zero predicted probability")
    u = float(open_uniform(stream.generator(rng.JITTER)))
    return F_lower + u * (F_upper - F_lower)


@dataclass(frozen=True, eq=False)
class NpdVector:
    """Per-observation jittered pd and npd, aligned with ``data``."""

    data: Dataset
    lower: np.ndarray
    upper: np.ndarray
    pd: np.ndarray
    npd: np.ndarray
    degenerate: tuple[int, ...] = ()
    marginal: MarginalCdf | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return int(self.npd.size)

    def rows(self):
        """CSV rows: id, time, cat, F_lower, F_upper, pd, npd, covariates..."""
        names = self.data.design.covariate_names
        for j, (sid, t, lab, cov) in enumerate(self.data.rows()):
            yield (sid, t, lab, self.lower[j], self.upper[j], self.pd[j], self.npd[j],
                   *(cov.get(n, "") for n in names))


def jitter(lower: np.ndarray, upper: np.ndarray, u: np.ndarray, V: int) -> np.ndarray:
    """``lower + u (upper - lower)`` clamped to ``[1/(10V), 1 - 1/(10V)]``."""
    eps = 1.0 / (10.0 * V)
    return np.clip(lower + u * (upper - lower), eps, 1.0 - eps)


def jitter_uniforms(jitter_seed: int, replicate: int, n: int) -> np.ndarray:
    """Draw ``j`` of this stream belongs to observation ``j``."""
    return open_uniform(rng.substream(jitter_seed, rng.JITTER, replicate), n)


def compute_npd(data: Dataset, model: ModelSpec, V: int = 1000, master_seed: int = 0,
                jitter_seed: int | None = None, replicate: int = 0,
                marginal: MarginalCdf | None = None) -> NpdVector:
    """npd of every observation in ``data`` under ``model``.

    ``master_seed`` drives the Monte Carlo CDF, ``jitter_seed`` (default:
    ``master_seed``) the jittering, on separate streams.  A precomputed
    ``marginal`` for the same design skips the Monte Carlo step.
    Observations whose category has zero predicted probability are listed
    in ``degenerate`` and get the boundary value instead of a jittered one.
    """
    if tuple(data.categories.labels) != tuple(model.categories.labels):
        raise ModelError(f"data categories {data.categories.labels} do not match "
                         f"model categories {model.categories.labels}")
    if marginal is None:
        marginal = estimate_marginal_cdf(model, data.design, V, master_seed)
    elif marginal.design is not data.design and marginal.design != data.design:
        raise DesignError("marginal CDF was estimated on a different design")
    V = marginal.mc_count
    lower, upper = marginal.interval(data.y)
    bad = np.flatnonzero(upper <= lower)
    u = jitter_uniforms(master_seed if jitter_seed is None else jitter_seed,
                        replicate, len(data))
    pd = jitter(lower, upper, u, V)
    if bad.size:
        warnings.warn(f"{bad.size} observation(s) fall in categories with zero "
                      "predicted probability", stacklevel=2)
    npd = special.ndtri(pd)
    return NpdVector(data, lower, upper, pd, npd, tuple(int(b) for b in bad), marginal)
