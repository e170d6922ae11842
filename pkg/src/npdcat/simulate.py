"""Designs, datasets and simulation of categorical outcomes."""

from __future__ import annotations

import hashlib
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import rng
from .model import (CategorySpace, IndividualParameters, ModelError, ModelSpec,
                    cumulative_from_eta, eta)


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class Subject:
    id: str
    times: tuple[float, ...]
    covariates: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "covariates", dict(self.covariates))
        if not times:
            raise DesignError(f"subject {self.id!r} has no observation times")
        if any(a >= b for a, b in zip(times, times[1:])):
            raise DesignError(f"times of subject {self.id!r} must be strictly increasing")
        if times[0] < 0:
            raise DesignError(f"subject {self.id!r} has a negative time")


@dataclass(frozen=True)
class Design:
    """Subjects with their covariates and observation times.

    Observations are laid out subject by subject, in time order; every
    per-observation array in the package follows this layout.
    """

    subjects: tuple[Subject, ...]

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise DesignError("duplicate subject ids in design")

    @classmethod
    def balanced(cls, n_subjects: int, times: Sequence[float],
                 treatment: str = "alternate") -> "Design":
        """``n_subjects`` sharing ``times``, half of them treated.

        ``treatment="alternate"`` assigns ``trt = i % 2`` so the first ``n``
        subjects of a larger design form a smaller balanced design;
        ``"blocks"`` treats the second half.  ``"none"`` sets no covariate.
        """
        subjects = []
        for i in range(n_subjects):
            if treatment == "alternate":
                cov = {"trt": i % 2}
            elif treatment == "blocks":
                cov = {"trt": int(i >= n_subjects // 2)}
            elif treatment == "none":
                cov = {}
            else:
                raise DesignError(f"unknown treatment allocation {treatment!r}")
            subjects.append(Subject(str(i + 1), tuple(times), cov))
        return cls(tuple(subjects))

    @property
    def N(self) -> int:
        return len(self.subjects)

    @cached_property
    def n_obs(self) -> int:
        return sum(len(s.times) for s in self.subjects)

    @cached_property
    def obs_subject(self) -> np.ndarray:
        return np.repeat(np.arange(self.N), [len(s.times) for s in self.subjects])

    @cached_property
    def obs_time(self) -> np.ndarray:
        if not self.subjects:
            return np.empty(0)
        return np.concatenate([np.asarray(s.times) for s in self.subjects])

    @cached_property
    def covariate_names(self) -> tuple[str, ...]:
        names = []
        for s in self.subjects:
            for k in s.covariates:
                if k not in names:
                    names.append(k)
        return tuple(names)

    def subject_covariate(self, name: str, default: float | None = None) -> np.ndarray:
        vals = []
        for s in self.subjects:
            if name in s.covariates:
                vals.append(float(s.covariates[name]))
            elif default is not None:
                vals.append(default)
            else:
                raise DesignError(f"subject {s.id!r} lacks covariate {name!r}")
        return np.asarray(vals, dtype=float)

    def obs_covariate(self, name: str, default: float | None = None) -> np.ndarray:
        return self.subject_covariate(name, default)[self.obs_subject]

    def model_covariate(self, model: ModelSpec) -> np.ndarray:
        """Per-subject value of the model's covariate (0 where it has no effect)."""
        if model.beta == 0.0:
            return self.subject_covariate(model.covariate, default=0.0)
        return self.subject_covariate(model.covariate)

    def to_dict(self) -> dict:
        return {"subjects": [[s.id, list(s.times), dict(sorted(s.covariates.items()))]
                             for s in self.subjects]}

    def key(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def head(self, n: int) -> "Design":
        return Design(self.subjects[:n])


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed or simulated outcomes on a design.

    ``y`` holds integer category codes ``0..K-1`` in the design's
    observation layout.
    """

    design: Design
    y: np.ndarray
    categories: CategorySpace = field(default_factory=CategorySpace)
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.int64)
        object.__setattr__(self, "y", y)
        if y.shape != (self.design.n_obs,):
            raise DesignError(f"{y.shape[0]} outcomes for {self.design.n_obs} observations")
        if y.size and (y.min() < 0 or y.max() >= self.categories.K):
            raise ModelError("outcome code outside the category space")

    def __len__(self) -> int:
        return int(self.y.size)

    @property
    def labels(self) -> list:
        labs = self.categories.labels
        return [labs[c] for c in self.y]

    def rows(self) -> Iterator[tuple]:
        """``(subject_id, time, label, covariates)`` per observation."""
        labs = self.categories.labels
        j = 0
        for s in self.design.subjects:
            for t in s.times:
                yield s.id, t, labs[self.y[j]], s.covariates
                j += 1

    def same_outcomes(self, other: "Dataset") -> bool:
        return (self.design == other.design and self.categories == other.categories
                and np.array_equal(self.y, other.y))


SimulatedDataset = Dataset


def draw_individual_parameters(model: ModelSpec, stream: rng.SeedSpec) -> IndividualParameters:
    """``theta = mu + omega * z`` with ``z`` standard normal from the stream."""
    z = stream.generator(rng.SIMULATE).standard_normal(2)
    mu = np.asarray(model.mu)
    return IndividualParameters(tuple(mu + np.asarray(model.omega) * z))


def _draw_subject(master_seed: int, replicate: int, i: int, n: int):
    g = rng.substream(master_seed, rng.SIMULATE, replicate, i)
    return g.standard_normal(2), g.random(n)


def simulate_dataset(model: ModelSpec, design: Design, stream: rng.SeedSpec,
                     return_theta: bool = False):
    """Simulate one dataset; subject ``i`` uses stream ``(replicate, i)``.

    Per subject: one parameter draw, then one uniform per observation
    mapped to a category by inverting the cumulative probabilities.
    """
    if design.N == 0:
        raise DesignError("design has no subjects")
    replicate = stream.stream_id[0]
    z = np.empty((design.N, 2))
    u = np.empty(design.n_obs)
    pos = 0
    for i, s in enumerate(design.subjects):
        n = len(s.times)
        z[i], u[pos:pos + n] = _draw_subject(stream.master_seed, replicate, i, n)
        pos += n
    theta = np.asarray(model.mu) + np.asarray(model.omega) * z
    x = design.model_covariate(model)
    subj = design.obs_subject
    e = eta(model, theta[subj, 0], theta[subj, 1], x[subj], design.obs_time)
    gamma = cumulative_from_eta(model, e)
    y = (u[:, None] > gamma).sum(axis=1)
    ds = Dataset(design, y, model.categories,
                 {"model": model.key(), "master_seed": stream.master_seed,
                  "replicate": replicate})
    return (ds, theta) if return_theta else ds


def _simulate_one(args):
    model, design, seed, r = args
    return simulate_dataset(model, design, rng.SeedSpec(seed, (r, 0)))


def simulate_replicates(model: ModelSpec, design: Design, count: int,
                        master_seed: int, workers: int = 1) -> Iterator[Dataset]:
    """Datasets for replicates ``0..count-1``, in replicate order.

    The output does not depend on ``workers``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    jobs = [(model, design, master_seed, r) for r in range(count)]
    if workers <= 1:
        for job in jobs:
            yield _simulate_one(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_simulate_one, jobs, chunksize=max(1, count // (4 * workers)))


def warn_small(value: int, floor: int, what: str):
    if value < floor:
        warnings.warn(f"{what}={value} is below the recommended {floor}", stacklevel=3)
