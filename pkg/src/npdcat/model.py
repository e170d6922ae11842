"""Categorical mixed-effect model: category space, link, time shapes.

Convention
----------
Internally every model is a cumulative (proportional odds) model::

    logit P(Y <= c_k | theta) = alpha_k - eta,    k = 1..K-1
    eta = theta_1 + (theta_2 + beta * trt) * h(t)

so ``eta - alpha_k`` is the logit of ``P(Y > c_k)``.  For binary data the
single cutpoint is fixed at 0 and ``P(Y = c_2) = P(Y = 1) = expit(eta)``,
which is the usual ``logit P(Y=1) = theta_1 + (theta_2 + beta*trt) t``
parameterisation.  Models written as ``logit P(Y >= k)`` map onto this form
by the sign flip above.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special, stats


class ModelError(ValueError):
    """Invalid model configuration or out-of-domain argument."""


@dataclass(frozen=True)
class CategorySpace:
    """Ordered, finite set of category labels ``c_1 < ... < c_K``."""

    labels: tuple = (0, 1)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) < 2:
            raise ModelError("a category space needs at least two categories")
        if len(set(labels)) != len(labels):
            raise ModelError(f"duplicate category labels: {labels}")
        if any(a >= b for a, b in zip(labels, labels[1:])):
            raise ModelError(f"category labels must be strictly increasing: {labels}")

    @property
    def K(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ModelError(f"category {label!r} not in {self.labels}") from None

    def codes(self, values: Sequence) -> np.ndarray:
        """Map labels to integer codes ``0..K-1``."""
        lookup = {lab: i for i, lab in enumerate(self.labels)}
        out = np.empty(len(values), dtype=np.int64)
        for j, v in enumerate(values):
            if v not in lookup:
                raise ModelError(f"category {v!r} not in {self.labels}")
            out[j] = lookup[v]
        return out


class Link(str, enum.Enum):
    """Link between a probability and the linear predictor."""

    LOGIT = "logit"
    PROBIT = "probit"
    CLOGLOG = "cloglog"
    LOGLOG = "loglog"
    CAUCHIT = "cauchit"

    def inverse(self, x):
        """Map a linear predictor in R to a probability in (0, 1)."""
        x = np.asarray(x, dtype=float)
        if self is Link.LOGIT:
            return special.expit(x)
        if self is Link.PROBIT:
            return special.ndtr(x)
        if self is Link.CLOGLOG:
            return -np.expm1(-np.exp(x))
        if self is Link.LOGLOG:
            return np.exp(-np.exp(-x))
        return stats.cauchy.cdf(x)


class Shape(str, enum.Enum):
    CONSTANT = "constant"
    LINEAR = "linear"
    LOGLINEAR = "loglinear"
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class StructuralShape:
    """Time transform ``h(t)`` multiplying the slope.

    ``rate`` is the fixed exponential rate and only applies to
    ``Shape.EXPONENTIAL`` where ``h(t) = exp(rate * t) - 1``.
    """

    kind: Shape = Shape.LINEAR
    rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Shape(self.kind))
        if self.kind is Shape.EXPONENTIAL and self.rate is None:
            raise ModelError("exponential shape requires a rate parameter")
        if self.kind is not Shape.EXPONENTIAL and self.rate is not None:
            raise ModelError(f"{self.kind.value} shape takes no rate parameter")

    def transform(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ModelError("time must be non-negative")
        kind = self.kind
        if kind is Shape.CONSTANT:
            return np.zeros_like(t)
        if kind is Shape.LINEAR:
            return t
        if kind is Shape.LOGLINEAR:
            return np.log1p(t)
        if kind is Shape.QUADRATIC:
            return t * t
        return np.expm1(self.rate * t)


@dataclass(frozen=True)
class ModelSpec:
    """Population model for repeated categorical observations.

    Parameters
    ----------
    mu : (intercept, slope) fixed effects, logit units.
    omega : between-subject standard deviations of (intercept, slope).
    beta : covariate effect, per unit of ``covariate``.
    beta_on : ``"slope"`` (default) or ``"intercept"``.
    cutpoints : ``K - 1`` strictly increasing cutpoints for ``K > 2``.
        Ignored (fixed to 0) for binary outcomes.
    """

    categories: CategorySpace = field(default_factory=CategorySpace)
    shape: StructuralShape = field(default_factory=StructuralShape)
    mu: tuple[float, float] = (0.0, 0.0)
    omega: tuple[float, float] = (0.0, 0.0)
    beta: float = 0.0
    beta_on: str = "slope"
    covariate: str = "trt"
    cutpoints: tuple[float, ...] = ()
    link: Link = Link.LOGIT
    name: str = ""

    def __post_init__(self):
        mu = tuple(float(m) for m in self.mu)
        omega = tuple(float(w) for w in self.omega)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "link", Link(self.link))
        if len(mu) != 2 or len(omega) != 2:
            raise ModelError("mu and omega must each hold (intercept, slope)")
        if any(w < 0 or not math.isfinite(w) for w in omega):
            raise ModelError(f"random-effect SDs must be finite and >= 0, got {omega}")
        if self.beta_on not in ("slope", "intercept"):
            raise ModelError(f"beta_on must be 'slope' or 'intercept', got {self.beta_on!r}")
        K = self.categories.K
        cut = tuple(float(a) for a in self.cutpoints)
        if K == 2:
            if cut not in ((), (0.0,)):
                raise ModelError("binary models take no cutpoints (the intercept is mu[0])")
            cut = (0.0,)
        elif len(cut) != K - 1:
            raise ModelError(f"K={K} needs {K - 1} cutpoints, got {len(cut)}")
        elif any(a >= b for a, b in zip(cut, cut[1:])):
            raise ModelError(f"cutpoints must be strictly increasing: {cut}")
        object.__setattr__(self, "cutpoints", cut)

    @property
    def K(self) -> int:
        return self.categories.K

    def to_dict(self) -> dict:
        d = {
            "categories": list(self.categories.labels),
            "shape": self.shape.kind.value,
            "mu": list(self.mu),
            "omega": list(self.omega),
            "beta": self.beta,
            "beta_on": self.beta_on,
            "covariate": self.covariate,
            "link": self.link.value,
        }
        if self.shape.rate is not None:
            d["rate"] = self.shape.rate
        if self.K > 2:
            d["cutpoints"] = list(self.cutpoints)
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(
            categories=CategorySpace(tuple(d.get("categories", (0, 1)))),
            shape=StructuralShape(d.get("shape", "linear"), d.get("rate")),
            mu=tuple(d["mu"]),
            omega=tuple(d.get("omega", (0.0, 0.0))),
            beta=d.get("beta", 0.0),
            beta_on=d.get("beta_on", "slope"),
            covariate=d.get("covariate", "trt"),
            cutpoints=tuple(d.get("cutpoints", ())),
            link=d.get("link", "logit"),
            name=d.get("name", ""),
        )

    def key(self) -> str:
        """Stable content hash, ignoring the display name."""
        d = self.to_dict()
        d.pop("name", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "ModelSpec":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ModelSpec(**d)


@dataclass(frozen=True)
class IndividualParameters:
    """Realised subject parameters ``theta = mu + b``: (intercept, slope)."""

    theta: tuple[float, float]

    def __post_init__(self):
        theta = tuple(float(x) for x in self.theta)
        if len(theta) != 2:
            raise ModelError("theta must hold (intercept, slope)")
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class CovariateVector:
    trt: int = 0
    extra: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.trt not in (0, 1):
            raise ModelError(f"trt must be 0 or 1, got {self.trt!r}")

    def get(self, name: str) -> float:
        if name == "trt":
            return float(self.trt)
        return float(self.extra[name])


def eta(model: ModelSpec, theta1, theta2, x, t):
    """Vectorised linear predictor without cutpoints (broadcasts all inputs)."""
    h = model.shape.transform(t)
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    x = np.asarray(x, dtype=float)
    if model.beta_on == "slope":
        return theta1 + (theta2 + model.beta * x) * h
    return theta1 + model.beta * x + theta2 * h


def cumulative_from_eta(model: ModelSpec, eta_values) -> np.ndarray:
    """Cumulative probabilities ``gamma[..., k] = P(Y <= c_{k+1})`` for k < K-1.

    The last (always 1) column is omitted; shape is ``eta.shape + (K-1,)``.
    """
    e = np.asarray(eta_values, dtype=float)[..., None]
    alpha = np.asarray(model.cutpoints)
    return model.link.inverse(alpha - e)


def linear_predictor(model: ModelSpec, params: IndividualParameters,
                     cov: CovariateVector, t: float, cutpoint_index: int = 1) -> float:
    """Logit of ``P(Y > c_k)`` for cutpoint ``k`` (1-based)."""
    if not 1 <= cutpoint_index <= model.K - 1:
        raise ModelError(f"cutpoint_index must lie in 1..{model.K - 1}")
    if t < 0:
        raise ModelError("time must be non-negative")
    th1, th2 = params.theta
    e = eta(model, th1, th2, cov.get(model.covariate), t)
    return float(e - model.cutpoints[cutpoint_index - 1])


def conditional_probs(model: ModelSpec, params: IndividualParameters,
                      cov: CovariateVector, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Category probabilities ``pi`` and cumulative probabilities ``gamma``.

    ``gamma[-1]`` is exactly 1 and ``pi`` is its first difference.
    """
    if t < 0:
        raise ModelError("time must be non-negative")
    th1, th2 = params.theta
    e = eta(model, th1, th2, cov.get(model.covariate), t)
    g = cumulative_from_eta(model, e)
    gamma = np.append(np.maximum.accumulate(g), 1.0)
    pi = np.diff(gamma, prepend=0.0)
    return pi, gamma
