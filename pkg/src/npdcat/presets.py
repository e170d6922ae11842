"""Named models and designs used by the power study and the toenail workflow."""

from __future__ import annotations

import numpy as np

from .model import ModelError, ModelSpec, Shape, StructuralShape
from .simulate import Design, Subject

STUDY_TIMES = (0.0, 2.0, 11.0, 12.0)
SAMPLE_SIZES = (50, 100, 274)

# logistic model with treatment effect on the slope; months
TABLE1 = ModelSpec(mu=(-2.0, 0.09), omega=(0.7, 0.17), beta=0.45, name="M1")

STRUCTURAL = {
    "M1": TABLE1,
    "M2": ModelSpec(shape=StructuralShape(Shape.LOGLINEAR), mu=(-2.0, 0.42),
                    omega=(0.7, 0.79), beta=2.1, name="M2"),
    "M3": ModelSpec(shape=StructuralShape(Shape.QUADRATIC), mu=(-2.0, 7.50e-3),
                    omega=(0.7, 1.41e-2), beta=0.0375, name="M3"),
    "M4": ModelSpec(shape=StructuralShape(Shape.EXPONENTIAL, rate=0.33), mu=(-2.0, 2.01e-2),
                    omega=(0.7, 3.79e-2), beta=0.1005, name="M4"),
}

PARAMETER_GRID = {
    "mu1": (-4.0, -3.0, -2.0, -1.0, 0.0),
    "mu2": (-0.3, -0.09, 0.0, 0.09, 0.3),
    "beta": (0.0, 0.3, 0.45, 0.7, 1.0),
    "omega1": (0.17, 0.3, 0.5, 0.7, 1.0),
    "omega2": (0.1, 0.17, 0.3, 0.5, 0.7),
}


def with_parameter(model: ModelSpec, name: str, value: float) -> ModelSpec:
    """Copy of ``model`` with one of mu1, mu2, beta, omega1, omega2 replaced."""
    if name == "mu1":
        return model.replace(mu=(value, model.mu[1]), name=f"mu1={value:g}")
    if name == "mu2":
        return model.replace(mu=(model.mu[0], value), name=f"mu2={value:g}")
    if name == "beta":
        return model.replace(beta=value, name=f"beta={value:g}")
    if name == "omega1":
        return model.replace(omega=(value, model.omega[1]), name=f"omega1={value:g}")
    if name == "omega2":
        return model.replace(omega=(model.omega[0], value), name=f"omega2={value:g}")
    raise ModelError(f"unknown parameter {name!r}")


# Toenail: binary y = 1 for none/mild onycholysis, trt = 1 for treatment B,
# time in months.  Estimates of the final model (treatment effect on slope).
TOENAIL_FINAL = ModelSpec(mu=(1.76, 0.36), omega=(4.05, 0.0), beta=0.19,
                          name="linear_trt_theta2")
TOENAIL_MONTHS = (0.0, 1.0, 2.0, 3.0, 6.0, 9.0, 12.0)
# Base model (no time trend, no treatment).  Its estimates are not published;
# theta1 is set so that its marginal P(Y=1) equals the final model's marginal
# averaged over the visit schedule and both arms (0.789), which is where a
# fitted constant model lands.  The random-intercept SD is kept.
TOENAIL_CONSTANT = ModelSpec(shape=StructuralShape(Shape.CONSTANT), mu=(3.55, 0.0),
                             omega=(4.05, 0.0), beta=0.0, name="constant_no_trt")



def toenail_like_design(n_subjects: int = 294, n_obs: int = 1908, seed: int = 0) -> Design:
    """Toenail-shaped design: 7 monthly-scale visits, alternating arms, and
    randomly missing post-baseline visits so the total is ``n_obs``."""
    k = len(TOENAIL_MONTHS) - 1
    missing = n_subjects * (k + 1) - n_obs
    if not 0 <= missing <= n_subjects * k:
        raise ValueError(f"cannot place {n_obs} observations on {n_subjects} subjects")
    drop = set(np.random.default_rng(seed).choice(n_subjects * k, missing, replace=False).tolist())
    subjects = []
    for i in range(n_subjects):
        times = [TOENAIL_MONTHS[0]] + [t for j, t in enumerate(TOENAIL_MONTHS[1:])
                                       if i * k + j not in drop]
        subjects.append(Subject(str(i + 1), tuple(times), {"trt": i % 2}))
    return Design(tuple(subjects))


MODELS = {
    "table1": TABLE1,
    **{k.lower(): v for k, v in STRUCTURAL.items()},
    "final_toenail": TOENAIL_FINAL,
    "constant_toenail": TOENAIL_CONSTANT,
}


def get_model(name: str) -> ModelSpec:
    try:
        return MODELS[name.lower()]
    except KeyError:
        raise ModelError(f"unknown model preset {name!r}; choose from {sorted(MODELS)}") from None
