"""Dataset CSV files and JSON run configuration.

Dataset layout: one row per observation with columns ``id``, ``time`` and
``y``; every other column is a subject-level covariate (e.g. ``trt``).
Rows with an empty or ``NA`` outcome are dropped (complete-case analysis).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from .model import CategorySpace, ModelError, ModelSpec
from .npd import NpdVector
from .presets import get_model
from .simulate import Dataset, Design, Subject

log = logging.getLogger(__name__)

MISSING = {"", "na", "nan", "null", "."}


class DataError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _parse_label(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_dataset(path, categories: CategorySpace | None = None, time_factor: float = 1.0,
                  id_col: str = "id", time_col: str = "time", y_col: str = "y") -> Dataset:
    """Read a long-format CSV into a :class:`Dataset`.

    Times are multiplied by ``time_factor`` (0.25 turns weeks into the
    4-week months used for the toenail model).  Subjects keep the order of
    their first appearance; each subject's rows are sorted by time.
    """
    categories = categories or CategorySpace()
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (id_col, time_col, y_col):
            if col not in header:
                raise DataError(f"{path}: missing required column {col!r}")
        cov_cols = [h for h in header if h not in (id_col, time_col, y_col)]
        subjects: dict[str, dict] = {}
        dropped = 0
        for rec in reader:
            line = reader.line_num
            if None in rec or any(v is None for v in rec.values()):
                raise DataError(f"{path}:{line}: wrong number of fields")
            sid = rec[id_col].strip()
            if rec[y_col].strip().lower() in MISSING:
                dropped += 1
                continue
            if not sid:
                raise DataError(f"{path}:{line}: empty subject id")
            try:
                t = float(rec[time_col]) * time_factor
                cov = {c: float(rec[c]) for c in cov_cols if rec[c].strip().lower() not in MISSING}
            except ValueError as exc:
                raise DataError(f"{path}:{line}: unparseable value ({exc})") from None
            if not math.isfinite(t) or t < 0:
                raise DataError(f"{path}:{line}: invalid time {rec[time_col]!r}")
            label = _parse_label(rec[y_col].strip())
            if label not in categories.labels:
                raise DataError(f"{path}:{line}: category {label!r} not in {categories.labels}")
            entry = subjects.setdefault(sid, {"rows": [], "cov": cov, "line": line})
            for c, v in cov.items():
                if entry["cov"].setdefault(c, v) != v:
                    raise DataError(f"{path}:{line}: covariate {c!r} changes within subject {sid!r}")
            entry["rows"].append((t, categories.index(label), line))
    if dropped:
        log.warning("%s: dropped %d row(s) with missing outcome", path, dropped)
    if not subjects:
        log.warning("%s: no observations", path)
    design_subjects, codes = [], []
    for sid, entry in subjects.items():
        rows = sorted(entry["rows"])
        times = [r[0] for r in rows]
        for a, b in zip(rows, rows[1:]):
            if a[0] == b[0]:
                raise DataError(f"{path}:{b[2]}: duplicate time {b[0]} for subject {sid!r}")
        design_subjects.append(Subject(sid, tuple(times), entry["cov"]))
        codes.extend(r[1] for r in rows)
    return Dataset(Design(tuple(design_subjects)), np.asarray(codes, dtype=np.int64), categories,
                   {"source": str(path)})


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return str(int(v)) if v.is_integer() and abs(v) < 2 ** 53 else repr(v)
    return str(v)


def write_dataset(data: Dataset, path) -> Path:
    path = Path(path)
    names = data.design.covariate_names
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "time", "y", *names])
            for sid, t, lab, cov in data.rows():
                w.writerow([sid, _fmt(t), lab, *(_fmt(cov[n]) if n in cov else "NA" for n in names)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_npd_csv(npd: NpdVector, path) -> Path:
    path = Path(path)
    names = npd.data.design.covariate_names
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "time", "cat", "F_lower", "F_upper", "pd", "npd", *names])
        for row in npd.rows():
            w.writerow([_fmt(v) if i in (1,) or i >= 7 else
                        (repr(float(v)) if i >= 3 else v) for i, v in enumerate(row)])
    return path


def read_npd_csv(path) -> dict[str, list]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols: dict[str, list] = {k: [] for k in (rows[0].keys() if rows else [])}
    for r in rows:
        for k, v in r.items():
            cols[k].append(v)
    return cols


# ------------------------------------------------------------------ config

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"type": "string"},
        "name": {"type": "string"},
        "categories": {"type": "array", "minItems": 2},
        "shape": {"enum": ["constant", "linear", "loglinear", "quadratic", "exponential"]},
        "rate": {"type": "number"},
        "mu": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "omega": {"type": "array", "items": {"type": "number", "minimum": 0},
                  "minItems": 2, "maxItems": 2},
        "beta": {"type": "number"},
        "beta_on": {"enum": ["slope", "intercept"]},
        "covariate": {"type": "string"},
        "cutpoints": {"type": "array", "items": {"type": "number"}},
        "link": {"enum": ["logit", "probit", "cloglog", "loglog", "cauchit"]},
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "model": _MODEL_SCHEMA,
        "design": {
            "type": "object", "additionalProperties": False,
            "required": ["n_subjects", "times"],
            "properties": {
                "n_subjects": {"type": "integer", "minimum": 1},
                "times": {"type": "array", "items": {"type": "number", "minimum": 0},
                          "minItems": 1},
                "treatment": {"enum": ["alternate", "blocks", "none"]},
            },
        },
        "data": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "time_unit": {"type": "string"},
                "time_factor": {"type": "number", "exclusiveMinimum": 0},
                "id_column": {"type": "string"},
                "time_column": {"type": "string"},
                "y_column": {"type": "string"},
            },
        },
        "test": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "B": {"type": "integer", "minimum": 1},
                "V": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "chi2": {"type": "boolean"},
                "n_band_sims": {"type": "integer", "minimum": 500},
                "band_level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "power": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "grid": {"enum": ["parameter", "structural"]},
                "sample_sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "stratify": {"type": "array", "items": {"type": "string"}},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
    },
}


@dataclass
class Config:
    """Validated run configuration with defaults filled in."""

    model: ModelSpec | None = None
    design: Design | None = None
    time_unit: str = "model units"
    time_factor: float = 1.0
    columns: tuple[str, str, str] = ("id", "time", "y")
    B: int = 200
    V: int = 1000
    alpha: float = 0.05
    chi2: bool = False
    n_band_sims: int = 1000
    band_level: float = 0.95
    stratify: tuple[str, ...] = ("trt",)
    seed: int = 0
    workers: int = 1
    grid: str = "structural"
    sample_sizes: tuple[int, ...] = (50, 100, 274)
    scale: float = 1.0
    raw: dict = field(default_factory=dict)


def model_from_config(d: dict) -> ModelSpec:
    d = dict(d)
    preset = d.pop("preset", None)
    try:
        if preset is not None:
            base = get_model(preset)
            if not d:
                return base
            merged = {**base.to_dict(), **d}
            return ModelSpec.from_dict(merged)
        if "mu" not in d:
            raise ConfigError("model needs either 'preset' or 'mu'")
        return ModelSpec.from_dict(d)
    except ModelError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def load_config(source: dict | str | Path | None) -> Config:
    """Validate a JSON config (path or already-parsed dict)."""
    if source is None:
        raw: dict[str, Any] = {}
    elif isinstance(source, dict):
        raw = source
    else:
        try:
            raw = json.loads(Path(source).read_text())
        except OSError as exc:
            raise OSError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    cfg = Config(raw=raw)
    if "model" in raw:
        cfg.model = model_from_config(raw["model"])
    if "design" in raw:
        d = raw["design"]
        cfg.design = Design.balanced(d["n_subjects"], d["times"], d.get("treatment", "alternate"))
    data = raw.get("data", {})
    cfg.time_unit = data.get("time_unit", cfg.time_unit)
    cfg.time_factor = data.get("time_factor", cfg.time_factor)
    cfg.columns = (data.get("id_column", "id"), data.get("time_column", "time"),
                   data.get("y_column", "y"))
    test = raw.get("test", {})
    for k in ("B", "V", "alpha", "chi2", "n_band_sims", "band_level"):
        if k in test:
            setattr(cfg, k, test[k])
    if "stratify" in raw:
        cfg.stratify = tuple(raw["stratify"])
    cfg.seed = raw.get("seed", cfg.seed)
    cfg.workers = raw.get("workers", cfg.workers)
    power = raw.get("power", {})
    cfg.grid = power.get("grid", cfg.grid)
    cfg.sample_sizes = tuple(power.get("sample_sizes", cfg.sample_sizes))
    cfg.scale = power.get("scale", cfg.scale)
    return cfg
