"""Run every CLI command into one directory (used by determinism checks)."""

import json
from pathlib import Path

from npdcat import cli

CFG = {"schema_version": 1, "model": {"preset": "table1"},
       "design": {"n_subjects": 40, "times": [0, 2, 11, 12]},
       "test": {"B": 40, "V": 200, "n_band_sims": 500}}


def prepare(d: Path, cfg: dict = CFG):
    (d / "cfg.json").write_text(json.dumps(cfg))
    assert cli.main(["simulate", "--config", "cfg.json", "--out", "data.csv"]) == 0


def run_all(d: Path, workers: int) -> dict:
    """Outputs of simulate, npd, test, report and power, keyed by relative path."""
    out = d / f"w{workers}"
    out.mkdir()
    w = ["--workers", str(workers), "--config", "cfg.json"]
    assert cli.main(["simulate", *w, "--seed", "3", "--out", str(out / "sim.csv")]) == 0
    assert cli.main(["npd", *w, "--data", "data.csv", "--out", str(out / "npd.csv")]) == 0
    assert cli.main(["test", *w, "--data", "data.csv", "--chi2", "--out",
                     str(out / "test.json")]) == 0
    assert cli.main(["report", *w, "--data", "data.csv", "--out", str(out / "rep")]) == 0
    assert cli.main(["power", *w, "--grid", "structural", "--scale", "0.1",
                     "--sample-sizes", "30", "--seed", "1", "--out", str(out / "pw")]) == 0
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*"))
            if p.is_file()}
