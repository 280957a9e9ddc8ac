"""Run outputs: results.csv (long format), summary.json, manifest.json.

CSV is RFC 4180 (CRLF line endings, mandatory header). Angles are reported in
degrees and SINR in dB; everything else stays in its natural unit.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .harness import RunResult
from .metrics import to_db

CSV_HEADER = ["trial", "st_index", "ft_index", "cluster", "metric_kind", "value"]

__all__ = ["write_outputs", "write_sweep_outputs", "summarize"]


def _percentiles(values: np.ndarray, qs=(10, 50, 90)) -> dict:
    return {f"p{q}": float(np.percentile(values, q)) for q in qs}


def _cdf_breakpoints(values: np.ndarray, grid: np.ndarray) -> dict:
    return {f"{g:g}": float(np.mean(values <= g)) for g in grid}


def summarize(result: RunResult) -> dict:
    """Per-cluster aggregate metrics with CDF breakpoints."""
    clusters = sorted({r[2] for r in result.angular_rows} | {r[3] for r in result.nmse_rows}
                      | {r[3] for r in result.sinr_rows} | {r[1] for r in result.nmse_ratio_rows})
    per_cluster = {}
    for m in clusters:
        entry: dict = {}
        ang = np.abs(result.angular_errors(m)) / np.pi * 180.0
        if ang.size:
            entry["angular_rmse_deg"] = float(np.sqrt(np.mean(ang**2)))
            entry["angular_error_deg"] = _percentiles(ang)
            entry["angular_error_cdf_deg"] = _cdf_breakpoints(
                ang, np.arange(1.0, 10.5, 1.0)
            )
        nmse = result.nmse_values(m)
        if nmse.size:
            entry["nmse_analytic_mean"] = float(np.mean(nmse))
            entry["nmse_analytic"] = _percentiles(nmse)
            entry["nmse_cdf"] = _cdf_breakpoints(nmse, np.arange(0.05, 1.01, 0.05))
        emp = result.nmse_empirical(m)
        if np.isfinite(emp):
            entry["nmse_empirical"] = emp
        sinr = result.sinr_values(m)
        if sinr.size:
            entry["sinr_db_mean"] = float(to_db(np.mean(sinr)))
            entry["sinr_db"] = {
                k: float(to_db(v)) for k, v in _percentiles(sinr).items()
            }
        per_cluster[str(m)] = entry
    reasons: dict = {}
    for _, reason, _ in result.terminations:
        reasons[reason] = reasons.get(reason, 0) + 1
    return {
        "clusters": per_cluster,
        "trials": len(result.terminations),
        "termination_reasons": reasons,
        "completed_ft_cpis": int(sum(t[2] for t in result.terminations)),
    }


def _write_csv(result: RunResult, path: Path) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)  # csv default \r\n line terminator: RFC 4180
        writer.writerow(CSV_HEADER)
        rad2deg = 180.0 / np.pi
        for trial, st, cluster, err in result.angular_rows:
            writer.writerow([trial, st, "", cluster, "AngularError", repr(float(err) * rad2deg)])
        for trial, st, ft, cluster, value in result.nmse_rows:
            writer.writerow([trial, st, ft, cluster, "NMSE_analytic", repr(float(value))])
        for trial, st, ft, cluster, value in result.sinr_rows:
            writer.writerow([trial, st, ft, cluster, "SINR", repr(float(to_db(value)))])
        for trial, cluster, value in result.nmse_ratio_rows:
            writer.writerow([trial, "", "", cluster, "NMSE_empirical", repr(float(value))])
        # per-trial angular RMSE rows, degrees
        trials = sorted({r[0] for r in result.angular_rows})
        for trial in trials:
            for cluster in sorted({r[2] for r in result.angular_rows if r[0] == trial}):
                errs = [
                    r[3] for r in result.angular_rows if r[0] == trial and r[2] == cluster
                ]
                rmse = float(np.sqrt(np.mean(np.square(errs)))) * rad2deg
                writer.writerow([trial, "", "", cluster, "RMSE", repr(rmse)])


def _manifest(config: ScenarioConfig) -> dict:
    return {
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": {
            "beamtrack": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
            "platform": platform.platform(),
        },
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }


def write_outputs(result: RunResult, config: ScenarioConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(result, out / "results.csv")
    (out / "summary.json").write_text(json.dumps(summarize(result), indent=2) + "\n")
    (out / "manifest.json").write_text(json.dumps(_manifest(config), indent=2) + "\n")


def write_sweep_outputs(
    runs: list[tuple[float, RunResult]],
    config: ScenarioConfig,
    axis: str,
    out_dir,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for value, result in runs:
        sub = out / f"{axis}_{value:g}"
        sub.mkdir(parents=True, exist_ok=True)
        _write_csv(result, sub / "results.csv")
        run_summary = summarize(result)
        (sub / "summary.json").write_text(json.dumps(run_summary, indent=2) + "\n")
        summary[f"{value:g}"] = run_summary
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    manifest = _manifest(config)
    manifest["sweep_axis"] = axis
    manifest["sweep_values"] = [v for v, _ in runs]
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
