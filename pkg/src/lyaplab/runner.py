"""Experiment execution: deterministic pipelines with CSV + JSONL output.

One run = one experiment name on one config, writing into the config's
output directory (overridable by LYAPLAB_OUTPUT_ROOT).  Outputs:

  <experiment>.csv      RFC-4180 rows, deterministic bytes per config
  run_log.jsonl         one JSON object per event, every line carries the
                        seed so any trajectory can be replayed alone
  run_record.json       config hash, output hashes, verdicts, timings
  summary.txt           plain-text digest

Concurrent runs must target distinct directories: a lock file guards the
output directory and a stale lock is an explicit error.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .brownian import PathConfig, dynkin_residual, escape_rate, log_tail_slope, sample_trajectories, sup_tail
from .cocycle import distance_norm_bound_check
from .config import ExperimentConfig
from .geometry import HPoint, build_surface
from .harmonic import (
    degree_report,
    lambda_from_measure,
    sample_fiber_measure,
    support_divisor_gap,
    v0_sensitivity,
)
from .lyapunov import estimate_spectrum, symmetry_residual

EXPERIMENTS = ("spectrum", "degree_report", "fiber_measure", "diagnostics", "all")


class OutputLockError(RuntimeError):
    """The output directory is locked by another (or a crashed) run."""


@dataclass(frozen=True)
class RunRecord:
    config_hash: str
    version: str
    experiment: str
    outputs: dict[str, str]  # file name -> sha256 of bytes
    verdicts: dict[str, str]
    discarded: int
    timings: dict[str, float]  # excluded from determinism comparisons

    def deterministic_view(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "experiment": self.experiment,
            "outputs": self.outputs,
            "verdicts": self.verdicts,
            "discarded": self.discarded,
        }


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(_jsonable(cfg.raw), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _fmt(value) -> str:
    """Deterministic scalar formatting: repr for floats, str otherwise."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    data = buf.getvalue().encode("utf-8")
    path.write_bytes(data)
    return data


def output_root(cfg: ExperimentConfig, override: str | None = None) -> Path:
    """Explicit override wins; else LYAPLAB_OUTPUT_ROOT prefixes the
    config's directory; else the config directory (default "runs")."""
    if override:
        return Path(override)
    base = cfg.output_dir or "runs"
    env = os.environ.get("LYAPLAB_OUTPUT_ROOT")
    return Path(env) / base if env else Path(base)


def run(cfg: ExperimentConfig, experiment: str, out_dir: str | None = None) -> RunRecord:
    """Execute the named pipeline and persist its outputs."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    root = output_root(cfg, out_dir)
    root.mkdir(parents=True, exist_ok=True)
    lock = root / ".lyaplab.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLockError(
            f"{lock} exists: another run targets this directory (or crashed; remove the lock)"
        ) from None
    os.close(fd)
    try:
        return _run_locked(cfg, experiment, root)
    finally:
        os.unlink(lock)


def _run_locked(cfg: ExperimentConfig, experiment: str, root: Path) -> RunRecord:
    surface = build_surface(cfg.surface_name)
    chash = config_hash(cfg)
    log_path = root / "run_log.jsonl"
    log_lines: list[dict] = []
    outputs: dict[str, str] = {}
    verdicts: dict[str, str] = {}
    timings: dict[str, float] = {}
    discarded = 0
    seed = cfg.path_config.rng_seed

    def log(event: str, **kw) -> None:
        log_lines.append({"event": event, "seed": seed, **kw})

    log(
        "run_start",
        experiment=experiment,
        config_hash=chash,
        name=cfg.name,
        surface=cfg.surface_name,
        dt=cfg.path_config.dt,
        horizon=cfg.path_config.horizon,
        n_paths=cfg.n_paths,
    )

    if experiment == "all":
        names = ["spectrum", "fiber_measure", "diagnostics"]
        if cfg.divisor is not None:
            names.insert(1, "degree_report")
        else:
            log("skip", pipeline="degree_report", reason="no divisor configured")
    else:
        names = [experiment]
    for name in names:
        t0 = time.perf_counter()
        try:
            if name == "spectrum":
                discarded += _run_spectrum(cfg, surface, root, outputs, verdicts, log)
            elif name == "degree_report":
                _run_degree(cfg, surface, root, outputs, verdicts, log)
            elif name == "fiber_measure":
                _run_fiber(cfg, surface, root, outputs, verdicts, log)
            elif name == "diagnostics":
                _run_diagnostics(cfg, surface, root, outputs, verdicts, log)
        except Exception as exc:
            # mark what was written before the failure, then propagate
            with open(root / "run_record.json", "w", encoding="utf-8") as fh:
                json.dump(
                    {"partial": True, "failed_pipeline": name, "error": str(exc),
                     "config_hash": chash, "outputs": outputs},
                    fh, indent=2, sort_keys=True,
                )
            raise
        timings[name] = time.perf_counter() - t0

    record = RunRecord(
        config_hash=chash,
        version=__version__,
        experiment=experiment,
        outputs=outputs,
        verdicts=verdicts,
        discarded=discarded,
        timings=timings,
    )
    with open(log_path, "w", encoding="utf-8") as fh:
        for line in log_lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    with open(root / "run_record.json", "w", encoding="utf-8") as fh:
        json.dump({**record.deterministic_view(), "timings": timings}, fh, indent=2, sort_keys=True)
    _write_summary(root / "summary.txt", cfg, record)
    return record


def _meta(cfg: ExperimentConfig) -> list:
    return [
        cfg.name,
        cfg.preset_name or "inline",
        cfg.path_config.dt,
        cfg.path_config.horizon,
        cfg.n_paths,
        cfg.path_config.rng_seed,
    ]


_META_HEADER = ["experiment", "representation", "dt", "horizon", "n_paths", "seed"]


def _run_spectrum(cfg, surface, root, outputs, verdicts, log) -> int:
    est = estimate_spectrum(
        cfg.representation,
        surface,
        cfg.path_config,
        cfg.n_paths,
        cfg.renorm_interval,
        cfg.burn_in_fraction,
        cfg.n_batches,
    )
    residual, sym_ok = symmetry_residual(est)
    rows = [
        [i + 1, lam, ci] + _meta(cfg) + [est.total_time, est.n_batches, est.discarded_trajectories]
        for i, (lam, ci) in enumerate(zip(est.lambdas, est.ci_half_widths))
    ]
    data = write_csv(
        root / "spectrum.csv",
        ["exponent_index", "estimate", "ci_half_width"]
        + _META_HEADER
        + ["total_time", "n_batches", "discarded"],
        rows,
    )
    outputs["spectrum.csv"] = hashlib.sha256(data).hexdigest()
    verdicts["spectrum_symmetry_within_ci"] = str(sym_ok)
    log("spectrum", lambdas=list(est.lambdas), cis=list(est.ci_half_widths), symmetry_residual=residual)
    return est.discarded_trajectories


def _run_degree(cfg, surface, root, outputs, verdicts, log) -> None:
    if cfg.divisor is None:
        raise ValueError("degree_report needs divisor data (preset or [divisor] section)")
    rep = degree_report(
        cfg.representation,
        surface,
        cfg.path_config,
        cfg.divisor.form(),
        cfg.divisor.degree,
        cfg.n_paths,
        k=cfg.divisor.codim,
        burn_in_fraction=cfg.burn_in_fraction,
        n_batches=cfg.n_batches,
    )
    rows = [
        [
            rep.lambda_sum_est,
            rep.lambda_ci,
            str(rep.degree),
            rep.pi_deg,
            rep.delta_est,
            rep.support_gap,
            rep.gap_fraction_near,
            rep.verdict,
            rep.warning or "",
        ]
        + _meta(cfg)
    ]
    data = write_csv(
        root / "degree_report.csv",
        ["lambda_sum", "lambda_ci", "degree", "pi_deg", "delta", "gap", "gap_fraction_near", "verdict", "warning"]
        + _META_HEADER,
        rows,
    )
    outputs["degree_report.csv"] = hashlib.sha256(data).hexdigest()
    verdicts["degree_verdict"] = rep.verdict
    if rep.warning:
        verdicts["degree_warning"] = rep.warning
    log("degree_report", delta=rep.delta_est, pi_deg=rep.pi_deg, gap=rep.support_gap, verdict=rep.verdict)


def _run_fiber(cfg, surface, root, outputs, verdicts, log) -> None:
    sample = sample_fiber_measure(
        cfg.representation, surface, cfg.path_config, cfg.n_paths, cfg.exterior_k
    )
    divisor = cfg.divisor.form() if cfg.divisor is not None else None
    header = (
        ["point_index"]
        + [f"re_{i}" for i in range(sample.fiber_dim)]
        + [f"im_{i}" for i in range(sample.fiber_dim)]
        + ["base_x", "base_y", "divisor_distance"]
    )
    rows = []
    for idx, (pt, base) in enumerate(zip(sample.points, sample.base_points)):
        dist = abs(np.dot(pt, divisor.coeffs)) if divisor is not None else ""
        rows.append(
            [idx]
            + [float(v) for v in pt.real]
            + [float(v) for v in pt.imag]
            + [base.x, base.y, dist]
        )
    data = write_csv(root / "fiber_measure.csv", header, rows)
    outputs["fiber_measure.csv"] = hashlib.sha256(data).hexdigest()
    verdicts["fiber_converged"] = str(sample.converged)
    log(
        "fiber_measure",
        n_points=len(sample.points),
        discrepancy=sample.half_horizon_discrepancy,
        converged=sample.converged,
    )
    if cfg.representation.strongly_irreducible is not True:
        # which harmonic measure the sampler selects may depend on v0;
        # report the sensitivity instead of hiding the ambiguity
        sens = v0_sensitivity(cfg.representation, surface, cfg.path_config, cfg.n_paths, cfg.exterior_k)
        verdicts["v0_sensitivity"] = repr(sens)
        log("v0_sensitivity", value=sens)
    if divisor is not None:
        gap = support_divisor_gap(sample, divisor)
        lam, ci = lambda_from_measure(
            cfg.representation,
            surface,
            sample,
            cfg.probe_dt,
            cfg.n_probes,
            require_converged=False,
        )
        verdicts["support_gap"] = repr(gap.min_distance)
        log("support_gap", min_distance=gap.min_distance, lambda_from_measure=lam, lambda_ci=ci)


def _run_diagnostics(cfg, surface, root, outputs, verdicts, log) -> None:
    pc = cfg.path_config
    rows = []
    esc_cfg = PathConfig(dt=pc.dt, horizon=max(pc.horizon, 50.0), rng_seed=pc.rng_seed)
    rate, ci = escape_rate(esc_cfg, min(cfg.n_paths, 500))
    rows.append(["escape_rate", rate, ci])
    rs = np.linspace(1.2, 3.0, 8)
    probs, _ = sup_tail(PathConfig(dt=pc.dt, horizon=1.0, rng_seed=pc.rng_seed), rs, 1.0, 4000)
    try:
        slope = log_tail_slope(rs, probs)
    except ValueError:
        slope = float("nan")
    rows.append(["sup_tail_log_slope", slope, ""])
    res, se = dynkin_residual(
        lambda x, y: np.exp(-(x**2 + (y - 1.0) ** 2)),
        lambda x, y: y
        * y
        * (
            np.exp(-(x**2 + (y - 1.0) ** 2)) * (4 * x**2 - 2)
            + np.exp(-(x**2 + (y - 1.0) ** 2)) * (4 * (y - 1.0) ** 2 - 2)
        ),
        HPoint(0.0, 1.0),
        1.0,
        max(cfg.n_paths, 1000),
        seed=pc.rng_seed,
    )
    rows.append(["dynkin_residual", res, se])
    if surface.n_generators == cfg.representation.n_generators and surface.sides:
        bound = distance_norm_bound_check(cfg.representation, surface, 32, seed=pc.rng_seed)
        rows.append(["distance_norm_bound", bound, ""])
    data = write_csv(root / "diagnostics.csv", ["statistic", "value", "ci_or_se"], rows)
    outputs["diagnostics.csv"] = hashlib.sha256(data).hexdigest()
    verdicts["escape_rate_within_tolerance"] = str(abs(rate - 0.5) <= 0.02 + ci)
    log("diagnostics", escape_rate=rate, sup_tail_slope=slope, dynkin=res)


def _write_summary(path: Path, cfg: ExperimentConfig, record: RunRecord) -> None:
    lines = [
        f"lyaplab {record.version}",
        f"experiment: {record.experiment}",
        f"config: {cfg.name} (hash {record.config_hash[:16]})",
        f"surface: {cfg.surface_name}, n_paths: {cfg.n_paths}, horizon: {cfg.path_config.horizon}",
        "outputs:",
    ]
    lines += [f"  {name}: sha256 {digest[:16]}" for name, digest in sorted(record.outputs.items())]
    lines += ["verdicts:"]
    lines += [f"  {k}: {v}" for k, v in sorted(record.verdicts.items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def replay(runlog: str | Path, trajectory_id: int) -> dict:
    """Re-simulate one trajectory recorded in a run log, in isolation."""
    runlog = Path(runlog)
    header = None
    with open(runlog, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("event") == "run_start":
                header = rec
                break
    if header is None:
        raise ValueError(f"{runlog} has no run_start event")
    surface = build_surface(header["surface"])
    pc = PathConfig(dt=header["dt"], horizon=header["horizon"], rng_seed=header["seed"])
    if not 0 <= trajectory_id < header["n_paths"]:
        raise ValueError(f"trajectory id must be in 0..{header['n_paths'] - 1}")
    summary = sample_trajectories(surface, pc, 1, index_offset=trajectory_id, track_sup=True)[0]
    return {
        "trajectory": trajectory_id,
        "seed": header["seed"],
        "word": list(summary.word),
        "word_length": len(summary.word),
        "endpoint": [summary.endpoint.x, summary.endpoint.y],
        "elapsed": summary.elapsed,
        "sup_displacement": summary.sup_displacement,
        "discarded": summary.discarded,
    }
