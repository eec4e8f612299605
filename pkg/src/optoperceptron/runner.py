"""Run orchestration and plot-ready artifact export.

Every run derives all of its randomness from (config, seed): the master
seed spawns one stream each for learning rates, the shutter, the camera,
and the site parameter draws, so repeated runs are byte-identical.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import RunConfig
from .patterns import CLASSES, Dataset, build_dataset
from .rig import (
    EnergyConfig,
    N_WEIGHT_SITES,
    Rig,
    RigBackend,
    account_run,
    energy_per_pulse,
)
from .optics import SpotGeometry, write_pgm
from .synapse import sample_sites
from .trainer import (
    EvalResult,
    TrainingTrace,
    VectorBackend,
    evaluate_patterns,
    train,
)

SCHEMA_PREFIX = "optoperceptron"


@dataclass
class Streams:
    eta: np.random.Generator
    shutter: np.random.Generator
    camera: np.random.Generator
    sites: np.random.SeedSequence


def make_streams(seed: int) -> Streams:
    eta_ss, shutter_ss, camera_ss, sites_ss = np.random.SeedSequence(seed).spawn(4)
    return Streams(
        eta=np.random.default_rng(eta_ss),
        shutter=np.random.default_rng(shutter_ss),
        camera=np.random.default_rng(camera_ss),
        sites=sites_ss,
    )


def build_rig(cfg: RunConfig, streams: Streams) -> Rig:
    site_params = sample_sites(
        streams.sites,
        N_WEIGHT_SITES + 1,
        cfg["synapse.site_spread"],
        nominal=cfg.nominal_site_params(),
    )
    rig_cfg = cfg.rig_config()
    per_pulse_j = energy_per_pulse(
        cfg.energy_beam(),
        SpotGeometry(0.0, 0.0, rig_cfg.spot_diameter_um),
    )
    return Rig(
        site_params=site_params,
        constants=cfg.optical_constants(),
        camera=cfg.camera_config(),
        rig_config=rig_cfg,
        shutter=cfg.shutter_model(),
        shutter_rng=streams.shutter,
        camera_rng=streams.camera,
        per_pulse_write_j=per_pulse_j,
        per_read_j=cfg.per_read_j(),
    )


@dataclass
class RunResult:
    mode: str
    seed: int
    dataset: Dataset
    trace: TrainingTrace
    pre_eval: list[EvalResult]
    post_train_eval: list[EvalResult]
    post_test_eval: list[EvalResult]
    rig: Rig | None = None
    backend: RigBackend | None = None

    @property
    def test_correct(self) -> int:
        return sum(1 for r in self.post_test_eval if r.correct)

    def summary(self) -> dict:
        s = self.trace.summary()
        s.update(
            {
                "mode": self.mode,
                "seed": self.seed,
                "test_correct": self.test_correct,
                "test_total": len(self.post_test_eval),
                "version": __version__,
            }
        )
        return s


def simulate_run(cfg: RunConfig, seed: int) -> RunResult:
    streams = make_streams(seed)
    dataset = build_dataset(cfg.bitmaps, desired_class=cfg["trainer.target_class"])
    trainer_cfg = cfg.trainer_config(seed)
    backend = VectorBackend(trainer_cfg, rng=streams.eta)
    pre = evaluate_patterns(backend, dataset.training, trainer_cfg.target_class)
    trace = train(dataset, trainer_cfg, backend)
    post_train = evaluate_patterns(backend, dataset.training, trainer_cfg.target_class)
    post_test = evaluate_patterns(backend, dataset.testing, trainer_cfg.target_class)
    return RunResult("simulate", seed, dataset, trace, pre, post_train, post_test)


def emulate_run(cfg: RunConfig, seed: int) -> RunResult:
    streams = make_streams(seed)
    dataset = build_dataset(cfg.bitmaps, desired_class=cfg["trainer.target_class"])
    trainer_cfg = cfg.trainer_config(seed)
    rig = build_rig(cfg, streams)
    backend = RigBackend(rig, trainer_cfg, keep_snapshots=cfg["run.trace_verbosity"] >= 2)
    pre = evaluate_patterns(backend, dataset.training, trainer_cfg.target_class)
    trace = train(dataset, trainer_cfg, backend)
    post_train = evaluate_patterns(backend, dataset.training, trainer_cfg.target_class)
    post_test = evaluate_patterns(backend, dataset.testing, trainer_cfg.target_class)
    return RunResult(
        "emulate", seed, dataset, trace, pre, post_train, post_test,
        rig=rig, backend=backend,
    )


# -- artifact writing ---------------------------------------------------------


def _atomic_write(path: Path, data: str | bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(schema: str, header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = [f"# schema={SCHEMA_PREFIX}.{schema}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def dataset_csv(dataset: Dataset) -> str:
    header = ["pattern_id", "class", "variant", "role"] + [f"x{i}" for i in range(1, 10)]
    ordered = []
    for cls in CLASSES:
        block = [p for p in dataset.training + dataset.testing if p.class_label == cls]
        block.sort(key=lambda p: p.variant_index)
        ordered.extend(block)
    rows = [
        [p.pattern_id, p.class_label, p.variant_index, p.role, *p.inputs]
        for p in ordered
    ]
    return _csv_text("dataset.v1", header, rows)


def learning_curve_csv(trace: TrainingTrace) -> str:
    header = ["step", "pattern_id", "class", "output", "threshold", "action", "eta", "pulses_total"]
    rows = [
        [
            s.step,
            s.pattern_id,
            s.class_label,
            s.output,
            s.threshold,
            s.action,
            s.eta,
            sum(s.pulses) if s.pulses is not None else None,
        ]
        for s in trace.steps
    ]
    return _csv_text("learning_curve.v1", header, rows)


def bars_csv(results: Sequence[EvalResult]) -> str:
    header = ["index", "pattern_id", "class", "role", "output", "threshold", "desired_above", "correct"]
    rows = [
        [i + 1, r.pattern_id, r.class_label, r.role, r.output, r.threshold, r.desired_above, r.correct]
        for i, r in enumerate(results)
    ]
    return _csv_text("bars.v1", header, rows)


def interleave_post_results(
    post_train: Sequence[EvalResult], post_test: Sequence[EvalResult]
) -> list[EvalResult]:
    """Class blocks with each held-out pattern appended after its block."""
    ordered = []
    for cls in CLASSES:
        ordered.extend(r for r in post_train if r.class_label == cls)
        ordered.extend(r for r in post_test if r.class_label == cls)
    return ordered


def sweep_csv(rows: Sequence[Sequence]) -> str:
    header = [
        "seed", "converged", "steps", "epochs", "threshold_raises",
        "test_correct", "test_total", "final_threshold",
    ]
    return _csv_text("sweep.v1", header, rows)


def write_run_artifacts(result: RunResult, cfg: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "config.resolved.txt", cfg.to_text())
    _atomic_write(
        out_dir / "summary.json",
        json.dumps(result.summary(), sort_keys=True, indent=2) + "\n",
    )
    _atomic_write(out_dir / "bars_pre.csv", bars_csv(result.pre_eval))
    _atomic_write(
        out_dir / "bars_post.csv",
        bars_csv(interleave_post_results(result.post_train_eval, result.post_test_eval)),
    )
    if cfg["run.trace_verbosity"] >= 1:
        _atomic_write(out_dir / "learning_curve.csv", learning_curve_csv(result.trace))
        _atomic_write(out_dir / "trace.json", result.trace.to_json() + "\n")
    if result.rig is not None:
        _atomic_write(
            out_dir / "ledger.json",
            json.dumps(result.rig.ledger.to_json_dict(), sort_keys=True, indent=2) + "\n",
        )
        _atomic_write(out_dir / "ledger.txt", result.rig.ledger.summary_line() + "\n")
        _atomic_write(
            out_dir / "weight_state.json",
            result.rig.weight_state().to_json() + "\n",
        )
        site_params = [
            {
                "site": result.rig.label(i),
                "dead_zone_pulses": p.dead_zone_pulses,
                "saturation_pulses": p.saturation_pulses,
                "background_gain": p.background_gain,
                "curve": p.curve,
            }
            for i, p in enumerate(s.params for s in result.rig.sites)
        ]
        _atomic_write(
            out_dir / "site_params.json",
            json.dumps(site_params, sort_keys=True, indent=2) + "\n",
        )
        if result.backend is not None and result.backend.snapshots:
            _atomic_write(
                out_dir / "weight_snapshots.json",
                json.dumps(result.backend.snapshots, sort_keys=True, indent=2) + "\n",
            )
        if cfg["run.dump_frames"]:
            write_pgm(result.rig.full_frame(), out_dir / "sample_final.pgm")


def run_simulate(cfg: RunConfig, out_dir: Path, seed: int) -> dict:
    result = simulate_run(cfg, seed)
    write_run_artifacts(result, cfg, out_dir)
    return result.summary()


def run_emulate(cfg: RunConfig, out_dir: Path, seed: int) -> dict:
    result = emulate_run(cfg, seed)
    write_run_artifacts(result, cfg, out_dir)
    return result.summary()


def run_dataset(cfg: RunConfig, out_dir: Path, seed: int) -> dict:
    dataset = build_dataset(cfg.bitmaps, desired_class=cfg["trainer.target_class"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "config.resolved.txt", cfg.to_text())
    _atomic_write(out_dir / "dataset.csv", dataset_csv(dataset))
    summary = {
        "mode": "dataset",
        "patterns": len(dataset.training) + len(dataset.testing),
        "training": len(dataset.training),
        "testing": len(dataset.testing),
        "version": __version__,
    }
    _atomic_write(out_dir / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def run_energy(cfg: RunConfig, out_dir: Path, seed: int) -> dict:
    """Account a simulated training run at the configured hardware costs."""
    result = simulate_run(cfg, seed)
    beam = cfg.energy_beam()
    rig_cfg = cfg.rig_config()
    shutter = cfg.shutter_model()
    per_pulse = energy_per_pulse(beam, SpotGeometry(0, 0, rig_cfg.spot_diameter_um))
    init_pulses = 0
    init_reads = 0
    if cfg["energy.include_initialization"]:
        packets = N_WEIGHT_SITES * rig_cfg.init_weight_packets + rig_cfg.init_threshold_packets
        init_pulses = packets * shutter.nominal_packet_pulses
        init_reads = 2 * (N_WEIGHT_SITES + 1)
    ledger = account_run(
        result.trace,
        EnergyConfig(
            per_pulse_j=per_pulse,
            per_read_j=cfg.per_read_j(),
            initialization_pulses=init_pulses,
            initialization_reads=init_reads,
        ),
    )
    small = energy_per_pulse(beam, SpotGeometry(0, 0, cfg["energy.spot_small_um"]))
    large = energy_per_pulse(beam, SpotGeometry(0, 0, cfg["energy.spot_large_um"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "config.resolved.txt", cfg.to_text())
    _atomic_write(
        out_dir / "ledger.json",
        json.dumps(ledger.to_json_dict(), sort_keys=True, indent=2) + "\n",
    )
    summary = {
        "mode": "energy",
        "seed": seed,
        "per_pulse_spot_small_pj": small * 1e12,
        "per_pulse_spot_large_pj": large * 1e12,
        "per_pulse_network_spot_pj": per_pulse * 1e12,
        "training_steps": result.trace.total_steps,
        "total_pulses": ledger.total_pulses,
        "write_energy_nj": ledger.write_energy_j * 1e9,
        "read_events": ledger.read_events,
        "read_energy_nj": ledger.read_energy_j * 1e9,
        "version": __version__,
    }
    _atomic_write(out_dir / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    _atomic_write(
        out_dir / "energy.txt",
        (
            f"per-pulse energy: {small * 1e12:.1f} pJ ({cfg['energy.spot_small_um']} um spot), "
            f"{large * 1e12:.1f} pJ ({cfg['energy.spot_large_um']} um spot)\n"
            f"ledger: {ledger.summary_line()}\n"
        ),
    )
    return summary


def run_sweep(cfg: RunConfig, out_dir: Path, seed: int) -> dict:
    """Per-seed convergence summaries; seeds are base_seed + i."""
    mode = cfg["sweep.mode"]
    runner = simulate_run if mode == "simulate" else emulate_run
    rows = []
    converged_steps = []
    for i in range(cfg["sweep.seeds"]):
        run_seed = seed + i
        result = runner(cfg, run_seed)
        rows.append(
            [
                run_seed,
                result.trace.converged,
                result.trace.total_steps,
                result.trace.epochs,
                result.trace.threshold_raises,
                result.test_correct,
                len(result.post_test_eval),
                result.trace.final_threshold,
            ]
        )
        if result.trace.converged:
            converged_steps.append(result.trace.total_steps)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "config.resolved.txt", cfg.to_text())
    _atomic_write(out_dir / "sweep.csv", sweep_csv(rows))
    summary = {
        "mode": f"sweep-{mode}",
        "base_seed": seed,
        "seeds": cfg["sweep.seeds"],
        "converged": len(converged_steps),
        "median_steps": float(np.median(converged_steps)) if converged_steps else None,
        "version": __version__,
    }
    _atomic_write(out_dir / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


MODE_RUNNERS = {
    "simulate": run_simulate,
    "emulate": run_emulate,
    "dataset": run_dataset,
    "energy": run_energy,
    "sweep": run_sweep,
}
