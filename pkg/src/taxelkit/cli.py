"""Command-line entry point.

Subcommands: sweep, calibrate, synth, train, eval, ablate, viz — one per
pipeline artifact (flux curves, calibration table, dataset, checkpoint,
evaluation report, ablation report, force-field figures).

Exit codes: 0 success, 2 config error, 3 missing input, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import calibration as cal
from . import dataio, gestures, magnetics, pipeline, svgplot
from .config import FULL_SCALE_SYNTH, ConfigError, RunConfig
from .geometry import ForceVector
from .gestures import GestureClass
from .nn import CnnModel

log = logging.getLogger("taxelkit")

CLASS_NAMES = [c.name.capitalize() for c in GestureClass]


class MissingInputError(FileNotFoundError):
    pass


def _geom(cfg: RunConfig) -> magnetics.TaxelGeometry:
    g = cfg.geometry
    return magnetics.TaxelGeometry(
        wall_thickness=g.wall_thickness_mm, width=g.width_mm,
        cavity_height=g.cavity_height_mm, magnet_height=g.magnet_height_mm,
        chip_offset=g.chip_offset_mm)


def _dip(cfg: RunConfig) -> magnetics.DipoleParams:
    return magnetics.DipoleParams(moment=cfg.dipole.moment_am2,
                                  direction=tuple(cfg.dipole.direction))


def _stiff(cfg: RunConfig) -> magnetics.StiffnessModel:
    s = cfg.stiffness
    return magnetics.StiffnessModel(kx=s.kx_n_per_mm, ky=s.ky_n_per_mm, kz=s.kz_n_per_mm)


def _outdir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.paths.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise MissingInputError(f"cannot create output directory {out}: {e}")
    cfg.echo(out)
    return out


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    heights = [float(h) for h in args.heights.split(",")]
    curves = magnetics.flux_sweep(heights, args.max_shear, args.steps, _geom(cfg), _dip(cfg))
    csv_path = out / "sweep.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["height_mm", "shear_mm", "bx_mT", "bz_mT"])
        for c in curves:
            for d, bx, bz in zip(c.shear_mm, c.bx, c.bz):
                writer.writerow([c.magnet_height, f"{d:.6g}", f"{bx:.9g}", f"{bz:.9g}"])
    xs = curves[0].shear_mm
    for comp in ("bx", "bz"):
        series = [(f"h = {c.magnet_height:g} mm", getattr(c, comp)) for c in curves]
        (out / f"sweep_{comp}.svg").write_text(
            svgplot.curves_svg(xs, series, f"{comp} vs shear displacement"))
    log.info("wrote %s and sweep_bx.svg / sweep_bz.svg", csv_path)
    return 0


# ---------------------------------------------------------------------------
# calibrate

def _calibration_samples(cfg: RunConfig, taxel: int, n: int, noise: float, source: str):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, taxel, 0x43414C]))
    geom, dip = _geom(cfg), _dip(cfg)
    s = cfg.stiffness
    # per-taxel fabrication spread on the compliance
    jitter = rng.uniform(0.9, 1.1, size=3)
    stiff = magnetics.StiffnessModel(kx=s.kx_n_per_mm * jitter[0],
                                     ky=s.ky_n_per_mm * jitter[1],
                                     kz=s.kz_n_per_mm * jitter[2])
    baseline = magnetics.simulate_taxel(ForceVector(0, 0, 0), geom, dip, stiff).as_array()
    fx = rng.uniform(-2.0, 2.0, size=n)
    fy = rng.uniform(-2.0, 2.0, size=n)
    fz = rng.uniform(-7.0, 0.0, size=n)
    fluxes = np.stack([
        magnetics.simulate_taxel(ForceVector(x, y, z), geom, dip, stiff).as_array() - baseline
        for x, y, z in zip(fx, fy, fz)])
    if source == "quadratic":
        truth = rng.normal(0.0, 0.5, size=(3, cal.N_FEATURES))
        forces = fluxes_to_quadratic_forces(truth, fluxes)
    else:
        forces = np.stack([fx, fy, fz], axis=1)
    if noise > 0:
        forces = forces + rng.normal(0.0, noise, size=forces.shape)
    return [cal.CalibrationSample(flux=magnetics.FluxSample(*b), force=ForceVector(*f))
            for b, f in zip(fluxes, forces)]


def fluxes_to_quadratic_forces(coeffs: np.ndarray, fluxes: np.ndarray) -> np.ndarray:
    feats = np.stack([cal.quadratic_features(b) for b in fluxes])
    return feats @ coeffs.T


def cmd_calibrate(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    models: dict[int, cal.CalibrationModel] = {}
    per_taxel_rms = {}
    failures = {}
    for taxel in range(49):
        samples = _calibration_samples(cfg, taxel, args.samples, args.noise, args.source)
        try:
            model = cal.fit_taxel(samples)
        except cal.DegenerateFitError as e:
            failures[taxel] = str(e)
            log.warning("taxel %d: %s", taxel, e)
            continue
        models[taxel] = model
        per_taxel_rms[taxel] = cal.rms_error(model, samples)
    cal.save_models(models, out / "calibration.json")
    rms = np.array([per_taxel_rms[i] for i in sorted(per_taxel_rms)])
    with open(out / "rms.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["taxel", "rms_fx_n", "rms_fy_n", "rms_fz_n"])
        for i in sorted(per_taxel_rms):
            writer.writerow([i] + [f"{v:.6g}" for v in per_taxel_rms[i]])
        writer.writerow(["Mean"] + [f"{v:.6g}" for v in rms.mean(axis=0)])
        writer.writerow(["Standard Deviation"] + [f"{v:.6g}" for v in rms.std(axis=0)])
    if failures:
        (out / "calibration_failures.json").write_text(json.dumps(failures, indent=1))
    log.info("calibrated %d/49 taxels; aggregate RMS %s", len(models), rms.mean(axis=0))
    return 0


# ---------------------------------------------------------------------------
# synth / train / eval / ablate / viz

def _synth_section(args, cfg: RunConfig):
    return FULL_SCALE_SYNTH if getattr(args, "full_scale", False) else cfg.synth


def cmd_synth(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    s = _synth_section(args, cfg)
    recs = gestures.synth_dataset(s.n_users, s.n_blocks, s.reps_per_block, cfg.seed)
    path = out / cfg.paths.dataset
    dataio.save_dataset(recs, path, config={
        "n_users": s.n_users, "n_blocks": s.n_blocks, "reps_per_block": s.reps_per_block,
        "master_seed": cfg.seed})
    log.info("wrote %d recordings to %s", len(recs), path)
    return 0


def _load_recordings(path) -> list:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"dataset file not found: {path} (run 'synth' first)")
    return dataio.load_dataset(path)


def _mode(name: str) -> pipeline.AblationMode:
    return (pipeline.AblationMode.NORMAL_ONLY if name == "normal-only"
            else pipeline.AblationMode.NORMAL_AND_SHEAR)


def _write_history(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_acc"])
        for rec in history:
            writer.writerow([rec.epoch, f"{rec.train_loss:.9g}", f"{rec.val_acc:.6g}"])


def cmd_train(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    recs = _load_recordings(args.dataset or out / cfg.paths.dataset)
    mode = _mode(args.mode)
    split = pipeline.split_dataset(recs, seed=cfg.seed)
    tconf = pipeline.TrainConfig(epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                                 seed=cfg.seed)
    train_x, train_y = pipeline.assemble_tensor(pipeline.select(recs, split.train), mode,
                                                dtype=np.float32)
    stats = pipeline.fit_normalization(train_x, mode)
    train_x = pipeline.apply_normalization(stats, train_x).astype(np.float32)
    val_x, val_y = pipeline.assemble_tensor(pipeline.select(recs, split.val), mode,
                                            dtype=np.float32)
    val_x = pipeline.apply_normalization(stats, val_x).astype(np.float32)
    model, history = pipeline.train(train_x, train_y, val_x, val_y, tconf)
    ckpt = out / cfg.paths.checkpoint
    dataio.save_checkpoint(model.params, model.in_channels, ckpt, config={
        "mode": mode.value, "split_seed": cfg.seed, "epochs": tconf.epochs,
        "batch_size": tconf.batch_size,
        "norm_mean": stats.mean.tolist(), "norm_std": stats.std.tolist()})
    _write_history(history, out / "history.csv")
    log.info("wrote %s (best val acc %.3f)", ckpt,
             max((h.val_acc for h in history), default=0.0))
    return 0


def _load_model(ckpt_path):
    ckpt_path = Path(ckpt_path)
    if not ckpt_path.exists():
        raise MissingInputError(f"checkpoint not found: {ckpt_path} (run 'train' first)")
    manifest_path = ckpt_path.with_suffix(ckpt_path.suffix + ".json")
    if not manifest_path.exists():
        raise MissingInputError(f"checkpoint manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    model = CnnModel(in_channels=manifest["c_in"])
    params, _ = dataio.load_checkpoint(ckpt_path, model.shapes())
    model.set_params(params)
    return model, manifest


def _confusion_outputs(result: pipeline.EvaluationResult, out: Path, stem: str) -> dict:
    cm = result.confusion
    with open(out / f"{stem}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + CLASS_NAMES)
        for name, row in zip(CLASS_NAMES, cm.counts):
            writer.writerow([name] + row.tolist())
    (out / f"{stem}.svg").write_text(
        svgplot.heatmap_svg(cm.rates(), CLASS_NAMES,
                            f"{stem} (overall {result.overall_accuracy:.1%})"))
    return {"overall_accuracy": result.overall_accuracy,
            "macro_accuracy": result.macro_accuracy,
            "counts": cm.counts.tolist(),
            "rates": cm.rates().round(6).tolist()}


def cmd_eval(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    recs = _load_recordings(args.dataset or out / cfg.paths.dataset)
    model, manifest = _load_model(args.checkpoint or out / cfg.paths.checkpoint)
    mconf = manifest["config"]
    mode = pipeline.AblationMode(mconf["mode"])
    stats = pipeline.NormalizationStats(mode=mode, mean=np.array(mconf["norm_mean"]),
                                        std=np.array(mconf["norm_std"]))
    split = pipeline.split_dataset(recs, seed=mconf["split_seed"])
    test_x, test_y = pipeline.assemble_tensor(pipeline.select(recs, split.test), mode,
                                              dtype=np.float32)
    test_x = pipeline.apply_normalization(stats, test_x).astype(np.float32)
    result = pipeline.evaluate(model, test_x, test_y)
    report = {"mode": mode.value, "test_size": len(test_y),
              **_confusion_outputs(result, out, "confusion")}
    (out / "evaluation.json").write_text(json.dumps(report, indent=1))
    log.info("test accuracy %.3f (macro %.3f)", result.overall_accuracy, result.macro_accuracy)
    return 0


def cmd_ablate(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    if args.dataset:
        recs = _load_recordings(args.dataset)
    else:
        s = _synth_section(args, cfg)
        recs = gestures.synth_dataset(s.n_users, s.n_blocks, s.reps_per_block, cfg.seed)
    tconf = pipeline.TrainConfig(epochs=cfg.train.epochs, batch_size=cfg.train.batch_size,
                                 seed=cfg.seed)
    report = pipeline.ablate(recs, tconf, split_seed=cfg.seed)
    deltas = report.per_class_delta()
    payload = {
        "normal_only": _confusion_outputs(report.normal_only.result, out, "confusion_normal_only"),
        "normal_and_shear": _confusion_outputs(report.normal_and_shear.result, out,
                                               "confusion_normal_and_shear"),
        "per_class_delta": {name: round(float(d), 6) for name, d in zip(CLASS_NAMES, deltas)},
        "per_class_winner": {name: ("shear" if d > 0 else "normal" if d < 0 else "tie")
                             for name, d in zip(CLASS_NAMES, deltas)},
        "shear_wins": report.shear_wins(),
    }
    (out / "ablation.json").write_text(json.dumps(payload, indent=1))
    _write_history(report.normal_only.history, out / "history_normal_only.csv")
    _write_history(report.normal_and_shear.history, out / "history_normal_and_shear.csv")
    log.info("ablation: normal-only %.3f vs normal+shear %.3f",
             payload["normal_only"]["overall_accuracy"],
             payload["normal_and_shear"]["overall_accuracy"])
    return 0


def cmd_viz(args, cfg: RunConfig) -> int:
    out = _outdir(args, cfg)
    recs = _load_recordings(args.dataset or out / cfg.paths.dataset)
    by_id = {r.recording_id: r for r in recs}
    if args.recording_id not in by_id:
        raise MissingInputError(f"unknown recording id {args.recording_id} "
                                f"(dataset has ids 0..{max(by_id)})")
    rec = by_id[args.recording_id]
    frame_dir = out / f"recording_{rec.recording_id:05d}"
    frame_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(rec.frames):
        (frame_dir / f"frame_{i:03d}.svg").write_text(svgplot.force_field_svg(frame))
    (frame_dir / "montage.svg").write_text(svgplot.montage_svg(rec.frames))
    log.info("wrote %d frame SVGs for recording %d (%s) to %s",
             len(rec.frames), rec.recording_id, rec.label.name, frame_dir)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taxelkit",
                                     description="tri-axial tactile gesture toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--out", help="output directory (default from config paths.out_dir)")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("sweep", help="flux vs shear curves per magnet height")
    common(p)
    p.add_argument("--heights", default="2,4,6,10", help="comma-separated magnet heights, mm")
    p.add_argument("--max-shear", type=float, default=5.0)
    p.add_argument("--steps", type=int, default=101)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit all 49 taxels on synthetic sweeps")
    common(p)
    p.add_argument("--samples", type=int, default=120, help="samples per taxel")
    p.add_argument("--noise", type=float, default=0.12, help="force noise sigma, N")
    p.add_argument("--source", choices=["dipole", "quadratic"], default="dipole",
                   help="ground-truth generator: dipole forward model, or an exact "
                        "quadratic map (for recovery checks)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("synth", help="generate a labeled gesture dataset")
    common(p)
    p.add_argument("--full-scale", action="store_true",
                   help="11 users x 9 blocks x 3 reps (default: desk scale from config)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one classifier arm")
    common(p)
    p.add_argument("--dataset", help="dataset file (default: <out>/dataset.tgk)")
    p.add_argument("--mode", choices=["normal-only", "normal-and-shear"],
                   default="normal-and-shear")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    common(p)
    p.add_argument("--dataset", help="dataset file")
    p.add_argument("--checkpoint", help="checkpoint file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="paired normal-only vs normal+shear study")
    common(p)
    p.add_argument("--dataset", help="existing dataset file (default: synthesize per config)")
    p.add_argument("--full-scale", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("viz", help="per-frame force-field SVGs for one recording")
    common(p)
    p.add_argument("--dataset", help="dataset file")
    p.add_argument("--recording-id", type=int, required=True)
    p.set_defaults(func=cmd_viz)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("TAXELKIT_LOG", "INFO").upper(),
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = RunConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
        return args.func(args, cfg)
    except ConfigError as e:
        log.error("config error: %s", e)
        return 2
    except (MissingInputError, FileNotFoundError) as e:
        log.error("%s", e)
        return 3
    except (pipeline.TrainingDivergedError, magnetics.SingularFieldError,
            np.linalg.LinAlgError, FloatingPointError) as e:
        log.error("numerical failure: %s", e)
        return 4


if __name__ == "__main__":
    sys.exit(main())
