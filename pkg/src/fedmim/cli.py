"""Command-line entry point: dataset generation, federated pre-training,
probe fine-tuning, metric evaluation, and single-image transforms.

Configuration is UTF-8 JSON with a top-level ``"version": 1``; unknown
keys anywhere are an error so typos fail loudly. Exit codes: 0 success,
2 configuration/validation error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import fed, metrics, model, smat, synth
from .corrupt import CorruptionConfig, mixed_corrupt
from .errors import FedmimError
from .finetune import ProbeConfig, extract_features, probe_scores, train_probe
from .image import PatchGrid, depatchify, read_pgm, write_pgm
from .pipeline import PatchSpec, build_clients
from .rng import Rng
from .smat import ScanGeometry
from .tgm import apply_uim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class ConfigError(FedmimError):
    """Raised for malformed or contradictory run configuration."""


# Default run configuration; a config file overrides leaf values.
_DEFAULTS: dict = {
    "version": 1,
    "seed": 0,
    "threads": 1,
    "model": {"patch_dim": 64, "embed_dim": 32, "num_patches": 64},
    "patch": {"patch_h": 8, "patch_w": 8, "mask_ratio": 0.75},
    "federation": {"num_clients": 4, "total_rounds": 10, "local_steps": 1,
                   "alpha": 0.5},
    "optimizer": {"eta_max": 5e-4, "eta_min": 1e-6, "warmup_rounds": 10},
    "corruption": {"p": 0.5, "motion_d": 7, "p_salt": 0.02, "p_pepper": 0.02},
    "synth": {"n": 64, "width": 64, "height": 64, "background_level": 150,
              "speckle_strength": 0.25,
              "class_mix": [0.35, 0.35, 0.3],
              "lesion": {"intensity_delta": -60.0,
                         "malignant_delta": None,
                         "irregularity_range": [0.45, 0.85],
                         "axis_range": [0.14, 0.24]}},
    "probe": {"num_classes": 2, "epochs": 200, "val_fraction": 0.2,
              "eta_max": 0.5, "eta_min": 1e-3, "warmup_rounds": 10},
    "checkpoint_name": "checkpoint",
    "resume_from": None,
}


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = dict(defaults)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(defaults[key], dict) and defaults[key]:
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be an object")
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    """Defaults merged with the JSON file at path (if any)."""
    if path is None:
        return json.loads(json.dumps(_DEFAULTS))
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    if raw.get("version") != 1:
        raise ConfigError(f"unsupported config version: {raw.get('version')!r}")
    return _merge(_DEFAULTS, raw)


def _model_config(cfg: dict) -> model.ModelConfig:
    m = cfg["model"]
    return model.ModelConfig(
        patch_dim=m["patch_dim"], embed_dim=m["embed_dim"],
        num_patches=m["num_patches"], seed=cfg["seed"],
    ).validate()


def _patch_spec(cfg: dict) -> PatchSpec:
    p = cfg["patch"]
    return PatchSpec(p["patch_h"], p["patch_w"], p["mask_ratio"])


def _corruption(cfg: dict) -> CorruptionConfig:
    c = cfg["corruption"]
    return CorruptionConfig(
        p=c["p"], motion_d=c["motion_d"],
        p_salt=c["p_salt"], p_pepper=c["p_pepper"],
    ).validate()


def _optimizer(cfg: dict) -> model.OptimizerConfig:
    o = cfg["optimizer"]
    return model.OptimizerConfig(
        eta_max=o["eta_max"], eta_min=o["eta_min"],
        warmup_rounds=o["warmup_rounds"],
        total_rounds=cfg["federation"]["total_rounds"],
    ).validate()


def _federation(cfg: dict, threads: int) -> fed.FederationConfig:
    f = cfg["federation"]
    return fed.FederationConfig(
        num_clients=f["num_clients"], total_rounds=f["total_rounds"],
        local_steps=f["local_steps"], opt=_optimizer(cfg), seed=cfg["seed"],
        parallel_clients=threads > 1, max_workers=max(1, threads),
    ).validate()


def _generate(cfg: dict) -> list[synth.LabeledSample]:
    s = cfg["synth"]
    base = synth.PhantomSpec(
        width=s["width"], height=s["height"],
        background_level=s["background_level"],
        speckle_strength=s["speckle_strength"],
    )
    lesion = s["lesion"]
    kwargs = {
        "intensity_delta": lesion["intensity_delta"],
        "irregularity_range": tuple(lesion["irregularity_range"]),
        "axis_range": tuple(lesion["axis_range"]),
        "malignant_delta": lesion["malignant_delta"],
    }
    return synth.generate_dataset(
        s["n"], tuple(s["class_mix"]), Rng(cfg["seed"]), base,
        lesion_kwargs=kwargs,
    )


def cmd_generate(cfg: dict, out_dir: Path) -> int:
    if not out_dir.parent.exists():
        raise OSError(f"parent of output directory does not exist: {out_dir}")
    out_dir.mkdir(exist_ok=True)
    dataset = _generate(cfg)
    records = []
    for i, sample in enumerate(dataset):
        write_pgm(sample.image, out_dir / f"img_{i:04d}.pgm")
        write_pgm(sample.lesion_mask * 255.0, out_dir / f"mask_{i:04d}.pgm")
        records.append({"index": i, "label": sample.label, "mode": sample.mode})
    (out_dir / "labels.json").write_text(
        json.dumps({"version": 1, "samples": records}, indent=1) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {len(dataset)} samples to {out_dir}")
    return EXIT_OK


def cmd_pretrain(cfg: dict, out_dir: Path, threads: int) -> int:
    if not out_dir.parent.exists():
        raise OSError(f"parent of output directory does not exist: {out_dir}")
    out_dir.mkdir(exist_ok=True)
    model_cfg = _model_config(cfg)
    fed_cfg = _federation(cfg, threads)
    dataset = _generate(cfg)
    clients = build_clients(
        dataset, fed_cfg.num_clients, cfg["federation"]["alpha"],
        model_cfg, _corruption(cfg), _patch_spec(cfg), cfg["seed"],
    )
    trace_path = out_dir / "loss_trace.csv"
    resume = cfg["resume_from"]
    if resume is not None:
        ckpt = fed.load_checkpoint(str(resume))
        if ckpt.model_cfg != model_cfg:
            raise ConfigError("checkpoint model config does not match run config")
        params, start_round = ckpt.params, ckpt.round_index
        if not trace_path.exists():
            raise OSError(f"resume requires an existing {trace_path}")
    else:
        params, start_round = model.init_params(model_cfg), 0
    final, trace = fed.run_pretraining(
        fed_cfg, model_cfg, clients, params, start_round=start_round
    )
    if not all(math.isfinite(row[1]) for row in trace):
        print("non-finite global loss", file=sys.stderr)
        return EXIT_NUMERIC
    rows = trace[1:] if resume is not None else trace
    with open(trace_path, "a" if resume is not None else "w",
              encoding="utf-8") as fh:
        if resume is None:
            fh.write("round,global_loss,eta\n")
        for rnd, loss, eta in rows:
            fh.write(f"{rnd},{loss!r},{eta!r}\n")
    fed.save_checkpoint(
        str(out_dir / cfg["checkpoint_name"]),
        fed.Checkpoint(model_cfg, fed_cfg, fed_cfg.total_rounds,
                       cfg["seed"], final),
    )
    print(f"pre-trained {fed_cfg.total_rounds} rounds; "
          f"final global loss {trace[-1][1]:.6f}")
    return EXIT_OK


def _load_labeled_dir(labeled_dir: Path) -> tuple[list[np.ndarray], np.ndarray, list[str]]:
    manifest = json.loads((labeled_dir / "labels.json").read_text(encoding="utf-8"))
    images, labels, modes = [], [], []
    for rec in manifest["samples"]:
        images.append(read_pgm(labeled_dir / f"img_{rec['index']:04d}.pgm"))
        labels.append(rec["label"])
        modes.append(rec["mode"])
    return images, np.array(labels, dtype=np.int64), modes


def cmd_finetune(cfg: dict, checkpoint: Path, labeled_dir: Path, out_dir: Path) -> int:
    if not out_dir.parent.exists():
        raise OSError(f"parent of output directory does not exist: {out_dir}")
    out_dir.mkdir(exist_ok=True)
    model_cfg = _model_config(cfg)
    ckpt = fed.load_checkpoint(str(checkpoint))
    if ckpt.model_cfg != model_cfg:
        raise ConfigError("checkpoint model config does not match run config")
    images, labels, _ = _load_labeled_dir(labeled_dir)
    patch = _patch_spec(cfg)
    feats = extract_features(ckpt.params, model_cfg, images, patch.patch_h, patch.patch_w)
    p = cfg["probe"]
    probe_cfg = ProbeConfig(
        num_classes=p["num_classes"], epochs=p["epochs"],
        val_fraction=p["val_fraction"],
        opt=model.OptimizerConfig(p["eta_max"], p["eta_min"],
                                  p["warmup_rounds"], p["epochs"]),
        seed=cfg["seed"],
    )
    result = train_probe(feats, labels, probe_cfg)
    scores = probe_scores(result.probe_params, feats, p["num_classes"])
    with open(out_dir / "scores.csv", "w", encoding="utf-8") as fh:
        fh.write("index,label,split," +
                 ",".join(f"p{c}" for c in range(p["num_classes"])) + "\n")
        val = set(int(i) for i in result.val_indices)
        for i, (row, label) in enumerate(zip(scores, labels)):
            split = "val" if i in val else "train"
            fh.write(f"{i},{label},{split}," +
                     ",".join(repr(float(v)) for v in row) + "\n")
    val_scores = scores[result.val_indices][:, 1] if p["num_classes"] == 2 else None
    report = {
        "version": 1,
        "val_accuracy": result.val_accuracy,
        "val_auroc": (metrics.auroc(val_scores, labels[result.val_indices])
                      if val_scores is not None else None),
    }
    np.save(out_dir / "probe_params.npy", result.probe_params)
    (out_dir / "finetune_report.json").write_text(
        json.dumps(report, indent=1) + "\n", encoding="utf-8")
    print(f"probe val accuracy {result.val_accuracy:.4f}")
    return EXIT_OK


def cmd_eval(pred_path: Path, gt_path: Path, out_path: Path) -> int:
    pred = read_pgm(pred_path) >= 127.5
    gt = read_pgm(gt_path) >= 127.5
    pred_pts = metrics.mask_points(pred)
    gt_pts = metrics.mask_points(gt)
    report = {
        "version": 1,
        "dsc": metrics.dsc(pred_pts, gt_pts),
        "hausdorff": (metrics.hausdorff(pred_pts, gt_pts)
                      if pred_pts and gt_pts else None),
        "mae": metrics.mae(pred.astype(np.float64), gt.astype(np.float64)),
    }
    out_path.write_text(json.dumps(report, indent=1) + "\n", encoding="utf-8")
    print(json.dumps(report))
    return EXIT_OK


def cmd_transform(cfg: dict, direction: str, in_path: Path, out_path: Path) -> int:
    img = read_pgm(in_path)
    h, w = img.shape
    geom = ScanGeometry.default_for(w, h)
    if direction == "linear-to-convex":
        out = smat.linear_to_convex(img, geom, w, h)
    elif direction == "convex-to-linear":
        out = smat.convex_to_linear(img, geom, w, h)
    else:
        raise ConfigError(f"unknown direction: {direction}")
    write_pgm(out, out_path)
    return EXIT_OK


def cmd_corrupt(cfg: dict, in_path: Path, out_path: Path) -> int:
    img = read_pgm(in_path)
    out = mixed_corrupt(img, _corruption(cfg), Rng(cfg["seed"]))
    write_pgm(out, out_path)
    return EXIT_OK


def cmd_mask_preview(cfg: dict, in_path: Path, out_path: Path) -> int:
    img = read_pgm(in_path)
    patch = _patch_spec(cfg)
    grid, part = apply_uim(
        img, _corruption(cfg), patch.patch_h, patch.patch_w,
        patch.mask_ratio, Rng(cfg["seed"]),
    )
    patches = grid.patches.copy()
    patches[np.asarray(part.masked, dtype=np.int64)] = 0.0
    preview = depatchify(
        PatchGrid(grid.patch_h, grid.patch_w, grid.rows, grid.cols, patches)
    )
    write_pgm(preview, out_path)
    sidecar = {
        "version": 1,
        "masked": [int(i) for i in part.masked],
        "visible": [int(i) for i in part.visible],
    }
    Path(str(out_path) + ".json").write_text(
        json.dumps(sidecar, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedmim",
        description="Deterministic federated masked-image-modeling pipeline "
                    "for ultrasound phantoms.",
    )
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override config seed")
    parser.add_argument("--threads", type=int, help="client worker cap")
    parser.add_argument("--out", default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", help="write a synthetic labeled dataset")
    sub.add_parser("pretrain", help="run federated pre-training")
    p = sub.add_parser("finetune", help="train a linear probe on a checkpoint")
    p.add_argument("checkpoint", help="checkpoint base path (no extension)")
    p.add_argument("labeled_dir", help="directory from `generate`")
    p = sub.add_parser("eval", help="compare prediction and truth masks")
    p.add_argument("pred"); p.add_argument("truth")
    p.add_argument("--report", default=None, help="metrics JSON path")
    p = sub.add_parser("transform", help="scanning-mode warp of one image")
    p.add_argument("direction", choices=["linear-to-convex", "convex-to-linear"])
    p.add_argument("input"); p.add_argument("output")
    p = sub.add_parser("corrupt", help="apply mixed corruption to one image")
    p.add_argument("input"); p.add_argument("output")
    p = sub.add_parser("mask-preview", help="texture-guided mask of one image")
    p.add_argument("input"); p.add_argument("output")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        threads = args.threads if args.threads is not None else cfg["threads"]
        if threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {threads}")
        out_dir = Path(args.out)
        if args.command == "generate":
            return cmd_generate(cfg, out_dir)
        if args.command == "pretrain":
            return cmd_pretrain(cfg, out_dir, threads)
        if args.command == "finetune":
            return cmd_finetune(cfg, Path(args.checkpoint),
                                Path(args.labeled_dir), out_dir)
        if args.command == "eval":
            report = Path(args.report) if args.report else Path(args.pred + ".metrics.json")
            return cmd_eval(Path(args.pred), Path(args.truth), report)
        if args.command == "transform":
            return cmd_transform(cfg, args.direction, Path(args.input), Path(args.output))
        if args.command == "corrupt":
            return cmd_corrupt(cfg, Path(args.input), Path(args.output))
        if args.command == "mask-preview":
            return cmd_mask_preview(cfg, Path(args.input), Path(args.output))
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FedmimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
