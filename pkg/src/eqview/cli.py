"""Command-line pipeline driver.

Subcommands wrap one pipeline stage each: ingest, audit, preprocess,
split, synth, train, evaluate, cam, stats, arch-info.  Exit codes:
0 success, 1 usage/config error, 2 data error.

Numpy-backed modules are imported lazily inside the handlers so that
``--threads`` can pin BLAS thread counts via environment variables
before numpy loads; ``--threads 1`` guarantees bit-reproducible runs.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


_CONFIG_SCHEMA = {
    "run": {"seed": int, "threads": int, "out": str},
    "augment": {"zoom_lo": float, "zoom_hi": float, "hist_points": int, "hist_mag": float},
    "train": {"epochs": int, "batch_size": int, "lr": float, "momentum": float,
              "blocks": str, "base_channels": int},
    "synth": {"sets": int, "side": int, "marker_prob": float, "redact_prob": float,
              "asymmetry": float, "noise_amp": float},
}


def _load_config(path: str | None) -> dict:
    """INI config as {section: {key: typed value}}; unknown keys fail fast."""
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError(f"config file not found: {path}")
    out: dict = {}
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise UsageError(f"unknown config section [{section}]")
        out[section] = {}
        for key, raw in parser[section].items():
            if key not in _CONFIG_SCHEMA[section]:
                raise UsageError(f"unknown config key {section}.{key}")
            try:
                out[section][key] = _CONFIG_SCHEMA[section][key](raw)
            except ValueError:
                raise UsageError(f"bad value for {section}.{key}: {raw!r}") from None
    return out


def _resolve(flag_value, config: dict, section: str, key: str, default):
    """Precedence: command-line flag > config file > default."""
    if flag_value is not None:
        return flag_value
    return config.get(section, {}).get(key, default)


def _build_parser() -> _Parser:
    parser = _Parser(prog="eqview", description=__doc__)
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None,
                        help="cap worker/BLAS threads (1 = bit-reproducible)")
    parser.add_argument("--out", default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="DICOM directory -> PGM images + metadata CSV")
    p.add_argument("--in", dest="input_dir", required=True)

    p = sub.add_parser("audit", help="set-completeness report from a metadata CSV")
    p.add_argument("--csv", required=True)

    p = sub.add_parser("preprocess", help="orient, square-pad and downsample images")
    p.add_argument("--csv", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--side", type=int, default=250)

    p = sub.add_parser("split", help="assign train/val/test per set")
    p.add_argument("--csv", required=True)
    p.add_argument("--counts", default=None, help="n_train,n_val,n_test")

    p = sub.add_parser("synth", help="generate a phantom corpus")
    p.add_argument("--sets", type=int, default=None)
    p.add_argument("--side", type=int, default=None)
    p.add_argument("--marker-prob", type=float, default=None)
    p.add_argument("--redact-prob", type=float, default=None)
    p.add_argument("--asymmetry", type=float, default=None)
    p.add_argument("--noise-amp", type=float, default=None)

    p = sub.add_parser("train", help="train the residual classifier")
    p.add_argument("--csv", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--blocks", default=None, help="residual blocks per stage, e.g. 1,1,1")
    p.add_argument("--base-channels", type=int, default=None)
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--zoom", default=None, help="zoom range lo,hi")
    p.add_argument("--hist-mag", type=float, default=None)

    p = sub.add_parser("evaluate", help="metrics report on the TEST split")
    p.add_argument("--csv", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("cam", help="class activation map overlays")
    p.add_argument("--csv", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, default=8)

    p = sub.add_parser("stats", help="marker/redaction association tests")
    p.add_argument("--predictions", required=True)

    p = sub.add_parser("arch-info", help="architecture parameter-count table")
    p.add_argument("--classes", type=int, default=1000)
    p.add_argument("--channels", type=int, default=3)

    return parser


def _out_dir(args, config) -> Path:
    out = _resolve(args.out, config, "run", "out", "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _seed(args, config) -> int:
    return _resolve(args.seed, config, "run", "seed", 0)


def _write(path: Path, data) -> None:
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data, encoding="utf-8")


def _cmd_arch_info(args, config) -> int:
    from .archzoo import zoo_parameter_table

    rows = zoo_parameter_table(args.classes, args.channels)
    lines = ["architecture,parameters,relative"]
    for name, count, ratio in rows:
        lines.append(f"{name},{count},{ratio:.2f}")
    text = "\n".join(lines) + "\n"
    out = _out_dir(args, config)
    _write(out / "arch_info.csv", text)
    sys.stdout.write(text)
    return 0


def _cmd_synth(args, config) -> int:
    from .dataset import records_to_csv
    from .imaging import write_pgm16
    from .synthgen import PhantomConfig, generate_corpus

    cfg = PhantomConfig(
        side=_resolve(args.side, config, "synth", "side", 250),
        marker_prob=_resolve(args.marker_prob, config, "synth", "marker_prob", 0.193),
        redact_prob=_resolve(args.redact_prob, config, "synth", "redact_prob", 0.262),
        asymmetry=_resolve(args.asymmetry, config, "synth", "asymmetry", 0.05),
        noise_amp=_resolve(args.noise_amp, config, "synth", "noise_amp", 0.02),
        seed=_seed(args, config),
    )
    n_sets = _resolve(args.sets, config, "synth", "sets", 10)
    out = _out_dir(args, config)
    records = generate_corpus(n_sets, cfg)
    images_dir = out / "images"
    for rec in records:
        path = images_dir / rec.record.file
        path.parent.mkdir(parents=True, exist_ok=True)
        _write(path, write_pgm16(rec.image))
    _write(out / "metadata.csv", records_to_csv([r.record for r in records]))
    sys.stdout.write(f"wrote {len(records)} images over {n_sets} sets to {out}\n")
    return 0


def _cmd_audit(args, config) -> int:
    from .dataset import audit_records, dataset_stats, records_from_csv

    records = records_from_csv(Path(args.csv).read_text(encoding="utf-8"))
    audits = audit_records(records)
    lines = ["set_id,status,n_missing,n_duplicated,missing,duplicated"]
    for audit in audits:
        lines.append(
            ",".join(
                [
                    audit.set_id,
                    audit.status.value,
                    str(len(audit.missing)),
                    str(len(audit.duplicated)),
                    "|".join(lb.render() for lb in audit.missing),
                    "|".join(lb.render() for lb in audit.duplicated),
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    out = _out_dir(args, config)
    _write(out / "audit.csv", text)
    stats = dataset_stats(records)
    if stats.rows:
        # Per-(label, split) marker/redaction distribution.
        stat_lines = ["label,split,count,marker_fraction,redaction_fraction"]
        for row in stats.rows:
            stat_lines.append(
                f"{row.label.render()},{row.split.value},{row.count},"
                f"{row.marker_fraction!r},{row.redaction_fraction!r}"
            )
        _write(out / "marker_stats.csv", "\n".join(stat_lines) + "\n")
    complete = sum(1 for a in audits if a.status.value == "COMPLETE")
    sys.stdout.write(f"{complete} sets complete, {len(audits) - complete} incomplete\n")
    return 0


def _cmd_split(args, config) -> int:
    from .dataset import apply_split, records_from_csv, records_to_csv, split_sets

    records = records_from_csv(Path(args.csv).read_text(encoding="utf-8"))
    set_ids = sorted({r.set_id for r in records})
    if args.counts:
        counts = tuple(int(x) for x in args.counts.split(","))
        if len(counts) != 3:
            raise UsageError("--counts needs n_train,n_val,n_test")
    else:
        # The reference 116/40/42 proportions of 198 sets.
        n = len(set_ids)
        n_train = round(n * 116 / 198)
        n_val = round(n * 40 / 198)
        counts = (n_train, n_val, n - n_train - n_val)
    assignment = split_sets(set_ids, counts, _seed(args, config))
    apply_split(records, assignment)
    out = _out_dir(args, config)
    _write(out / "metadata.csv", records_to_csv(records))
    sys.stdout.write(
        f"split {len(set_ids)} sets into {counts[0]}/{counts[1]}/{counts[2]}\n"
    )
    return 0


def _cmd_ingest(args, config) -> int:
    from . import dicom
    from .dataset import RadiographRecord, records_to_csv
    from .dataset import standardize_view_name
    from .imaging import write_pgm16
    from .taxonomy import UnknownLabel

    input_dir = Path(args.input_dir)
    if not input_dir.is_dir():
        raise UsageError(f"not a directory: {input_dir}")
    out = _out_dir(args, config)
    images_dir = out / "images"
    records = []
    rejects = ["file,reason"]
    files = sorted(input_dir.rglob("*.dcm"))
    for path in files:
        rel = path.relative_to(input_dir)
        set_id = rel.parts[0] if len(rel.parts) > 1 else "SET0"
        try:
            obj = dicom.parse_dicom(path.read_bytes())
            meta = dicom.extract_meta(obj)
            label = standardize_view_name(meta.raw_view)
            img = dicom.extract_pixels(obj)
        except (dicom.DicomError, UnknownLabel) as exc:
            rejects.append(f"{rel},{type(exc).__name__}: {exc}")
            continue
        rel_pgm = f"{set_id}/{label.render().replace(' ', '_')}.pgm"
        target = images_dir / rel_pgm
        target.parent.mkdir(parents=True, exist_ok=True)
        _write(target, write_pgm16(img))
        records.append(
            RadiographRecord(
                set_id=set_id,
                file=rel_pgm,
                raw_view=meta.raw_view,
                label=label,
            )
        )
    _write(out / "metadata.csv", records_to_csv(records))
    _write(out / "rejects.csv", "\n".join(rejects) + "\n")
    sys.stdout.write(
        f"ingested {len(records)} of {len(files)} files "
        f"({len(rejects) - 1} rejected)\n"
    )
    return 0


def _cmd_preprocess(args, config) -> int:
    from .dataset import records_from_csv, records_to_csv
    from .imaging import center_on_square, downsample_nn, orient, read_pgm16, write_pgm16

    records = records_from_csv(Path(args.csv).read_text(encoding="utf-8"))
    images_dir = Path(args.images)
    out = _out_dir(args, config)
    out_images = out / "images"
    for rec in records:
        img = read_pgm16((images_dir / rec.file).read_bytes())
        img = orient(img, rec.quarter_turns, rec.mirror)
        img = center_on_square(img)
        img = downsample_nn(img, args.side)
        target = out_images / rec.file
        target.parent.mkdir(parents=True, exist_ok=True)
        _write(target, write_pgm16(img))
        rec.quarter_turns = 0
        rec.mirror = False
    _write(out / "metadata.csv", records_to_csv(records))
    sys.stdout.write(f"preprocessed {len(records)} images to {args.side}x{args.side}\n")
    return 0


def _load_split_dataset(csv_path: str, images_dir: str, wanted_split):
    from . import taxonomy
    from .dataset import records_from_csv
    from .imaging import read_pgm16
    from .trainer import ImageDataset

    records = [
        r
        for r in records_from_csv(Path(csv_path).read_text(encoding="utf-8"))
        if r.split == wanted_split
    ]
    images = [read_pgm16((Path(images_dir) / r.file).read_bytes()) for r in records]
    labels = [taxonomy.class_index(r.label) for r in records]
    return records, ImageDataset(images, labels)


def _cmd_train(args, config) -> int:
    from .archzoo import build_mini_resnet
    from .augment import AugmentConfig
    from .dataset import Split
    from .trainer import TrainConfig, train

    seed = _seed(args, config)
    _, train_ds = _load_split_dataset(args.csv, args.images, Split.TRAIN)
    _, val_ds = _load_split_dataset(args.csv, args.images, Split.VAL)
    side = train_ds.images[0].width
    blocks = [int(x) for x in
              _resolve(args.blocks, config, "train", "blocks", "1,1,1").split(",")]
    base_channels = _resolve(args.base_channels, config, "train", "base_channels", 8)
    zoom = args.zoom or "1.0,1.0"
    zoom_lo, zoom_hi = (float(x) for x in zoom.split(","))
    augment = AugmentConfig(
        zoom_lo=_resolve(zoom_lo if args.zoom else None, config, "augment", "zoom_lo", zoom_lo),
        zoom_hi=_resolve(zoom_hi if args.zoom else None, config, "augment", "zoom_hi", zoom_hi),
        out_side=side,
        hist_points=_resolve(None, config, "augment", "hist_points", 3),
        hist_mag=_resolve(args.hist_mag, config, "augment", "hist_mag", 0.08),
        enabled=not args.no_augment,
    )
    out = _out_dir(args, config)
    cfg = TrainConfig(
        epochs=_resolve(args.epochs, config, "train", "epochs", 20),
        batch_size=_resolve(args.batch_size, config, "train", "batch_size", 32),
        lr=_resolve(args.lr, config, "train", "lr", 0.01),
        momentum=_resolve(args.momentum, config, "train", "momentum", 0.9),
        seed=seed,
        augment=augment,
        checkpoint_path=str(out / "best.ervc"),
    )
    model = build_mini_resnet(blocks, base_channels, side, 1, 48, init_seed=seed)
    model, history = train(model, train_ds, val_ds, cfg)
    from .engine import save_model

    save_model(model, str(out / "final.ervc"))
    _write(out / "history.jsonl", history.to_jsonl())
    _write(out / "history.csv", history.to_csv())
    _write(
        out / "model.json",
        json.dumps(
            {
                "stage_blocks": blocks,
                "base_channels": base_channels,
                "input_side": side,
                "input_channels": 1,
                "num_classes": 48,
                "init_seed": seed,
            },
            indent=2,
        )
        + "\n",
    )
    sys.stdout.write(
        f"trained {cfg.epochs} epochs; best val top-1 {history.best_val_acc:.4f} "
        f"at epoch {history.best_epoch}\n"
    )
    return 0


def _load_model(checkpoint: str):
    from .archzoo import build_mini_resnet
    from .engine import load_model

    config_path = Path(checkpoint).parent / "model.json"
    if not config_path.exists():
        raise UsageError(f"model config not found next to checkpoint: {config_path}")
    spec = json.loads(config_path.read_text(encoding="utf-8"))
    model = build_mini_resnet(
        spec["stage_blocks"], spec["base_channels"], spec["input_side"],
        spec["input_channels"], spec["num_classes"], init_seed=spec.get("init_seed", 0),
    )
    load_model(model, checkpoint)
    return model


def _cmd_evaluate(args, config) -> int:
    import csv as _csv
    import io

    from . import taxonomy
    from .dataset import Split
    from .metrics import build_report, confusion, confusion_to_csv
    from .trainer import evaluate

    records, test_ds = _load_split_dataset(args.csv, args.images, Split.TEST)
    model = _load_model(args.checkpoint)
    preds, scores = evaluate(model, test_ds)
    report = build_report(preds, test_ds.labels, scores)
    cm = confusion(preds, test_ds.labels)
    out = _out_dir(args, config)
    _write(out / "metrics.json", report.to_json() + "\n")
    _write(out / "confusion.csv", confusion_to_csv(cm))
    # Heat-map raster of the confusion matrix (counts stretched to 16 bit).
    import numpy as np

    from .imaging import Image16, write_pgm16

    peak = max(int(cm.max()), 1)
    heat = (cm.astype(np.float64) / peak * 65535.0).astype(np.uint16)
    _write(out / "confusion.pgm", write_pgm16(Image16(heat)))
    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["file", "label", "predicted", "correct", "has_marker", "redacted"])
    for rec, pred in zip(records, preds):
        writer.writerow(
            [
                rec.file,
                rec.label.render(),
                taxonomy.label_from_index(int(pred)).render(),
                int(taxonomy.class_index(rec.label) == int(pred)),
                int(rec.has_marker),
                int(rec.redacted),
            ]
        )
    _write(out / "predictions.csv", buf.getvalue())
    sys.stdout.write(
        f"test top-1 {report.top1:.4f}, collapsed {report.collapsed_top1:.4f}\n"
    )
    return 0


def _cmd_cam(args, config) -> int:
    from . import taxonomy
    from .cam import cam_grid_to_csv, compute_cam, overlay_to_ppm
    from .dataset import Split
    from .augment import eval_sample
    from .imaging import Image16
    import numpy as np

    records, test_ds = _load_split_dataset(args.csv, args.images, Split.TEST)
    model = _load_model(args.checkpoint)
    out = _out_dir(args, config)
    cam_dir = out / "cam"
    cam_dir.mkdir(parents=True, exist_ok=True)
    count = min(args.count, len(records))
    for i in range(count):
        rec = records[i]
        view = eval_sample(test_ds.images[i], model.input_side)
        batch = view[None, None, :, :].astype(model.parameters()[0][1].data.dtype)
        if model.input_channels == 3:
            batch = np.repeat(batch, 3, axis=1)
        cam_map = compute_cam(model, batch, taxonomy.class_index(rec.label))
        display = Image16(
            np.clip(np.rint(view * 65535), 0, 65535).astype(np.uint16)
        )
        stem = rec.file.replace("/", "_").removesuffix(".pgm")
        _write(cam_dir / f"{stem}.ppm", overlay_to_ppm(cam_map, display))
        _write(cam_dir / f"{stem}.csv", cam_grid_to_csv(cam_map))
    sys.stdout.write(f"wrote {count} CAM overlays to {cam_dir}\n")
    return 0


def _cmd_stats(args, config) -> int:
    import csv as _csv

    from .stats import (
        ContingencyTable2x2,
        association_by_label,
        association_to_csv,
        chi2_sf,
        chi2_statistic,
        format_p_value,
        phi_coefficient,
    )
    from .taxonomy import parse_label

    rows = list(_csv.DictReader(Path(args.predictions).read_text(encoding="utf-8").splitlines()))
    if not rows:
        raise UsageError("empty predictions CSV")
    records = [
        (parse_label(r["label"]), r["has_marker"] == "1", r["correct"] == "1")
        for r in rows
    ]
    out = _out_dir(args, config)
    _write(out / "association.csv", association_to_csv(association_by_label(records)))

    aggregates = {}
    for flag_name, key in (("side_marker", "has_marker"), ("redaction", "redacted")):
        a = sum(1 for r in rows if r[key] == "1" and r["correct"] == "1")
        b = sum(1 for r in rows if r[key] == "1" and r["correct"] == "0")
        c = sum(1 for r in rows if r[key] == "0" and r["correct"] == "1")
        d = sum(1 for r in rows if r[key] == "0" and r["correct"] == "0")
        table = ContingencyTable2x2(a, b, c, d)
        if min(table.marginals) == 0:
            aggregates[flag_name] = {"table": [a, b, c, d], "degenerate": True}
            continue
        stat = chi2_statistic(table, yates_correction=True)
        aggregates[flag_name] = {
            "table": [a, b, c, d],
            "n": table.total,
            "chi2_yates": stat,
            "p_value": format_p_value(chi2_sf(stat, 1)),
            "phi": phi_coefficient(table),
        }
    _write(out / "stats.json", json.dumps(aggregates, indent=2) + "\n")
    sys.stdout.write(f"wrote association tables to {out}\n")
    return 0


_HANDLERS = {
    "arch-info": _cmd_arch_info,
    "audit": _cmd_audit,
    "cam": _cmd_cam,
    "evaluate": _cmd_evaluate,
    "ingest": _cmd_ingest,
    "preprocess": _cmd_preprocess,
    "split": _cmd_split,
    "stats": _cmd_stats,
    "synth": _cmd_synth,
    "train": _cmd_train,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        threads = _resolve(args.threads, config, "run", "threads", None)
        if threads is not None:
            for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                        "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
                os.environ[var] = str(threads)
        return _HANDLERS[args.command](args, config)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"data error: missing file {exc.filename}\n")
        return 2
    except (ValueError, RuntimeError, TypeError) as exc:
        sys.stderr.write(f"data error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
