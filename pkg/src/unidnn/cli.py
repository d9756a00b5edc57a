"""Command-line entry point: ``unidnn <command> --config FILE --seed N``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .harness.classify import run_classifier_eval, write_accuracy_csv, write_confusion_csv
from .harness.config import NEURAL, dump_config, load_config
from .harness.imaging import load_image, run_image_demo, write_pgm
from .harness.pipeline import find_classifier, gen_datasets, load_bundles, train_all
from .harness.sweep import run_ber_sweep, write_ber_csv
from .harness.timing import run_timing, write_timing_csv

log = logging.getLogger("unidnn")


def _scenario(args):
    overrides = {"seed": args.seed, "work_dir": args.work_dir}
    if args.profile:
        overrides["profile"] = args.profile
    if getattr(args, "n_pilots", None):
        overrides["n_pilots"] = args.n_pilots
    scn = load_config(args.config, **overrides)
    scn.work_path.mkdir(parents=True, exist_ok=True)
    return scn


def cmd_gen_data(args):
    scn = _scenario(args)
    for name, ds in gen_datasets(scn).items():
        print(f"{name}: {ds.m} samples, {ds.labels.shape[1]} label bits")


def cmd_train(args):
    scn = _scenario(args)
    t0 = time.perf_counter()
    bundles = train_all(scn)
    (scn.work_path / f"np{scn.n_pilots}" / "config.yaml").write_text(dump_config(scn))
    print(f"trained {', '.join(bundles)} in {time.perf_counter() - t0:.0f}s")


def _bundles_for(scn, methods):
    if any(m in NEURAL for m in methods):
        return load_bundles(scn)
    return {}


def cmd_sweep(args):
    scn = _scenario(args)
    methods = args.methods.split(",") if args.methods else scn.methods
    channels = args.channels.split(",") if args.channels else None
    points = run_ber_sweep(scn, _bundles_for(scn, methods), methods, channels)
    out = Path(args.out or scn.work_path / f"ber_np{scn.n_pilots}.csv")
    write_ber_csv(points, out)
    for p in points:
        flag = " (bound)" if p.bound else ""
        print(f"{p.method:16s} {p.channel:9s} {p.snr_db:5.1f} dB  BER {p.ber:.3e}  bits {p.bits}{flag}")
    print(f"wrote {out}")


def cmd_classify_eval(args):
    scn = _scenario(args)
    bundle = find_classifier(load_bundles(scn))
    if bundle is None:
        raise SystemExit("no trained Uni-DNN bundle (and hence no classifier) found; run `train` first")
    mats = run_classifier_eval(scn, bundle)
    stem = scn.work_path / f"classifier_np{scn.n_pilots}"
    write_confusion_csv(mats, f"{stem}_confusion.csv")
    write_accuracy_csv(mats, f"{stem}_accuracy.csv", scn.classes)
    for snr, mat in mats.items():
        print(f"{snr:5.1f} dB  per-class accuracy {[round(float(mat[i, i]), 3) for i in range(len(mat))]}")
    print(f"wrote {stem}_confusion.csv and {stem}_accuracy.csv")


def cmd_image_demo(args):
    scn = _scenario(args)
    pixels = load_image(scn, args.image)
    methods = args.method.split(",")
    bundles = _bundles_for(scn, methods)
    channel = args.channel or scn.image_channel
    snr = None if args.noiseless else (args.snr if args.snr is not None else scn.image_snr)
    out_dir = Path(args.out or scn.work_path / "images")
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pgm(pixels, out_dir / "transmitted.pgm")
    for m in methods:
        image, ber = run_image_demo(pixels, m, snr, channel, scn, bundles)
        path = out_dir / f"{channel}_{m}_np{scn.n_pilots}.pgm"
        write_pgm(image, path)
        print(f"{m:16s} {channel} BER {ber:.3e} -> {path}")


def cmd_timing(args):
    scn = _scenario(args)
    bundles = load_bundles(scn) if not args.conventional_only else {}
    # all single-channel detectors share one shape; time just the first
    singles = [v for k, v in bundles.items() if k.startswith("Single-")]
    bundles = {k: v for k, v in bundles.items() if not k.startswith("Single-")}
    if singles:
        bundles = {"Single": singles[0], **bundles}
    report = run_timing(scn, bundles, n_trials=args.trials)
    out = Path(args.out or scn.work_path / f"timing_np{scn.n_pilots}.csv")
    write_timing_csv(report, out)
    for k, r in report.ratios().items():
        print(f"{k:8s} {report.seconds[k] * 1e6:9.2f} us  {r:8.1f} T_LS")
    print(f"wrote {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unidnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="YAML scenario file")
        p.add_argument("--seed", type=int, help="override the scenario seed (u64)")
        p.add_argument("--profile", choices=["full", "fast"], help="override the scenario profile")
        p.add_argument("--work-dir", help="override the scenario work_dir")
        p.add_argument("--n-pilots", type=int, choices=[8, 16, 32])
        p.add_argument("-v", "--verbose", action="store_true")
        p.set_defaults(func=fn)
        return p

    add("gen-data", cmd_gen_data, "simulate and write the training datasets")
    add("train", cmd_train, "train all configured neural receivers")
    p = add("sweep", cmd_sweep, "BER vs SNR for every method")
    p.add_argument("--methods", help="comma-separated method tags")
    p.add_argument("--channels", help="comma-separated channel classes (or Mixed)")
    p.add_argument("--out", help="CSV path")
    add("classify-eval", cmd_classify_eval, "channel-classifier confusion matrices per SNR")
    p = add("image-demo", cmd_image_demo, "send a grayscale image over the link")
    p.add_argument("--image", help="PGM input (a test pattern is used when omitted)")
    p.add_argument("--method", default="LS", help="comma-separated method tags")
    p.add_argument("--channel")
    p.add_argument("--snr", type=float)
    p.add_argument("--noiseless", action="store_true")
    p.add_argument("--out", help="output directory")
    p = add("timing", cmd_timing, "relative per-symbol inference run-time")
    p.add_argument("--trials", type=int)
    p.add_argument("--conventional-only", action="store_true")
    p.add_argument("--out", help="CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
