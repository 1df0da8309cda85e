"""Command-line surface: featurize, enroll, detect, evaluate, count.

Exit codes are a stable scripting contract: 0 success, 1 usage error,
2 data or validation error.  All subcommands are deterministic given their
flags and ``--seed``; ``--format tsv`` emits one self-describing header line
then tab-separated rows with no localized number formatting.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ModelConfig, TAUS, VARIANTS
from .errors import DatasetError, EdgeSpotError
from .evaluate import (
    acc_at_far,
    auroc,
    enroll_store,
    episode_scores,
    make_episodes,
    Sample,
    summarize,
)
from .footprint import footprint, format_footprint
from .frontend import PcenParams, load_waveform, melspec, pcen
from .graph import embed
from .prototypes import (
    PrototypeStore,
    calibrate_threshold,
    detect,
    enroll,
    load_store,
    max_score,
    save_store,
)
from .weights import load_bundle, save_tensors


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _far_fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"FAR target must lie in (0, 1), got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="edgespot",
                  description="Few-shot keyword-spotting toolkit: features, "
                              "embeddings, prototypes, metrics, footprints.")
    top.add_argument("--seed", type=int, default=0,
                     help="seed for every random choice (default 0)")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="WAV to 40x101 feature container")
    p.add_argument("audio", help="mono 16 kHz WAV file")
    p.add_argument("-o", "--output", required=True, help="output container path")
    p.add_argument("--pcen", action="store_true",
                   help="apply energy normalization after the mel map")
    p.add_argument("--weights", help="bundle supplying normalization scalars")
    p.add_argument("--format", choices=("text", "tsv"), default="text")
    p.add_argument("--figures", metavar="DIR", help="also render PNG figures here")

    p = sub.add_parser("enroll", help="build a prototype store from keyword dirs")
    p.add_argument("root", help="directory with one subdirectory of WAVs per keyword")
    p.add_argument("--weights", required=True, help="weight bundle path")
    p.add_argument("-k", "--shots", type=int, default=5,
                   help="enrollment examples per keyword (default 5)")
    p.add_argument("-o", "--output", required=True, help="store file to write")
    p.add_argument("--threshold", type=float, default=0.5,
                   help="acceptance threshold stored with the prototypes")
    p.add_argument("--format", choices=("text", "tsv"), default="text")

    p = sub.add_parser("detect", help="score WAVs against a prototype store")
    p.add_argument("path", help="WAV file or directory of WAVs")
    p.add_argument("--store", required=True, help="prototype store path")
    p.add_argument("--weights", required=True, help="weight bundle path")
    p.add_argument("--threshold", type=float,
                   help="override the store threshold")
    p.add_argument("--far", type=_far_fraction,
                   help="calibrate the threshold to this FAR on --negatives")
    p.add_argument("--negatives", help="directory of negative WAVs for --far")
    p.add_argument("--format", choices=("text", "tsv"), default="text")

    p = sub.add_parser("evaluate", help="episodic open-set metrics on a dataset")
    p.add_argument("root", help="directory with one subdirectory of WAVs per label")
    p.add_argument("--weights", required=True, help="weight bundle path")
    p.add_argument("-k", "--shots", type=int, default=5)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--targets", type=int, default=11,
                   help="enrolled keywords per episode (default 11)")
    p.add_argument("--unknown", type=int, default=25,
                   help="unknown labels per episode (default 25)")
    p.add_argument("--far", type=_far_fraction, action="append",
                   help="FAR target, repeatable (default 0.01 and 0.05)")
    p.add_argument("--format", choices=("text", "tsv"), default="text")
    p.add_argument("--figures", metavar="DIR", help="also render PNG figures here")

    p = sub.add_parser("count", help="per-layer parameter and MAC accounting")
    p.add_argument("--variant", choices=VARIANTS, default="edgespot")
    p.add_argument("--tau", type=int, choices=TAUS, default=1)
    p.add_argument("--compare-paper", action="store_true",
                   help="append published reference totals and deviations")
    p.add_argument("--format", choices=("text", "tsv"), default="text")
    p.add_argument("--figures", metavar="DIR", help="also render PNG figures here")

    return top


def _require_path(path: str, kind: str) -> str:
    if not os.path.exists(path):
        raise DatasetError(f"{kind} not found: {path}")
    return path


def _wavs_in(directory: str) -> list:
    entries = [os.path.join(directory, n) for n in sorted(os.listdir(directory))
               if n.lower().endswith(".wav")]
    if not entries:
        raise DatasetError(f"no WAV files in {directory}")
    return entries


def _label_dirs(root: str) -> list:
    dirs = [(name, os.path.join(root, name)) for name in sorted(os.listdir(root))
            if os.path.isdir(os.path.join(root, name))]
    if not dirs:
        raise DatasetError(f"no per-label subdirectories in {root}")
    return dirs


def _embed_file(path: str, bundle) -> np.ndarray:
    return embed(melspec(load_waveform(path)), bundle)


def _cmd_featurize(args) -> int:
    _require_path(args.audio, "audio file")
    wave = load_waveform(args.audio)
    features = melspec(wave)
    if args.pcen:
        if args.weights:
            params = load_bundle(_require_path(args.weights, "weight bundle")).pcen
            if params is None:
                raise DatasetError("bundle carries no energy-normalization scalars")
        else:
            params = PcenParams()
        features = pcen(features, params)
    save_tensors(args.output, {"features": features})
    lo, hi = float(features.min()), float(features.max())
    if args.format == "tsv":
        print("path\tbands\tframes\tmin\tmax")
        print(f"{args.output}\t{features.shape[0]}\t{features.shape[1]}\t{lo:.6g}\t{hi:.6g}")
    else:
        kind = "pcen" if args.pcen else "mel"
        print(f"wrote {args.output}: {kind} map "
              f"{features.shape[0]}x{features.shape[1]}, range [{lo:.6g}, {hi:.6g}]")
    if args.figures:
        from .figures import figure_dir, save_feature_map

        out = os.path.join(figure_dir(args.figures), "features.png")
        save_feature_map(features, out, title=os.path.basename(args.audio))
        print(f"figure: {out}")
    return 0


def _cmd_enroll(args) -> int:
    _require_path(args.root, "enrollment root")
    bundle = load_bundle(_require_path(args.weights, "weight bundle"))
    if args.shots < 1:
        raise DatasetError(f"shots must be >= 1, got {args.shots}")
    store = PrototypeStore(threshold=args.threshold)
    rows = []
    for label, directory in _label_dirs(args.root):
        wavs = _wavs_in(directory)
        if len(wavs) < args.shots:
            raise DatasetError(
                f"keyword '{label}' has {len(wavs)} clips, needs K={args.shots}"
            )
        vecs = [_embed_file(w, bundle) for w in wavs[: args.shots]]
        proto = enroll(label, vecs)
        store.add(proto)
        rows.append((label, proto.shots, float(np.linalg.norm(proto.vector))))
    save_store(store, args.output)
    if args.format == "tsv":
        print("label\tshots\tnorm")
        for label, shots, norm in rows:
            print(f"{label}\t{shots}\t{norm:.6g}")
    else:
        for label, shots, norm in rows:
            print(f"enrolled {label}: {shots} shots, norm {norm:.6g}")
        print(f"wrote {args.output}: {len(rows)} prototypes, "
              f"threshold {store.threshold}")
    return 0


def _collect_audio(path: str) -> list:
    if os.path.isdir(path):
        return _wavs_in(path)
    return [path]


def _cmd_detect(args) -> int:
    _require_path(args.path, "audio path")
    store = load_store(_require_path(args.store, "prototype store"))
    bundle = load_bundle(_require_path(args.weights, "weight bundle"))
    if args.far is not None:
        if not args.negatives:
            raise DatasetError("--far needs --negatives to calibrate against")
        negs = _wavs_in(_require_path(args.negatives, "negatives directory"))
        neg_scores = [max_score(_embed_file(w, bundle), store) for w in negs]
        store.threshold = calibrate_threshold(neg_scores, args.far)
    elif args.threshold is not None:
        store.threshold = args.threshold
    if args.format == "tsv":
        print("path\tlabel\tscore\taccepted")
    for path in _collect_audio(args.path):
        d = detect(_embed_file(path, bundle), store)
        if args.format == "tsv":
            print(f"{path}\t{d.label}\t{d.score:.6f}\t{int(d.accepted)}")
        else:
            verdict = "accept" if d.accepted else "reject"
            print(f"{path}: {d.label} score {d.score:.4f} -> {verdict} "
                  f"(threshold {store.threshold:.4f})")
    return 0


def _cmd_evaluate(args) -> int:
    _require_path(args.root, "dataset root")
    bundle = load_bundle(_require_path(args.weights, "weight bundle"))
    fars = args.far or [0.01, 0.05]
    samples = []
    for label, directory in _label_dirs(args.root):
        for wav in _wavs_in(directory):
            samples.append(Sample(uid=os.path.relpath(wav, args.root), label=label,
                                  vector=_embed_file(wav, bundle)))
    episodes = make_episodes(samples, args.targets, args.unknown,
                             args.shots, args.trials, args.seed)
    acc = {far: [] for far in fars}
    aucs = []
    pooled_pos, pooled_neg = [], []
    mean_points = []
    for ep in episodes:
        store = enroll_store(ep)
        for far in fars:
            acc[far].append(acc_at_far(ep, store, far).rate)
        pos, neg = episode_scores(ep, store)
        aucs.append(auroc(pos, neg))
        pooled_pos.extend(pos)
        pooled_neg.extend(neg)
    summaries = [summarize(f"ACC@{far:g}", acc[far]) for far in fars]
    summaries.append(summarize("AUROC", aucs))
    if args.format == "tsv":
        print("metric\tmean\tstd\ttrials")
        for s in summaries:
            print(f"{s.name}\t{s.mean:.6f}\t{s.std:.6f}\t{s.count}")
    else:
        print(f"{len(episodes)} trials, K={args.shots}, "
              f"{args.targets} targets vs {args.unknown} unknown labels")
        for s in summaries:
            print(s.format())
    if args.figures:
        from .evaluate import DetPoint
        from .figures import figure_dir, save_score_hist, save_tradeoff

        outdir = figure_dir(args.figures)
        hist = os.path.join(outdir, "scores.png")
        save_score_hist(pooled_pos, pooled_neg, hist)
        for far in fars:
            mean_points.append(DetPoint(far=far, rate=float(np.mean(acc[far])),
                                        threshold=0.0))
        curve = os.path.join(outdir, "accuracy_vs_far.png")
        save_tradeoff(mean_points, curve)
        print(f"figures: {hist} {curve}")
    return 0


def _cmd_count(args) -> int:
    cfg = ModelConfig(args.variant, args.tau)
    print(format_footprint(cfg, fmt=args.format, compare=args.compare_paper))
    if args.figures:
        from .figures import figure_dir, save_footprint

        out = os.path.join(figure_dir(args.figures),
                           f"footprint_{cfg.variant}_{cfg.tau}.png")
        save_footprint(footprint(cfg), out, f"{cfg.variant}-{cfg.tau}")
        print(f"figure: {out}")
    return 0


_COMMANDS = {
    "featurize": _cmd_featurize,
    "enroll": _cmd_enroll,
    "detect": _cmd_detect,
    "evaluate": _cmd_evaluate,
    "count": _cmd_count,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EdgeSpotError as exc:
        print(f"edgespot: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"edgespot: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
