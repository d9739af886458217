"""Command-line pipeline: extract -> augment -> (train-toy | infer-toy | score).

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
``SELDKIT_THREADS`` caps how many clips are processed concurrently.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import augment as aug
from .codec import ACTIVITY_THRESHOLD, active_sets_to_tensor, annotations_to_active_sets, \
    decode_predictions, events_to_metadata
from .core import check_constants
from .errors import DataError, SeldError, TrainingError
from .features import FeatureStats, FeatureTensor, compute_stats, extract_features, standardize
from .io import atomic_write_text, read_foa_wav, read_metadata_csv, read_tensor, write_foa_wav, \
    write_metadata_csv, write_tensor
from .metrics import ScoreAccumulator, accumulate, report_to_json
from .toy import TrainConfig, forward, init_model, load_model, save_model, train

log = logging.getLogger("seldkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _threads():
    raw = os.environ.get("SELDKIT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"SELDKIT_THREADS must be an integer, got {raw!r}") from None


def _pmap(func, items):
    items = list(items)
    n = min(_threads(), len(items)) or 1
    if n == 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


def _stems(directory, suffix):
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"{d}: not a directory")
    return {p.name[:-len(suffix)]: p for p in sorted(d.iterdir()) if p.name.endswith(suffix)}


def _paired(a, b, what_a, what_b):
    missing_b = sorted(set(a) - set(b))
    missing_a = sorted(set(b) - set(a))
    if missing_a or missing_b:
        parts = []
        if missing_b:
            parts.append(f"no {what_b} for: {', '.join(missing_b)}")
        if missing_a:
            parts.append(f"no {what_a} for: {', '.join(missing_a)}")
        raise DataError("stem mismatch; " + "; ".join(parts))
    if not a:
        raise DataError(f"no {what_a} files found")
    return sorted(a)


# ---------------------------------------------------------------- score


def batch_score(pred_dir, ref_dir):
    """Micro-averaged report over all ``*.csv`` stems shared by the two directories."""
    preds = _stems(pred_dir, ".csv")
    refs = _stems(ref_dir, ".csv")
    acc = ScoreAccumulator()
    for stem in _paired(preds, refs, "prediction", "reference"):
        accumulate(read_metadata_csv(preds[stem]), read_metadata_csv(refs[stem]), acc)
    return acc.report()


def cmd_score(args):
    pred, ref = Path(args.pred), Path(args.ref)
    if pred.is_dir() and ref.is_dir():
        report = batch_score(pred, ref)
    elif pred.is_file() and ref.is_file():
        report = accumulate(read_metadata_csv(pred), read_metadata_csv(ref)).report()
    else:
        raise DataError("--pred and --ref must both be files or both be directories")
    text = report_to_json(report)
    atomic_write_text(args.out, text + "\n")
    print(text)


# ---------------------------------------------------------------- extract


def _load_or_compute_stats(path, tensors):
    if path is not None and Path(path).exists():
        return FeatureStats.from_json(Path(path).read_text(encoding="utf-8"))
    stats = compute_stats(tensors)
    if path is not None:
        atomic_write_text(path, stats.to_json())
    return stats


def cmd_extract(args):
    wavs = _stems(args.audio, ".wav")
    if not wavs:
        raise DataError(f"{args.audio}: no .wav files")
    stems = sorted(wavs)
    feats = _pmap(lambda s: extract_features(read_foa_wav(wavs[s])), stems)
    if args.stats is not None:
        stats = _load_or_compute_stats(args.stats, feats)
        feats = [standardize(f, stats) for f in feats]
    out = Path(args.out)
    for stem, f in zip(stems, feats):
        write_tensor(out / f"{stem}.tns", f.values, **f.header())
    log.info("extracted %d clips to %s", len(stems), out)


# ---------------------------------------------------------------- augment


def parse_ops(text):
    """Parse ``--ops`` into ``(acs_ids, noise_snr, mix, feature_ops)``."""
    acs_ids, snr, mix, feature_ops = None, None, False, []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        name, _, arg = tok.partition(":")
        if name == "acs":
            if arg == "all":
                acs_ids = list(range(8))
            else:
                try:
                    acs_ids = [aug.AcsTransform(int(arg)).id]
                except (ValueError, SeldError):
                    raise UsageError(f"bad ACS transform {arg!r}; use acs:all or acs:0..7") from None
        elif name == "noise":
            try:
                snr = float(arg)
            except ValueError:
                raise UsageError(f"noise needs an SNR in dB, e.g. noise:20 (got {tok!r})") from None
        elif name == "mix" and not arg:
            mix = True
        elif name in ("specaug", "cutout", "freqshift") and not arg:
            feature_ops.append(name)
        else:
            raise UsageError(f"unknown augmentation {tok!r}")
    return acs_ids, snr, mix, feature_ops


def _augment_clip(args, ops, index, stem, wav, csv, stats):
    acs_ids, snr, mix, feature_ops = ops
    clip, table = read_foa_wav(wav), read_metadata_csv(csv)
    variants = acs_ids if acs_ids is not None else [None]
    out = Path(args.out)
    for vi, t in enumerate(variants):
        if t is None:
            c, tab, name = clip, table, f"{stem}_aug"
        else:
            c, tab = aug.acs_transform(clip, table, t)
            name = f"{stem}_acs{t}"
        if snr is not None:
            c = aug.add_noise(c, snr, aug.derive_seed(args.seed, index, vi, 1))
        if mix:
            c, tab = aug.random_mix((c, tab), (clip, table), seed=aug.derive_seed(args.seed, index, vi, 2))
        write_foa_wav(out / f"{name}.wav", c)
        write_metadata_csv(tab, out / f"{name}.csv")
        if feature_ops:
            x = extract_features(c)
            if stats is not None:
                x = standardize(x, stats)
            for oi, op in enumerate(feature_ops):
                seed = aug.derive_seed(args.seed, index, vi, 3 + oi)
                if op == "specaug":
                    x = aug.spec_augment(x, seed)
                elif op == "cutout":
                    x = aug.random_cutout(x, seed)
                else:
                    x = aug.freq_shift(x, seed)
            write_tensor(out / f"{name}.tns", x.values, **x.header())
    return len(variants)


def cmd_augment(args):
    ops = parse_ops(args.ops)
    wavs = _stems(args.audio, ".wav")
    metas = _stems(args.meta, ".csv")
    stems = _paired(wavs, metas, "audio", "metadata")
    stats = None
    if args.stats is not None:
        stats = FeatureStats.from_json(Path(args.stats).read_text(encoding="utf-8"))
    counts = _pmap(lambda item: _augment_clip(args, ops, item[0], item[1], wavs[item[1]],
                                              metas[item[1]], stats), list(enumerate(stems)))
    log.info("wrote %d augmented clips to %s", sum(counts), args.out)


# ---------------------------------------------------------------- encode


def cmd_encode(args):
    if args.frames < 0:
        raise UsageError("--frames must be non-negative")
    table = read_metadata_csv(args.meta)
    sets = annotations_to_active_sets(table, args.frames)
    target = active_sets_to_tensor(sets)
    write_tensor(args.out, target, layout=["track", "class", "component", "frame"],
                 components=["x", "y", "z", "distance_m"], label_hop_ms=100.0)


# ---------------------------------------------------------------- toy model


def _load_features(path):
    values, _ = read_tensor(path)
    return FeatureTensor(values.astype(np.float64))


def cmd_train_toy(args):
    feats = _stems(args.features, ".tns")
    metas = _stems(args.meta, ".csv")
    stems = _paired(feats, metas, "features", "metadata")
    xs, sets = [], []
    for stem in stems:
        x = _load_features(feats[stem])
        xs.append(x)
        sets.append(annotations_to_active_sets(read_metadata_csv(metas[stem]), x.n_frames // 5))
    cfg = TrainConfig(lr=args.lr, epochs=args.epochs, seed=args.seed, dist_weight=args.dist_weight,
                      optimizer=args.optimizer)
    model, curve = train(init_model(args.hidden, args.seed), xs, sets, cfg)
    save_model(model, args.out)
    if len(curve):
        log.info("trained %d epochs: loss %.6g -> %.6g", len(curve), curve[0], curve[-1])
        print(f"final_loss {curve[-1]:.6g}")


def cmd_infer_toy(args):
    model = load_model(args.model)
    feats = _stems(args.features, ".tns")
    if not feats:
        raise DataError(f"{args.features}: no .tns files")
    out = Path(args.out)
    for stem in sorted(feats):
        pred = forward(model, _load_features(feats[stem]))
        if not np.all(np.isfinite(pred)):
            raise TrainingError(f"{feats[stem]}: model produced non-finite outputs")
        table = events_to_metadata(decode_predictions(pred, args.threshold))
        write_metadata_csv(table, out / f"{stem}.csv")


# ---------------------------------------------------------------- parser


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"{v} is not an unsigned 64-bit integer")
    return v


def build_parser():
    p = _Parser(prog="seldkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", help="compute 7x T x 64 feature tensors for every WAV")
    s.add_argument("--audio", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--stats", help="stats JSON; loaded if present, else computed and written")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("augment", help="write augmented clips, labels and features")
    s.add_argument("--audio", required=True)
    s.add_argument("--meta", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ops", required=True,
                   help="comma list: acs:all|acs:<id>, specaug, cutout, freqshift, noise:<snr>, mix")
    s.add_argument("--seed", type=_u64, required=True)
    s.add_argument("--stats", help="standardise features before feature-domain ops")
    s.set_defaults(func=cmd_augment)

    s = sub.add_parser("encode", help="write the multi-ACCDOA target tensor of a metadata file")
    s.add_argument("--meta", required=True)
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("score", help="score predictions against references")
    s.add_argument("--pred", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("train-toy", help="train the reference model through the ADPIT loss")
    s.add_argument("--features", required=True)
    s.add_argument("--meta", required=True)
    s.add_argument("--epochs", type=int, required=True)
    s.add_argument("--lr", type=float, required=True)
    s.add_argument("--seed", type=_u64, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--hidden", type=int, default=128)
    s.add_argument("--dist-weight", type=float, default=1.0)
    s.add_argument("--optimizer", choices=("sgd", "adam"), default="adam")
    s.set_defaults(func=cmd_train_toy)

    s = sub.add_parser("infer-toy", help="decode a trained model's predictions to metadata")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threshold", type=float, default=ACTIVITY_THRESHOLD)
    s.set_defaults(func=cmd_infer_toy)
    return p


def run(argv=None):
    """Run the CLI and return its exit code."""
    check_constants()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"seldkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"seldkit {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SeldError, OSError) as exc:
        print(f"seldkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())
