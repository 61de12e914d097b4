"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 internal
error. Failures print one JSON object on stderr, e.g.
``{"error": "NonFiniteSample", "exit_code": 2, "message": "..."}``.

File formats
------------
manifest (CSV, header required)
    ``path,format,sample_rate_hz[,action][,subject][,channel_subset][,channels]``.
    ``path`` is relative to the manifest; ``format`` is ``csv`` or
    ``raw_f32le``; ``channels`` lists labels separated by ``;`` (required for
    raw files); ``channel_subset`` names an entry of the config's
    ``channel_subsets``.
config (JSON)
    Keys of the pipeline configuration plus an optional ``channel_subsets``
    mapping of name to channel labels. ``$EMGTOKEN_CONFIG`` supplies a default.
reference labels (CSV)
    ``path,channel,segment_index,label``; ``path`` relative to the file.
tokens (CSV)
    ``channel,segment_index,token_id,token_letter``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .codebook import (
    KMeansCodebook,
    load_codebook,
    read_tokens_csv,
    save_codebook,
    tokenize_recording,
    train_codebook,
    write_tokens_csv,
)
from .config import PipelineConfig, load_config
from .consistency import compare_labelings
from .exceptions import EMGTokenError, InvalidConfig
from .features import FEATURE_NAMES, recording_features
from .quality import (
    TokenStatistics,
    dimension_reduction,
    encode_action,
    replication_pad,
    report_centroid_distances,
    similarity_score,
    token_statistics,
    transition_matrix,
)
from .recording import guess_format, load_recording, save_recording
from .selection import sweep_k
from .synth import generate, load_profile

CONFIG_ENV = "EMGTOKEN_CONFIG"


class UsageError(Exception):
    pass


class OutputLocked(EMGTokenError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- shared helpers ------------------------------------------------------------------


def _config(path):
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return PipelineConfig(), {}
    return load_config(path)


@contextmanager
def _locked(out):
    lock = Path(str(out).rstrip("/") + ".lock")
    lock.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLocked(f"{out} is locked by another run ({lock} exists)") from None
    os.close(fd)
    try:
        yield Path(out)
    finally:
        lock.unlink(missing_ok=True)


def _labels(text):
    return [s.strip() for s in text.replace(";", ",").split(",") if s.strip()] if text else None


def _load_input(args, path):
    fmt = args.format or guess_format(path)
    if args.sample_rate is None:
        raise UsageError("--sample-rate is required")
    return load_recording(path, fmt, args.sample_rate, _labels(args.labels))


def _pipeline_config(cb, override):
    if override is not None:
        return override
    if cb.config is None:
        return PipelineConfig(k_clusters=cb.k)
    return PipelineConfig.from_dict(cb.config)


def _codebook_and_config(args):
    cb = load_codebook(args.codebook)
    override = _config(args.config)[0] if (args.config or os.environ.get(CONFIG_ENV)) else None
    return cb, _pipeline_config(cb, override)


def read_manifest(path, subsets=None):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise EMGTokenError(f"cannot read manifest {path}: {exc}") from exc
    if not rows:
        raise EMGTokenError(f"manifest {path} has no entries")
    entries, seen = [], set()
    for i, row in enumerate(rows):
        try:
            rel, fmt, fs = row["path"], row["format"], float(row["sample_rate_hz"])
        except (KeyError, TypeError, ValueError) as exc:
            raise EMGTokenError(f"manifest row {i}: {exc}") from exc
        rec_path = (path.parent / rel).resolve()
        if rec_path in seen:
            raise EMGTokenError(f"manifest lists {rel} twice")
        seen.add(rec_path)
        subset = (row.get("channel_subset") or "").strip() or None
        if subset is not None and subset not in (subsets or {}):
            raise EMGTokenError(f"manifest row {i}: unknown channel subset {subset!r}")
        entries.append({
            "path": rec_path,
            "format": fmt.strip(),
            "sample_rate_hz": fs,
            "action": (row.get("action") or "").strip() or None,
            "subject": (row.get("subject") or "").strip() or None,
            "subset": subset,
            "channels": _labels(row.get("channels")),
        })
    return entries


def _entry_recording(entry, subsets):
    rec = load_recording(entry["path"], entry["format"], entry["sample_rate_hz"], entry["channels"])
    if entry["subset"]:
        rec = rec.select_channels(subsets[entry["subset"]])
    return rec


def _manifest_features(entries, cfg, subsets):
    """Feature tables of every manifest entry, in manifest order."""
    return [recording_features(_entry_recording(e, subsets), cfg) for e in entries]


def _write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v))


# -- commands ------------------------------------------------------------------------


def cmd_train(args):
    cfg, subsets = _config(args.config)
    entries = read_manifest(args.manifest, subsets)
    tables = _manifest_features(entries, cfg, subsets)
    X = np.vstack([t.values for t in tables])
    with _locked(args.out) as out:
        cb = train_codebook(X, cfg)
        save_codebook(cb, out)
    print(f"K={cb.k} SSE={cb.training_sse:.6f} iterations={cb.iterations_used} segments={len(X)}")


def cmd_tokenize(args):
    cb, cfg = _codebook_and_config(args)
    rec = _load_input(args, args.input)
    seqs = tokenize_recording(rec, cb, cfg)
    with _locked(args.out) as out:
        write_tokens_csv(seqs, out)
        if args.features_out:
            recording_features(rec, cfg).to_csv(args.features_out)
    n_tok = len(seqs[0])
    print(
        f"channels={rec.n_channels} samples={rec.n_samples} tokens_per_channel={n_tok} "
        f"dimension_reduction={dimension_reduction(n_tok, rec.n_samples):.6f}"
    )


def _read_reference(path):
    path = Path(path)
    ref = {}
    try:
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                key = ((path.parent / row["path"]).resolve(), row["channel"], int(row["segment_index"]))
                ref[key] = row["label"]
    except (OSError, KeyError, ValueError) as exc:
        raise EMGTokenError(f"cannot read reference labels {path}: {exc}") from exc
    return ref


def _fold_ids(entries, tables, n_folds):
    groups = [e["subject"] or str(e["path"]) for e in entries]
    order = list(dict.fromkeys(groups))
    if len(order) >= n_folds:
        fold_of = {g: i % n_folds for i, g in enumerate(order)}
        return [np.full(len(t), fold_of[g]) for g, t in zip(groups, tables)]
    # too few groups for group-wise folds: interleave segments
    offset, out = 0, []
    for t in tables:
        out.append((np.arange(len(t)) + offset) % n_folds)
        offset += len(t)
    return out


def cmd_select_k(args):
    if args.kmin < 2 or args.kmax < args.kmin or args.kmax > 26:
        raise UsageError(f"need 2 <= --kmin <= --kmax <= 26, got {args.kmin}..{args.kmax}")
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    cfg, subsets = _config(args.config)
    entries = read_manifest(args.manifest, subsets)
    tables = _manifest_features(entries, cfg, subsets)

    labels = None
    if args.reference:
        ref = {}
        for path in args.reference:
            ref.update(_read_reference(path))
        labels = []
        for e, t in zip(entries, tables):
            stride = cfg.stride_samples(e["sample_rate_hz"])
            lab = []
            for c, s in zip(t.channel, t.start_sample):
                key = (e["path"], t.channel_labels[c], int(s) // stride)
                if key not in ref:
                    raise EMGTokenError(f"no reference label for {key[0].name} {key[1]} segment {key[2]}")
                lab.append(ref[key])
            labels.append(np.array(lab))
    elif all(e["action"] for e in entries):
        labels = [np.full(len(t), e["action"]) for e, t in zip(entries, tables)]

    fold_ids = _fold_ids(entries, tables, args.folds)
    X = np.vstack([t.values for t in tables])
    fid = np.concatenate(fold_ids)
    folds = [X[fid == f] for f in range(args.folds)]
    if any(len(f) == 0 for f in folds):
        raise EMGTokenError("a fold is empty; use fewer folds")
    refs = None
    if labels is not None:
        y = np.concatenate(labels)
        refs = [y[fid == f] for f in range(args.folds)]
    rep = sweep_k(folds, refs, args.kmin, args.kmax, cfg)
    with _locked(args.out) as out:
        rep.to_csv(out)
        summary = out.with_name(out.stem + "_summary.csv")
        rep.summary_to_csv(summary)
    for a, k in enumerate(rep.k_values):
        pn = "" if rep.pnmi is None else f" pnmi={rep.pnmi_mean[a]:.6f}"
        print(f"K={k} sse={rep.sse_mean[a]:.6f}{pn}")
    if rep.pnmi is not None:
        print(f"best_k_by_pnmi={rep.best_k_by_pnmi()}")


def cmd_consistency(args):
    cfg, subsets = _config(args.config)
    train = np.vstack([t.values for t in _manifest_features(read_manifest(args.train_manifest, subsets), cfg, subsets)])
    test = np.vstack([t.values for t in _manifest_features(read_manifest(args.test_manifest, subsets), cfg, subsets)])

    def fit(X):
        return KMeansCodebook(cfg.k_clusters, cfg.kmeans_restarts, cfg.kmeans_max_iter,
                              cfg.kmeans_rel_tol, cfg.rng_seed).fit(X, config=cfg.to_dict())

    est_a = fit(train)
    est_b = fit(test)
    rep = compare_labelings(est_a.predict(test), est_b.labels_, cfg.k_clusters, args.tolerance)
    with _locked(args.out) as out:
        out.mkdir(parents=True, exist_ok=True)
        rep.confusion_to_csv(out / "confusion.csv", est_a.codebook_.alphabet)
        (out / "summary.txt").write_text(rep.summary_line() + "\n")
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")
        save_codebook(est_a.codebook_, out / "codebook_train.json")
        save_codebook(est_b.codebook_, out / "codebook_test.json")
    print(rep.summary_line())


def _action(args, path, cb, cfg, subset):
    rec = _load_input(args, path)
    if subset:
        rec = rec.select_channels(subset)
    return encode_action(tokenize_recording(rec, cb, cfg), cb.k)


def cmd_score(args):
    cb, cfg = _codebook_and_config(args)
    subset = None
    if args.channels:
        _, subsets = _config(args.config)
        subset = subsets.get(args.channels) or _labels(args.channels)
    a = _action(args, args.standard, cb, cfg, subset)
    b = _action(args, args.candidate, cb, cfg, subset)
    rep = similarity_score(a, b, cb.k)
    if args.out:
        with _locked(args.out) as out:
            rep.to_csv(out)
    print(
        f"dtw_distance={rep.dtw_distance:.6f} path_length={rep.path_length} "
        f"similarity={rep.similarity_percent:.2f}%"
    )


def cmd_stats(args):
    cb, cfg = _codebook_and_config(args)
    rec = _load_input(args, args.input)
    seqs = tokenize_recording(rec, cb, cfg)
    if args.pad_to:
        seqs = [replication_pad(s, args.pad_to) for s in seqs]
    header = ["channel", *TokenStatistics.column_names(cb.k), "degenerate"]
    rows = []
    for s in seqs:
        st = token_statistics(s, cb.k)
        rows.append([s.channel_label, *(_fmt(v) for v in st.as_vector()), int(st.degenerate)])
    with _locked(args.out) as out:
        _write_csv(out, header, rows)
    print(f"channels={len(seqs)} length={len(seqs[0])}")


def cmd_report(args):
    cb = load_codebook(args.codebook)
    letters = cb.alphabet
    with _locked(args.out) as out:
        out.mkdir(parents=True, exist_ok=True)
        raw = cb.denormalized_centroids()
        _write_csv(out / "centroid_features.csv", ["token", "letter", *FEATURE_NAMES],
                   [[k, letters[k], *(_fmt(v) for v in raw[k])] for k in range(cb.k)])
        d = report_centroid_distances(cb)
        _write_csv(out / "centroid_distances.csv", ["token", *letters],
                   [[letters[i], *(_fmt(v) for v in d[i])] for i in range(cb.k)])
        if args.tokens:
            seqs = []
            for p in sorted(Path(args.tokens).glob("*.csv")):
                seqs.extend(read_tokens_csv(p))
            if not seqs:
                raise EMGTokenError(f"no token CSV files in {args.tokens}")
            probs, empty = transition_matrix(seqs, cb.k)
            _write_csv(out / "transition_matrix.csv", ["from", *letters, "no_outgoing"],
                       [[letters[i], *(_fmt(v) for v in probs[i]), int(empty[i])] for i in range(cb.k)])
        (out / "codebook_config.json").write_text(json.dumps(cb.config, sort_keys=True, indent=1) + "\n")
    print(f"K={cb.k} report={out}")


def cmd_synth(args):
    prof = load_profile(args.profile)
    fs = args.sample_rate or prof.extras.get("sample_rate_hz")
    dur = args.duration_ms or prof.extras.get("duration_ms")
    if not fs or not dur:
        raise UsageError("sample rate and duration come from the profile or --sample-rate/--duration-ms")
    cfg, _ = _config(args.config)
    rec, levels = generate(prof, fs, dur)
    out = Path(args.out)
    fmt = args.format or guess_format(out)
    stem = out.with_suffix("")
    with _locked(out):
        save_recording(rec, out, fmt)
        _write_csv(f"{stem}.levels.csv", list(rec.channel_labels),
                   [[repr(float(v)) for v in row] for row in levels])
        # per-segment reference: index of the profile level at the window centre
        window, stride = cfg.window_samples(fs), cfg.stride_samples(fs)
        n_seg = (rec.n_samples - window) // stride + 1 if rec.n_samples >= window else 0
        rows = []
        for c, label in enumerate(rec.channel_labels):
            distinct = sorted(set(prof.channels[label].levels))
            for i in range(n_seg):
                lv = levels[i * stride + window // 2, c]
                rows.append([out.name, label, i, distinct.index(lv)])
        _write_csv(f"{stem}.reference.csv", ["path", "channel", "segment_index", "label"], rows)
    print(f"channels={rec.n_channels} samples={rec.n_samples} format={fmt}")


# -- parser --------------------------------------------------------------------------


def _add_input_flags(p):
    p.add_argument("--format", choices=["csv", "raw_f32le"],
                   help="recording format (default: csv for *.csv, else raw_f32le)")
    p.add_argument("--sample-rate", type=float, help="sampling rate in Hz (required)")
    p.add_argument("--labels", help="channel labels, comma separated (required for raw_f32le)")
    p.add_argument("--config", help=f"JSON config overriding the codebook's (default ${CONFIG_ENV})")


def build_parser():
    parser = _Parser(prog="emgtoken", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train and save a codebook from a manifest")
    p.add_argument("--manifest", required=True, help="manifest CSV of training recordings")
    p.add_argument("--config", help=f"JSON pipeline config (default ${CONFIG_ENV})")
    p.add_argument("--out", required=True, help="codebook JSON to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tokenize", help="write per-channel token CSV for one recording")
    p.add_argument("--codebook", required=True)
    p.add_argument("--input", required=True, help="recording file")
    p.add_argument("--out", required=True, help="tokens CSV: channel,segment_index,token_id,token_letter")
    p.add_argument("--features-out", help="optional feature matrix CSV")
    _add_input_flags(p)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("select-k", help="cross-validated SSE/PNMI sweep over K")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kmin", type=int, default=2)
    p.add_argument("--kmax", type=int, default=25)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--reference", nargs="+", action="extend", help="reference labels CSV(s): path,channel,segment_index,label "
                   "(default: manifest action column, else SSE only)")
    p.add_argument("--config", help=f"JSON pipeline config (default ${CONFIG_ENV})")
    p.add_argument("--out", required=True, help="per-fold CSV (K,fold,sse,pnmi); "
                   "a *_summary.csv is written beside it")
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser("consistency", help="train-set vs test-set clustering agreement")
    p.add_argument("--train-manifest", required=True)
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--config", help=f"JSON pipeline config (default ${CONFIG_ENV})")
    p.add_argument("--tolerance", type=int, default=1, help="token-rank tolerance (default 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("score", help="DTW similarity of a candidate to a standard execution")
    p.add_argument("--codebook", required=True)
    p.add_argument("--standard", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--channels", help="channel subset name from the config, or comma separated labels")
    p.add_argument("--out", help="optional report CSV")
    _add_input_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="token statistics per channel")
    p.add_argument("--codebook", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pad-to", type=int, help="replication-pad or truncate to this many tokens")
    _add_input_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="centroid features, centroid distances, transition matrix")
    p.add_argument("--codebook", required=True)
    p.add_argument("--tokens", help="directory of token CSV files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic recording from a profile")
    p.add_argument("--profile", required=True, help="INI activation profile")
    p.add_argument("--out", required=True, help="recording path; .levels.csv and .reference.csv beside it")
    p.add_argument("--format", choices=["csv", "raw_f32le"])
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--duration-ms", type=float)
    p.add_argument("--config", help="pipeline config for the reference segmentation")
    p.set_defaults(func=cmd_synth)
    return parser


def _fail(exc, code):
    msg = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    print(json.dumps(msg), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except UsageError as exc:
        return _fail(exc, 1)
    except (EMGTokenError, InvalidConfig, OSError) as exc:
        return _fail(exc, 2)
    except Exception as exc:  # noqa: BLE001
        return _fail(exc, 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
