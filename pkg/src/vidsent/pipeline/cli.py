"""Command-line entry point: ``vidsent <subcommand> [--config FILE] [--section.key VALUE ...]``.

Exit status is 0 on success, 1 for usage or configuration errors, 2 for bad
input data and 3 for anything unexpected.  ``VIDSENT_LOG_LEVEL`` sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import commands
from .config import ConfigError, apply_override, load_config, override_keys
from .synth import SCENARIOS

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("vidsent")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    p = _Parser(prog="vidsent", description=__doc__.splitlines()[0],
                epilog="Any config key can be overridden as --section.key VALUE; "
                       "see --list-keys.")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--list-keys", action="store_true", help="print overridable config keys")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("track", help="detection stream -> track files")
    s.add_argument("streams", nargs="+", type=Path)
    s.add_argument("--out", type=Path, required=True, help="output directory")

    s = sub.add_parser("train-codebook", help="person tracks -> posture codebook")
    s.add_argument("tracks", nargs="+", type=Path)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("featurize", help="one track or an agent/patient pair -> feature file")
    s.add_argument("tracks", nargs="+", type=Path)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("train", help="labelled tracks -> codebook, HMM bank and statistics")
    s.add_argument("--manifest", type=Path, help="training manifest JSON")
    s.add_argument("--labels", nargs="+", type=Path,
                   help="per-video label files (instead of --manifest)")
    s.add_argument("--tracks", type=Path, help="track directory used with --labels")
    s.add_argument("--out", type=Path, required=True, help="output directory")

    s = sub.add_parser("describe", help="detection streams -> ranked sentences")
    s.add_argument("streams", nargs="+", type=Path)
    s.add_argument("--out", type=Path, required=True, help="JSON-lines sentence file")
    s.add_argument("--top-k", type=int, default=None)
    s.add_argument("--scores-out", type=Path, help="also write per-action scores")

    s = sub.add_parser("eval-roc", help="scores + labels -> ROC CSV")
    s.add_argument("--scores", type=Path, required=True)
    s.add_argument("--labels", nargs="+", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("synth", help="write synthetic detection streams with labels")
    s.add_argument("scenario", choices=sorted(SCENARIOS))
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--start", type=int, default=0, help="index of the first video")
    return p


def split_overrides(argv):
    """Separate ``--section.key VALUE`` (or ``--section.key=VALUE``) pairs from the rest."""
    rest, pairs = [], []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a.startswith("--") and "." in a.split("=", 1)[0]:
            key = a[2:]
            if "=" in key:
                key, value = key.split("=", 1)
            elif i + 1 < len(argv):
                value = argv[i + 1]
                i += 1
            else:
                raise UsageError(f"missing value for {a}")
            pairs.append((key, value))
        else:
            rest.append(a)
        i += 1
    return rest, pairs


def run(args, cfg):
    if args.command == "track":
        for p in args.streams:
            written = commands.cmd_track(cfg, p, args.out)
            print(f"{p}: {len(written)} track(s)")
    elif args.command == "train-codebook":
        cb = commands.cmd_train_codebook(cfg, args.tracks, args.out)
        print(f"codebook with {cb.k} entries -> {args.out}")
    elif args.command == "featurize":
        s = commands.cmd_featurize(cfg, args.tracks, args.out)
        print(f"{len(s.values)} frames x {len(s.schema.features)} features -> {args.out}")
    elif args.command == "train":
        manifest = args.manifest
        if manifest is None:
            if not args.labels or args.tracks is None:
                raise UsageError("train needs --manifest, or --labels with --tracks")
            args.out.mkdir(parents=True, exist_ok=True)
            manifest = args.out / "manifest.json"
            commands.manifest_from_labels(args.labels, args.tracks, manifest)
        for name, path in sorted(commands.cmd_train(cfg, manifest, args.out).items()):
            print(f"{name} -> {path}")
    elif args.command == "describe":
        recs = commands.cmd_describe(cfg, args.streams, args.out, args.top_k, args.scores_out)
        print(f"{len(recs)} sentence(s) -> {args.out}")
    elif args.command == "eval-roc":
        for action, auc in commands.cmd_eval(cfg, args.scores, args.labels, args.out).items():
            print(f"{action}\t{auc:.4f}")
    elif args.command == "synth":
        videos = commands.cmd_synth(cfg, args.scenario, args.count, args.out, args.seed,
                                    args.start)
        print(f"{len(videos)} video(s) -> {args.out}")


def main(argv=None):
    logging.basicConfig(level=os.environ.get("VIDSENT_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        rest, pairs = split_overrides(argv)
        args = build_parser().parse_args(rest)
        cfg = load_config(args.config)
        for key, value in pairs:
            apply_override(cfg, key, value)
        if args.list_keys:
            print("\n".join(override_keys(cfg)))
            return EXIT_OK
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        run(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:   # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
