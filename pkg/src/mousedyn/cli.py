"""Command line entry point: ``mousedyn <command> [options]``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import subprocess
import sys
import tarfile
import tempfile
import urllib.request
import zipfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig, load_config
from .evaluation import (
    Protocol,
    scenario_a_action,
    scenario_a_action_set,
    scenario_a_by_type,
    scenario_b,
    smoothing_experiment,
    train_user_models,
)
from .features import CATEGORICAL, FEATURE_NAMES
from .forest import build_user_dataset, train_forest
from .ingest import IngestError, MissingLabel, Role, load_corpus
from .pipeline import (
    feature_matrix,
    feature_table,
    per_user_matrices,
    rank_features,
    read_features,
    segment_sessions,
    write_features,
)
from .resampling import ResampleConfig, ResampleMethod
from .segmentation import ActionKind, action_type_histogram

log = logging.getLogger("mousedyn")


class CommandError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


# ---------------------------------------------------------------------------
# helpers


def _out_path(path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise CommandError("OutputExists", f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load(cfg: RunConfig, need_labels: bool):
    if cfg.data_root is None:
        raise CommandError("MissingDataRoot", "no --data-root given")
    root = Path(cfg.data_root)
    if not root.is_dir():
        raise CommandError("MissingDataRoot", f"{root} is not a directory")
    if need_labels and (cfg.labels_path is None or not Path(cfg.labels_path).is_file()):
        raise CommandError("MissingLabels", f"labels file {cfg.labels_path!r} not found")
    sessions = load_corpus(
        root,
        cfg.labels_path if cfg.labels_path and Path(cfg.labels_path).is_file() else None,
        max_x=cfg.max_x,
        max_y=cfg.max_y,
        strict=cfg.strict_tokens,
        unlabeled="skip" if cfg.skip_unlabeled else "error",
    )
    if not sessions:
        raise CommandError("EmptyCorpus", f"no sessions found under {root}")
    return sessions


def _select_part(sessions, part):
    if part == "all":
        return sessions
    if part == "training":
        return [s for s in sessions if s.role is Role.TRAINING]
    return [s for s in sessions if s.role is not Role.TRAINING]


def corpus_hash(root, labels=None) -> str:
    h = hashlib.sha256()
    root = Path(root)
    for f in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(f.relative_to(root)).encode())
        h.update(f.read_bytes())
    if labels and Path(labels).is_file():
        h.update(Path(labels).read_bytes())
    return h.hexdigest()


def git_describe() -> str:
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            cwd=Path(__file__).parent,
            timeout=10,
        )
        return res.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _dump_json(obj, path, force):
    p = _out_path(path, force)
    p.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return p


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _write_csv(df: pd.DataFrame, path, force):
    p = _out_path(path, force)
    df.to_csv(p, index=False, float_format="%.10g", lineterminator="\n")
    return p


def _write_roc(roc, path, force):
    df = pd.DataFrame(roc.rows(), columns=["threshold", "fpr", "tpr"])
    return _write_csv(df, path, force)


# ---------------------------------------------------------------------------
# commands


def cmd_fetch(cfg: RunConfig, args):
    """Download and unpack the corpus archive, checking its SHA-256."""
    dest = Path(args.out or cfg.data_root or "data")
    dest.mkdir(parents=True, exist_ok=True)
    lock = dest / "fetch.lock.json"
    expected = args.sha256
    if expected is None and lock.is_file():
        expected = json.loads(lock.read_text()).get("sha256")
    with tempfile.TemporaryDirectory() as tmp:
        archive = Path(tmp) / "archive"
        try:
            with urllib.request.urlopen(args.url, timeout=120) as resp, archive.open("wb") as fh:
                shutil.copyfileobj(resp, fh)
        except OSError as exc:
            raise CommandError("FetchFailed", f"{args.url}: {exc}") from None
        digest = hashlib.sha256(archive.read_bytes()).hexdigest()
        if expected is not None and digest != expected:
            raise CommandError("HashMismatch", f"expected sha256 {expected}, got {digest}")
        if zipfile.is_zipfile(archive):
            with zipfile.ZipFile(archive) as z:
                z.extractall(dest)
        elif tarfile.is_tarfile(archive):
            with tarfile.open(archive) as t:
                t.extractall(dest, filter="data")
        else:
            raise CommandError("BadArchive", "download is neither zip nor tar")
    lock.write_text(json.dumps({"url": args.url, "sha256": digest}, indent=2) + "\n")
    print(json.dumps({"fetched": args.url, "sha256": digest, "dest": str(dest)}))


def cmd_stats(cfg: RunConfig, args):
    sessions = _load(cfg, need_labels=False)
    seg = segment_sessions(sessions)
    rows = []
    for part in ("training", "test"):
        acts = [a for s, actions in seg for a in actions if (s.role is Role.TRAINING) == (part == "training")]
        if not acts:
            continue
        hist = action_type_histogram(acts)
        rows.append({"scope": part, "user_id": "", **_hist_cols(hist), "total": len(acts)})
        by_user = {}
        for a in acts:
            by_user.setdefault(a.user_id, []).append(a)
        for u in sorted(by_user):
            h = action_type_histogram(by_user[u])
            rows.append({"scope": part, "user_id": u, **_hist_cols(h), "total": len(by_user[u])})
    df = pd.DataFrame(rows)
    counts = {r.value: 0 for r in Role}
    for s in sessions:
        counts[s.role.value] += 1
    if args.out:
        _write_csv(df, args.out, cfg.force)
    else:
        sys.stdout.write(df.to_csv(index=False, float_format="%.2f", lineterminator="\n"))
    print(json.dumps({"sessions": counts}), file=sys.stderr)
    return df


def _hist_cols(h):
    out = {}
    for k in ActionKind:
        out[k.value] = h[k.value]["count"]
    for k in ActionKind:
        out[f"{k.value}_pct"] = round(h[k.value]["percent"], 2)
    return out


def cmd_segment(cfg: RunConfig, args):
    sessions = _select_part(_load(cfg, need_labels=args.part != "training"), args.part)
    rows = [
        (a.user_id, a.session_id, a.kind.value, a.n, repr(float(a.t[0])), repr(float(a.t[-1])))
        for _, actions in segment_sessions(sessions)
        for a in actions
    ]
    df = pd.DataFrame(rows, columns=["user_id", "session_id", "kind", "n_points", "start_t", "end_t"])
    if args.out:
        _write_csv(df, args.out, cfg.force)
    else:
        sys.stdout.write(df.to_csv(index=False, lineterminator="\n"))


def cmd_features(cfg: RunConfig, args):
    sessions = _select_part(_load(cfg, need_labels=args.part != "training"), args.part)
    df = feature_table(sessions, cfg.resample_config)
    if args.out:
        write_features(df, _out_path(args.out, cfg.force))
    else:
        write_features(df, sys.stdout)


def cmd_train(cfg: RunConfig, args):
    df = read_features(args.features)
    mats = per_user_matrices(df)
    data = build_user_dataset(mats, args.user, cfg.seed)
    model = train_forest(data, FEATURE_NAMES, CATEGORICAL, num_trees=cfg.trees, seed=cfg.seed, n_jobs=cfg.jobs)
    model.metadata.update({"config_hash": cfg.digest(), "features_file": Path(args.features).name})
    out = _out_path(args.out, cfg.force)
    model.save(out)
    print(json.dumps({"model": str(out), "user": args.user, "seed": cfg.seed, "trees": cfg.trees}))


def cmd_rank_features(cfg: RunConfig, args):
    if args.features:
        df = read_features(args.features)
    else:
        df = feature_table(_select_part(_load(cfg, need_labels=False), "training"))
    ranking = rank_features(df)
    out = pd.DataFrame(
        [(i + 1, n, g) for i, (n, g) in enumerate(ranking)], columns=["rank", "feature", "gain_ratio"]
    )
    if args.out:
        _write_csv(out, args.out, cfg.force)
    else:
        sys.stdout.write(out.to_csv(index=False, float_format="%.5f", lineterminator="\n"))
    return out


def _report_obj(cfg, report, **more):
    return {"seed": cfg.seed, "config_hash": cfg.digest(), "report": report.as_dict(), **more}


def cmd_run(cfg: RunConfig, args):
    """Run one experiment and write reports, ROC points and a manifest to --out."""
    scenario = cfg.scenario.upper()
    if scenario not in ("A", "B"):
        raise CommandError("BadConfig", f"scenario must be A or B, got {cfg.scenario!r}")
    protocol = cfg.protocol.lower()
    out = Path(cfg.output_dir)
    if out.exists() and any(out.iterdir()) and not cfg.force:
        raise CommandError("OutputExists", f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    force = True  # the directory was checked as a whole

    sessions = _load(cfg, need_labels=scenario == "B")
    seg = segment_sessions(sessions)
    common = dict(seed=cfg.seed, num_trees=cfg.trees, n_jobs=cfg.jobs)
    artifacts = []

    if scenario == "B" and protocol == "smoothing":
        cfgs = [ResampleConfig(cfg.hz, m) for m in ResampleMethod]
        results = smoothing_experiment(None, cfgs, segmented=seg, **common)
        rows = []
        for key, res in results.items():
            rows.append({"config": key, **res.report.as_dict()})
            artifacts.append(_write_roc(res.roc, out / f"roc_{key.split('@')[0]}.csv", force))
        artifacts.append(_write_csv(pd.DataFrame(rows), out / "smoothing.csv", force))
        artifacts.append(_dump_json({"seed": cfg.seed, "config_hash": cfg.digest(), "results": rows}, out / "report.json", force))
    else:
        df = feature_table(None, cfg.resample_config, segmented=seg)
        train_df = df[df["part"] == "training"]
        test_df = df[df["part"] == "test"]
        if scenario == "A":
            artifacts += _run_a(cfg, protocol, train_df, out, force, common)
        else:
            artifacts += _run_b(cfg, protocol, train_df, test_df, out, force, common)

    manifest = {
        "tool": "mousedyn",
        "version": __version__,
        "git_describe": git_describe(),
        "config": cfg.echo(),
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "corpus_sha256": corpus_hash(cfg.data_root, cfg.labels_path),
        "artifacts": sorted(p.name for p in artifacts),
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _dump_json(manifest, out / "manifest.json", force)
    print(json.dumps({"ok": True, "out": str(out), "artifacts": manifest["artifacts"]}))


def _run_a(cfg, protocol, train_df, out, force, common):
    arts = []
    if protocol == "action":
        table = scenario_a_action(train_df, folds=cfg.folds, **common)
        arts.append(_write_csv(table.to_frame(), out / "table_users.csv", force))
        arts.append(_write_roc(table.rocs["global"], out / "roc.csv", force))
        arts.append(_dump_json(_report_obj(cfg, table.extra["global"], mean=table.mean.as_dict()), out / "report.json", force))
    elif protocol in ("by-type", "by_type"):
        rows = []
        for kind in ActionKind:
            table = scenario_a_by_type(train_df, kind, folds=cfg.folds, **common)
            f = table.to_frame()
            f.insert(0, "kind", kind.value)
            rows.append(f)
        arts.append(_write_csv(pd.concat(rows), out / "table_by_type.csv", force))
    elif protocol.startswith("set") or protocol == "sets":
        kmax = Protocol.parse(protocol).k if protocol.startswith("set:") else 20
        res = scenario_a_action_set(train_df, range(1, kmax + 1), folds=cfg.folds, **common)
        df = pd.DataFrame(res, columns=["k", "auc", "eer"])
        arts.append(_write_csv(df, out / "table_sets.csv", force))
        arts.append(_dump_json({"seed": cfg.seed, "config_hash": cfg.digest(), "sets": res}, out / "report.json", force))
    else:
        raise CommandError("BadConfig", f"scenario A protocol must be action, by-type or set:<k>, not {protocol!r}")
    return arts


def _run_b(cfg, protocol, train_df, test_df, out, force, common):
    arts = []
    models = train_user_models(train_df, **common)
    if protocol == "sets":
        rows = []
        for k in range(1, 21):
            r = scenario_b(train_df, test_df, f"set:{k}", models=models, **common)
            rows.append({"k": k, "auc": r.report.auc, "eer": r.report.eer, "n_scores": r.report.n_positive + r.report.n_negative})
        arts.append(_write_csv(pd.DataFrame(rows), out / "table_sets.csv", force))
        return arts
    try:
        proto = Protocol.parse(protocol)
    except ValueError as exc:
        raise CommandError("BadConfig", str(exc)) from None
    res = scenario_b(train_df, test_df, proto, models=models, **common)
    arts.append(_write_roc(res.roc, out / "roc.csv", force))
    more = {}
    if res.table is not None:
        arts.append(_write_csv(res.table.to_frame(), out / "table_users.csv", force))
        more["mean"] = res.table.mean.as_dict()
    if res.session_scores is not None:
        arts.append(_write_csv(res.session_scores, out / "scores.csv", force))
    arts.append(_dump_json(_report_obj(cfg, res.report, **more), out / "report.json", force))
    return arts


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="TOML file with RunConfig keys")
    g.add_argument("--data-root", dest="data_root")
    g.add_argument("--labels", dest="labels_path")
    g.add_argument("--seed", type=int)
    g.add_argument("--trees", type=int)
    g.add_argument("--resample", choices=[m.value for m in ResampleMethod])
    g.add_argument("--hz", type=float)
    g.add_argument("--jobs", type=int)
    g.add_argument("--max-x", dest="max_x", type=int)
    g.add_argument("--max-y", dest="max_y", type=int)
    g.add_argument("--lenient-tokens", dest="strict_tokens", action="store_const", const=False)
    g.add_argument("--force", action="store_const", const=True)
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mousedyn", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", parents=[common], help="download the corpus archive")
    p.add_argument("--url", required=True)
    p.add_argument("--sha256")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("stats", parents=[common], help="action-type statistics per part and user")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    for name, func, help_ in (
        ("segment", cmd_segment, "one CSV row per action"),
        ("features", cmd_features, "feature CSV (39 features + user_id, session_id, genuine)"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--part", choices=["training", "test", "all"], default="training")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("train", parents=[common], help="train one user's forest from a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--user", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", parents=[common], help="run an evaluation scenario")
    p.add_argument("--scenario", choices=["A", "B", "a", "b"])
    p.add_argument("--protocol", help="action | set:<k> | session | sets | by-type | smoothing")
    p.add_argument("--folds", type=int)
    p.add_argument("--out", dest="output_dir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rank-features", parents=[common], help="gain-ratio feature ranking")
    p.add_argument("--features")
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank_features)
    return parser


CONFIG_KEYS = (
    "data_root", "labels_path", "seed", "trees", "resample", "hz", "jobs", "max_x", "max_y",
    "strict_tokens", "force", "scenario", "protocol", "folds", "output_dir",
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {k: getattr(args, k, None) for k in CONFIG_KEYS}
        if args.command != "run":
            overrides.pop("output_dir")
        cfg = load_config(args.config, **overrides)
        args.func(cfg, args)
    except CommandError as exc:
        print(json.dumps({"error": exc.code, "message": exc.message}), file=sys.stderr)
        return 1
    except (IngestError, ValueError, KeyError, OSError) as exc:
        code = "MissingLabels" if isinstance(exc, MissingLabel) else type(exc).__name__
        print(json.dumps({"error": code, "message": str(exc).strip("'\"")}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
