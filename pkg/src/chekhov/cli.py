"""Command-line entry point: ``chekhov <stage> [options]``.

Stages: walk, probe, build-corpus, export-bio, train-baseline, predict, eval,
sweep, analyze, stats. Options may also come from ``--config FILE`` (plain
``key = value`` lines); command-line flags win.

Exit codes: 0 success, 1 partial failure, 2 usage/config/input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shlex
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from . import manifest as mf
from .baseline import Lexicon, apply_threshold, lexicon_tagger, predict, predict_records, train_lexicon
from .candidates import load_stopwords
from .corpus import (
    CgifRecord,
    CorpusFormatError,
    corpus_stats,
    extract_action_targets,
    parse_clubfloyd,
    parse_tripod,
    read_cgif,
    read_ner,
    read_predictions,
    split_corpus,
    to_bio,
    write_cgif,
    write_conll,
    write_predictions,
)
from .engine import EngineError, SessionConfig, StoryRef, detect_nondeterminism, open_session
from .evaluation import (
    at_overlap,
    category_ratios,
    format_eval_report,
    format_matrix,
    format_overlap,
    format_profile,
    format_ratio_table,
    group_spans_by_doc,
    occurrence_matrix,
    profile_csv,
    span_metrics,
    turning_point_profile,
)
from .explorer import (
    LocationRecord,
    Walkthrough,
    WalkConfig,
    execute_walkthrough,
    merge_location_sets,
    random_walk,
    read_locations,
    write_locations,
)
from .probe import TrivialityPatternSet, label_location
from .textutil import byte_slice

log = logging.getLogger("chekhov")

ENGINE_ENV = "CHEKHOV_ENGINE"
STORY_SUFFIXES = {".z1", ".z2", ".z3", ".z4", ".z5", ".z6", ".z7", ".z8", ".zblorb", ".zlb", ".ulx", ".gblorb", ".blb"}
LOCATIONS = "locations.jsonl"
PARTIAL = "probe.partial.jsonl"
CGIF = "cgif.jsonl"
AUDIT = "audit.jsonl"

DEFAULTS = {
    "steps": 2500,
    "seed": 0,
    "jobs": 1,
    "direction_bias": 0.8,
    "max_moves": 20_000,
    "timeout": 10.0,
    "ratios": "0.8,0.1,0.1",
    "alpha": 1.0,
    "threshold": 0.5,
    "thresholds": "0.5,0.65,0.8,0.95",
    "mode": "all",
    "region": "sentence",
}


OUT_DEFAULTS = {
    "walk": "out",
    "probe": "out",
    "build-corpus": "out/corpus",
    "export-bio": "out/corpus.conll",
    "train-baseline": "out/lexicon.json",
    "predict": "out/predictions.jsonl",
    "eval": "out/eval",
    "sweep": "out/sweep",
    "analyze": "out/analysis",
    "stats": None,
}


class UsageError(Exception):
    """Bad configuration or input; maps to exit code 2."""


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def _read_config(path: str) -> dict[str, str]:
    conf = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        conf[key.strip().replace("-", "_")] = value.strip()
    return conf


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    conf = _read_config(args.config) if args.config else {}
    defaults = {**DEFAULTS, "out": OUT_DEFAULTS[args.command]}
    for action in parser._actions:
        dest = action.dest
        if dest in ("help", "config", "command", "func") or getattr(args, dest, None) is not None:
            continue
        if dest in conf:
            raw = conf[dest]
            try:
                if isinstance(action, argparse._StoreTrueAction):
                    value = raw.lower() in ("1", "true", "yes", "on")
                else:
                    value = action.type(raw) if action.type else raw
                setattr(args, dest, value)
            except ValueError as exc:
                raise UsageError(f"config value for {dest}: {exc}") from exc
        elif dest in defaults:
            setattr(args, dest, defaults[dest])


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def _need_file(path: str | None, what: str) -> Path:
    if not path:
        raise UsageError(f"missing {what}")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _read_jsonl_file(path: Path, reader: Callable):
    with open(path, encoding="utf-8") as fh:
        try:
            return reader(fh)
        except CorpusFormatError as exc:
            raise UsageError(f"{path}:{exc.lineno}: {exc}") from exc
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from exc


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _game_seed(seed: int, game_id: str) -> int:
    return int(hashlib.sha256(f"{seed}:{game_id}".encode()).hexdigest()[:8], 16)


def _engine_command() -> tuple[str, ...] | None:
    value = os.environ.get(ENGINE_ENV)
    return tuple(shlex.split(value)) if value else None


def _session_config(story_path: str, seed: int, args) -> SessionConfig:
    engine = None if story_path.endswith(".world") else _engine_command()
    return SessionConfig(rng_seed=seed, max_moves=args.max_moves, command_timeout=args.timeout, engine_command=engine)


def _discover_games(games_dir: str) -> list[Path]:
    root = Path(games_dir)
    if not root.is_dir():
        raise UsageError(f"games directory not found: {games_dir}")
    suffixes = {".world"} | (STORY_SUFFIXES if _engine_command() else set())
    games = sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() in suffixes)
    stems = [p.stem for p in games]
    dupes = {s for s in stems if stems.count(s) > 1}
    if dupes:
        raise UsageError(f"duplicate game ids: {sorted(dupes)}")
    return games


def _map(jobs: int, fn, items):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- walk --------------------------------------------------------------------


def cmd_walk(args) -> int:
    if not args.games:
        raise UsageError("walk needs --games DIR")
    games = _discover_games(args.games)
    if not games:
        raise UsageError(f"no story files in {args.games}")
    try:
        WalkConfig(steps=args.steps, direction_bias=args.direction_bias)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    stopwords = load_stopwords(args.stopwords)
    out = Path(args.out)
    config = {
        "games": args.games,
        "walkthroughs": args.walkthroughs,
        "steps": args.steps,
        "seed": args.seed,
        "direction_bias": args.direction_bias,
        "max_moves": args.max_moves,
        "stopwords": args.stopwords,
    }
    manifest = mf.RunManifest.new(config)

    def explore(path: Path):
        seed = _game_seed(args.seed, path.stem)
        try:
            story = StoryRef.from_path(path)
            cfg = _session_config(str(path), seed, args)
            wt_path = Path(args.walkthroughs) / f"{story.game_id}.txt" if args.walkthroughs else None
            found = []
            if wt_path is not None and wt_path.is_file():
                with open_session(story, cfg) as session:
                    found.append(execute_walkthrough(session, Walkthrough.from_file(wt_path, story.game_id)))
            # the random walk also runs for solved games, reaching rooms off the critical path
            walk_cfg = WalkConfig(steps=args.steps, rng_seed=seed, direction_bias=args.direction_bias)
            with open_session(story, cfg) as session:
                found.append(random_walk(session, walk_cfg, stopwords))
            return story, merge_location_sets(*found), None
        except (EngineError, ValueError, OSError) as exc:
            return None, [], f"{type(exc).__name__}: {exc}"

    results = _map(args.jobs, explore, games)
    all_records: list[list[LocationRecord]] = []
    for path, (story, records, error) in zip(games, results):
        manifest.add_game(path.stem, story=str(path), checksum=story.checksum if story else None)
        if error:
            log.warning("%s: exploration failed: %s", path.stem, error)
            manifest.set_status(path.stem, mf.FAILED, error)
            continue
        manifest.set_status(path.stem, mf.EXPLORED)
        manifest.games[path.stem]["locations"] = len(records)
        all_records.append(records)
    merged = merge_location_sets(*all_records)
    manifest.counters["locations"] = len(merged)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / LOCATIONS, "w", encoding="utf-8") as fh:
        write_locations(merged, fh)
    for stale in (PARTIAL, CGIF, AUDIT):
        (out / stale).unlink(missing_ok=True)
    manifest.save(out)
    explored = sum(g["status"] == mf.EXPLORED for g in manifest.games.values())
    print(f"explored {explored}/{len(games)} games, {len(merged)} locations -> {out / LOCATIONS}")
    # per-game failures are recorded in the manifest; the stage only fails outright
    return 0 if explored else 1


# -- probe -------------------------------------------------------------------


def _location_id(game_id: str, loc: dict) -> str:
    return f"{game_id}::{loc['room_name']}::{loc['body_digest']}"


def cmd_probe(args) -> int:
    out = Path(args.out)
    if not (out / mf.MANIFEST).is_file() or not (out / LOCATIONS).is_file():
        raise UsageError(f"no location manifest in {out}; run `walk` first")
    manifest = mf.RunManifest.load(out)
    records = _read_jsonl_file(out / LOCATIONS, read_locations)
    try:
        patterns = TrivialityPatternSet.from_file(args.patterns) if args.patterns else TrivialityPatternSet.builtin()
        stopwords = load_stopwords(args.stopwords)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc

    done: dict[str, dict] = {}
    partial = out / PARTIAL
    if partial.exists():
        with open(partial, encoding="utf-8") as fh:
            for line in fh:
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from an interrupted run
                done[_location_id(entry["game_id"], entry["record"]["location_key"])] = entry

    by_game: dict[str, list[LocationRecord]] = {}
    for rec in records:
        by_game.setdefault(rec.game_id, []).append(rec)
    lock = threading.Lock()

    def work(game_id: str):
        info = manifest.games.get(game_id)
        if info is None or info["status"] != mf.EXPLORED:
            return game_id, None, None
        todo = [r for r in by_game[game_id] if _location_id(game_id, r.location.to_dict()) not in done]
        try:
            # pin the checksum recorded at walk time so an edited story fails loudly
            story = StoryRef(game_id, Path(info["story"]), info["checksum"])
            cfg = _session_config(info["story"], _game_seed(manifest.config["seed"], game_id), args)
            already = len(todo) < len(by_game[game_id])
            if not already:
                for rec in by_game[game_id]:
                    if detect_nondeterminism(story, cfg, rec.prefix):
                        return game_id, mf.NONDETERMINISTIC, None
            with open_session(story, cfg) as session:
                for rec in todo:
                    ann = label_location(session, rec, patterns, stopwords)
                    entry = {
                        "game_id": game_id,
                        "record": CgifRecord(
                            game_id, rec.location, rec.description, tuple(ann.spans), rec.discovered_by
                        ).to_dict(),
                        "evidence": [r.to_dict() for r in ann.evidence],
                        "dropped": [list(s) for s in ann.dropped],
                    }
                    with lock:
                        with open(partial, "a", encoding="utf-8") as fh:
                            fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
                        done[_location_id(game_id, entry["record"]["location_key"])] = entry
        except (EngineError, OSError) as exc:
            return game_id, mf.FAILED, f"{type(exc).__name__}: {exc}"
        return game_id, mf.PROBED, None

    for game_id, status, error in _map(args.jobs, work, list(manifest.games)):
        if status is not None:
            manifest.set_status(game_id, status, error)
            manifest.save(out)

    cgif, audit = [], []
    probes = errors = 0
    for rec in records:
        if manifest.games.get(rec.game_id, {}).get("status") != mf.PROBED:
            continue
        entry = done[_location_id(rec.game_id, rec.location.to_dict())]
        cgif.append(CgifRecord.from_dict(entry["record"]))
        for ev in entry["evidence"]:
            probes += 1
            errors += ev["verdict"] == "error"
            audit.append({"game_id": rec.game_id, "location_key": rec.location.to_dict(), **ev})
    manifest.counters.update(probes=probes, errors=errors)
    manifest.save(out)
    with open(out / CGIF, "w", encoding="utf-8") as fh:
        write_cgif(cgif, fh)
    with open(out / AUDIT, "w", encoding="utf-8") as fh:
        for a in audit:
            fh.write(json.dumps(a, ensure_ascii=False, sort_keys=True) + "\n")
    statuses = [g["status"] for g in manifest.games.values()]
    print(f"labeled {len(cgif)} locations ({sum(len(r.spans) for r in cgif)} spans) -> {out / CGIF}")
    return 1 if mf.FAILED in statuses else 0


# -- corpus stages -----------------------------------------------------------


def cmd_build_corpus(args) -> int:
    if not args.inputs:
        raise UsageError("build-corpus needs at least one CGIF input")
    seen = set()
    merged: list[CgifRecord] = []
    for path in args.inputs:
        for rec in _read_jsonl_file(_need_file(path, "CGIF input"), read_cgif):
            if rec.key in seen or (args.nonempty and not rec.spans):
                continue
            seen.add(rec.key)
            merged.append(rec)
    ratios = tuple(_floats(args.ratios))
    try:
        splits = split_corpus(merged, ratios, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        write_cgif(merged, fh)
    for name, recs in splits.items():
        with open(out / f"{name}.jsonl", "w", encoding="utf-8") as fh:
            write_cgif(recs, fh)
    print(" ".join(f"{name}={len(recs)}" for name, recs in splits.items()) + f" records -> {out}")
    return 0


def cmd_export_bio(args) -> int:
    records = _read_jsonl_file(_need_file(args.corpus, "--corpus"), read_cgif)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_conll((to_bio(r) for r in records), fh)
    print(f"wrote {len(records)} documents -> {out}")
    return 0


def cmd_train_baseline(args) -> int:
    records = _read_jsonl_file(_need_file(args.train, "--train"), read_cgif)
    try:
        lexicon = train_lexicon(records, alpha=args.alpha, stopwords=load_stopwords(args.stopwords))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write_text(Path(args.out), lexicon.to_json())
    print(f"lexicon with {len(lexicon.table)} surfaces -> {args.out}")
    return 0


def _load_lexicon(path: str | None) -> Lexicon:
    p = _need_file(path, "--lexicon")
    try:
        return Lexicon.from_json(p.read_text(encoding="utf-8"))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{p}: malformed lexicon: {exc}") from exc


def cmd_predict(args) -> int:
    lexicon = _load_lexicon(args.lexicon)
    records = _read_jsonl_file(_need_file(args.corpus, "--corpus"), read_cgif)
    preds = predict_records(lexicon, records, load_stopwords(args.stopwords))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_predictions(preds, fh)
    print(f"predictions for {len(preds)} records -> {out}")
    return 0


def cmd_eval(args) -> int:
    gold = _read_jsonl_file(_need_file(args.gold, "--gold"), read_cgif)
    preds = _read_jsonl_file(_need_file(args.predictions, "--predictions"), read_predictions)
    predicted = {p.key: [x.span for x in apply_threshold(p.spans, args.threshold)] for p in preds}
    report = span_metrics(gold, predicted)
    payload = {"threshold": args.threshold, "span_metrics": report.to_dict()}
    text = format_eval_report(report)
    if args.ner:
        ner = _read_jsonl_file(_need_file(args.ner, "--ner"), read_ner)
        rows = category_ratios(group_spans_by_doc(gold), ner, top_k=None)
        payload["category_ratios"] = [r.to_dict() for r in rows]
        text += "\n\n" + format_ratio_table(rows[:5])
    out = Path(args.out)
    _write_text(out / "eval.json", _dumps(payload))
    _write_text(out / "eval.txt", text + "\n")
    print(text)
    return 0


def cmd_sweep(args) -> int:
    pairs, skipped = parse_clubfloyd(_need_file(args.clubfloyd, "--clubfloyd").read_text(encoding="utf-8"))
    targets = extract_action_targets(pairs)
    thresholds = _floats(args.thresholds)
    mode = {"all": "all_ats", "unique": "unique_ats"}.get(args.mode)
    if mode is None:
        raise UsageError("--mode must be all or unique")
    scored: list[tuple[str, float]] = []
    if args.lexicon:
        lexicon = _load_lexicon(args.lexicon)
        stopwords = load_stopwords(args.stopwords)
        for obs in dict.fromkeys(p.observation for p in pairs):
            scored += [(byte_slice(obs, x.start, x.end), x.p) for x in predict(lexicon, obs, stopwords)]
    else:
        texts = {r.key: r.text for r in _read_jsonl_file(_need_file(args.corpus, "--corpus"), read_cgif)}
        for p in _read_jsonl_file(_need_file(args.predictions, "--predictions"), read_predictions):
            if p.key not in texts:
                raise UsageError(f"prediction for unknown location {p.game_id}/{p.location_key.room_name}")
            scored += [(byte_slice(texts[p.key], x.start, x.end), x.p) for x in p.spans]
    try:
        reports = at_overlap(scored, targets, thresholds, mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    payload = {
        "pairs": len(pairs),
        "skipped_groups": skipped,
        "action_targets": len(targets),
        "reports": [r.to_dict() for r in reports],
    }
    text = format_overlap(reports)
    out = Path(args.out)
    _write_text(out / "sweep.json", _dumps(payload))
    _write_text(out / "sweep.txt", text + "\n")
    print(text)
    return 0


def cmd_analyze(args) -> int:
    path = _need_file(args.tripod, "--tripod")
    with open(path, encoding="utf-8") as fh:
        synopses, rejected = parse_tripod(fh)
    for story_id, reason in rejected:
        log.warning("skipping story %s: %s", story_id, reason)
    tagger = lexicon_tagger(_load_lexicon(args.lexicon), args.threshold, load_stopwords(args.stopwords))
    profile = turning_point_profile(synopses, tagger, args.region)
    profile.skipped += len(rejected)
    matrix = occurrence_matrix(synopses, tagger, args.region)
    out = Path(args.out)
    _write_text(out / "profile.json", _dumps(profile.to_dict()))
    _write_text(out / "profile.csv", profile_csv(profile))
    _write_text(out / "matrix.json", _dumps(matrix.to_dict()))
    text = format_profile(profile) + "\n\n" + format_matrix(matrix)
    _write_text(out / "analysis.txt", text + "\n")
    print(text)
    return 0


def cmd_stats(args) -> int:
    records = _read_jsonl_file(_need_file(args.corpus, "--corpus"), read_cgif)
    stats = corpus_stats(records)
    if args.out:
        _write_text(Path(args.out), _dumps(stats))
    for key, value in stats.items():
        print(f"{key:<20}{value:.3f}" if isinstance(value, float) else f"{key:<20}{value}")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chekhov", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key = value config file; flags override it")
        p.add_argument("--out", help="output directory or file")
        return p

    p = command("walk", cmd_walk, "enumerate locations by walkthrough replay or random walk")
    p.add_argument("--games", help="directory of story files")
    p.add_argument("--walkthroughs", help="directory of <game_id>.txt walkthroughs")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--direction-bias", type=float)
    p.add_argument("--max-moves", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--stopwords")

    p = command("probe", cmd_probe, "label explored locations by examining candidates")
    p.add_argument("--jobs", type=int)
    p.add_argument("--patterns")
    p.add_argument("--stopwords")
    p.add_argument("--max-moves", type=int)
    p.add_argument("--timeout", type=float)

    p = command("build-corpus", cmd_build_corpus, "merge CGIF files and split by game")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--ratios")
    p.add_argument("--seed", type=int)
    p.add_argument("--nonempty", action="store_true", default=None, help="drop locations without CG spans")

    p = command("export-bio", cmd_export_bio, "write CoNLL-style BIO")
    p.add_argument("--corpus")

    p = command("train-baseline", cmd_train_baseline, "fit the lexicon baseline")
    p.add_argument("--train")
    p.add_argument("--alpha", type=float)
    p.add_argument("--stopwords")

    p = command("predict", cmd_predict, "baseline predictions in the interchange format")
    p.add_argument("--lexicon")
    p.add_argument("--corpus")
    p.add_argument("--stopwords")

    p = command("eval", cmd_eval, "span metrics and NER category ratios")
    p.add_argument("--gold")
    p.add_argument("--predictions")
    p.add_argument("--threshold", type=float)
    p.add_argument("--ner", help="NER annotations {doc_id, spans:[{start,end,category}]}")

    p = command("sweep", cmd_sweep, "action-target overlap across thresholds")
    p.add_argument("--clubfloyd")
    p.add_argument("--predictions")
    p.add_argument("--corpus")
    p.add_argument("--lexicon", help="score ClubFloyd observations with this lexicon instead")
    p.add_argument("--thresholds")
    p.add_argument("--mode", choices=["all", "unique"])
    p.add_argument("--stopwords")

    p = command("analyze", cmd_analyze, "turning-point profile and occurrence matrix")
    p.add_argument("--tripod")
    p.add_argument("--lexicon")
    p.add_argument("--threshold", type=float)
    p.add_argument("--region", choices=["sentence", "segment"])
    p.add_argument("--stopwords")

    p = command("stats", cmd_stats, "corpus counts")
    p.add_argument("--corpus")
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    try:
        _apply_config(args, subparser)
        if args.command == "build-corpus" and args.nonempty is None:
            args.nonempty = False
        return args.func(args)
    except UsageError as exc:
        print(f"chekhov {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
