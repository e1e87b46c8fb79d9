"""``spatialqa`` command-line entry point.

Exit status: 0 success, 1 environment / I/O failure, 2 validation failure.
Diagnostics go to stderr prefixed ``E:`` (errors) or ``W:`` (warnings).
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys

from . import accddoa, benchmark, container, features, llm, reasoning, synth, tracks
from .config import load_class_names, load_kv_config
from .errors import ValidationError
from .motion import SignConvention, Tolerances

EXIT_OK, EXIT_IO, EXIT_VALIDATION = 0, 1, 2


class _Fail(Exception):
    def __init__(self, status: int, messages: list[str]):
        self.status = status
        self.messages = messages


def _err(msg: str) -> None:
    for line in str(msg).splitlines() or [""]:
        print(f"E: {line}", file=sys.stderr)


def _warn(msg: str) -> None:
    print(f"W: {msg}", file=sys.stderr)


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="key = value file; flags override its values")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--doa-tol", type=float, default=5.0, help="significant DoA change, degrees")
    g.add_argument("--dist-tol", type=float, default=0.005, help="significant distance change, metres")
    g.add_argument("--comparable-margin", type=float, default=0.05)
    g.add_argument("--sign-convention", choices=[c.value for c in SignConvention],
                   default=SignConvention.LEFT_POSITIVE.value)
    g.add_argument("--change-mode", choices=["total", "net"], default="total")
    g.add_argument("--out-dir", default=".", help="base directory for relative output paths")
    g.add_argument("--classes", help="class-name mapping (JSON or id,name lines); DCASE classes by default")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="spatialqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("features", parents=[common], help="stereo WAV -> SAFZ feature tensor")
    p.add_argument("in_wav")
    p.add_argument("out_tensor")
    p.add_argument("--csv", help="also write a debugging CSV")
    p.add_argument("--sample-rate", type=int, default=24000)
    p.add_argument("--win-len", type=int, default=1024)
    p.add_argument("--hop-len", type=int, default=480)
    p.add_argument("--nfft", type=int, default=1024)
    p.add_argument("--n-mels", type=int, default=64)
    p.add_argument("--log-floor", type=float, default=1e-10)
    subs["features"] = p

    p = sub.add_parser("gen-benchmark", parents=[common], help="metadata CSVs -> QA benchmark + manifest")
    p.add_argument("metadata_dir")
    p.add_argument("--manifest-out", default="manifest.json")
    p.add_argument("--benchmark-out", default="benchmark.json")
    p.add_argument("--categories", default=",".join(c.value for c in benchmark.Category),
                   help="comma-separated subset of: " + ", ".join(c.value for c in benchmark.Category))
    p.add_argument("--per-category", type=int, default=1)
    p.add_argument("--num-frames", type=int, help="clip length in label frames (default: last frame + 1)")
    subs["gen-benchmark"] = p

    p = sub.add_parser("answer", parents=[common], help="answer a benchmark into a resumable journal")
    p.add_argument("benchmark_in")
    p.add_argument("manifest_in")
    p.add_argument("--mode", choices=["oracle", "llm"], default="oracle")
    p.add_argument("--journal-out", default="answers.jsonl")
    p.add_argument("--base-url")
    p.add_argument("--model")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY", help="empty string for keyless endpoints")
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--max-parallel", type=int, default=4)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--backoff-base", type=float, default=1.0)
    subs["answer"] = p

    p = sub.add_parser("score", parents=[common], help="score a journal against a benchmark")
    p.add_argument("benchmark_in")
    p.add_argument("journal_in")
    p.add_argument("--report-out", default="report.json")
    p.add_argument("--model-name", default="model")
    subs["score"] = p

    p = sub.add_parser("seld-eval", parents=[common], help="F-score / DoA error / relative distance error")
    p.add_argument("pred_csv")
    p.add_argument("ref_csv")
    p.add_argument("--angle-threshold", type=float, default=20.0)
    p.add_argument("--rde-threshold", type=float, default=1.0)
    p.add_argument("--no-distance-gate", action="store_true")
    p.add_argument("--json-out")
    subs["seld-eval"] = p

    p = sub.add_parser("synth", parents=[common], help="write seeded synthetic metadata CSVs")
    p.add_argument("out_dir_metadata")
    p.add_argument("--clips", type=int, default=100)
    subs["synth"] = p
    return parser, subs


def _tolerances(args) -> Tolerances:
    return Tolerances(
        doa_deg=args.doa_tol,
        dist_m=args.dist_tol,
        comparable_margin=args.comparable_margin,
        convention=SignConvention(args.sign_convention),
        change_mode=args.change_mode,
    )


def _out(args, path: str) -> str:
    full = os.path.join(args.out_dir, path)
    parent = os.path.dirname(full)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return full


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _class_names(args):
    return load_class_names(args.classes) if args.classes else tracks.DCASE_CLASS_NAMES


def cmd_features(args) -> int:
    cfg = features.FrontendConfig(
        sample_rate_hz=args.sample_rate, win_len=args.win_len, hop_len=args.hop_len,
        nfft=args.nfft, n_mels=args.n_mels, log_floor=args.log_floor,
    )
    clip = features.load_stereo_wav(args.in_wav)
    feats = features.extract_features(clip, cfg)
    container.write_feature_tensor(_out(args, args.out_tensor), feats)
    if args.csv:
        _write_text(_out(args, args.csv), container.feature_tensor_csv(feats))
    return EXIT_OK


def _parse_categories(text: str) -> list[benchmark.Category]:
    out = []
    for name in filter(None, (t.strip() for t in text.split(","))):
        try:
            out.append(benchmark.Category(name))
        except ValueError:
            raise ValidationError(f"unknown category {name!r}") from None
    return out


def cmd_gen_benchmark(args) -> int:
    paths = sorted(glob.glob(os.path.join(args.metadata_dir, "*.csv")))
    if not paths:
        raise ValidationError(f"no metadata CSV files in {args.metadata_dir}")
    categories = _parse_categories(args.categories)
    tol = _tolerances(args)
    names = _class_names(args)
    manifest_path = _out(args, args.manifest_out)
    manifest_dir = os.path.dirname(os.path.abspath(manifest_path))

    failures = []
    manifest, items = {}, []
    for path in paths:
        clip_id = os.path.splitext(os.path.basename(path))[0]
        try:
            with open(path, encoding="utf-8") as fh:
                scene = tracks.parse_metadata_csv(fh.read(), names, clip_id=clip_id, num_frames=args.num_frames)
            clip_items, skipped = benchmark.generate_qa(
                scene, categories, tol, seed=args.seed, per_category=args.per_category
            )
        except ValidationError as exc:
            failures.append(f"{path}: {exc}")
            continue
        for s in skipped:
            logging.getLogger(__name__).info("%s: skipped %s (%s)", s.clip_id, s.category.value, s.reason)
        manifest[clip_id] = os.path.relpath(os.path.abspath(path), manifest_dir).replace(os.sep, "/")
        items.extend(clip_items)

    _write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _write_text(_out(args, args.benchmark_out), benchmark.serialize_benchmark(items) + "\n")
    if failures:
        raise _Fail(EXIT_VALIDATION, failures)
    return EXIT_OK


def _load_benchmark(path: str) -> list[benchmark.QAItem]:
    with open(path, encoding="utf-8") as fh:
        return benchmark.parse_benchmark(fh.read())


def load_manifest_scenes(manifest_path: str, class_names=None) -> dict[str, tracks.SceneMetadata]:
    with open(manifest_path, encoding="utf-8") as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{manifest_path}: malformed manifest ({exc})") from None
    base = os.path.dirname(os.path.abspath(manifest_path))
    scenes = {}
    for clip_id, rel in manifest.items():
        with open(os.path.join(base, rel), encoding="utf-8") as fh:
            scenes[clip_id] = tracks.parse_metadata_csv(fh.read(), class_names, clip_id=clip_id)
    return scenes


def cmd_answer(args) -> int:
    items = _load_benchmark(args.benchmark_in)
    scenes = load_manifest_scenes(args.manifest_in, _class_names(args))
    journal = llm.Journal(_out(args, args.journal_out))
    tol = _tolerances(args)
    if args.mode == "oracle":
        summary = llm.answer_with_oracle(items, scenes, journal, tol)
    else:
        if not args.base_url or not args.model:
            raise ValidationError("llm mode needs --base-url and --model")
        cfg = llm.LlmEndpointConfig(
            base_url=args.base_url, model_name=args.model, api_key_env=args.api_key_env or None,
            timeout_s=args.timeout, max_retries=args.max_retries, max_parallel=args.max_parallel,
            temperature=args.temperature, backoff_base_s=args.backoff_base,
        )
        summary = llm.answer_with_llm(items, scenes, cfg, journal, tol)
    if summary.failed:
        detail = ", ".join(f"{k}={v}" for k, v in sorted(summary.failures.items()))
        raise _Fail(EXIT_IO, [f"{summary.failed} item(s) failed ({detail}); rerun to retry them"])
    return EXIT_OK


def cmd_score(args) -> int:
    items = _load_benchmark(args.benchmark_in)
    journal = llm.Journal(args.journal_in)
    if not os.path.exists(journal.path):
        raise FileNotFoundError(f"no such journal: {journal.path}")
    try:
        records = list(journal.load().values())
    except (json.JSONDecodeError, TypeError, KeyError) as exc:
        raise ValidationError(f"{journal.path}: malformed journal ({exc})") from None
    report = reasoning.score(items, records)
    if report.missing_count:
        covered = len(items) - report.missing_count
        _warn(f"journal covers {covered} of {len(items)} items; the rest count as wrong")
    report_path = _out(args, args.report_out)
    _write_text(report_path, report.to_json() + "\n")
    _write_text(os.path.splitext(report_path)[0] + ".txt", report.table(args.model_name))
    return EXIT_OK


def cmd_seld_eval(args) -> int:
    with open(args.pred_csv, encoding="utf-8") as fh:
        preds = accddoa.labels_from_csv(fh.read())
    with open(args.ref_csv, encoding="utf-8") as fh:
        refs = accddoa.labels_from_csv(fh.read())
    metrics = accddoa.seld_metrics(
        preds, refs, args.angle_threshold, args.rde_threshold, gate_distance=not args.no_distance_gate
    )
    print(metrics.table())
    if args.json_out:
        _write_text(_out(args, args.json_out), metrics.to_json() + "\n")
    return EXIT_OK


def cmd_synth(args) -> int:
    out_dir = _out(args, args.out_dir_metadata)
    os.makedirs(out_dir, exist_ok=True)
    names = _class_names(args)
    for scene in synth.synth_corpus(args.clips, seed=args.seed):
        _write_text(os.path.join(out_dir, f"{scene.clip_id}.csv"), tracks.scene_to_csv(scene, names))
    return EXIT_OK


COMMANDS = {
    "features": cmd_features,
    "gen-benchmark": cmd_gen_benchmark,
    "answer": cmd_answer,
    "score": cmd_score,
    "seld-eval": cmd_seld_eval,
    "synth": cmd_synth,
}


def _apply_config(argv, parser, subs):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = load_kv_config(known.config)
    for p in [parser, *subs.values()]:
        dests = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in values.items() if k in dests})


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subs = build_parser()
    try:
        _apply_config(argv, parser, subs)
    except ValidationError as exc:
        _err(exc)
        return EXIT_VALIDATION
    except OSError as exc:
        _err(exc)
        return EXIT_IO
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Fail as exc:
        for m in exc.messages:
            _err(m)
        return exc.status
    except ValidationError as exc:
        _err(exc)
        return EXIT_VALIDATION
    except OSError as exc:
        _err(exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
