"""Command-line entry point.

Subcommands mirror the workflow stages; most take --run-id and --config.
Flags that shadow config keys (threshold, algorithm, ...) are folded into
the effective config before the run directory is touched, so a run always
sees one consistent configuration.  Exit codes: 0 success, 2 validation or
parse failure, 3 stage-gating failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .embedding import hashed_embedding_provider
from .errors import ChronolineError, StageGatingError
from .evaluate import evaluate_timeline
from .corpus import load_timeline
from .pipeline import (
    PipelineConfig,
    Run,
    build_provider,
    cmd_candidates,
    cmd_detect,
    cmd_generate_and_evaluate,
    cmd_learn_reward,
    cmd_train,
    parse_config,
    serve_annotation,
)


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--run-id", required=True, help="name of the run directory")
    p.add_argument("--config", required=True, help="KEY=VALUE config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chronoline",
                                     description="timeline summarisation workflow")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="cluster the corpus into dated, ranked events")
    _add_run_args(p)
    p.add_argument("--algorithm", choices=["agglomerative", "markov"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--inflation", type=float)
    p.add_argument("--top-l", type=int, dest="top_l")

    p = sub.add_parser("candidates", help="write candidate timelines for annotation")
    _add_run_args(p)
    p.add_argument("--count", type=int, default=None)

    p = sub.add_parser("serve", help="serve the annotation API and UI")
    _add_run_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--static", default=None, help="directory with the UI bundle")

    p = sub.add_parser("learn-reward", help="fit the preference model from the store")
    _add_run_args(p)

    p = sub.add_parser("train", help="fine-tune the policy on each event cluster")
    _add_run_args(p)
    p.add_argument("--per-cluster-policy", action="store_true", default=None)
    p.add_argument("--no-r1", action="store_true")
    p.add_argument("--no-r2", action="store_true")
    p.add_argument("--no-r3r4", action="store_true")

    p = sub.add_parser("generate", help="decode the timeline and optionally score it")
    _add_run_args(p)
    p.add_argument("--zero-shot", action="store_true",
                   help="decode from the untrained policy")
    p.add_argument("--ref", default=None, help="reference timeline for scoring")

    p = sub.add_parser("evaluate", help="score a timeline file against a reference")
    p.add_argument("--pred", action="append", required=True)
    p.add_argument("--ref", action="append", required=True)
    p.add_argument("--window", type=int, default=0)
    p.add_argument("--report", choices=["text", "csv"], default="text")
    p.add_argument("--config", default=None,
                   help="optional config naming the embedding provider")
    return parser


def _effective_config(args) -> PipelineConfig:
    config = parse_config(args.config)
    overrides = {}
    for key in ("algorithm", "threshold", "inflation", "top_l", "per_cluster_policy"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return replace(config, **overrides) if overrides else config


def _cmd_evaluate(args) -> int:
    if len(args.pred) != len(args.ref):
        raise ChronolineError("--pred and --ref must be given the same number of times")
    if args.config:
        provider = build_provider(parse_config(args.config))
    else:
        provider = hashed_embedding_provider()
    rows = []
    for pred_path, ref_path in zip(args.pred, args.ref):
        pred = load_timeline(pred_path)
        ref = load_timeline(ref_path)
        report = evaluate_timeline(pred, ref, provider, args.window)
        rows.append((Path(pred_path).stem, report))
    if args.report == "csv":
        names = ["date_f1", "rouge1_f", "rouge2_f", "ar1_f", "ar2_f", "soft_f1"]
        print("topic," + ",".join(names))
        for topic, report in rows:
            values = report.to_dict()
            print(topic + "," + ",".join(f"{values[n]:.6f}" for n in names))
    else:
        for _, report in rows:
            print(report.to_json())
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evaluate":
            return _cmd_evaluate(args)

        config = _effective_config(args)
        run = Run(args.run_id, config)
        if args.command == "detect":
            clusters = cmd_detect(run)
            print(f"detected {len(clusters.clusters)} dated clusters -> {run.clusters_path}")
        elif args.command == "candidates":
            manifest = cmd_candidates(run, args.count)
            print(f"wrote {len(manifest)} candidates -> {run.candidates_dir}")
        elif args.command == "serve":
            server = serve_annotation(run, args.host, args.port, args.static)
            host, port = server.server_address[:2]
            print(f"annotation service on http://{host}:{port}/ (ctrl-c to stop)")
            try:
                server.serve_forever()
            except KeyboardInterrupt:
                pass
            finally:
                server.server_close()
        elif args.command == "learn-reward":
            model, reward_config = cmd_learn_reward(run)
            print(
                f"fitted preference model over {len(model.item_ids)} candidates, "
                f"alpha={reward_config.alpha:.4f} -> {run.score_model_path}"
            )
        elif args.command == "train":
            paths = cmd_train(run, args.no_r1, args.no_r2, args.no_r3r4)
            print(f"trained {len(paths)} cluster visits -> {run.checkpoints_dir}")
        elif args.command == "generate":
            timeline, report = cmd_generate_and_evaluate(run, args.ref, args.zero_shot)
            print(f"wrote {len(timeline.entries)} entries -> {run.timeline_path}")
            if report is not None:
                print(report.to_json())
        return 0
    except StageGatingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ChronolineError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
