"""Command-line interface.

Subcommands mirror the pipeline stages: gen-data, train-offline,
adapt-online, run-grid, efficiency, report. Every command takes --config
(YAML, defaults apply when omitted), most take --out for the experiment
directory, and --seed narrows work to one seed where that makes sense.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .artifacts import load_artifact
from .config import ExperimentConfig, dump_config, load_config
from .errors import RobustAmcError
from .grid import (
    adapt_and_evaluate,
    build_seed_context,
    efficiency_probe,
    run_grid,
    seed_cells,
    train_offline_strategy,
)
from .offline import OFFLINE_STRATEGIES
from .report import emit_report
from .sigdata import DatasetRole, build_domain, save_dataset

logger = logging.getLogger("robustamc")


def _seeds(cfg: ExperimentConfig, args) -> list[int]:
    return [args.seed] if args.seed is not None else cfg.evaluation.seeds


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    digest = cfg.digest()
    for seed in _seeds(cfg, args):
        d = out / "data" / f"seed{seed}"
        d.mkdir(parents=True, exist_ok=True)
        src = build_domain(
            cfg.dataset.source.profile(), cfg.dataset.source.per_class, 0, seed * 100 + 1,
            domain="source", test_per_class=cfg.dataset.source.test_per_class,
            frame_len=cfg.dataset.frame_len, sps=cfg.dataset.sps,
        )
        tgt = build_domain(
            cfg.dataset.target.profile(), cfg.dataset.target.per_class, cfg.max_shots(),
            seed * 100 + 2, domain="target", test_per_class=cfg.dataset.target.test_per_class,
            frame_len=cfg.dataset.frame_len, sps=cfg.dataset.sps,
        )
        names = {
            DatasetRole.SOURCE_TRAIN: "source_train", DatasetRole.SOURCE_TEST: "source_test",
            DatasetRole.TARGET_PILOT: "target_pilot", DatasetRole.TARGET_UNLABELED: "target_unlabeled",
            DatasetRole.TARGET_TEST: "target_test",
        }
        for role, ds in list(src.items()) + list(tgt.items()):
            path = d / f"{names[role]}.amcf"
            save_dataset(ds, path, provenance={"config_digest": digest, "seed": seed, "kind": "clean"})
            print(f"wrote {path} ({len(ds)} frames)")
    return 0


def cmd_train_offline(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    strategies = [args.strategy] if args.strategy else list(OFFLINE_STRATEGIES)
    for seed in _seeds(cfg, args):
        ctx = build_seed_context(cfg, seed, out, resume=args.resume)
        for strategy in strategies:
            art = train_offline_strategy(cfg, ctx, strategy, out, resume=args.resume)
            secs = art.provenance.get("offline_seconds", 0.0)
            print(f"seed {seed} {strategy}: artifact ready ({secs}s offline)")
    return 0


def cmd_adapt_online(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    for seed in _seeds(cfg, args):
        ctx = build_seed_context(cfg, seed, out, resume=True)
        art_path = out / "artifacts" / f"seed{seed}_{args.offline}.amcw"
        if not art_path.exists():
            print(f"missing offline artifact {art_path}; run train-offline first", file=sys.stderr)
            return 2
        model = load_artifact(art_path).build()
        rows, notes = adapt_and_evaluate(cfg, ctx, model, args.offline, args.online, args.shots)
        agg_n = sum(r["n"] for r in rows if r["attack"] != "none")
        agg = sum(r["ser"] * r["n"] for r in rows if r["attack"] != "none") / agg_n
        print(f"seed {seed} {args.offline}+{args.online}@{args.shots}: attacked SER {agg:.4f} "
              f"({notes.get('online_seconds', 0)}s)")
    return 0


def cmd_run_grid(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    rows = run_grid(cfg, out, resume=args.resume)
    written = emit_report(cfg, rows, out)
    print(f"grid complete: {len(rows)} rows over {len(seed_cells(cfg))} cells x "
          f"{len(cfg.evaluation.seeds)} seeds")
    for name, path in written.items():
        print(f"  {name}: {path}")
    return 0


def cmd_efficiency(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    rows = efficiency_probe(cfg, out, resume=args.resume)
    for r in rows:
        flag = "reached" if r["reached"] else "DID NOT REACH"
        print(f"seed {r['seed']} {r['offline']}+{r['online']}: {flag} at {r['shots']} shots "
              f"(ser {r['ser']:.4f} vs threshold {r['threshold']:.4f})")
    return 0


def cmd_report(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    cells_dir = out / "cells"
    digest = cfg.digest()
    rows = []
    for f in sorted(cells_dir.glob("seed*.json")):
        payload = json.loads(f.read_text())
        if payload.get("config_digest") != digest:
            print(f"{f} has a stale config digest; rerun the grid", file=sys.stderr)
            return 2
        rows.extend(payload["rows"])
    if not rows:
        print(f"no cell results under {cells_dir}; run run-grid first", file=sys.stderr)
        return 2
    eff_path = out / "efficiency.json"
    eff_rows = None
    if eff_path.exists():
        payload = json.loads(eff_path.read_text())
        if payload.get("config_digest") == digest:
            eff_rows = payload["rows"]
    written = emit_report(cfg, rows, out, efficiency_rows=eff_rows)
    for name, path in written.items():
        print(f"{name}: {path}")
    return 0


def cmd_show_config(args) -> int:
    cfg = load_config(args.config)
    if args.out:
        dump_config(cfg, args.out)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    print(f"config digest: {cfg.digest()}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="robustamc",
        description="Robust modulation classification: offline adversarial meta-training, "
                    "online few-shot domain adaptation, and the evaluation grid around them.",
    )
    p.add_argument("--version", action="version", version=f"robustamc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="enable info-level logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", type=str, default=None, help="YAML experiment config")
        sp.add_argument("--out", type=str, required=out_required, help="experiment directory")
        sp.add_argument("--seed", type=int, default=None, help="restrict to one seed")
        sp.add_argument("--resume", action="store_true", help="reuse results already on disk")

    sp = sub.add_parser("gen-data", help="generate and save both domains' datasets")
    common(sp)
    sp.set_defaults(fn=cmd_gen_data)

    sp = sub.add_parser("train-offline", help="train offline strategies and save artifacts")
    common(sp)
    sp.add_argument("--strategy", choices=OFFLINE_STRATEGIES, default=None)
    sp.set_defaults(fn=cmd_train_offline)

    sp = sub.add_parser("adapt-online", help="adapt one offline artifact and print its SER")
    common(sp)
    sp.add_argument("--offline", choices=OFFLINE_STRATEGIES, required=True)
    sp.add_argument("--online", choices=("none", "finetune", "dann"), required=True)
    sp.add_argument("--shots", type=int, default=10)
    sp.set_defaults(fn=cmd_adapt_online)

    sp = sub.add_parser("run-grid", help="run the full grid and emit the report")
    common(sp)
    sp.set_defaults(fn=cmd_run_grid)

    sp = sub.add_parser("efficiency", help="sweep shots to the target SER threshold")
    common(sp)
    sp.set_defaults(fn=cmd_efficiency)

    sp = sub.add_parser("report", help="re-emit CSV/JSON/figures from stored cells")
    common(sp)
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("show-config", help="print the resolved config and its digest")
    sp.add_argument("--config", type=str, default=None)
    sp.add_argument("--out", type=str, default=None, help="write resolved YAML here")
    sp.set_defaults(fn=cmd_show_config)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except RobustAmcError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
