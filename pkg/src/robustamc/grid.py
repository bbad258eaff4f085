"""Experiment grid: per-seed pipeline, cell store, and the efficiency probe.

For each seed: generate both domains, train the substitute zoo, build and
materialize the attack-by-substitute task pool, train the four offline
strategies, craft the unseen evaluation attacks from the held-out pairs,
then run every (offline, online, shots) cell.
Results land as one JSON file per cell plus reusable artifact and perturbed
dataset files, all stamped with the config digest; reruns with a matching
digest resume from whatever is already on disk and refuse on a mismatch.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from pathlib import Path

import numpy as np
import torch

from .artifacts import TrainedArtifact, load_artifact, save_artifact
from .attacks import AttackSpec, craft, eps_from_psr
from .config import ExperimentConfig
from .errors import ConfigurationError, GridMismatchError, InputShapeError
from .grads import accuracy, to_tensors
from .models import ArchDescriptor, build_model, substitute_zoo
from .offline import OfflineConfig, OFFLINE_STRATEGIES, run_offline
from .online import OnlineConfig, dann_adapt, finetune, zero_shot
from .sigdata import DatasetRole, DomainDataset, IQFrame, build_domain, save_dataset, load_dataset
from .tasks import TrainedSubstitute, build_task_pool, materialize_tasks, train_substitute

logger = logging.getLogger(__name__)

ONLINE_ORDER = ("none", "finetune", "dann")
CLEAN_ATTACK_ID = "none"

SER_CSV_HEADER = ("offline", "online", "shots", "snr_db", "attack", "ser", "n", "seed")


def ser(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Symbol error rate: fraction of misclassified frames."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise InputShapeError(
            f"predictions shape {predictions.shape} != labels shape {labels.shape}"
        )
    if predictions.size == 0:
        raise InputShapeError("cannot compute SER of an empty prediction set")
    return float(np.mean(predictions != labels))


# ---------------------------------------------------------------------------
# per-seed context


@dataclasses.dataclass
class EvalAttack:
    task_id: str
    spec: AttackSpec
    substitute: TrainedSubstitute | None   # None when rebuilt from cached files
    x_test_adv: torch.Tensor


@dataclasses.dataclass
class SeedContext:
    """Everything one seed's cells need, computed once."""

    seed: int
    x_src_train: torch.Tensor
    y_src_train: torch.Tensor
    x_src_test: torch.Tensor
    y_src_test: torch.Tensor
    x_tgt_test: torch.Tensor
    y_tgt_test: torch.Tensor
    snr_tgt_test: np.ndarray
    pilots_x: torch.Tensor          # adaptation inputs (attacked when configured)
    pilots_y: torch.Tensor
    unlabeled_x: torch.Tensor
    eval_attacks: list[EvalAttack]
    max_shots: int
    n_classes: int = 7
    train_tasks: list = dataclasses.field(default_factory=list)

    def pilot_subset(self, shots: int) -> tuple[torch.Tensor, torch.Tensor]:
        if shots < 1 or shots > self.max_shots:
            raise ConfigurationError(f"shots must lie in [1, {self.max_shots}], got {shots}")
        idx = [c * self.max_shots + j for c in range(self.n_classes) for j in range(shots)]
        return self.pilots_x[idx], self.pilots_y[idx]

    def eval_sets(self) -> list[tuple[str, torch.Tensor]]:
        out = [(CLEAN_ATTACK_ID, self.x_tgt_test)]
        out.extend((ea.task_id, ea.x_test_adv) for ea in self.eval_attacks)
        return out


def _adv_dataset(base: DomainDataset, x_adv: torch.Tensor, provenance: dict) -> DomainDataset:
    frames = [
        IQFrame(iq=x_adv[i].numpy(), label=f.label, snr_db=f.snr_db, domain=f.domain)
        for i, f in enumerate(base.frames)
    ]
    return DomainDataset(
        frames=frames, role=base.role, labeled_idx=base.labeled_idx, provenance=provenance
    )


def _load_or_craft(
    path: Path, spec: AttackSpec, sub: TrainedSubstitute,
    base: DomainDataset, x: torch.Tensor, y: torch.Tensor,
    digest: str, resume: bool, task_id: str,
) -> torch.Tensor:
    """Craft a perturbed copy of a dataset, cached on disk in the AMCF format."""
    if resume and path.exists():
        ds = load_dataset(path)
        if ds.provenance.get("config_digest") == digest and len(ds) == len(base):
            return to_tensors(ds.x())
    x_adv = craft(spec, sub.model, x, y).detach()
    prov = {
        "kind": "perturbed",
        "method": spec.method,
        "substitute_id": sub.sub_id,
        "task_id": task_id,
        "epsilon": spec.epsilon,
        "config_digest": digest,
    }
    save_dataset(_adv_dataset(base, x_adv, prov), path)
    return x_adv


def build_seed_context(cfg: ExperimentConfig, seed: int, out: str | Path, resume: bool) -> SeedContext:
    digest = cfg.digest()
    data_dir = Path(out) / "data" / f"seed{seed}"
    data_dir.mkdir(parents=True, exist_ok=True)
    frame_len, sps = cfg.dataset.frame_len, cfg.dataset.sps
    max_shots = cfg.max_shots()

    src = build_domain(
        cfg.dataset.source.profile(), cfg.dataset.source.per_class, 0, seed * 100 + 1,
        domain="source", test_per_class=cfg.dataset.source.test_per_class,
        frame_len=frame_len, sps=sps,
    )
    tgt = build_domain(
        cfg.dataset.target.profile(), cfg.dataset.target.per_class, max_shots, seed * 100 + 2,
        domain="target", test_per_class=cfg.dataset.target.test_per_class,
        frame_len=frame_len, sps=sps,
    )
    src_train, src_test = src[DatasetRole.SOURCE_TRAIN], src[DatasetRole.SOURCE_TEST]
    pilots, unlabeled, tgt_test = (
        tgt[DatasetRole.TARGET_PILOT], tgt[DatasetRole.TARGET_UNLABELED], tgt[DatasetRole.TARGET_TEST]
    )

    x_src, y_src = to_tensors(src_train.x(), src_train.y())
    x_src_te, y_src_te = to_tensors(src_test.x(), src_test.y())
    x_tt, y_tt = to_tensors(tgt_test.x(), tgt_test.y())
    x_pil, y_pil = to_tensors(pilots.x(), pilots.y())
    x_unl, y_unl = to_tensors(unlabeled.x(), unlabeled.y())

    # substitute zoo on the source domain
    subs = []
    for i, (desc, sub_seed) in enumerate(substitute_zoo(cfg.substitutes.count, base_seed=seed)):
        subs.append(train_substitute(
            desc, src_train.x(), src_train.y(), sub_seed, "source",
            sub_id=f"{desc.family}#{i}",
            epochs=cfg.substitutes.epochs, lr=cfg.substitutes.lr,
            batch_size=cfg.substitutes.batch_size,
            eval_x=src_test.x(), eval_y=src_test.y(), eval_snr=src_test.snrs(),
        ))

    specs = cfg.attacks.specs(frame_len)
    pool = build_task_pool(specs, subs, cfg.tasks.holdout, seed, balanced=cfg.tasks.balanced)

    # the unseen attacker: held-out (attack, substitute) pairs aimed at the
    # target-domain traffic. The substitutes stay source-trained — that is the
    # black-box premise: the adversary mimics the defender's training distribution,
    # and those gradients transfer onto shifted inputs far better than a
    # substitute fit to the (much harder) target domain would.
    eval_attacks = []
    for t in pool.held_out_tasks:
        x_test_adv = _load_or_craft(
            data_dir / f"test_adv_{t.task_id.replace('@', '_').replace('/', '-')}.amcf",
            t.attack, t.substitute, tgt_test, x_tt, y_tt, digest, resume, t.task_id,
        )
        eval_attacks.append(EvalAttack(t.task_id, t.attack, t.substitute, x_test_adv))

    # adaptation inputs, perturbed by the deployed held-out attack when configured
    k = cfg.evaluation.eval_attack_index
    if k >= len(eval_attacks):
        raise ConfigurationError(
            f"evaluation.eval_attack_index {k} out of range for {len(eval_attacks)} held-out tasks"
        )
    if cfg.online.attack_adaptation_data:
        deployed = eval_attacks[k]
        pilots_x = _load_or_craft(
            data_dir / "pilots_adv.amcf", deployed.spec, deployed.substitute,
            pilots, x_pil, y_pil, digest, resume, deployed.task_id,
        )
        unlabeled_x = _load_or_craft(
            data_dir / "unlabeled_adv.amcf", deployed.spec, deployed.substitute,
            unlabeled, x_unl, y_unl, digest, resume, deployed.task_id,
        )
    else:
        pilots_x, unlabeled_x = x_pil, x_unl

    # materialize offline training tasks last so the context is complete either way
    materialize_tasks(
        pool.train_tasks, src_train.x(), src_train.y(), cfg.tasks.per_task_frames, seed
    )

    return SeedContext(
        seed=seed,
        x_src_train=x_src, y_src_train=y_src,
        x_src_test=x_src_te, y_src_test=y_src_te,
        x_tgt_test=x_tt, y_tgt_test=y_tt, snr_tgt_test=tgt_test.snrs(),
        pilots_x=pilots_x, pilots_y=y_pil, unlabeled_x=unlabeled_x,
        eval_attacks=eval_attacks, max_shots=max_shots,
        train_tasks=pool.train_tasks,
    )


# ---------------------------------------------------------------------------
# offline artifacts


def offline_config(cfg: ExperimentConfig, strategy: str, seed: int) -> OfflineConfig:
    o = cfg.offline
    return OfflineConfig(
        strategy=strategy, epochs=o.epochs, batch_size=o.batch_size, lr=o.lr,
        mix_weight=o.mix_weight, meta_algo=o.meta_algo, inner_lr=o.inner_lr,
        outer_lr=o.outer_lr, inner_steps=o.inner_steps, outer_iters=o.outer_iters,
        support_fraction=o.support_fraction, inner_batch=o.inner_batch, seed=seed,
        at_epsilon=eps_from_psr(cfg.attacks.psr_db, cfg.dataset.frame_len),
        at_steps=o.at_steps,
    )


def train_offline_strategy(
    cfg: ExperimentConfig, ctx: SeedContext, strategy: str, out: str | Path, resume: bool,
) -> TrainedArtifact:
    digest = cfg.digest()
    art_dir = Path(out) / "artifacts"
    art_dir.mkdir(parents=True, exist_ok=True)
    path = art_dir / f"seed{ctx.seed}_{strategy}.amcw"
    if resume and path.exists():
        art = load_artifact(path)
        if art.provenance.get("config_digest") == digest:
            return art

    model = build_model(
        ArchDescriptor(family=cfg.offline.arch),
        frame_len=cfg.dataset.frame_len, seed=ctx.seed * 100 + 7,
    )
    ocfg = offline_config(cfg, strategy, ctx.seed)
    t0 = time.perf_counter()
    model, log = run_offline(
        model, strategy, ocfg,
        x_train=ctx.x_src_train, y_train=ctx.y_src_train,
        tasks=ctx.train_tasks or None,
    )
    seconds = time.perf_counter() - t0
    art = TrainedArtifact.from_model(model, {
        "strategy": strategy,
        "seed": ctx.seed,
        "config_digest": digest,
        "arch": cfg.offline.arch,
        "meta_algo": cfg.offline.meta_algo if strategy == "meta_adversarial" else "",
        "offline_seconds": round(seconds, 3),
    })
    save_artifact(art, path)
    _write_training_log(out / "logs" / f"seed{ctx.seed}_{strategy}.csv", log)
    return art


def _write_training_log(path: Path, log: list[dict]) -> None:
    if not log:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = list(log[0].keys())
    lines = [",".join(cols)]
    lines += [",".join(str(row[c]) for c in cols) for row in log]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# cells


def _ser_rows(
    model, ctx: SeedContext, offline_name: str, online_name: str, shots: int,
) -> list[dict]:
    rows = []
    y = ctx.y_tgt_test.numpy()
    snrs = ctx.snr_tgt_test
    bins = sorted(set(float(s) for s in snrs))
    for attack_id, x_eval in ctx.eval_sets():
        preds = zero_shot(model, x_eval)
        for b in bins:
            mask = snrs == np.float32(b)
            rows.append({
                "offline": offline_name, "online": online_name, "shots": shots,
                "snr_db": b, "attack": attack_id,
                "ser": ser(preds[mask], y[mask]), "n": int(mask.sum()), "seed": ctx.seed,
            })
    return rows


def online_config(cfg: ExperimentConfig, strategy: str, shots: int, seed: int) -> OnlineConfig:
    o = cfg.online
    return OnlineConfig(
        strategy=strategy, shots=shots, ft_lr=o.ft_lr, ft_steps=o.ft_steps,
        ft_patience=o.ft_patience, dann_lr=o.dann_lr,
        dann_feature_lr=o.dann_feature_lr, disc_lr=o.disc_lr,
        lambda_grl=o.lambda_grl, dann_epochs=o.dann_epochs, batch_size=o.batch_size,
        disc_hidden=o.disc_hidden, warmup_fraction=o.warmup_fraction,
        refit_margin=o.refit_margin, seed=seed,
    )


def adapt_and_evaluate(
    cfg: ExperimentConfig, ctx: SeedContext, model, offline_name: str,
    online_name: str, shots: int,
) -> tuple[list[dict], dict]:
    """Run one online strategy at one shot count and score every eval set."""
    notes: dict = {}
    t0 = time.perf_counter()
    if online_name == "none":
        tuned = model
    elif online_name == "finetune":
        px, py = ctx.pilot_subset(shots)
        ocfg = online_config(cfg, online_name, shots, ctx.seed * 100 + 31 + shots)
        tuned, _ = finetune(model, px, py, ocfg)
    elif online_name == "dann":
        px, py = ctx.pilot_subset(shots) if shots > 0 else (ctx.pilots_x[:0], ctx.pilots_y[:0])
        ocfg = online_config(cfg, online_name, shots, ctx.seed * 100 + 53 + shots)
        pre_acc = accuracy(model, ctx.x_src_test, ctx.y_src_test)
        tuned, _, _ = dann_adapt(
            model, ctx.x_src_train, px, py, ctx.unlabeled_x, ocfg,
        )
        post_acc = accuracy(tuned, ctx.x_src_test, ctx.y_src_test)
        notes["source_acc_pre"] = round(pre_acc, 4)
        notes["source_acc_post"] = round(post_acc, 4)
        if pre_acc - post_acc > 0.15:
            logger.warning(
                "source forgetting guardrail tripped for seed %d %s+dann@%d: %.3f -> %.3f",
                ctx.seed, offline_name, shots, pre_acc, post_acc,
            )
    else:
        raise ConfigurationError(f"unknown online strategy {online_name!r}")
    notes["online_seconds"] = round(time.perf_counter() - t0, 3)
    return _ser_rows(tuned, ctx, offline_name, online_name, shots), notes


def _cell_path(out: Path, seed: int, offline_name: str, online_name: str, shots: int) -> Path:
    return out / "cells" / f"seed{seed}_{offline_name}_{online_name}_{shots}.json"


def _write_cell(path: Path, digest: str, rows: list[dict], notes: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"config_digest": digest, "rows": rows, "notes": notes}
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, sort_keys=True, indent=0))
    tmp.replace(path)


def _read_cell(path: Path, digest: str) -> list[dict] | None:
    if not path.exists():
        return None
    payload = json.loads(path.read_text())
    if payload.get("config_digest") != digest:
        raise GridMismatchError(
            f"{path} was produced under config digest {payload.get('config_digest')}, "
            f"current config digest is {digest}; refusing to mix results. "
            f"Use a fresh output directory or rerun without --resume."
        )
    return payload["rows"]


def seed_cells(cfg: ExperimentConfig) -> list[tuple[str, str, int]]:
    cells = []
    for off in OFFLINE_STRATEGIES:
        cells.append((off, "none", 0))
        for shots in cfg.online.shots:
            cells.append((off, "finetune", shots))
            cells.append((off, "dann", shots))
    return cells


def run_seed(cfg: ExperimentConfig, seed: int, out: str | Path, resume: bool) -> list[dict]:
    out = Path(out)
    digest = cfg.digest()
    plan = seed_cells(cfg)
    cached: dict[tuple, list[dict]] = {}
    missing = []
    for cell in plan:
        rows = _read_cell(_cell_path(out, seed, *cell), digest) if resume else None
        if rows is None:
            missing.append(cell)
        else:
            cached[cell] = rows
    if not missing:
        logger.info("seed %d: all %d cells cached", seed, len(plan))
        return [r for cell in plan for r in cached[cell]]

    logger.info("seed %d: computing %d/%d cells", seed, len(missing), len(plan))
    ctx = build_seed_context(cfg, seed, out, resume)
    models = {}
    for strategy in OFFLINE_STRATEGIES:
        art = train_offline_strategy(cfg, ctx, strategy, out, resume)
        models[strategy] = art.build()

    all_rows: list[dict] = []
    for cell in plan:
        if cell in cached:
            all_rows.extend(cached[cell])
            continue
        offline_name, online_name, shots = cell
        rows, notes = adapt_and_evaluate(cfg, ctx, models[offline_name], *cell)
        _write_cell(_cell_path(out, seed, *cell), digest, rows, notes)
        all_rows.extend(rows)
        logger.info("seed %d cell %s done (%.1fs online)", seed, cell, notes.get("online_seconds", 0))
    return all_rows


def run_grid(cfg: ExperimentConfig, out: str | Path, resume: bool = False) -> list[dict]:
    """Run the full (offline x online x shots x seeds) grid; returns all rows."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        if manifest.get("config_digest") != digest:
            raise GridMismatchError(
                f"output directory {out} holds results for config digest "
                f"{manifest.get('config_digest')}, current config digest is {digest}; "
                f"point --out at a fresh directory or restore the matching config"
            )
    else:
        manifest = {
            "config_digest": digest,
            "schema_version": cfg.schema_version,
            "seeds": cfg.evaluation.seeds,
            "config": cfg.to_dict(),
        }
        manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2))

    rows: list[dict] = []
    for seed in cfg.evaluation.seeds:
        rows.extend(run_seed(cfg, seed, out, resume))
    validate_grid(cfg, rows)
    return rows


def validate_grid(cfg: ExperimentConfig, rows: list[dict]) -> None:
    """Every (offline, online, shots, seed) cell of the grid must be present."""
    want = {
        (off, onl, shots, seed)
        for off, onl, shots in seed_cells(cfg)
        for seed in cfg.evaluation.seeds
    }
    have = {(r["offline"], r["online"], r["shots"], r["seed"]) for r in rows}
    gaps = want - have
    if gaps:
        raise ConfigurationError(f"grid is incomplete, missing cells: {sorted(gaps)[:8]}")


# ---------------------------------------------------------------------------
# aggregate helpers shared by the report, probe and acceptance suite


def aggregate_ser(
    rows: list[dict], offline: str, online: str, shots: int,
    seed: int | None = None, attacked: bool = True, min_snr: float | None = None,
) -> float:
    """Frame-weighted mean SER over matching rows (attacked or clean)."""
    num = den = 0.0
    for r in rows:
        if r["offline"] != offline or r["online"] != online or r["shots"] != shots:
            continue
        if seed is not None and r["seed"] != seed:
            continue
        if attacked and r["attack"] == CLEAN_ATTACK_ID:
            continue
        if not attacked and r["attack"] != CLEAN_ATTACK_ID:
            continue
        if min_snr is not None and r["snr_db"] < min_snr:
            continue
        num += r["ser"] * r["n"]
        den += r["n"]
    if den == 0:
        raise InputShapeError(
            f"no rows match ({offline}, {online}, {shots}, seed={seed}, attacked={attacked})"
        )
    return num / den


# ---------------------------------------------------------------------------
# efficiency probe


def _threshold_for_seed(cfg: ExperimentConfig, out: Path, seed: int, digest: str) -> float:
    if cfg.efficiency.threshold is not None:
        return float(cfg.efficiency.threshold)
    ref_shots = max(cfg.online.shots)
    rows = _read_cell(_cell_path(out, seed, "clean", "finetune", ref_shots), digest)
    if rows is None:
        raise ConfigurationError(
            f"efficiency threshold needs the (clean, finetune, {ref_shots}) cell for seed {seed}; "
            f"run the grid first"
        )
    return aggregate_ser(
        rows, "clean", "finetune", ref_shots, attacked=True,
        min_snr=cfg.evaluation.headline_min_snr,
    )


def _probe_context(cfg: ExperimentConfig, seed: int, out: str | Path) -> SeedContext:
    """Rebuild the cheap parts of a seed context, loading cached perturbed data."""
    digest = cfg.digest()
    data_dir = Path(out) / "data" / f"seed{seed}"
    frame_len, sps = cfg.dataset.frame_len, cfg.dataset.sps
    max_shots = cfg.max_shots()

    src = build_domain(
        cfg.dataset.source.profile(), cfg.dataset.source.per_class, 0, seed * 100 + 1,
        domain="source", test_per_class=cfg.dataset.source.test_per_class,
        frame_len=frame_len, sps=sps,
    )
    tgt = build_domain(
        cfg.dataset.target.profile(), cfg.dataset.target.per_class, max_shots, seed * 100 + 2,
        domain="target", test_per_class=cfg.dataset.target.test_per_class,
        frame_len=frame_len, sps=sps,
    )
    src_train, src_test = src[DatasetRole.SOURCE_TRAIN], src[DatasetRole.SOURCE_TEST]
    pilots, unlabeled, tgt_test = (
        tgt[DatasetRole.TARGET_PILOT], tgt[DatasetRole.TARGET_UNLABELED], tgt[DatasetRole.TARGET_TEST]
    )

    eval_attacks = []
    for f in sorted(data_dir.glob("test_adv_*.amcf")):
        ds = load_dataset(f)
        if ds.provenance.get("config_digest") != digest:
            raise GridMismatchError(f"{f} carries a stale config digest; rerun the grid")
        eval_attacks.append(EvalAttack(
            task_id=ds.provenance["task_id"],
            spec=AttackSpec(method=ds.provenance["method"], epsilon=ds.provenance["epsilon"]),
            substitute=None, x_test_adv=to_tensors(ds.x()),
        ))
    if not eval_attacks:
        raise ConfigurationError(f"no cached perturbed test sets under {data_dir}; run the grid first")

    if cfg.online.attack_adaptation_data:
        pil_ds = load_dataset(data_dir / "pilots_adv.amcf")
        unl_ds = load_dataset(data_dir / "unlabeled_adv.amcf")
        pilots_x = to_tensors(pil_ds.x())
        unlabeled_x = to_tensors(unl_ds.x())
    else:
        pilots_x = to_tensors(pilots.x())
        unlabeled_x = to_tensors(unlabeled.x())

    x_src, y_src = to_tensors(src_train.x(), src_train.y())
    x_src_te, y_src_te = to_tensors(src_test.x(), src_test.y())
    x_tt, y_tt = to_tensors(tgt_test.x(), tgt_test.y())
    return SeedContext(
        seed=seed,
        x_src_train=x_src, y_src_train=y_src,
        x_src_test=x_src_te, y_src_test=y_src_te,
        x_tgt_test=x_tt, y_tgt_test=y_tt, snr_tgt_test=tgt_test.snrs(),
        pilots_x=pilots_x, pilots_y=to_tensors(pilots.x(), pilots.y())[1],
        unlabeled_x=unlabeled_x, eval_attacks=eval_attacks, max_shots=max_shots,
    )


def efficiency_probe(cfg: ExperimentConfig, out: str | Path, resume: bool = False) -> list[dict]:
    """Sweep pilot shots upward until each strategy pair reaches the target SER.

    Returns one row per (seed, offline, online) with the crossing shot count,
    sample count, wall-clock costs and a did-not-reach flag at the sweep cap.
    """
    out = Path(out)
    digest = cfg.digest()
    result_path = out / "efficiency.json"
    if resume and result_path.exists():
        payload = json.loads(result_path.read_text())
        if payload.get("config_digest") == digest:
            return payload["rows"]
        raise GridMismatchError(f"{result_path} carries a stale config digest")

    rows: list[dict] = []
    for seed in cfg.evaluation.seeds:
        threshold = _threshold_for_seed(cfg, out, seed, digest)
        ctx = _probe_context(cfg, seed, out)
        for strategy in OFFLINE_STRATEGIES:
            art = load_artifact(out / "artifacts" / f"seed{seed}_{strategy}.amcw")
            if art.provenance.get("config_digest") != digest:
                raise GridMismatchError(f"artifact for seed {seed} {strategy} is stale; rerun the grid")
            model = art.build()
            for online_name in cfg.efficiency.online_strategies:
                reached = False
                shots_used = cfg.efficiency.cap
                last_ser = float("nan")
                online_seconds = 0.0
                for k in cfg.efficiency.shots_grid:
                    t0 = time.perf_counter()
                    cell_rows, _ = adapt_and_evaluate(cfg, ctx, model, strategy, online_name, k)
                    online_seconds = time.perf_counter() - t0
                    last_ser = aggregate_ser(
                        cell_rows, strategy, online_name, k, attacked=True,
                        min_snr=cfg.evaluation.headline_min_snr,
                    )
                    if last_ser <= threshold:
                        reached = True
                        shots_used = k
                        break
                rows.append({
                    "seed": seed, "offline": strategy, "online": online_name,
                    "shots": shots_used, "samples": shots_used * ctx.n_classes,
                    "reached": reached, "ser": round(last_ser, 6),
                    "threshold": round(threshold, 6),
                    "offline_seconds": art.provenance.get("offline_seconds", 0.0),
                    "online_seconds": round(online_seconds, 3),
                })
                logger.info(
                    "probe seed %d %s+%s: %s at %d shots (ser %.4f vs %.4f)",
                    seed, strategy, online_name,
                    "reached" if reached else "did NOT reach", shots_used, last_ser, threshold,
                )
    payload = {"config_digest": digest, "rows": rows}
    result_path.write_text(json.dumps(payload, sort_keys=True, indent=0))
    return rows
