"""Report emission: deterministic CSV, JSON summary, SER-vs-SNR figures.

The CSV is byte-stable under identical (config, seeds): fixed header, rows
sorted on every key column, fixed-precision float formatting, and a leading
comment line carrying the config digest and seed list.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .config import ExperimentConfig
from .errors import InputShapeError
from .grid import CLEAN_ATTACK_ID, SER_CSV_HEADER, aggregate_ser, seed_cells, validate_grid
from .offline import OFFLINE_STRATEGIES

EFFICIENCY_CSV_HEADER = (
    "offline", "online", "shots", "samples", "reached", "ser", "threshold",
    "offline_seconds", "online_seconds", "seed",
)

_OFFLINE_LABELS = {
    "scratch": "Scratch",
    "clean": "Transfer (clean)",
    "adversarial": "Transfer (adversarial)",
    "meta_adversarial": "Meta-adversarial",
}


def _sort_key(row: dict):
    return (
        row["offline"], row["online"], int(row["shots"]),
        float(row["snr_db"]), row["attack"], int(row["seed"]),
    )


def write_ser_csv(rows: list[dict], path: Path, digest: str, seeds: list[int]) -> None:
    lines = [f"# config_digest={digest} seeds={','.join(str(s) for s in seeds)}"]
    lines.append(",".join(SER_CSV_HEADER))
    for r in sorted(rows, key=_sort_key):
        lines.append(
            f"{r['offline']},{r['online']},{int(r['shots'])},{float(r['snr_db']):.1f},"
            f"{r['attack']},{float(r['ser']):.6f},{int(r['n'])},{int(r['seed'])}"
        )
    path.write_text("\n".join(lines) + "\n")


def read_ser_csv(path: Path) -> list[dict]:
    rows = []
    lines = Path(path).read_text().splitlines()
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not body or body[0] != ",".join(SER_CSV_HEADER):
        raise InputShapeError(f"{path} does not carry the expected SER CSV header")
    for ln in body[1:]:
        off, onl, shots, snr, attack, s, n, seed = ln.split(",")
        rows.append({
            "offline": off, "online": onl, "shots": int(shots), "snr_db": float(snr),
            "attack": attack, "ser": float(s), "n": int(n), "seed": int(seed),
        })
    return rows


def write_efficiency_csv(rows: list[dict], path: Path, digest: str, seeds: list[int]) -> None:
    lines = [f"# config_digest={digest} seeds={','.join(str(s) for s in seeds)}"]
    lines.append(",".join(EFFICIENCY_CSV_HEADER))
    for r in sorted(rows, key=lambda r: (r["offline"], r["online"], int(r["seed"]))):
        lines.append(
            f"{r['offline']},{r['online']},{int(r['shots'])},{int(r['samples'])},"
            f"{int(bool(r['reached']))},{float(r['ser']):.6f},{float(r['threshold']):.6f},"
            f"{float(r['offline_seconds']):.3f},{float(r['online_seconds']):.3f},{int(r['seed'])}"
        )
    path.write_text("\n".join(lines) + "\n")


def _aggregates(cfg: ExperimentConfig, rows: list[dict]) -> dict:
    out = {}
    floor = cfg.evaluation.headline_min_snr
    for off, onl, shots in seed_cells(cfg):
        key = f"{off}/{onl}/{shots}"
        entry = {
            "attacked_ser": round(aggregate_ser(rows, off, onl, shots, attacked=True), 6),
            "clean_ser": round(aggregate_ser(rows, off, onl, shots, attacked=False), 6),
        }
        if floor is not None:
            entry["attacked_ser_headline"] = round(
                aggregate_ser(rows, off, onl, shots, attacked=True, min_snr=floor), 6
            )
            entry["clean_ser_headline"] = round(
                aggregate_ser(rows, off, onl, shots, attacked=False, min_snr=floor), 6
            )
        out[key] = entry
    return out


def _figure(
    cfg: ExperimentConfig, rows: list[dict], online_name: str, shots: int,
    path: Path, digest: str,
) -> None:
    bins = sorted(set(float(s) for s in cfg.dataset.target.snr_grid))
    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    for off in OFFLINE_STRATEGIES:
        series = []
        for b in bins:
            match = [
                r for r in rows
                if r["offline"] == off and r["online"] == online_name
                and r["shots"] == shots and r["attack"] != CLEAN_ATTACK_ID
                and float(r["snr_db"]) == b
            ]
            total_n = sum(r["n"] for r in match)
            series.append(sum(r["ser"] * r["n"] for r in match) / total_n if total_n else float("nan"))
        ax.plot(bins, series, marker="o", label=_OFFLINE_LABELS[off])
    title = "zero-shot" if online_name == "none" else f"{online_name}, {shots} shots/class"
    ax.set_title(f"SER vs SNR under unseen attacks ({title})")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("SER")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.text(0.99, 0.01, f"config {digest}", ha="right", fontsize=6, color="gray")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def emit_report(
    cfg: ExperimentConfig,
    rows: list[dict],
    out: str | Path,
    efficiency_rows: list[dict] | None = None,
) -> dict[str, Path]:
    """Write report.csv / report.json / figures (and efficiency.csv if given).

    Returns the mapping of logical name to written path.
    """
    out = Path(out)
    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    seeds = cfg.evaluation.seeds
    validate_grid(cfg, rows)

    written: dict[str, Path] = {}
    csv_path = report_dir / "report.csv"
    write_ser_csv(rows, csv_path, digest, seeds)
    written["csv"] = csv_path

    if efficiency_rows:
        eff_path = report_dir / "efficiency.csv"
        write_efficiency_csv(efficiency_rows, eff_path, digest, seeds)
        written["efficiency_csv"] = eff_path

    payload = {
        "schema_version": cfg.schema_version,
        "config_digest": digest,
        "seeds": seeds,
        "aggregates": _aggregates(cfg, rows),
        "rows": sorted(rows, key=_sort_key),
        "efficiency": sorted(
            efficiency_rows or [], key=lambda r: (r["offline"], r["online"], int(r["seed"]))
        ),
    }
    json_path = report_dir / "report.json"
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=1))
    written["json"] = json_path

    combos = [("none", 0)]
    combos += [("finetune", s) for s in cfg.online.shots]
    combos += [("dann", s) for s in cfg.online.shots]
    for online_name, shots in combos:
        name = f"ser_vs_snr_{online_name}" + (f"_{shots}shot" if shots else "")
        fig_path = report_dir / f"{name}.png"
        _figure(cfg, rows, online_name, shots, fig_path, digest)
        written[name] = fig_path
    return written
