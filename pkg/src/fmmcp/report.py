"""Aggregate tables over portfolio runs: text, TSV, JSON and a per-seed figure."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .portfolio import Aggregate, SeedRun, aggregate

TIMEOUT_CELL = "T.O. (N/A, N/A, N/A)"
INDEX_NAME = "index.json"


def format_cell(agg: Aggregate | None, fmt: str = "{:.3f}") -> str:
    """'geo (min, med, max)', or the time-out cell when nothing completed."""
    if agg is None:
        return TIMEOUT_CELL
    g, med, lo, hi = agg.geo_mean, agg.median, agg.min, agg.max
    return f"{fmt.format(g)} ({fmt.format(lo)}, {fmt.format(med)}, {fmt.format(hi)})"


@dataclass
class ReportRow:
    """One instance (dims, rank, model variant) and the per-seed runs behind it."""

    n: int
    m: int
    p: int
    rank: int
    method: str
    runs: list[SeedRun]
    status: str = "unknown"

    @property
    def completed(self) -> list[SeedRun]:
        return [r for r in self.runs if r.completed]

    @property
    def time_stats(self) -> Aggregate | None:
        done = self.completed
        return aggregate([r.stats.elapsed for r in done]) if done else None

    @property
    def branch_stats(self) -> Aggregate | None:
        done = self.completed
        return aggregate([r.stats.branches for r in done]) if done else None

    @property
    def label(self) -> str:
        return f"({self.n},{self.m},{self.p}) R={self.rank} {self.method}"

    def to_dict(self) -> dict:
        def agg(a):
            return None if a is None else a._asdict()

        return {
            "n": self.n, "m": self.m, "p": self.p, "rank": self.rank, "method": self.method,
            "status": self.status,
            "completed": len(self.completed), "runs": len(self.runs),
            "time": agg(self.time_stats), "branches": agg(self.branch_stats),
            "per_seed": [r.to_dict() for r in self.runs],
        }


def row_from_index(index: dict) -> ReportRow:
    d = index["dims"]
    runs = [SeedRun.from_dict(r) for r in index["runs"]]
    return ReportRow(int(d["n"]), int(d["m"]), int(d["p"]), int(index["rank"]), index.get("method", "?"),
                     runs, index.get("status", "unknown"))


def load_rows(directory: Path) -> list[ReportRow]:
    """Rows for every index file at or below ``directory``, in path order."""
    directory = Path(directory)
    paths = sorted(directory.rglob(INDEX_NAME))
    rows = []
    for path in paths:
        with open(path) as fh:
            rows.append(row_from_index(json.load(fh)))
    return rows


HEADER = ("N", "M", "P", "R", "Method", "Time (sec) geo mean (min, med, max)",
          "Num Branches geo mean (min, med, max)")


def render_table(rows: list[ReportRow]) -> str:
    table = [HEADER]
    for r in rows:
        table.append((str(r.n), str(r.m), str(r.p), str(r.rank), r.method,
                      format_cell(r.time_stats), format_cell(r.branch_stats, "{:.2e}")))
    widths = [max(len(line[c]) for line in table) for c in range(len(HEADER))]
    out = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in table]
    return "\n".join(out) + "\n"


TSV_COLUMNS = ("n", "m", "p", "rank", "method", "status", "completed", "runs",
               "time_geo", "time_min", "time_med", "time_max",
               "branches_geo", "branches_min", "branches_med", "branches_max")


def render_tsv(rows: list[ReportRow]) -> str:
    lines = ["\t".join(TSV_COLUMNS)]
    for r in rows:
        cells = [r.n, r.m, r.p, r.rank, r.method, r.status, len(r.completed), len(r.runs)]
        for agg in (r.time_stats, r.branch_stats):
            cells += ["NA"] * 4 if agg is None else [f"{agg.geo_mean:.6g}", f"{agg.min:.6g}",
                                                   f"{agg.median:.6g}", f"{agg.max:.6g}"]
        lines.append("\t".join(str(c) for c in cells))
    return "\n".join(lines) + "\n"


def render_json(rows: list[ReportRow]) -> str:
    return json.dumps({"rows": [r.to_dict() for r in rows]}, indent=2) + "\n"


def plot_rows(rows: list[ReportRow], path: Path) -> Path:
    """Per-seed time and branch counts, one column of points per instance."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 1, figsize=(max(6.0, 1.2 * len(rows) + 2), 6), sharex=True)
    for x, row in enumerate(rows):
        started = [r for r in row.runs if r.stats.elapsed > 0 or r.completed]
        for i, run in enumerate(started):
            done = run.completed
            style = dict(marker="o" if done else "x", color="C0" if done else "C3", alpha=0.8)
            dx = 0.3 * (i / max(len(started) - 1, 1) - 0.5)
            axes[0].plot(x + dx, max(run.stats.elapsed, 1e-4), linestyle="none", **style)
            axes[1].plot(x + dx, max(run.stats.branches, 1), linestyle="none", **style)
    axes[0].set_ylabel("time (s)")
    axes[1].set_ylabel("branches")
    for ax in axes:
        ax.set_yscale("log")
        ax.grid(True, which="major", alpha=0.3)
    axes[1].set_xlim(-0.5, len(rows) - 0.5)
    axes[1].set_xticks(range(len(rows)))
    axes[1].set_xticklabels([r.label for r in rows], rotation=30, ha="right", fontsize=8)
    axes[0].set_title("per seed: o completed, x stopped", fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_report(directory: Path, rows: list[ReportRow] | None = None) -> dict[str, Path]:
    """Write stats.txt, stats.tsv, stats.json and stats.png into ``directory``."""
    directory = Path(directory)
    rows = load_rows(directory) if rows is None else rows
    out = {
        "txt": directory / "stats.txt",
        "tsv": directory / "stats.tsv",
        "json": directory / "stats.json",
        "png": directory / "stats.png",
    }
    out["txt"].write_text(render_table(rows))
    out["tsv"].write_text(render_tsv(rows))
    out["json"].write_text(render_json(rows))
    plot_rows(rows, out["png"])
    return out
