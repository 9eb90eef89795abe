"""
Evaluation reports and their CSV rendering.
"""
import csv
import io
import logging
from pathlib import Path
from typing import List

from pydantic import BaseModel, Field, model_validator

from src.utils import PathLike, atomic_write_text, format_sig

logger = logging.getLogger(__name__)

SUMMARY_HEADER = "method,band,success_rate,mean_len,seed"


class EpisodeRecord(BaseModel):
    episode: int = Field(ge=0)
    success: bool
    length: int = Field(ge=0, description="Steps taken before done")
    final_distance: float = Field(description="Distance to the goal (maze) or expert end (spiral)")


class EvalReport(BaseModel):
    method: str
    goal_band: str
    episodes: int = Field(ge=1)
    success_rate: float = Field(ge=0.0, le=1.0)
    mean_episode_length: float
    records: List[EpisodeRecord] = Field(default_factory=list)
    base_seed: int
    config_digest: str = ""

    @model_validator(mode="after")
    def _check_counts(self):
        if len(self.records) != self.episodes:
            raise ValueError(f"{self.episodes} episodes but {len(self.records)} records")
        return self

    @classmethod
    def from_records(cls, method: str, goal_band: str, records: List[EpisodeRecord],
                     base_seed: int, config_digest: str = "") -> "EvalReport":
        records = sorted(records, key=lambda r: r.episode)
        successes = sum(r.success for r in records)
        return cls(
            method=method,
            goal_band=goal_band,
            episodes=len(records),
            success_rate=successes / len(records),
            mean_episode_length=sum(r.length for r in records) / len(records),
            records=records,
            base_seed=base_seed,
            config_digest=config_digest,
        )

    def summary_line(self) -> str:
        return (f"{self.method},{self.goal_band},{self.success_rate:.4f},"
                f"{self.mean_episode_length:.4f},{self.base_seed}")


def render_report_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["episode", "success", "length", "final_distance"])
    for r in report.records:
        writer.writerow([r.episode, int(r.success), r.length, format_sig(r.final_distance, 9)])
    return buf.getvalue()


def emit_report(report: EvalReport, path: PathLike) -> Path:
    """
    Write one CSV row per episode to `path` and the one-line summary (with its
    header) to the sibling `<stem>.summary.csv`. Returns the episode CSV path.
    """
    path = Path(path)
    atomic_write_text(path, render_report_csv(report))
    atomic_write_text(summary_path(path), f"{SUMMARY_HEADER}\n{report.summary_line()}\n")
    logger.info(f"📦 Report written to {path} ({report.method}: {report.success_rate:.4f})")
    return path


def summary_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.summary.csv")
