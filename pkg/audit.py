"""
audit.py — Append-only run log and output manifests for pcpolar.

Tables:
  run_log(id, ts, subcommand, event_type, artifact, details_json)

Never UPDATE or DELETE — only INSERT.
Every artifact the CLI writes gets a sibling ``<artifact>.manifest.json``.
"""
from __future__ import annotations

import json
import sqlite3
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

import config
from config import AUDIT_DB, TOOL_VERSION


def _connect() -> sqlite3.Connection:
    conn = sqlite3.connect(str(AUDIT_DB))
    conn.row_factory = sqlite3.Row
    conn.execute("""
        CREATE TABLE IF NOT EXISTS run_log (
            id           INTEGER PRIMARY KEY AUTOINCREMENT,
            ts           TEXT    NOT NULL,
            subcommand   TEXT    NOT NULL,
            event_type   TEXT    NOT NULL,
            artifact     TEXT,
            details_json TEXT
        )
    """)
    conn.commit()
    return conn


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _insert(subcommand: str, event_type: str, artifact: str | None, details: dict) -> None:
    conn = _connect()
    conn.execute(
        "INSERT INTO run_log(ts, subcommand, event_type, artifact, details_json) VALUES(?,?,?,?,?)",
        (_now(), subcommand, event_type, artifact, json.dumps(details, default=str)),
    )
    conn.commit()
    conn.close()


# ── Public writers ─────────────────────────────────────────────────────────────

def log_run(subcommand: str, duration_s: float, stats: dict, artifact: str | None = None) -> None:
    """Log a successful subcommand."""
    _insert(subcommand, "RUN", artifact, {**stats, "duration_s": round(duration_s, 3)})


def log_failure(subcommand: str, reason: str) -> None:
    _insert(subcommand, "FAILURE", None, {"reason": reason})


# ── Public readers ─────────────────────────────────────────────────────────────

def get_log(limit: int = 200) -> list[dict]:
    """Return the most recent run log entries (newest first)."""
    conn = _connect()
    rows = conn.execute(
        "SELECT * FROM run_log ORDER BY id DESC LIMIT ?", (limit,)
    ).fetchall()
    conn.close()
    return [dict(r) for r in rows]


def get_stats() -> dict:
    conn = _connect()
    total    = conn.execute("SELECT COUNT(*) FROM run_log").fetchone()[0]
    runs     = conn.execute("SELECT COUNT(*) FROM run_log WHERE event_type='RUN'").fetchone()[0]
    failures = conn.execute("SELECT COUNT(*) FROM run_log WHERE event_type='FAILURE'").fetchone()[0]
    conn.close()
    return {"total_events": total, "runs": runs, "failures": failures}


# ── Manifests ──────────────────────────────────────────────────────────────────

def _numerics() -> dict[str, Any]:
    """Environment-tunable constants that change results."""
    return {
        "PCP_LLR_CLIP": config.LLR_CLIP,
        "PCP_MC_DESIGN_TRIALS": config.MC_DESIGN_TRIALS,
        "PCP_GH_NODES": config.GH_NODES,
        "PCP_DESIGN_SEED": config.DESIGN_SEED,
    }


class RunManifest(BaseModel):
    """Everything needed to re-run a command bit-identically."""

    model_config = ConfigDict(frozen=True)

    subcommand: str
    argv: tuple[str, ...]
    parameters: dict[str, Any]
    seed: int | None = None
    artifacts: tuple[str, ...] = ()
    numerics: dict[str, Any] = Field(default_factory=_numerics)
    tool_version: str = TOOL_VERSION
    created_at: str = Field(default_factory=_now)


def manifest_path(artifact: Path | str) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + ".manifest.json")


def write_manifest(artifact: Path | str, manifest: RunManifest) -> Path:
    path = manifest_path(artifact)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return path
