"""
Shared utilities for the Beltrami lab scripts.
Provides settings from the environment, the error hierarchy, calibration
thresholds and the sqlite run history.
"""

import hashlib
import json
import os
import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from dotenv import dotenv_values, load_dotenv

load_dotenv(".env.local")

# Configuration
ROOT_DIR = Path(__file__).resolve().parent
DEFAULT_SEED = 0x5EED
DEFAULT_DB_FILE = "lab_results.db"
DEFAULT_CALIBRATION_FILE = ROOT_DIR / "calibration.json"
TRUTHY = ("1", "true", "yes")

# Thresholds used until a calibration run freezes measured ones; None means
# only the qualitative check applies.
DEFAULT_THRESHOLDS = {
    "trace_floor": 0.05,
    "probe_contrast_ratio": None,
    "normal_ball_J_ceiling": None,
    "spheromak_init_J_ceiling": None,
    "vainshtein_floor": None,
}


# ─── errors ───────────────────────────────────────────────────────

class LabError(Exception):
    """Base error; keyword context is kept in ``details`` and shown in str()."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def __str__(self) -> str:
        if not self.details:
            return self.message
        context = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"{self.message} ({context})"


class MeshError(LabError):
    """Bad mesh input: malformed file, inverted cell, open boundary, unknown domain."""


class LinalgError(LabError):
    """Assembly, factorization, root bracketing or LP failure."""


class FieldError(LabError):
    """Invalid field or weight parameters, or evaluation outside the valid region."""


class DomainHypothesisError(FieldError):
    """The meshed domain violates a hypothesis of the identity being checked."""


class UsageError(LabError):
    """Command-line input that cannot be acted on."""


# ─── settings ─────────────────────────────────────────────────────

def is_truthy(value: Optional[str]) -> bool:
    return str(value or "").strip().lower() in TRUTHY


def parse_seed(text) -> int:
    """Parse a decimal or 0x-prefixed seed."""
    if isinstance(text, int):
        return text
    try:
        seed = int(str(text).strip(), 0)
    except ValueError:
        raise UsageError("seed must be an integer", seed=text) from None
    if seed < 0:
        raise UsageError("seed must be non-negative", seed=text)
    return seed


@dataclass(frozen=True)
class Settings:
    seed: int = DEFAULT_SEED
    threads: int = 1
    results_db: str = DEFAULT_DB_FILE
    calibration_path: str = str(DEFAULT_CALIBRATION_FILE)
    slow: bool = False


def get_settings(environ: Optional[Mapping[str, str]] = None) -> Settings:
    """
    Build settings from BELTRAMI_LAB_* environment variables.

    Args:
        environ: mapping to read instead of os.environ

    Returns:
        Settings with defaults for anything unset
    """
    env = os.environ if environ is None else environ
    seed = parse_seed(env.get("BELTRAMI_LAB_SEED", DEFAULT_SEED))
    try:
        threads = int(env.get("BELTRAMI_LAB_THREADS", "1"))
    except ValueError:
        raise UsageError("BELTRAMI_LAB_THREADS must be an integer") from None
    if threads < 1:
        raise UsageError("BELTRAMI_LAB_THREADS must be at least 1", threads=threads)
    return Settings(
        seed=seed,
        threads=threads,
        results_db=env.get("BELTRAMI_LAB_RESULTS_DB", DEFAULT_DB_FILE),
        calibration_path=env.get("BELTRAMI_LAB_CALIBRATION", str(DEFAULT_CALIBRATION_FILE)),
        slow=is_truthy(env.get("BELTRAMI_LAB_SLOW")),
    )


def read_config_file(path) -> dict:
    """
    Read ``key = value`` lines. Keys are flag names; dashes and underscores
    are interchangeable. A bare key (no value) reads as "true".
    """
    if not Path(path).is_file():
        raise UsageError("config file not found", path=str(path))
    values = {}
    for key, value in dotenv_values(path).items():
        name = key.strip().lstrip("-").replace("-", "_").lower()
        values[name] = "true" if value is None else value.strip()
    return values


# ─── calibration ──────────────────────────────────────────────────

def load_calibration(path=None) -> dict:
    """Frozen thresholds merged over the defaults; a missing file gives the defaults."""
    thresholds = dict(DEFAULT_THRESHOLDS)
    file = Path(path or get_settings().calibration_path)
    if file.is_file():
        data = json.loads(file.read_text())
        thresholds.update(data.get("thresholds", {}))
    return thresholds


def save_calibration(path, thresholds: dict, measurements: dict, provenance: str) -> None:
    payload = {
        "provenance": provenance,
        "thresholds": thresholds,
        "measurements": measurements,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ─── run history ──────────────────────────────────────────────────

def short_hash(*parts) -> str:
    h = hashlib.sha1()
    for part in parts:
        h.update(part if isinstance(part, bytes) else str(part).encode("utf-8"))
    return h.hexdigest()[:12]


def init_db(db_file: str) -> None:
    conn = sqlite3.connect(db_file)
    cursor = conn.cursor()
    cursor.execute('''
        CREATE TABLE IF NOT EXISTS runs (
            run_id TEXT PRIMARY KEY,
            command TEXT,
            mesh_id TEXT,
            passed INTEGER,
            n_checks INTEGER,
            n_failed INTEGER,
            timing_ms REAL,
            created_at REAL
        )
    ''')
    cursor.execute('''
        CREATE TABLE IF NOT EXISTS checks (
            run_id TEXT,
            position INTEGER,
            name TEXT,
            value REAL,
            tolerance REAL,
            relation TEXT,
            passed INTEGER,
            oracle REAL,
            provenance TEXT,
            PRIMARY KEY (run_id, position)
        )
    ''')
    conn.commit()
    conn.close()


def record_run(db_file: str, report: dict) -> str:
    """Store the verdict of every check in one report; returns the run id."""
    init_db(db_file)
    created_at = time.time()
    run_id = short_hash(report.get("command", ""), repr(created_at))
    mesh = report.get("mesh") or {}
    results = report.get("results", [])
    failed = [r for r in results if not r.get("pass", False)]
    conn = sqlite3.connect(db_file)
    conn.execute(
        "INSERT OR REPLACE INTO runs (run_id, command, mesh_id, passed, n_checks, n_failed, "
        "timing_ms, created_at) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
        (run_id, report.get("command", ""), mesh.get("mesh_id"), int(not failed), len(results),
         len(failed), report.get("timing_ms"), created_at),
    )
    conn.executemany(
        "INSERT OR REPLACE INTO checks (run_id, position, name, value, tolerance, relation, "
        "passed, oracle, provenance) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
        [(run_id, i, r.get("name"), r.get("value"), r.get("tolerance"), r.get("relation", "<="),
          int(bool(r.get("pass", False))), r.get("oracle"), r.get("provenance"))
         for i, r in enumerate(results)],
    )
    conn.commit()
    conn.close()
    return run_id


def fetch_runs(db_file: str, limit: int = 20) -> list:
    if not Path(db_file).is_file():
        return []
    conn = sqlite3.connect(db_file)
    conn.row_factory = sqlite3.Row
    rows = conn.execute(
        "SELECT run_id, command, mesh_id, passed, n_checks, n_failed, created_at FROM runs "
        "ORDER BY created_at DESC LIMIT ?",
        (limit,),
    ).fetchall()
    conn.close()
    return [dict(row) for row in rows]


def fetch_checks(db_file: str, run_id: str) -> list:
    """Check verdicts of one run in report order."""
    if not Path(db_file).is_file():
        return []
    conn = sqlite3.connect(db_file)
    conn.row_factory = sqlite3.Row
    rows = conn.execute(
        "SELECT name, value, tolerance, relation, passed, oracle, provenance FROM checks "
        "WHERE run_id = ? ORDER BY position",
        (run_id,),
    ).fetchall()
    conn.close()
    return [dict(row) for row in rows]
