"""Per-run bookkeeping that lets pipeline stages resume.

``manifest.json`` holds only deterministic content so reruns are byte-identical;
wall-clock times go to the ``manifest.times.json`` sidecar.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

MANIFEST = "manifest.json"
SIDECAR = "manifest.times.json"

PENDING, EXPLORED, PROBED, FAILED, NONDETERMINISTIC = "pending", "explored", "probed", "failed", "nondeterministic"
_FORWARD = {
    PENDING: {EXPLORED, FAILED, NONDETERMINISTIC},
    EXPLORED: {PROBED, FAILED, NONDETERMINISTIC},
    PROBED: set(),
    FAILED: set(),
    NONDETERMINISTIC: set(),
}


class StatusError(ValueError):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


@dataclass
class RunManifest:
    run_id: str
    config: dict
    games: dict[str, dict] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=lambda: {"locations": 0, "probes": 0, "errors": 0})

    @classmethod
    def new(cls, config: dict) -> RunManifest:
        run_id = hashlib.sha256(_dumps(config).encode()).hexdigest()[:12]
        return cls(run_id, config)

    def add_game(self, game_id: str, **info) -> None:
        self.games[game_id] = {"status": PENDING, **info}

    def status(self, game_id: str) -> str:
        return self.games[game_id]["status"]

    def set_status(self, game_id: str, status: str, error: str | None = None) -> None:
        current = self.status(game_id)
        if status not in _FORWARD[current]:
            raise StatusError(f"{game_id}: cannot move from {current} to {status}")
        self.games[game_id]["status"] = status
        if error is not None:
            self.games[game_id]["error"] = error

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "config": self.config, "games": self.games, "counters": self.counters}

    def save(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        tmp = out_dir / (MANIFEST + ".tmp")
        tmp.write_text(_dumps(self.to_dict()), encoding="utf-8")
        tmp.replace(out_dir / MANIFEST)
        sidecar = out_dir / SIDECAR
        times = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
        now = datetime.now(timezone.utc).isoformat()
        times.setdefault("created", now)
        times["updated"] = now
        times["run_id"] = self.run_id
        sidecar.write_text(_dumps(times), encoding="utf-8")

    @classmethod
    def load(cls, out_dir: str | Path) -> RunManifest:
        d = json.loads((Path(out_dir) / MANIFEST).read_text(encoding="utf-8"))
        return cls(d["run_id"], d["config"], d["games"], d["counters"])
