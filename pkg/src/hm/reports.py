"""Report and suite-configuration records, with deterministic serialization.

Reports must be byte-identical across reruns with the same config and seed:
no timestamps, sorted keys, and all randomness derived from the master seed.
The environment stamp is the package version plus that seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


def sanitize(obj):
    """Recursively convert numpy scalars/arrays so json can emit them."""
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [sanitize(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    return obj


@dataclass
class CheckRecord:
    """One verified inequality or identity, with its audit anchor."""

    id: str
    anchor: str
    params: dict = field(default_factory=dict)
    lhs: float | None = None
    rhs: float | None = None
    residual: float | None = None
    passed: bool = True
    skipped: bool = False
    reason: str | None = None

    def as_dict(self) -> dict:
        return sanitize(asdict(self))


@dataclass
class Report:
    """A suite run: per-check records plus an environment stamp."""

    suite: str
    seed: int
    version: str
    config: dict = field(default_factory=dict)
    checks: list[CheckRecord] = field(default_factory=list)

    def add(self, record: CheckRecord) -> None:
        self.checks.append(record)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks if not c.skipped)

    def summary(self) -> dict:
        failed = [c.id for c in self.checks if not c.skipped and not c.passed]
        return {
            "total": len(self.checks),
            "passed": sum(1 for c in self.checks if not c.skipped and c.passed),
            "failed": len(failed),
            "skipped": sum(1 for c in self.checks if c.skipped),
            "failed_ids": failed,
            "ok": self.ok,
        }

    def to_json_str(self) -> str:
        data = {
            "suite": self.suite,
            "seed": self.seed,
            "version": self.version,
            "config": sanitize(self.config),
            "checks": [c.as_dict() for c in self.checks],
            "summary": self.summary(),
        }
        return json.dumps(data, sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(self.to_json_str())


def write_curves_csv(path: str | Path, header: list[str], rows) -> None:
    """Delimited curve output next to the JSON report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([sanitize(v) for v in row])


@dataclass
class SuiteConfig:
    """Everything a verification suite needs; round-trips through JSON."""

    suite: str
    seed: int = 7
    sizes: list[int] = field(default_factory=lambda: [16, 32, 64])
    set_densities: list[float] = field(default_factory=lambda: [0.125, 0.5])
    tail_t_max: int = 200
    tolerance: float = 1e-8
    replicas: int = 10_000
    growth_sizes: list[int] = field(default_factory=lambda: [64, 128, 256, 512])
    growth_replicas: int = 200
    threads: int = 1
    figures: bool = True
    out: str | None = None

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(sanitize(asdict(self)), sort_keys=True, indent=2) + "\n")

    @classmethod
    def from_json(cls, path: str | Path) -> "SuiteConfig":
        data = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown config fields: {sorted(bad)}")
        if "suite" not in data:
            raise ValueError("config is missing the required field 'suite'")
        return cls(**data)
