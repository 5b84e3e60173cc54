"""Interchange formats: boundary CSV, JSON reports and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boundary import Boundary


class BoundaryCsvError(ValueError):
    pass


def fmt(v: float) -> str:
    return format(float(v), ".12g")


def boundary_csv_text(b: Boundary) -> str:
    buf = io.StringIO()
    buf.write("x,b\n")
    for x, v in zip(b.xs, b.bs):
        buf.write(f"{fmt(x)},{fmt(v)}\n")
    return buf.getvalue()


def write_boundary_csv(path, b: Boundary) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(boundary_csv_text(b), encoding="utf-8", newline="")
    return path


def read_boundary_csv(path) -> Boundary:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "b"]:
        raise BoundaryCsvError(f"{path}:1: expected header 'x,b'")
    xs, bs = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise BoundaryCsvError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        try:
            xs.append(float(row[0]))
            bs.append(float(row[1]))
        except ValueError:
            raise BoundaryCsvError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
        if len(xs) > 1 and xs[-1] <= xs[-2]:
            raise BoundaryCsvError(f"{path}:{lineno}: x values must be strictly increasing")
    if len(xs) < 2:
        raise BoundaryCsvError(f"{path}: need at least two rows")
    if xs[0] != 0.0:
        raise BoundaryCsvError(f"{path}:2: first x must be 0")
    return Boundary(np.array(xs), np.array(bs))


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    flags: dict
    seed: int | None
    artifacts: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    def add_artifact(self, path) -> None:
        path = Path(path)
        self.artifacts[path.name] = sha256_file(path)

    def write(self, directory) -> Path:
        payload = {
            "command": self.command,
            "config": self.config,
            "flags": self.flags,
            "seed": self.seed,
            "artifacts": dict(sorted(self.artifacts.items())),
            "timings_seconds": self.timings,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "platform": platform.platform(),
        }
        return write_json(Path(directory) / "manifest.json", payload)


@dataclass
class Comparison:
    sup_abs: float
    mean_abs: float
    sup_rel: float
    min_signed_gap: float
    max_signed_gap: float
    n_points: int
    x_max: float
    passed: bool

    def as_dict(self) -> dict:
        return {k: (bool(v) if k == "passed" else v) for k, v in self.__dict__.items()}


def compare_boundaries(a: Boundary, b: Boundary, rel_tol: float = 0.05, abs_tol: float = 0.0,
                       x_fraction: float = 0.8, n_points: int = 201) -> Comparison:
    """Resample both curves on ``[0, x_fraction * min(x_end)]`` and compare.

    Each point passes when ``|a - b| <= max(rel_tol |b|, abs_tol)``; ``b`` is the
    reference.  Signed gaps are ``a - b``.
    """
    x_hi = x_fraction * min(a.x_end, b.x_end)
    xs = np.linspace(0.0, x_hi, n_points)
    va, vb = a(xs), b(xs)
    diff = va - vb
    scale = np.abs(vb)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, np.abs(diff) / scale, np.where(diff == 0, 0.0, np.inf))
    allowed = np.maximum(rel_tol * scale, abs_tol)
    return Comparison(
        sup_abs=float(np.max(np.abs(diff))),
        mean_abs=float(np.mean(np.abs(diff))),
        sup_rel=float(np.max(rel)),
        min_signed_gap=float(np.min(diff)),
        max_signed_gap=float(np.max(diff)),
        n_points=n_points,
        x_max=float(x_hi),
        passed=bool(np.all(np.abs(diff) <= allowed)),
    )
