"""Scenario files: one JSON document describes one reproducible experiment."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .couplings import PrefactorSpec
from .errors import ValidationError
from .geometry import NormSpec

KNOWN_KEYS = {"norm", "prefactor", "directions", "lambdas", "kernel", "series", "diagnostics",
              "output", "name"}


def fan(d: int, n: int) -> list[np.ndarray]:
    """``n`` unit directions spanning the quadrant between ``e_1`` and ``e_2``, both included."""
    if d == 1:
        return [np.array([1.0])]
    if n < 1:
        raise ValidationError("fan needs at least one direction")
    out = []
    for i in range(n):
        th = 0.5 * math.pi * (i / (n - 1) if n > 1 else 0.0)
        v = np.zeros(d)
        v[0], v[1] = math.cos(th), math.sin(th)
        v[np.abs(v) < 1e-15] = 0.0
        out.append(v)
    return out


def _lambda_grid(spec) -> list[float]:
    if spec is None:
        return []
    if isinstance(spec, dict):
        try:
            vals = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError("lambda grid needs start, stop and num") from exc
    else:
        vals = np.asarray(spec, dtype=float)
    if vals.ndim != 1 or np.any(~np.isfinite(vals)) or np.any(vals <= 0) or np.any(vals >= 1):
        raise ValidationError("lambda values must lie in (0, 1)")
    return [float(v) for v in vals]


@dataclass
class Scenario:
    norm: NormSpec
    prefactor: PrefactorSpec
    directions: list
    lambdas: list
    kernel_R: int = 40
    tail_tol: float = 1e-12
    series: dict | None = None
    diagnostics: dict = field(default_factory=dict)
    output: str | None = None
    name: str = "scenario"
    raw: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.norm.d

    @property
    def sha256(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        if not isinstance(raw, dict):
            raise ValidationError("scenario must be a JSON object")
        unknown = set(raw) - KNOWN_KEYS
        if unknown:
            raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
        for key in ("norm", "prefactor"):
            if key not in raw:
                raise ValidationError(f"scenario needs '{key}'")
        norm = NormSpec.from_config(raw["norm"])
        pre = PrefactorSpec.from_config(raw["prefactor"])
        dirs = raw.get("directions", "fan:1")
        if isinstance(dirs, str):
            if not dirs.startswith("fan:"):
                raise ValidationError("directions must be a list or 'fan:N'")
            try:
                directions = fan(norm.d, int(dirs[4:]))
            except ValueError as exc:
                raise ValidationError("bad fan size") from exc
        else:
            directions = []
            for v in dirs:
                v = np.asarray(v, dtype=float).reshape(-1)
                if v.shape != (norm.d,) or not np.all(np.isfinite(v)) or not np.any(v != 0):
                    raise ValidationError(f"direction {v.tolist()} is not a non-zero {norm.d}-vector")
                directions.append(v / np.linalg.norm(v))
        kcfg = raw.get("kernel", {})
        R = int(kcfg.get("R", 40))
        tol = float(kcfg.get("tail_tol", 1e-12))
        if R < 1 or not (0 < tol < 1):
            raise ValidationError("kernel needs R >= 1 and 0 < tail_tol < 1")
        series = raw.get("series")
        if series is not None:
            if not {"R", "K", "n_range"} <= set(series):
                raise ValidationError("series needs R, K and n_range")
            n0, n1 = series["n_range"]
            if not (1 <= n0 < n1 <= series["R"]):
                raise ValidationError("series n_range must satisfy 1 <= n0 < n1 <= R")
        return cls(norm, pre, directions, _lambda_grid(raw.get("lambdas")), R, tol, series,
                   dict(raw.get("diagnostics", {})), raw.get("output"), str(raw.get("name", "scenario")),
                   raw)

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ValidationError(f"scenario file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"scenario file is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)
