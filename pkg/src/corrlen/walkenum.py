"""Brute-force path sums for the killed random walk and the self-avoiding
walk on tiny boxes.

Every walk ``0 -> v_1 -> ... -> v_{k-1} -> x`` with all vertices in the box
``||v||_inf <= R`` is visited explicitly; no sums are shared between walks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .couplings import CouplingKernel, box_points
from .errors import EnumerationBudgetError, ValidationError

MAX_R = 4
MAX_K = 6
DEFAULT_BUDGET = 10 ** 8
CHUNK = 1 << 20


@dataclass(eq=False)
class EnumConfig:
    kernel: CouplingKernel
    R: int
    K: int
    lam: float
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if not (1 <= self.R <= MAX_R):
            raise ValidationError(f"enumeration box radius must be in [1, {MAX_R}]")
        if not (1 <= self.K <= MAX_K):
            raise ValidationError(f"enumeration length must be in [1, {MAX_K}]")
        if not (0 <= self.lam < 1):
            raise ValidationError("lambda must lie in [0, 1)")

    @property
    def n_sites(self) -> int:
        return (2 * self.R + 1) ** self.kernel.d

    def projected_walks(self) -> int:
        """Number of vertex sequences visited for one endpoint."""
        N = self.n_sites
        return sum(N ** (k - 1) for k in range(1, self.K + 1))

    def check_budget(self) -> None:
        p = self.projected_walks()
        if p > self.budget:
            raise EnumerationBudgetError(
                f"{p:.3g} walks exceed the budget {self.budget:.3g}; reduce K or R", projected=p)


def _sites_and_weights(cfg: EnumConfig):
    d = cfg.kernel.d
    V = box_points(d, cfg.R).reshape(-1, d).astype(int)
    Jb = cfg.kernel.box(2 * cfg.R)
    diff = V[None, :, :] - V[:, None, :] + 2 * cfg.R
    W = cfg.lam * Jb[tuple(diff[..., i] for i in range(d))]
    origin = int(np.flatnonzero(np.all(V == 0, axis=1))[0])
    return V, W, origin


def _endpoint(cfg: EnumConfig, V, x) -> int:
    x = np.asarray(x, dtype=int).reshape(cfg.kernel.d)
    if np.any(np.abs(x) > cfg.R):
        raise ValidationError("endpoint outside the box")
    return int(np.flatnonzero(np.all(V == x, axis=1))[0])


def _walk_sum(cfg: EnumConfig, x, self_avoiding: bool) -> float:
    cfg.check_budget()
    V, W, o = _sites_and_weights(cfg)
    xi = _endpoint(cfg, V, x)
    N = len(V)
    total = 1.0 if xi == o else 0.0
    for k in range(1, cfg.K + 1):
        m = k - 1  # free interior vertices
        if m == 0:
            if not (self_avoiding and xi == o):
                total += W[o, xi]
            continue
        count = N ** m
        acc = 0.0
        for start in range(0, count, CHUNK):
            codes = np.arange(start, min(count, start + CHUNK))
            idx = np.unravel_index(codes, (N,) * m)
            w = W[o, idx[0]].copy()
            for j in range(1, m):
                w *= W[idx[j - 1], idx[j]]
            w *= W[idx[-1], xi]
            if self_avoiding:
                seq = [np.full(codes.shape, o)] + list(idx) + [np.full(codes.shape, xi)]
                ok = np.ones(codes.shape, dtype=bool)
                for a in range(len(seq)):
                    for b in range(a + 1, len(seq)):
                        ok &= seq[a] != seq[b]
                w = w[ok]
            acc += float(w.sum())
        total += acc
    return total


def enumerate_krw(cfg: EnumConfig, x) -> float:
    """Sum of ``prod lam J`` over all walks of length ``<= K`` from 0 to ``x`` in the box."""
    return _walk_sum(cfg, x, self_avoiding=False)


def enumerate_saw(cfg: EnumConfig, x) -> float:
    """As :func:`enumerate_krw`, restricted to walks visiting each vertex at most once."""
    return _walk_sum(cfg, x, self_avoiding=True)


def enumerate_saw_dfs(cfg: EnumConfig, x) -> float:
    """Self-avoiding sum by depth-first search with a visited set.

    Independent of :func:`enumerate_saw`: walks are grown from the origin
    and pruned on revisits instead of filtered after the fact.
    """
    cfg.check_budget()
    V, W, o = _sites_and_weights(cfg)
    xi = _endpoint(cfg, V, x)
    N = len(V)
    Wl = W.tolist()
    total = 1.0 if xi == o else 0.0
    visited = [False] * N
    visited[o] = True

    def grow(v, weight, steps):
        nonlocal total
        if steps == cfg.K:
            return
        row = Wl[v]
        for u in range(N):
            if visited[u] or row[u] == 0.0:
                continue
            w = weight * row[u]
            if u == xi:
                total += w
                continue
            visited[u] = True
            grow(u, w, steps + 1)
            visited[u] = False

    grow(o, 1.0, 0)
    return total
