"""L1 trajectory distance matrix and agglomerative clustering.

Clusters carry scipy-style ids: leaves are ``0..n-1`` and the cluster formed
by merge ``k`` gets id ``n + k``. Ties between candidate pairs are broken
toward the lexicographically smallest ``(min id, max id)`` pair.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .formatting import fmt, num
from .panel import NormalizedTrajectory

LINKAGES = ("average", "single", "complete")


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    entities: tuple
    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        object.__setattr__(self, "entities", tuple(self.entities))
        n = len(self.entities)
        if d.shape != (n, n):
            raise DataError(f"distance matrix shape {d.shape} does not match {n} entities")
        if not np.all(np.isfinite(d)):
            raise DataError("distance matrix has non-finite entries")
        if np.any(np.abs(d - d.T) > 1e-12):
            raise DataError("distance matrix is not symmetric")
        if np.any(np.diag(d) != 0):
            raise DataError("distance matrix has a nonzero diagonal")
        if np.any(d < 0):
            raise DataError("distance matrix has negative entries")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return len(self.entities)

    def permuted(self, order: Sequence[int]) -> "DistanceMatrix":
        order = list(order)
        return DistanceMatrix(tuple(self.entities[i] for i in order), self.d[np.ix_(order, order)])


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    entities: tuple
    merges: tuple  # of Merge, in agglomeration order
    linkage: str = "average"

    @property
    def n(self) -> int:
        return len(self.entities)

    def members(self, cluster_id: int) -> list[int]:
        """Leaf indices under a cluster id, in leaf order."""
        n = self.n
        stack, out = [cluster_id], []
        while stack:
            c = stack.pop()
            if c < n:
                out.append(c)
            else:
                m = self.merges[c - n]
                stack.append(m.right)
                stack.append(m.left)
        return out

    @property
    def leaf_order(self) -> list[int]:
        if self.n == 1:
            return [0]
        return self.members(self.n + len(self.merges) - 1)

    def to_json(self) -> dict:
        return {
            "entities": list(self.entities),
            "linkage": self.linkage,
            "merges": [
                {"left": m.left, "right": m.right, "height": num(m.height), "size": m.size}
                for m in self.merges
            ],
            "leaf_order": [self.entities[i] for i in self.leaf_order],
        }


def trajectory_distance_matrix(trajectories: Sequence[NormalizedTrajectory]) -> DistanceMatrix:
    """Pairwise L1 distances between normalized trajectories."""
    if len(trajectories) < 2:
        raise DataError("need at least two trajectories")
    lengths = {len(t.values) for t in trajectories}
    if len(lengths) != 1:
        raise DataError(f"trajectory lengths differ: {sorted(lengths)}")
    X = np.vstack([t.values for t in trajectories])
    d = np.zeros((len(X), len(X)))
    for i in range(len(X) - 1):
        d[i, i + 1:] = np.abs(X[i + 1:] - X[i]).sum(axis=1)
    d = d + d.T
    return DistanceMatrix(tuple(t.entity for t in trajectories), d)


def hierarchical_cluster(dist: DistanceMatrix, linkage: str = "average") -> Dendrogram:
    """Agglomerate with Lance-Williams updates under the chosen linkage."""
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    n = dist.n
    if n < 2:
        raise DataError("clustering needs at least two entities")

    # active cluster id -> {other active id: linkage distance}
    D = {i: {j: float(dist.d[i, j]) for j in range(n) if j != i} for i in range(n)}
    size = {i: 1 for i in range(n)}
    merges = []
    next_id = n
    while len(size) > 1:
        best = None
        for a in sorted(size):
            for b, h in D[a].items():
                if b <= a:
                    continue
                if best is None or h < best[0] or (h == best[0] and (a, b) < best[1:]):
                    best = (h, a, b)
        h, a, b = best
        na, nb = size.pop(a), size.pop(b)
        da, db = D.pop(a), D.pop(b)
        row = {}
        for c in size:
            if linkage == "average":
                v = (na * da[c] + nb * db[c]) / (na + nb)
            elif linkage == "single":
                v = min(da[c], db[c])
            else:
                v = max(da[c], db[c])
            row[c] = v
            del D[c][a], D[c][b]
            D[c][next_id] = v
        D[next_id] = row
        size[next_id] = na + nb
        merges.append(Merge(a, b, h, na + nb))
        next_id += 1
    return Dendrogram(dist.entities, tuple(merges), linkage)


def cut_clusters(dendro: Dendrogram, k: int) -> list[list[str]]:
    """Partition obtained by undoing the last ``k - 1`` merges.

    Clusters are listed by their smallest leaf index; members keep entity order.
    """
    n = dendro.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    roots = set(range(n))
    for i, m in enumerate(dendro.merges[: n - k]):
        roots -= {m.left, m.right}
        roots.add(n + i)
    groups = [sorted(dendro.members(r)) for r in roots]
    groups.sort(key=lambda g: g[0])
    return [[dendro.entities[i] for i in g] for g in groups]


def write_distance_csv(dist: DistanceMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *dist.entities])
        for name, row in zip(dist.entities, dist.d):
            w.writerow([name, *(fmt(v) for v in row)])


def read_distance_csv(path) -> DistanceMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    entities = rows[0][1:]
    if [r[0] for r in rows[1:]] != entities:
        raise DataError(f"{path}: row labels do not match column labels")
    return DistanceMatrix(tuple(entities), [[float(v) for v in r[1:]] for r in rows[1:]])


def write_dendrogram_json(dendro: Dendrogram, path) -> None:
    Path(path).write_text(json.dumps(dendro.to_json(), indent=2) + "\n", encoding="utf-8")
