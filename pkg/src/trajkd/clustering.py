"""Fuzzy c-means clustering with deterministic, canonicalized output.

The fit alternates the classical membership and center updates

    u_ik = 1 / sum_j (d_ik / d_jk)^(2/(m-1)),
    c_i  = sum_k u_ik^m x_k / sum_k u_ik^m,

with Euclidean distances, until the largest membership change falls below
the tolerance. Initial centers are sampled k-means++-style from the data
points using the seeded generator; several restarts keep the fit with the
lowest final objective. Cluster order is canonicalized (lexicographic by
center coordinates) so cluster indices are stable across runs and
platforms, which keeps group naming and replay deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ClusteringError


@dataclass(frozen=True)
class FcmConfig:
    """Parameters of one fuzzy c-means fit.

    ``tol`` bounds the max absolute membership change at convergence;
    ``m`` is the fuzzifier (> 1; 2.0 unless there is a reason not to).
    """

    c: int
    m: float = 2.0
    tol: float = 1e-6
    max_iter: int = 300
    seed: int = 0
    n_restarts: int = 5

    def __post_init__(self):
        if self.c < 1:
            raise ClusteringError(f"cluster count must be >= 1, got {self.c}")
        if not self.m > 1.0:
            raise ClusteringError(f"fuzzifier m must be > 1, got {self.m}")
        if not self.tol > 0.0:
            raise ClusteringError(f"tolerance must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ClusteringError("max_iter must be positive")
        if self.n_restarts < 1:
            raise ClusteringError("n_restarts must be positive")

    def to_dict(self) -> dict:
        return {
            "c": self.c, "m": self.m, "tol": self.tol,
            "max_iter": self.max_iter, "seed": self.seed,
            "n_restarts": self.n_restarts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FcmConfig":
        return cls(**d)


@dataclass
class FuzzyPartition:
    """Result of a fuzzy c-means fit.

    ``memberships`` is row-stochastic (each row sums to 1); ``objective``
    is the per-iteration history of J = sum_ik u_ik^m d_ik^2, which is
    non-increasing; every center lies inside the axis-aligned bounding box
    of the data; columns are in canonical (lexicographic center) order.
    """

    memberships: np.ndarray
    centers: np.ndarray
    objective: list[float]
    n_iter: int
    converged: bool

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]


def _squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _memberships(D2: np.ndarray, m: float) -> np.ndarray:
    """Membership update; points coinciding with centers get full membership
    there (split equally among coinciding centers)."""
    n, c = D2.shape
    U = np.zeros((n, c))
    zero = D2 <= 0.0
    has_zero = zero.any(axis=1)
    if has_zero.any():
        z = zero[has_zero]
        U[has_zero] = z / z.sum(axis=1, keepdims=True)
    regular = ~has_zero
    if regular.any():
        d2 = D2[regular]
        # normalize by the row minimum: the largest weight becomes exactly 1
        # and the rest underflow harmlessly to 0 (a ratio overflowing to inf
        # for denormal minima maps to weight 0 as well)
        with np.errstate(over="ignore", under="ignore"):
            ratio = d2 / d2.min(axis=1, keepdims=True)
            w = ratio ** (-1.0 / (m - 1.0))
        U[regular] = w / w.sum(axis=1, keepdims=True)
    return U


def _update_centers(
    X: np.ndarray, U: np.ndarray, m: float, prev: np.ndarray,
    lo: np.ndarray, hi: np.ndarray,
) -> np.ndarray:
    Um = U ** m
    weights = Um.sum(axis=0)
    centers = prev.copy()
    ok = weights > 0.0
    centers[ok] = (Um[:, ok].T @ X) / weights[ok, None]
    # convex combinations stay in the data bounding box; clip guards the
    # invariant against last-bit rounding
    np.clip(centers, lo, hi, out=centers)
    return centers


def _objective(D2: np.ndarray, U: np.ndarray, m: float) -> float:
    return float(((U ** m) * D2).sum())


def _kmeanspp_indices(X: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    """Sample c distinct data-point indices with distance-weighted probabilities."""
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _squared_distances(X, X[chosen[-1]][None, :])[:, 0]
    for _ in range(1, c):
        total = d2.sum()
        if total > 0.0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            remaining = np.setdiff1d(np.arange(n), np.asarray(chosen))
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        d2 = np.minimum(d2, _squared_distances(X, X[idx][None, :])[:, 0])
    return np.asarray(chosen)


def _single_fit(X: np.ndarray, cfg: FcmConfig, rng: np.random.Generator) -> FuzzyPartition:
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    centers = X[_kmeanspp_indices(X, cfg.c, rng)].copy()
    U = _memberships(_squared_distances(X, centers), cfg.m)
    history: list[float] = []
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        centers = _update_centers(X, U, cfg.m, centers, lo, hi)
        D2 = _squared_distances(X, centers)
        U_new = _memberships(D2, cfg.m)
        history.append(_objective(D2, U_new, cfg.m))
        delta = float(np.abs(U_new - U).max())
        U = U_new
        if delta < cfg.tol:
            converged = True
            break
    return FuzzyPartition(
        memberships=U, centers=centers, objective=history,
        n_iter=n_iter, converged=converged,
    )


def _canonicalize(p: FuzzyPartition) -> FuzzyPartition:
    order = np.lexsort(p.centers[:, ::-1].T)
    p.centers = p.centers[order]
    p.memberships = p.memberships[:, order]
    return p


def fcm_fit(X: np.ndarray, cfg: FcmConfig) -> FuzzyPartition:
    """Fit fuzzy c-means; deterministic given (X, cfg) including the seed."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ClusteringError(f"X must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ClusteringError("X contains non-finite entries")
    n = X.shape[0]
    if cfg.c > n:
        raise ClusteringError(f"cannot fit {cfg.c} clusters to {n} points")

    best: FuzzyPartition | None = None
    seed = cfg.seed & 0xFFFFFFFFFFFFFFFF  # SeedSequence entropy must be non-negative
    for restart in range(cfg.n_restarts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, restart)))
        fit = _single_fit(X, cfg, rng)
        if best is None or fit.objective[-1] < best.objective[-1]:
            best = fit
    return _canonicalize(best)


def hard_assign(p: FuzzyPartition) -> np.ndarray:
    """Crisp label per row: argmax membership, ties to the lowest index."""
    return np.argmax(p.memberships, axis=1)


def partition_to_csv(
    p: FuzzyPartition, object_ids=None
) -> str:
    """CSV export: object_id, hard label, one membership column per cluster."""
    labels = hard_assign(p)
    n, c = p.memberships.shape
    ids = object_ids if object_ids is not None else [str(i) for i in range(n)]
    lines = ["object_id,label," + ",".join(f"u{j}" for j in range(c))]
    for oid, lab, row in zip(ids, labels, p.memberships):
        lines.append(f"{oid},{lab}," + ",".join("%.17g" % u for u in row))
    return "\n".join(lines) + "\n"


# Additional partitioners can be registered here; every entry must accept
# (X, config_dict) and return a FuzzyPartition with canonical column order.
PARTITIONERS: dict[str, Callable[[np.ndarray, dict], FuzzyPartition]] = {
    "fcm": lambda X, cfg: fcm_fit(X, FcmConfig.from_dict(cfg)),
}
