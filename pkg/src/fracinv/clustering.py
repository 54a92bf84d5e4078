"""k-means on event coordinates, elbow curves and choice of k."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InsufficientPoints(ValueError):
    pass


@dataclass
class ClusterModel:
    k: int
    assignments: np.ndarray      # event index -> cluster index
    centroids: np.ndarray        # (k, 3)
    distortion: float            # mean squared distance to own centroid, m2
    iterations_run: int
    history: list = field(default_factory=list, repr=False)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == c)


@dataclass
class ElbowCurve:
    entries: list                # [(k, pct_variance_explained)]
    models: dict = field(default_factory=dict, repr=False)

    @property
    def ks(self) -> list[int]:
        return [k for k, _ in self.entries]

    @property
    def pct(self) -> list[float]:
        return [p for _, p in self.entries]


def _sqdist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        tot = d2.sum()
        if tot <= 0:
            # remaining points coincide with chosen centres
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / tot)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _update(x: np.ndarray, labels: np.ndarray, k: int, d2own: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cluster means; empty clusters take the farthest point of the largest."""
    labels = labels.copy()
    for _ in range(k):
        sizes = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if len(empty) == 0:
            break
        big = int(np.argmax(sizes))
        cand = np.flatnonzero(labels == big)
        far = cand[int(np.argmax(d2own[cand]))]
        labels[far] = empty[0]
        d2own[far] = 0.0
    cent = np.zeros((k, x.shape[1]))
    np.add.at(cent, labels, x)
    cent /= np.bincount(labels, minlength=k)[:, None]
    return cent, labels


def _lloyd(x, centroids, max_iters, tol):
    k = len(centroids)
    history = []
    labels = None
    it = 0
    for it in range(1, max_iters + 1):
        d2 = _sqdist(x, centroids)
        labels = np.argmin(d2, axis=1)
        d2own = d2[np.arange(len(x)), labels]
        centroids, labels = _update(x, labels, k, d2own)
        dist = float(((x - centroids[labels]) ** 2).sum(axis=1).mean())
        history.append(dist)
        if len(history) > 1:
            prev = history[-2]
            if prev == 0 or abs(prev - dist) / prev <= tol:
                break
    return centroids, labels, history, it


def kmeans(coords, k: int, max_iters: int = 20, tol: float = 1e-8, seed: int = 0,
           n_init: int = 10, init_centroids=None) -> ClusterModel:
    """Lloyd k-means, best of ``n_init`` k-means++ restarts.

    Points are sorted lexicographically before seeding so results do not
    depend on input order. ``init_centroids`` adds one extra warm-started
    candidate run.
    """
    x = np.asarray(coords, float)
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_iters < 1 or tol < 0:
        raise ValueError("max_iters must be >= 1 and tol >= 0")
    n_distinct = len(np.unique(x, axis=0))
    if k > n_distinct:
        raise InsufficientPoints(f"k={k} exceeds {n_distinct} distinct points")
    order = np.lexsort(x.T[::-1])
    xs = x[order]
    seeds = np.random.SeedSequence(seed).spawn(n_init)
    starts = [_kmeanspp(xs, k, np.random.default_rng(s)) for s in seeds]
    if init_centroids is not None:
        starts.append(np.asarray(init_centroids, float))
    best = None
    for idx, c0 in enumerate(starts):
        cent, lab, hist, its = _lloyd(xs, c0, max_iters, tol)
        key = (hist[-1], idx)
        if best is None or key < best[0]:
            best = (key, cent, lab, hist, its)
    _, cent, lab, hist, its = best
    labels = np.empty(len(x), dtype=int)
    labels[order] = lab
    return ClusterModel(k, labels, cent, hist[-1], its, hist)


def total_variance(coords) -> float:
    x = np.asarray(coords, float)
    return float(((x - x.mean(axis=0)) ** 2).sum())


def elbow_curve(coords, k_range, max_iters: int = 20, tol: float = 1e-8, seed: int = 0,
                n_init: int = 10) -> ElbowCurve:
    """Percentage of variance explained for each k in ``k_range``.

    Each k also tries the best (k-1) solution plus its worst-fit point as a
    start, which keeps the curve non-decreasing.
    """
    x = np.asarray(coords, float)
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1 or ks[-1] > len(x):
        raise ValueError("k_range must lie within [1, number of points]")
    tss = total_variance(x)
    entries, models = [], {}
    prev = None
    for k in range(1, ks[-1] + 1):
        warm = None
        if prev is not None:
            d2 = ((x - prev.centroids[prev.assignments]) ** 2).sum(axis=1)
            warm = np.vstack([prev.centroids, x[int(np.argmax(d2))]])
        model = kmeans(x, k, max_iters, tol, seed, n_init, warm)
        if prev is not None and model.distortion > prev.distortion:
            # numerical guard; the warm start already bounds this
            model = ClusterModel(k, model.assignments, model.centroids, prev.distortion,
                                 model.iterations_run, model.history)
        prev = model
        if k in ks:
            pct = 100.0 if tss == 0 else 100.0 * (1.0 - model.distortion * len(x) / tss)
            entries.append((k, float(min(100.0, max(0.0, pct)))))
            models[k] = model
    return ElbowCurve(entries, models)


def marginal_gains(elbow: ElbowCurve) -> dict:
    """Percentage points gained by going from k-1 to k, keyed by k."""
    ks, pct = elbow.ks, elbow.pct
    return {ks[i + 1]: pct[i + 1] - pct[i] for i in range(len(ks) - 1) if ks[i + 1] == ks[i] + 1}


def elbow_plateau(elbow: ElbowCurve, gain_threshold: float = 5.0) -> list[int]:
    """Candidate ks around the elbow.

    The plateau starts at the first k whose next cluster adds less than
    ``gain_threshold`` percentage points. Following ks join while the gain
    that brought them in is still at least ``gain_threshold / 2``, i.e. the
    curve is still visibly bending. Without a sub-threshold gain the
    largest k is returned.
    """
    if not elbow.entries:
        raise ValueError("empty elbow curve")
    gains = marginal_gains(elbow)
    start = next((k for k in elbow.ks if k + 1 in gains and gains[k + 1] < gain_threshold), None)
    if start is None:
        return [elbow.ks[-1]]
    plateau = [start]
    k = start + 1
    while k in gains and gains[k] >= gain_threshold / 2.0:
        plateau.append(k)
        k += 1
    return plateau


def select_k_from_plateau(plateau, strike_peaks: int, dip_peaks: int) -> int:
    """Plateau k matching the focal-mechanism peak count, else the smallest."""
    plateau = sorted(plateau)
    if not plateau:
        raise ValueError("empty plateau")
    if strike_peaks < 1 or dip_peaks < 1:
        raise ValueError("peak counts must be >= 1")
    target = max(strike_peaks, dip_peaks)
    return target if target in plateau else plateau[0]


def select_k(elbow: ElbowCurve, strike_peaks: int, dip_peaks: int,
             gain_threshold: float = 5.0) -> int:
    """Number of clusters from the elbow plateau and the focal peak counts."""
    return select_k_from_plateau(elbow_plateau(elbow, gain_threshold), strike_peaks, dip_peaks)
