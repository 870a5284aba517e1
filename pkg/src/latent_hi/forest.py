"""Bagged regression trees (random forest) with deterministic split search.

Splits minimise the summed squared deviation of the two children, scanning
every midpoint between distinct values of a random feature subset.  Ties go
to the lowest feature index, then the lowest threshold.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 5
    feature_subsample: float = 1.0 / 3.0
    bootstrap: bool = True
    seed: int = 0

    def n_candidates(self, n_features: int) -> int:
        return min(n_features, max(1, math.ceil(self.feature_subsample * n_features - 1e-9)))


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    params: ForestParams
    n_features: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@numba.njit(cache=True)
def _splitmix(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _build_tree(X, y, work, mtry, max_depth, min_leaf, seed):
    n_total = work.shape[0]
    n_feat = X.shape[1]
    cap = 2 * n_total + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    counts = np.zeros(cap, dtype=np.int64)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    perm = np.arange(n_feat)
    buf = np.empty(n_total, dtype=np.int64)

    # stack entries: node id, start, end, depth
    stack = np.empty((cap, 4), dtype=np.int64)
    stack[0, 0], stack[0, 1], stack[0, 2], stack[0, 3] = 0, 0, n_total, 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node, start, end, depth = stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3]
        n = end - start
        s = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(start, end):
            v = y[work[i]]
            s += v
            ymin = min(ymin, v)
            ymax = max(ymax, v)
        value[node] = s / n
        counts[node] = n
        if ymin == ymax or n < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        # partial Fisher-Yates for the candidate features, scanned in index order
        for j in range(mtry):
            r = j + np.int64(_splitmix(state) % np.uint64(n_feat - j))
            perm[j], perm[r] = perm[r], perm[j]
        cand = np.sort(perm[:mtry].copy())

        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        idx = work[start:end]
        for f in cand:
            vals = X[idx, f]
            order = np.argsort(vals, kind="mergesort")
            sl = 0.0
            for i in range(n - min_leaf):
                sl += y[idx[order[i]]]
                nl = i + 1
                if nl < min_leaf:
                    continue
                a = vals[order[i]]
                b = vals[order[i + 1]]
                if a == b:
                    continue
                sr = s - sl
                score = sl * sl / nl + sr * sr / (n - nl)
                if score > best_score:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (a + b)
                    if not (thr < b):
                        thr = a
                    best_thr = thr
        if best_f < 0:
            continue

        nl = 0
        nr = 0
        for i in range(start, end):
            w = work[i]
            if X[w, best_f] <= best_thr:
                work[start + nl] = w
                nl += 1
            else:
                buf[nr] = w
                nr += 1
        for i in range(nr):
            work[start + nl + i] = buf[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3] = rid, start + nl, end, depth + 1
        top += 1
        stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3] = lid, start, start + nl, depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        counts[:n_nodes].copy(),
    )


@numba.njit(cache=True, nogil=True)
def _predict_tree(feature, threshold, left, right, value, X, out):
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]


def _fit_one(X, y, params: ForestParams, tree_index: int) -> Tree:
    rng = np.random.default_rng([params.seed, tree_index])
    n = X.shape[0]
    work = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
    split_seed = int(rng.integers(0, 2**63 - 1))
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    arrays = _build_tree(
        X, y, work.astype(np.int64), params.n_candidates(X.shape[1]), max_depth, int(params.min_samples_leaf), split_seed
    )
    return Tree(*arrays)


def rf_fit(X, y, params: ForestParams = ForestParams(), threads: int = 1) -> ForestModel:
    """Fit a forest; trees depend only on (seed, tree index), so threading cannot change the result."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a forest on zero rows")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"targets {y.shape} do not match {X.shape[0]} rows")
    if params.n_trees < 1 or params.min_samples_leaf < 1:
        raise ValueError("n_trees and min_samples_leaf must be >= 1")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            trees = list(ex.map(lambda i: _fit_one(X, y, params, i), range(params.n_trees)))
    else:
        trees = [_fit_one(X, y, params, i) for i in range(params.n_trees)]
    return ForestModel(tuple(trees), params, X.shape[1])


def rf_predict_raw(model: ForestModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    X = np.ascontiguousarray(np.atleast_2d(X))
    if X.shape[1] != model.n_features:
        raise ShapeError(f"forest trained on {model.n_features} features, got {X.shape[1]}")
    per_tree = np.empty((model.n_trees, X.shape[0]))
    for t, row in zip(model.trees, per_tree):
        _predict_tree(t.feature, t.threshold, t.left, t.right, t.value, X, row)
    # summing in sorted order makes the mean independent of tree order
    out = np.sort(per_tree, axis=0).sum(axis=0) / model.n_trees
    return out[0] if squeeze else out


def rf_predict(model: ForestModel, X, r_early: float = 125.0):
    """Mean of the trees' leaf values, clipped into [0, r_early]."""
    return np.clip(rf_predict_raw(model, X), 0.0, r_early)


def with_tree_order(model: ForestModel, order) -> ForestModel:
    return replace(model, trees=tuple(model.trees[i] for i in order))
