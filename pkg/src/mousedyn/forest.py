"""Random forest of unpruned CART trees, built in-repo.

Trees are grown on bootstrap samples. Each split looks at a random subset of
``floor(log2(k)) + 1`` features (more are tried if none of them separates the
node), scores candidate splits by Gini impurity, and grows until nodes are
pure or hold fewer than two samples. Numeric features split on a threshold;
categorical features split on a subset of categories, found by ordering the
categories by their genuine-class fraction.

The tree builder is compiled with numba and releases the GIL, so trees can be
trained on a thread pool.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
LEAF = -1
MAX_CATEGORIES = 63


class DegenerateData(ValueError):
    pass


class SchemaMismatch(ValueError):
    pass


class NotEnoughUsers(ValueError):
    pass


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for ``keys`` under ``seed``; independent of call order."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def schema_hash(names) -> str:
    return hashlib.sha256("\x1f".join(names).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# compiled core


@numba.njit(cache=True, inline="always")
def _next(state):
    # xorshift64*
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return x * np.uint64(0x2545F4914F6CDD1D)


@numba.njit(cache=True, inline="always")
def _randbelow(state, n):
    return np.int64(_next(state) >> np.uint64(11)) % n


@numba.njit(cache=True)
def _best_numeric(vals, yy, pos_total, m):
    order = np.argsort(vals, kind="mergesort")
    best = -1.0
    thr = 0.0
    lp = 0
    for r in range(m - 1):
        lp += yy[order[r]]
        a = vals[order[r]]
        b = vals[order[r + 1]]
        if a == b:
            continue
        nl = r + 1
        nr = m - nl
        rp = pos_total - lp
        score = (lp * lp + (nl - lp) * (nl - lp)) / nl + (rp * rp + (nr - rp) * (nr - rp)) / nr
        if score > best:
            best = score
            mid = a + (b - a) / 2.0
            thr = a if mid >= b else mid
    return best, thr


@numba.njit(cache=True)
def _best_categorical(vals, yy, pos_total, m):
    cnt = np.zeros(MAX_CATEGORIES + 1, np.int64)
    pos = np.zeros(MAX_CATEGORIES + 1, np.int64)
    for r in range(m):
        c = np.int64(vals[r])
        cnt[c] += 1
        pos[c] += yy[r]
    present = np.nonzero(cnt)[0]
    k = len(present)
    if k < 2:
        return -1.0, np.int64(0)
    frac = np.empty(k)
    for i in range(k):
        frac[i] = pos[present[i]] / cnt[present[i]]
    order = np.argsort(frac, kind="mergesort")
    best = -1.0
    mask = np.int64(0)
    run = np.int64(0)
    nl = 0
    lp = 0
    for r in range(k - 1):
        c = present[order[r]]
        run |= np.int64(1) << c
        nl += cnt[c]
        lp += pos[c]
        nr = m - nl
        rp = pos_total - lp
        score = (lp * lp + (nl - lp) * (nl - lp)) / nl + (rp * rp + (nr - rp) * (nr - rp)) / nr
        if score > best:
            best = score
            mask = run
    return best, mask


@numba.njit(cache=True, nogil=True)
def _grow(X, y, idx, is_cat, n_try, seed):
    n_feat = X.shape[1]
    cap = 2 * len(idx) + 1
    feature = np.full(cap, LEAF, np.int32)
    threshold = np.zeros(cap)
    catmask = np.zeros(cap, np.int64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    value = np.zeros(cap)
    count = np.zeros(cap, np.int64)

    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed) | np.uint64(1)
    for _ in range(4):
        _next(state)

    work = idx.copy()
    stack_node = np.empty(cap, np.int64)
    stack_lo = np.empty(cap, np.int64)
    stack_hi = np.empty(cap, np.int64)
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = len(work)
    top = 1
    n_nodes = 1
    perm = np.arange(n_feat)
    vals = np.empty(len(work))
    yy = np.empty(len(work), np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo
        p = 0
        for r in range(lo, hi):
            p += y[work[r]]
        value[node] = p / m
        count[node] = m
        if p == 0 or p == m or m < 2:
            continue
        parent = (p * p + (m - p) * (m - p)) / m
        tol = 1e-12 * m

        for i in range(n_feat - 1, 0, -1):
            s = _randbelow(state, i + 1)
            tmp = perm[i]
            perm[i] = perm[s]
            perm[s] = tmp

        best = parent + tol
        bf = -1
        bthr = 0.0
        bmask = np.int64(0)
        for r in range(m):
            yy[r] = y[work[lo + r]]
        for q in range(n_feat):
            if q >= n_try and bf >= 0:
                break
            f = perm[q]
            for r in range(m):
                vals[r] = X[work[lo + r], f]
            if is_cat[f]:
                sc, mk = _best_categorical(vals[:m], yy[:m], p, m)
                if sc > best:
                    best = sc
                    bf = f
                    bmask = mk
            else:
                sc, th = _best_numeric(vals[:m], yy[:m], p, m)
                if sc > best:
                    best = sc
                    bf = f
                    bthr = th
        if bf < 0:
            continue

        # partition work[lo:hi] so rows going left come first
        i = lo
        j = hi - 1
        while i <= j:
            xv = X[work[i], bf]
            if is_cat[bf]:
                go_left = (bmask >> np.int64(xv)) & 1 == 1
            else:
                go_left = xv <= bthr
            if go_left:
                i += 1
            else:
                tmp = work[i]
                work[i] = work[j]
                work[j] = tmp
                j -= 1
        feature[node] = bf
        threshold[node] = bthr
        catmask[node] = bmask
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes + 1
        stack_lo[top] = i
        stack_hi[top] = hi
        top += 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = i
        top += 1
        n_nodes += 2

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        catmask[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        count[:n_nodes].copy(),
    )


@numba.njit(cache=True, nogil=True)
def _leaf_values(X, feature, threshold, catmask, left, right, value, is_cat):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            f = feature[node]
            xv = X[r, f]
            if is_cat[f]:
                go_left = (catmask[node] >> np.int64(xv)) & 1 == 1
            else:
                go_left = xv <= threshold[node]
            node = left[node] if go_left else right[node]
        out[r] = value[node]
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Tree:
    """Flat array form of one decision tree.

    ``value`` is the genuine fraction of the training samples in each node;
    only leaf values matter for prediction.
    """

    feature: np.ndarray
    threshold: np.ndarray
    catmask: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_values(self, X, is_cat) -> np.ndarray:
        return _leaf_values(
            X, self.feature, self.threshold, self.catmask, self.left, self.right, self.value, is_cat
        )

    def votes(self, X, is_cat) -> np.ndarray:
        """1 for a genuine vote, 0 for impostor, 0.5 for a tied leaf."""
        lv = self.leaf_values(X, is_cat)
        return np.where(lv > 0.5, 1.0, np.where(lv < 0.5, 0.0, 0.5))


def n_try_default(k: int) -> int:
    return int(math.floor(math.log2(k))) + 1


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    feature_schema: tuple[str, ...]
    categorical: tuple[str, ...] = ()
    seed: int = 0
    proba: str = "vote"
    metadata: dict = field(default_factory=dict)

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def is_cat(self) -> np.ndarray:
        return np.array([n in self.categorical for n in self.feature_schema], dtype=np.bool_)

    def _prepare(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        if X.shape[1] != len(self.feature_schema):
            raise SchemaMismatch(
                f"model expects {len(self.feature_schema)} features, got {X.shape[1]}"
            )
        return X

    def predict_proba(self, X) -> np.ndarray:
        """Genuine-class score per row.

        With ``proba="vote"`` (the default) this is the fraction of trees
        voting genuine; with ``proba="mean"`` the mean of the leaf class
        fractions.
        """
        X = self._prepare(X)
        is_cat = self.is_cat
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.votes(X, is_cat) if self.proba == "vote" else tree.leaf_values(X, is_cat)
        return acc / len(self.trees)

    def save(self, path) -> None:
        arrays = {}
        for i, t in enumerate(self.trees):
            for name in ("feature", "threshold", "catmask", "left", "right", "value", "count"):
                arrays[f"t{i}_{name}"] = getattr(t, name)
        meta = {
            "format_version": FORMAT_VERSION,
            "feature_schema": list(self.feature_schema),
            "schema_hash": schema_hash(self.feature_schema),
            "categorical": list(self.categorical),
            "num_trees": self.num_trees,
            "seed": self.seed,
            "proba": self.proba,
            "metadata": self.metadata,
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        with Path(path).open("wb") as fh:
            np.savez_compressed(fh, **arrays)

    @classmethod
    def load(cls, path, expected_schema=None) -> "ForestModel":
        with np.load(path) as z:
            meta = json.loads(z["meta"].tobytes().decode())
            if meta.get("format_version") != FORMAT_VERSION:
                raise ValueError(f"unsupported model format {meta.get('format_version')}")
            if schema_hash(meta["feature_schema"]) != meta["schema_hash"]:
                raise SchemaMismatch("model file schema hash does not match its schema")
            if expected_schema is not None and tuple(expected_schema) != tuple(meta["feature_schema"]):
                raise SchemaMismatch("model feature schema differs from the expected one")
            trees = tuple(
                Tree(*(z[f"t{i}_{name}"] for name in ("feature", "threshold", "catmask", "left", "right", "value", "count")))
                for i in range(meta["num_trees"])
            )
        return cls(
            trees=trees,
            feature_schema=tuple(meta["feature_schema"]),
            categorical=tuple(meta["categorical"]),
            seed=meta["seed"],
            proba=meta["proba"],
            metadata=meta["metadata"],
        )


def _fit_tree(X, y, is_cat, n_try, tree_seed) -> Tree:
    rng = np.random.default_rng(tree_seed)
    idx = rng.integers(0, len(y), size=len(y))
    grow_seed = int(rng.integers(1, 2**63 - 1))
    return Tree(*_grow(X, y, idx, is_cat, n_try, grow_seed))


def fit_forest(
    X,
    y,
    feature_names,
    categorical=(),
    *,
    num_trees: int = 100,
    seed: int = 0,
    n_try: int | None = None,
    proba: str = "vote",
    n_jobs: int = 1,
    metadata=None,
) -> ForestModel:
    """Train a forest on a numeric matrix ``X`` with 0/1 labels ``y`` (1 = genuine)."""
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(np.int64)
    feature_names = tuple(feature_names)
    if X.ndim != 2 or X.shape[1] != len(feature_names):
        raise SchemaMismatch(f"X has shape {X.shape}, schema has {len(feature_names)} names")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise DegenerateData("training data holds a single class")
    if proba not in ("vote", "mean"):
        raise ValueError(f"proba must be 'vote' or 'mean', not {proba!r}")
    is_cat = np.array([n in categorical for n in feature_names], dtype=np.bool_)
    if is_cat.any():
        cat_vals = X[:, is_cat]
        if (cat_vals < 0).any() or (cat_vals > MAX_CATEGORIES).any() or (cat_vals != np.round(cat_vals)).any():
            raise ValueError(f"categorical codes must be integers in 0..{MAX_CATEGORIES}")
    n_try = n_try or n_try_default(X.shape[1])
    seeds = [derive_seed(seed, i) for i in range(num_trees)]
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(lambda s: _fit_tree(X, y, is_cat, n_try, s), seeds))
    else:
        trees = [_fit_tree(X, y, is_cat, n_try, s) for s in seeds]
    return ForestModel(
        trees=tuple(trees),
        feature_schema=feature_names,
        categorical=tuple(n for n in feature_names if n in categorical),
        seed=seed,
        proba=proba,
        metadata=dict(metadata or {}),
    )


# ---------------------------------------------------------------------------
# balanced per-user data


@dataclass(frozen=True)
class UserDataset:
    """Balanced genuine-vs-impostor rows for one user.

    ``source_user`` and ``source_row`` locate each row in the per-user
    feature matrices it was drawn from. Genuine rows come first.
    """

    genuine_user: int
    X: np.ndarray
    y: np.ndarray
    source_user: np.ndarray
    source_row: np.ndarray

    def __len__(self):
        return len(self.y)


def impostor_quotas(n_genuine: int, impostors) -> dict[int, int]:
    impostors = sorted(impostors)
    base, extra = divmod(n_genuine, len(impostors))
    return {u: base + (1 if i < extra else 0) for i, u in enumerate(impostors)}


def build_user_dataset(all_features, genuine_user: int, seed: int) -> UserDataset:
    """Pair the genuine user's N rows with N rows drawn from the other users.

    ``all_features`` maps user id to a 2-D feature matrix. Each impostor user
    contributes N/(n-1) rows (remainder to the lowest ids), sampled without
    replacement and kept in their original order.
    """
    if len(all_features) < 2:
        raise NotEnoughUsers("need at least two users")
    if genuine_user not in all_features:
        raise KeyError(f"no features for user {genuine_user}")
    gen = np.asarray(all_features[genuine_user], dtype=float)
    n = len(gen)
    if n < 1:
        raise DegenerateData(f"user {genuine_user} has no actions")
    rng = np.random.default_rng(derive_seed(seed, genuine_user))
    quotas = impostor_quotas(n, [u for u in all_features if u != genuine_user])
    xs, users, rows = [gen], [np.full(n, genuine_user)], [np.arange(n)]
    for u, q in quotas.items():
        pool = len(all_features[u])
        if q > pool:
            log.warning("user %s has %d rows, fewer than its quota %d; sampling with replacement", u, pool, q)
            pick = np.sort(rng.choice(pool, q, replace=True))
        else:
            pick = np.sort(rng.choice(pool, q, replace=False))
        xs.append(np.asarray(all_features[u], dtype=float)[pick])
        users.append(np.full(q, u))
        rows.append(pick)
    y = np.zeros(2 * n, dtype=np.int64)
    y[:n] = 1
    return UserDataset(
        genuine_user=genuine_user,
        X=np.concatenate(xs),
        y=y,
        source_user=np.concatenate(users),
        source_row=np.concatenate(rows),
    )


def train_forest(data: UserDataset, feature_names, categorical=(), num_trees: int = 100, seed: int = 0, **kw):
    """Train the forest for one user dataset; the tree seeds derive from (seed, user)."""
    if len(data.y) < 4 or min(data.y.sum(), len(data.y) - data.y.sum()) < 2:
        raise DegenerateData("need at least two rows per class")
    return fit_forest(
        data.X,
        data.y,
        feature_names,
        categorical,
        num_trees=num_trees,
        seed=derive_seed(seed, data.genuine_user),
        metadata={"genuine_user": data.genuine_user, "n_rows": len(data.y), "master_seed": seed},
        **kw,
    )


class EmptySet(ValueError):
    pass


def fuse_scores(probabilities) -> float:
    """Score of a set of actions: the mean of its action probabilities."""
    p = np.asarray(probabilities, dtype=float)
    if p.size == 0:
        raise EmptySet("cannot score an empty set of actions")
    return float(p.mean())


def score_action_set(model: ForestModel, X) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise EmptySet("cannot score an empty set of actions")
    return fuse_scores(model.predict_proba(X))
