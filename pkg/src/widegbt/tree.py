"""Single regression tree fit to one gradient/hessian column pair.

Exact greedy split search over every feature and every midpoint between
consecutive distinct sorted values.  Split gain is the second-order
(Newton) criterion

    gain = 0.5 * (GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)) - gamma

and leaf values are the regularized Newton step -G/(H+lambda).  A node is
split only when gain > 0 and both children satisfy the hessian-weight and
sample-count minima.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:  # optional scalar kernels; the numpy path is semantically identical
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

# Gains within this margin of each other are ties; the lower feature index,
# then the lower threshold wins, so results do not depend on scan schedule.
GAIN_TIE_EPS = 1e-12

_NO_FEATURE = -1  # feature marker for leaf nodes


@dataclass(frozen=True)
class TreeParams:
    """Regularization and stopping parameters for a single tree."""

    max_depth: int = 6
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_samples_leaf: int = 1

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass
class Tree:
    """Flat node-array tree; root at index 0.

    ``feature[i] == -1`` marks a leaf whose prediction is ``value[i]``;
    otherwise ``feature``/``threshold`` define the test ``x[feature] <
    threshold`` routing to ``left``/``right``.
    """

    feature: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int32))
    threshold: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))
    left: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int32))
    right: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int32))
    value: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] == _NO_FEATURE

    def to_node_dicts(self) -> list[dict]:
        nodes = []
        for i in range(self.n_nodes):
            if self.is_leaf(i):
                nodes.append({"value": float(self.value[i])})
            else:
                nodes.append(
                    {
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                    }
                )
        return nodes

    @classmethod
    def from_node_dicts(cls, nodes: list[dict]) -> "Tree":
        n = len(nodes)
        if n == 0:
            raise ValueError("tree must have at least one node")
        tree = cls(
            feature=np.full(n, _NO_FEATURE, dtype=np.int32),
            threshold=np.zeros(n, dtype=np.float64),
            left=np.zeros(n, dtype=np.int32),
            right=np.zeros(n, dtype=np.int32),
            value=np.zeros(n, dtype=np.float64),
        )
        for i, node in enumerate(nodes):
            if "value" in node:
                tree.value[i] = float(node["value"])
            else:
                tree.feature[i] = int(node["feature"])
                tree.threshold[i] = float(node["threshold"])
                tree.left[i] = int(node["left"])
                tree.right[i] = int(node["right"])
        _validate_tree(tree)
        return tree


def _validate_tree(tree: Tree) -> None:
    n = tree.n_nodes
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    while stack:
        i = stack.pop()
        if i < 0 or i >= n or seen[i]:
            raise ValueError("malformed tree: bad child index or cycle")
        seen[i] = True
        if not tree.is_leaf(i):
            stack.append(int(tree.left[i]))
            stack.append(int(tree.right[i]))
    if not seen.all():
        raise ValueError("malformed tree: unreachable nodes")
    if not np.all(np.isfinite(tree.value[tree.feature == _NO_FEATURE])):
        raise ValueError("malformed tree: non-finite leaf value")


def fit_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    params: TreeParams,
    presort: np.ndarray | None = None,
) -> Tree:
    """Fit one tree to (grad, hess) by exact greedy search.

    ``presort`` is an optional n x p matrix whose column j holds row indices
    in ascending order of feature j; callers fitting many trees on the same X
    should compute it once with :func:`presort_features`.
    """
    X = np.asarray(X, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64).ravel()
    hess = np.asarray(hess, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-d matrix")
    n, p = X.shape
    if grad.shape[0] != n or hess.shape[0] != n:
        raise ValueError("grad/hess length must equal the number of rows of X")
    if np.any(hess < 0):
        raise ValueError("hessian entries must be nonnegative")
    if presort is None:
        presort = presort_features(X)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(_NO_FEATURE)
        threshold.append(0.0)
        left.append(0)
        right.append(0)
        value.append(0.0)
        return len(feature) - 1

    splitter = _find_best_split_numba if _HAVE_NUMBA else _find_best_split
    go_left = np.zeros(n, dtype=bool)

    # node_order: p x k row indices, each row ascending by its feature; the
    # split partitions it into the children's orderings without re-sorting.
    def build(node_order: np.ndarray, depth: int, node_id: int) -> None:
        rows = node_order[0]
        g_sum = float(grad[rows].sum())
        h_sum = float(hess[rows].sum())
        k = node_order.shape[1]
        best = None
        if depth < params.max_depth and k >= 2 * params.min_samples_leaf:
            best = splitter(X, grad, hess, node_order, g_sum, h_sum, params)
        if best is None:
            value[node_id] = -g_sum / (h_sum + params.reg_lambda)
            return
        feat, thr, pos = best
        feature[node_id] = feat
        threshold[node_id] = thr
        left_rows = node_order[feat, : pos + 1]
        go_left[left_rows] = True
        member = go_left[node_order]
        left_order = node_order[member].reshape(p, pos + 1)
        right_order = node_order[~member].reshape(p, k - pos - 1)
        go_left[left_rows] = False
        left_id = new_node()
        right_id = new_node()
        left[node_id] = left_id
        right[node_id] = right_id
        build(left_order, depth + 1, left_id)
        build(right_order, depth + 1, right_id)

    root = new_node()
    build(np.ascontiguousarray(presort.T), 0, root)
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=np.float64),
    )


def presort_features(X: np.ndarray) -> np.ndarray:
    """Row indices of X sorted per feature column (stable, so deterministic)."""
    return np.argsort(X, axis=0, kind="stable")


def _find_best_split(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    node_order: np.ndarray,
    g_sum: float,
    h_sum: float,
    params: TreeParams,
) -> tuple[int, float, int] | None:
    """Best (feature, threshold, sorted position) over all exact candidates.

    Evaluates every feature at once: cumulative gradient/hessian sums along
    each feature's sorted order give the left/right statistics of every
    midpoint candidate.
    """
    p, k = node_order.shape
    lam = params.reg_lambda
    parent_score = g_sum * g_sum / (h_sum + lam)

    V = X[node_order, np.arange(p)[:, None]]
    GL = np.cumsum(grad[node_order], axis=1)[:, :-1]
    HL = np.cumsum(hess[node_order], axis=1)[:, :-1]
    GR = g_sum - GL
    HR = h_sum - HL
    mid = 0.5 * (V[:, :-1] + V[:, 1:])
    # A candidate needs distinct neighbors and a midpoint that actually
    # separates them once routed with a strict `<`.
    valid = (V[:, :-1] < V[:, 1:]) & (mid > V[:, :-1])
    counts = np.arange(1, k)
    valid &= (counts >= params.min_samples_leaf) & (k - counts >= params.min_samples_leaf)
    valid &= (HL >= params.min_child_weight) & (HR >= params.min_child_weight)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent_score) - params.gamma
    gains = np.where(valid, gains, -np.inf)

    # per feature: the first candidate within the tie margin of that
    # feature's top gain (lowest threshold wins ties)
    feature_top = gains.max(axis=1)
    pick = np.argmax(gains >= feature_top[:, None] - GAIN_TIE_EPS, axis=1)
    pick_gain = gains[np.arange(p), pick]

    best_feat = -1
    best_gain = 0.0  # a split must clear zero gain
    for j in range(p):
        gj = pick_gain[j]
        if gj > 0.0 and (best_feat < 0 or gj > best_gain + GAIN_TIE_EPS):
            best_feat = j
            best_gain = float(gj)
    if best_feat < 0:
        return None
    pos = int(pick[best_feat])
    return best_feat, float(mid[best_feat, pos]), pos


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _split_kernel(X, grad, hess, node_order, g_sum, h_sum, lam, gamma, mcw, msl):
        # scalar transcription of _find_best_split: identical expressions in
        # identical order, so both paths grow bit-identical trees
        p, k = node_order.shape
        parent_score = g_sum * g_sum / (h_sum + lam)
        gains = np.empty(k - 1)
        best_feat = -1
        best_gain = 0.0
        best_pos = -1
        best_thr = 0.0
        for j in range(p):
            if X[node_order[j, 0], j] == X[node_order[j, k - 1], j]:
                continue
            gl = 0.0
            hl = 0.0
            top = -np.inf
            for i in range(k - 1):
                row = node_order[j, i]
                gl += grad[row]
                hl += hess[row]
                v = X[row, j]
                v_next = X[node_order[j, i + 1], j]
                gain = -np.inf
                if v < v_next:
                    mid = 0.5 * (v + v_next)
                    if mid > v and i + 1 >= msl and k - i - 1 >= msl:
                        gr = g_sum - gl
                        hr = h_sum - hl
                        if hl >= mcw and hr >= mcw:
                            gain = (
                                0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_score)
                                - gamma
                            )
                gains[i] = gain
                if gain > top:
                    top = gain
            if top == -np.inf:
                continue
            pick = 0
            for i in range(k - 1):
                if gains[i] >= top - GAIN_TIE_EPS:
                    pick = i
                    break
            gj = gains[pick]
            if gj > 0.0 and (best_feat < 0 or gj > best_gain + GAIN_TIE_EPS):
                best_feat = j
                best_gain = gj
                best_pos = pick
                row = node_order[j, pick]
                best_thr = 0.5 * (X[row, j] + X[node_order[j, pick + 1], j])
        return best_feat, best_thr, best_pos

    def _find_best_split_numba(X, grad, hess, node_order, g_sum, h_sum, params):
        feat, thr, pos = _split_kernel(
            X,
            grad,
            hess,
            node_order,
            g_sum,
            h_sum,
            params.reg_lambda,
            params.gamma,
            params.min_child_weight,
            params.min_samples_leaf,
        )
        if feat < 0:
            return None
        return int(feat), float(thr), int(pos)


def predict_tree(tree: Tree, X: np.ndarray, validate: bool = True) -> np.ndarray:
    """Route every row of X to a leaf; returns the vector of leaf values.

    ``validate=False`` skips the NaN/feature-range checks for callers that
    have already validated X once (e.g. an ensemble predicting many trees).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d matrix")
    if validate:
        used = tree.feature[tree.feature != _NO_FEATURE]
        if used.size and used.max() >= X.shape[1]:
            raise ValueError(
                f"tree references feature {int(used.max())} but X has {X.shape[1]} columns"
            )
        if np.isnan(X).any():
            raise ValueError("NaN feature value at predict time")
    out = np.empty(X.shape[0], dtype=np.float64)
    stack: list[tuple[int, np.ndarray]] = [(0, np.arange(X.shape[0]))]
    while stack:
        node_id, rows = stack.pop()
        if rows.size == 0:
            continue
        if tree.is_leaf(node_id):
            out[rows] = tree.value[node_id]
            continue
        go_left = X[rows, tree.feature[node_id]] < tree.threshold[node_id]
        stack.append((int(tree.left[node_id]), rows[go_left]))
        stack.append((int(tree.right[node_id]), rows[~go_left]))
    return out
