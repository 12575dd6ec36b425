"""Follower graphs: storage, edge-list IO, degree statistics, random generation
and the spectral epidemic threshold.

Edge ``(follower, friend)`` means *follower* subscribes to *friend*, so content
moves friend -> follower.  Out-neighbors of a node are its friends, in-neighbors
are its followers.
"""
from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

MAX_NODE_ID = 2**31 - 1
MAX_RESTARTS = 20  # fresh stub matchings tried before giving up


class GraphError(ValueError):
    """Raised for malformed graph input or impossible constructions."""


def _csr(keys, values, n):
    order = np.lexsort((values, keys))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=ptr[1:])
    return ptr, values[order].astype(np.int64)


class DirectedGraph:
    """Immutable follower graph with adjacency in both directions.

    Self-loops and duplicate edges are removed at construction; the number
    removed is kept in ``dropped_self_loops`` / ``dropped_duplicates``.
    """

    def __init__(self, node_count: int, follower, friend):
        follower = np.asarray(follower, dtype=np.int64).ravel()
        friend = np.asarray(friend, dtype=np.int64).ravel()
        if follower.shape != friend.shape:
            raise GraphError("follower and friend arrays differ in length")
        n = int(node_count)
        if n < 0:
            raise GraphError("node_count must be non-negative")
        if follower.size and (
            min(follower.min(), friend.min()) < 0 or max(follower.max(), friend.max()) >= n
        ):
            raise GraphError(f"edge endpoint outside [0, {n})")

        loops = follower == friend
        self.dropped_self_loops = int(loops.sum())
        follower, friend = follower[~loops], friend[~loops]
        keys = np.unique(follower * max(n, 1) + friend)
        self.dropped_duplicates = int(follower.size - keys.size)
        if self.dropped_self_loops or self.dropped_duplicates:
            logger.warning(
                "dropped %d self-loops and %d duplicate edges",
                self.dropped_self_loops,
                self.dropped_duplicates,
            )

        self.node_count = n
        self.follower = keys // max(n, 1)
        self.friend = keys % max(n, 1)
        # out-neighbors (friends), sorted by follower then friend
        self.friends_ptr, self.friends_idx = _csr(self.follower, self.friend, n)
        # in-neighbors (followers), sorted by friend then follower
        self.followers_ptr, self.followers_idx = _csr(self.friend, self.follower, n)
        for arr in (
            self.follower,
            self.friend,
            self.friends_ptr,
            self.friends_idx,
            self.followers_ptr,
            self.followers_idx,
        ):
            arr.setflags(write=False)

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "DirectedGraph":
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls(node_count, arr[:, 0], arr[:, 1])

    @classmethod
    def from_undirected(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "DirectedGraph":
        """Mutual-follow graph: every undirected edge becomes two directed ones."""
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls(
            node_count,
            np.concatenate([arr[:, 0], arr[:, 1]]),
            np.concatenate([arr[:, 1], arr[:, 0]]),
        )

    @property
    def edge_count(self) -> int:
        return int(self.follower.size)

    def edges(self) -> set[tuple[int, int]]:
        return set(zip(self.follower.tolist(), self.friend.tolist()))

    def friends(self, node: int) -> np.ndarray:
        return self.friends_idx[self.friends_ptr[node] : self.friends_ptr[node + 1]]

    def followers(self, node: int) -> np.ndarray:
        return self.followers_idx[self.followers_ptr[node] : self.followers_ptr[node + 1]]

    def out_degree(self) -> np.ndarray:
        """Friend count of every node."""
        return np.diff(self.friends_ptr)

    def in_degree(self) -> np.ndarray:
        """Follower count of every node."""
        return np.diff(self.followers_ptr)

    def undirected_degree(self) -> np.ndarray:
        """Number of distinct neighbors when edge direction is ignored."""
        n = max(self.node_count, 1)
        lo = np.minimum(self.follower, self.friend)
        hi = np.maximum(self.follower, self.friend)
        pairs = np.unique(lo * n + hi)
        return np.bincount(pairs // n, minlength=self.node_count) + np.bincount(
            pairs % n, minlength=self.node_count
        )

    def is_symmetric(self) -> bool:
        n = max(self.node_count, 1)
        fwd = self.follower * n + self.friend
        rev = np.sort(self.friend * n + self.follower)
        return bool(np.array_equal(fwd, rev))

    def relabel(self, perm) -> "DirectedGraph":
        """Graph with node ``i`` renamed to ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        return DirectedGraph(self.node_count, perm[self.follower], perm[self.friend])

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and np.array_equal(self.follower, other.follower)
            and np.array_equal(self.friend, other.friend)
        )

    __hash__ = None

    def __repr__(self):
        return f"DirectedGraph(nodes={self.node_count}, edges={self.edge_count})"


# --------------------------------------------------------------------------
# edge-list IO


@dataclass(frozen=True)
class EdgeListFormat:
    comment: str = "#"
    # when true each line is an undirected edge stored in both directions
    undirected: bool = False


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), True
    if isinstance(source, io.TextIOBase):
        return source, False
    return io.TextIOWrapper(source, encoding="utf-8"), False


def load_edge_list(source, fmt: EdgeListFormat = EdgeListFormat()) -> DirectedGraph:
    """Read ``follower friend`` pairs, one per line.

    ``source`` may be a path, raw bytes, or a binary/text stream.  A
    ``# nodes: N`` comment fixes the node count (so isolated trailing nodes
    survive a round trip); otherwise it is ``max id + 1``.
    """
    fh, close = _open_text(source)
    src, dst = [], []
    declared = None
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(fmt.comment):
                body = line[len(fmt.comment) :].strip()
                if body.startswith("nodes:"):
                    try:
                        declared = int(body.split(":", 1)[1])
                    except ValueError:
                        raise GraphError(f"line {lineno}: bad node-count header {line!r}")
                continue
            line = line.split(fmt.comment, 1)[0]
            parts = line.split()
            if len(parts) != 2:
                raise GraphError(f"line {lineno}: expected two integer ids, got {raw.rstrip()!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"line {lineno}: non-integer id in {raw.rstrip()!r}")
            if a < 0 or b < 0:
                raise GraphError(f"line {lineno}: negative node id")
            if a > MAX_NODE_ID or b > MAX_NODE_ID:
                raise GraphError(f"line {lineno}: node id exceeds {MAX_NODE_ID}")
            src.append(a)
            dst.append(b)
    finally:
        if close:
            fh.close()

    n = (max(max(src), max(dst)) + 1) if src else 0
    if declared is not None:
        if declared < n:
            raise GraphError(f"declared node count {declared} smaller than max id + 1 = {n}")
        n = declared
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if fmt.undirected:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    return DirectedGraph(n, src, dst)


def write_edge_list(g: DirectedGraph, dest, header: Iterable[str] = ()) -> None:
    """Write the edge list in the same format ``load_edge_list`` reads."""
    lines = [f"# {h}" for h in header]
    lines.append(f"# nodes: {g.node_count}")
    lines.extend(f"{a} {b}" for a, b in zip(g.follower.tolist(), g.friend.tolist()))
    text = "\n".join(lines) + "\n"
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


def load_degree_sequence(source) -> "DegreeSequence":
    fh, close = _open_text(source)
    degrees = []
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                degrees.append(int(line))
            except ValueError:
                raise GraphError(f"line {lineno}: expected one integer degree, got {raw.rstrip()!r}")
    finally:
        if close:
            fh.close()
    return DegreeSequence(degrees)


# --------------------------------------------------------------------------
# degree sequences and the configuration model


@dataclass(frozen=True)
class DegreeSequence:
    """Per-node degrees.  ``directed=True`` means ``degrees`` holds (in, out) pairs."""

    degrees: tuple
    directed: bool = False

    def __init__(self, degrees, directed: bool = False):
        arr = np.asarray(degrees, dtype=np.int64)
        if directed:
            arr = arr.reshape(-1, 2)
        if arr.size and arr.min() < 0:
            raise GraphError("degrees must be non-negative")
        object.__setattr__(self, "degrees", tuple(map(tuple, arr)) if directed else tuple(arr.tolist()))
        object.__setattr__(self, "directed", bool(directed))

    def __len__(self):
        return len(self.degrees)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.degrees, dtype=np.int64)


def is_graphical(degrees) -> bool:
    """Erdos-Gallai test for a simple undirected graph."""
    d = np.sort(np.asarray(degrees, dtype=np.int64))[::-1]
    n = d.size
    if n == 0:
        return True
    if d.sum() % 2 or d[0] >= n or d[-1] < 0:
        return False
    k = np.arange(1, n + 1)
    lhs = np.cumsum(d)
    asc = d[::-1]
    # count of degrees >= k for each k
    ge = n - np.searchsorted(asc, k, side="left")
    suffix = np.concatenate([np.cumsum(d[::-1])[::-1], [0]])
    split = np.maximum(k, ge)
    rhs = k * (k - 1) + k * np.maximum(ge - k, 0) + suffix[np.minimum(split, n)]
    return bool(np.all(lhs <= rhs))


def power_law_degrees(n: int, exponent: float, rng, k_min: int = 1, k_max: int | None = None) -> DegreeSequence:
    """Sample ``n`` degrees with P(k) proportional to k**-exponent on [k_min, k_max].

    ``k_max`` defaults to the structural cutoff ``sqrt(n)``.  One degree is
    nudged if needed so the sum is even.
    """
    rng = np.random.default_rng(rng)
    if k_max is None:
        k_max = max(k_min, int(np.sqrt(n)))
    k_max = min(k_max, n - 1)
    if k_min < 0 or k_max < k_min:
        raise GraphError("need 0 <= k_min <= k_max < n")
    ks = np.arange(k_min, k_max + 1)
    w = np.where(ks > 0, np.maximum(ks, 1).astype(float) ** -exponent, 0.0)
    if k_min == 0:
        w[0] = 1.0
    deg = rng.choice(ks, size=n, p=w / w.sum())
    if deg.sum() % 2:
        i = int(rng.integers(n))
        deg[i] += 1 if deg[i] < k_max else -1
    return DegreeSequence(deg)


def regular_degrees(n: int, k: int) -> DegreeSequence:
    return DegreeSequence([k] * n)


def _match_and_rewire(deg, rng, max_rewire_attempts):
    """One stub matching repaired by double-edge swaps; None if the swaps stall."""
    n = deg.size
    stubs = np.repeat(np.arange(n, dtype=np.int64), deg)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    a = np.minimum(pairs[:, 0], pairs[:, 1])
    b = np.maximum(pairs[:, 0], pairs[:, 1])
    m = a.size

    keys = a * n + b
    uniq, counts = np.unique(keys, return_counts=True)
    count = dict(zip(uniq.tolist(), counts.tolist()))
    a = a.tolist()
    b = b.tolist()

    def bad(i):
        return a[i] == b[i] or count[a[i] * n + b[i]] > 1

    pending = [i for i in range(m) if bad(i)]
    budget = max_rewire_attempts if max_rewire_attempts is not None else 1000 * (len(pending) + 10)
    attempts = 0
    while pending:
        i = pending.pop()
        while bad(i):
            attempts += 1
            if attempts > budget:
                return None
            j = int(rng.integers(m))
            if j == i:
                continue
            u, v, x, y = a[i], b[i], a[j], b[j]
            if rng.random() < 0.5:
                x, y = y, x
            # swap (u,v),(x,y) -> (u,x),(v,y)
            e1 = (min(u, x), max(u, x))
            e2 = (min(v, y), max(v, y))
            if e1[0] == e1[1] or e2[0] == e2[1] or e1 == e2:
                continue
            k1, k2 = e1[0] * n + e1[1], e2[0] * n + e2[1]
            if count.get(k1, 0) or count.get(k2, 0):
                continue
            for old in (a[i] * n + b[i], a[j] * n + b[j]):
                count[old] -= 1
            count[k1] = 1
            count[k2] = 1
            a[i], b[i] = e1
            a[j], b[j] = e2
    return a, b


def configuration_model(seq: DegreeSequence, seed=None, max_rewire_attempts: int | None = None) -> DirectedGraph:
    """Simple undirected graph with exactly the given degrees, stored symmetrically.

    Stubs are matched uniformly at random; self-loops and multi-edges are then
    removed by double-edge swaps with random partner edges.  Some matchings
    admit no repairing swap (three self-loops on a triangle sequence), so a
    stalled repair restarts from a fresh matching.
    """
    if seq.directed:
        raise GraphError("directed configuration model is not supported; pass undirected degrees")
    deg = seq.as_array()
    n = deg.size
    if deg.sum() % 2:
        raise GraphError("degree sum is odd")
    if n and deg.max() >= n:
        raise GraphError("max degree must be smaller than the node count")
    if not is_graphical(deg):
        raise GraphError("degree sequence is not graphical")
    if deg.sum() == 0:
        return DirectedGraph(n, [], [])

    rng = np.random.default_rng(seed)
    for _ in range(MAX_RESTARTS):
        edges = _match_and_rewire(deg, rng, max_rewire_attempts)
        if edges is not None:
            break
    else:
        raise GraphError("could not remove self-loops/multi-edges within the rewiring budget")
    a, b = edges
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    return DirectedGraph(n, np.concatenate([a, b]), np.concatenate([b, a]))


def random_tree(n: int, seed=None) -> DirectedGraph:
    """Uniform random recursive tree, stored as mutual follows."""
    rng = np.random.default_rng(seed)
    if n <= 1:
        return DirectedGraph(max(n, 0), [], [])
    child = np.arange(1, n)
    parent = np.floor(rng.random(n - 1) * child).astype(np.int64)
    return DirectedGraph(n, np.concatenate([child, parent]), np.concatenate([parent, child]))


# --------------------------------------------------------------------------
# statistics


@dataclass
class DegreeStats:
    mean: float
    second_moment: float
    histogram: np.ndarray
    max_degree: int

    def as_dict(self):
        return {
            "mean_degree": self.mean,
            "second_moment": self.second_moment,
            "max_degree": self.max_degree,
        }


def degree_statistics(g: DirectedGraph) -> DegreeStats:
    """Exact first and second moments of the undirected degree."""
    k = g.undirected_degree()
    if k.size == 0:
        return DegreeStats(0.0, 0.0, np.zeros(1, dtype=np.int64), 0)
    kf = k.astype(float)
    return DegreeStats(
        mean=float(kf.mean()),
        second_moment=float((kf * kf).mean()),
        histogram=np.bincount(k),
        max_degree=int(k.max()),
    )


@dataclass
class SpectralStats:
    lambda_max: float
    epidemic_threshold: float
    iterations_used: int
    residual: float
    converged: bool = True


def largest_eigenvalue(g: DirectedGraph, tol: float = 1e-10, max_iter: int = 10_000) -> SpectralStats:
    """Perron eigenvalue of the adjacency matrix by power iteration.

    Iterates on ``A + I``: the shift makes the Perron root strictly dominant on
    bipartite or periodic graphs, where plain power iteration oscillates.
    """
    if g.node_count == 0:
        raise GraphError("graph has no nodes")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = g.node_count
    if g.edge_count == 0:
        return SpectralStats(0.0, float("inf"), 0, 0.0, True)
    src, dst = g.follower, g.friend

    def matvec(x):
        return np.bincount(src, weights=x[dst], minlength=n)

    x = 1.0 + 1e-6 * (np.arange(n) + 1.0) / n
    x /= np.linalg.norm(x)
    lam_prev = np.inf
    lam = 0.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ax = matvec(x)
        lam = float(x @ ax)  # x has unit norm
        y = ax + x
        norm = np.linalg.norm(y)
        if norm == 0:
            break
        if abs(lam - lam_prev) < tol:
            converged = True
            break
        lam_prev = lam
        x = y / norm
    residual = float(np.linalg.norm(matvec(x) - lam * x))
    if not converged:
        logger.warning("power iteration did not converge in %d iterations", max_iter)
    thr = 1.0 / lam if lam > 0 else float("inf")
    return SpectralStats(lam, thr, it, residual, converged)
