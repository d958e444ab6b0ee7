"""Weighted digraphs, dwell-time switching schedules and connectivity checks.

Convention: ``weights[i, j] > 0`` means node i receives from node j, i.e.
the edge (j, i). Switching intervals are right-open, [t_j, t_{j+1}).
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass

import numpy as np

from aggnash.errors import ConfigError, ContractError


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    weights: np.ndarray
    name: str = ""

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ContractError("adjacency matrix must be square")
        if np.any(np.diag(W) != 0):
            raise ContractError("self-loops are not allowed (a_ii must be 0)")
        if np.any(W < 0):
            raise ContractError("edge weights must be nonnegative")
        W = W.copy()
        W.flags.writeable = False
        object.__setattr__(self, "weights", W)

    @property
    def N(self):
        return self.weights.shape[0]

    def edges(self):
        """Set of (j, i) pairs: i receives from j."""
        rows, cols = np.nonzero(self.weights)
        return {(int(j), int(i)) for i, j in zip(rows, cols)}


def laplacian(g):
    """L = D - A with D the diagonal of in-degrees (row sums of A)."""
    W = g.weights
    return np.diag(W.sum(axis=1)) - W


def is_weight_balanced(g, tol=1e-12):
    W = g.weights
    return bool(np.all(np.abs(W.sum(axis=1) - W.sum(axis=0)) <= tol))


def is_connected(g):
    """True iff some node reaches every other node along directed edges."""
    N = g.N
    succ = [np.nonzero(g.weights[:, j])[0] for j in range(N)]  # j -> i
    for root in range(N):
        seen = np.zeros(N, dtype=bool)
        seen[root] = True
        queue = deque([root])
        while queue:
            j = queue.popleft()
            for i in succ[j]:
                if not seen[i]:
                    seen[i] = True
                    queue.append(i)
        if seen.all():
            return True
    return False


@dataclass(frozen=True, eq=False)
class SwitchingSchedule:
    """Piecewise-constant switching among ``graphs``.

    Segment k occupies [instants[k], instants[k+1]) and uses graph
    ``indices[k]`` (zero-based). ``instants`` ends with the end of the last
    segment. When ``periodic`` the pattern repeats with period
    ``instants[-1]`` and ``horizon`` may exceed it.
    """

    graphs: tuple
    instants: np.ndarray
    indices: tuple
    tau: float
    horizon: float
    periodic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "indices", tuple(int(k) for k in self.indices))
        inst = np.asarray(self.instants, dtype=float)
        object.__setattr__(self, "instants", inst)
        if not self.graphs:
            raise ConfigError("schedule needs at least one graph")
        if len({g.N for g in self.graphs}) != 1:
            raise ConfigError("all graphs must have the same node count")
        if inst.ndim != 1 or inst.shape[0] != len(self.indices) + 1 or inst[0] != 0.0:
            raise ConfigError("instants must start at 0 and bound every segment")
        if not self.tau > 0:
            raise ConfigError("dwell time must be positive")
        gaps = np.diff(inst)
        if np.any(gaps < self.tau * (1 - 1e-12)):
            raise ConfigError(f"a segment is shorter than the dwell time {self.tau}")
        if any(not 0 <= k < len(self.graphs) for k in self.indices):
            raise ConfigError("graph index out of range")
        if not self.periodic and self.horizon > inst[-1] * (1 + 1e-12):
            raise ConfigError("aperiodic schedule does not cover the horizon")

    @classmethod
    def from_pattern(cls, graphs, pattern, dwell, horizon, periodic=True):
        """Build from a list of graph indices and per-segment dwell lengths.

        ``dwell`` is a scalar or one length per pattern entry.
        """
        pattern = list(pattern)
        d = np.broadcast_to(np.asarray(dwell, dtype=float), (len(pattern),))
        instants = np.concatenate([[0.0], np.cumsum(d)])
        return cls(graphs, instants, pattern, float(d.min()), float(horizon), periodic)

    @classmethod
    def static(cls, graph, horizon):
        return cls((graph,), np.array([0.0, float(horizon)]), (0,), float(horizon), float(horizon))

    @property
    def N(self):
        return self.graphs[0].N

    @property
    def period(self):
        return float(self.instants[-1])

    def _check_time(self, t):
        if t < 0 or t > self.horizon * (1 + 1e-12) + 1e-15:
            raise ContractError(f"time {t} outside [0, {self.horizon}]")

    def _locate(self, t):
        """(segment index, start, end) of the segment containing t."""
        P = self.period
        base = 0.0
        if self.periodic and t >= P:
            cycles = np.floor(t / P)
            base = cycles * P
            t = t - base
            if t >= P:  # rounding at exact multiples
                base += P
                t -= P
        k = bisect.bisect_right(self.instants, t) - 1
        k = min(max(k, 0), len(self.indices) - 1)
        return k, base + self.instants[k], base + self.instants[k + 1]

    def graph_index(self, t):
        return self.indices[self._locate(t)[0]]

    def switching_instants(self, t_end):
        """All switching instants in [0, t_end], starting with 0."""
        return [a for a, _, _ in self.segments(t_end)]

    def segments(self, t_end):
        """(start, end, graph index) covering [0, t_end]."""
        self._check_time(t_end)
        P = self.period
        out = []
        cycle = 0
        while True:
            base = cycle * P
            for k, gi in enumerate(self.indices):
                a = base + float(self.instants[k])
                if a >= t_end:
                    return out
                b = min(base + float(self.instants[k + 1]), float(t_end))
                out.append((a, b, gi))
            if not self.periodic:
                return out
            cycle += 1

    def laplacians(self):
        return [laplacian(g) for g in self.graphs]


def graph_at(schedule, t):
    """Zero-based index of the graph active at time t (right-open intervals)."""
    schedule._check_time(t)
    return schedule.graph_index(t)


def union_graph(schedule, t, window):
    """Union of the graphs active anywhere in [t, t + window).

    Union edge weights are the maximum of the contributing weights.
    """
    if not window > 0:
        raise ContractError("window must be positive")
    end = t + window
    schedule._check_time(t)
    if not schedule.periodic and end > schedule.horizon * (1 + 1e-12):
        raise ContractError("window extends past the horizon of an aperiodic schedule")
    W = np.zeros((schedule.N, schedule.N))
    cur = t
    while cur < end:
        k, _, seg_end = schedule._locate(cur)
        W = np.maximum(W, schedule.graphs[schedule.indices[k]].weights)
        cur = seg_end
    return WeightedDigraph(W, name="union")


@dataclass
class Assumption4Report:
    balanced: list
    all_balanced: bool
    instant_connected: list
    windows: list
    jointly_connected: bool
    T: float
    smallest_T: float | None
    verified_until: float

    def lines(self):
        out = []
        for k, ok in enumerate(self.balanced):
            out.append(f"graph[{k}].weight_balanced = {str(ok).lower()}")
        for k, ok in enumerate(self.instant_connected):
            out.append(f"graph[{k}].connected = {str(ok).lower()}")
        for t0, ok in self.windows:
            out.append(f"window[{t0:.17g}, {t0 + self.T:.17g}).connected = {str(ok).lower()}")
        out.append(f"all_weight_balanced = {str(self.all_balanced).lower()}")
        out.append(f"jointly_connected = {str(self.jointly_connected).lower()}")
        out.append(f"T = {self.T:.17g}")
        out.append("smallest_T = " + ("none" if self.smallest_T is None else f"{self.smallest_T:.17g}"))
        out.append(f"verified_until = {self.verified_until:.17g}")
        return out


def _anchors(schedule):
    """Window anchors: every switching instant within one period (periodic)
    or within the declared horizon (aperiodic)."""
    if schedule.periodic:
        return [float(t) for t in schedule.instants[:-1]]
    return [float(t) for t in schedule.instants[:-1] if t < schedule.horizon]


def _jointly_connected(schedule, T):
    results = []
    for t0 in _anchors(schedule):
        if not schedule.periodic and t0 + T > schedule.horizon * (1 + 1e-12):
            break  # window leaves the declared horizon: no verdict possible
        results.append((t0, is_connected(union_graph(schedule, t0, T))))
    return results


def verify_assumption4(schedule, T, tol=1e-12, max_multiple=None):
    """Check weight balance and joint connectivity over windows of length T.

    Windows are anchored at switching instants; between instants the active
    graph is constant, so this covers every window start. The smallest T is
    searched over multiples of the dwell time. For aperiodic schedules only
    windows inside the horizon are checked and ``verified_until`` is the
    last window start covered.
    """
    if T < schedule.tau * (1 - 1e-12):
        raise ContractError("T must be at least the dwell time")
    balanced = [is_weight_balanced(g, tol) for g in schedule.graphs]
    instant = [is_connected(g) for g in schedule.graphs]
    windows = _jointly_connected(schedule, T)
    joint = bool(windows) and all(ok for _, ok in windows)

    limit = schedule.period if schedule.periodic else schedule.horizon
    if max_multiple is None:
        max_multiple = int(np.ceil(limit / schedule.tau)) + 1
    smallest = None
    for m in range(1, max_multiple + 1):
        cand = m * schedule.tau
        res = _jointly_connected(schedule, cand)
        if res and all(ok for _, ok in res):
            smallest = cand
            break
    verified = np.inf if schedule.periodic else (windows[-1][0] if windows else 0.0)
    return Assumption4Report(balanced, all(balanced), instant, windows, joint, float(T), smallest, verified)


# Named generators -----------------------------------------------------------

def ring(N, weight=1.0):
    """Directed ring: node i receives from node i-1."""
    W = np.zeros((N, N))
    for i in range(N):
        W[i, (i - 1) % N] = weight
    return WeightedDigraph(W, name="ring")


def undirected_ring(N, weight=1.0):
    W = ring(N, weight).weights
    return WeightedDigraph(W + W.T, name="undirected-ring")


def star(N, weight=1.0, center=0):
    """Directed star out of ``center``."""
    W = np.zeros((N, N))
    for i in range(N):
        if i != center:
            W[i, center] = weight
    return WeightedDigraph(W, name="star")


def complete(N, weight=1.0):
    return WeightedDigraph(weight * (np.ones((N, N)) - np.eye(N)), name="complete")


def split_ring(N, k, weight=1.0):
    """Half k (0 or 1) of an undirected ring: the edges {i, i+1} with i = k mod 2.

    Each half is weight-balanced and, for N >= 3, disconnected; the two
    halves together form the full ring.
    """
    if k not in (0, 1):
        raise ContractError("split_ring half must be 0 or 1")
    W = np.zeros((N, N))
    for i in range(k, N, 2):
        j = (i + 1) % N
        if (N % 2 == 1) and i == N - 1 and k == 0:
            continue  # odd ring: the wrap edge belongs to half 1 only
        W[i, j] = W[j, i] = weight
    if N % 2 == 1 and k == 1:
        W[N - 1, 0] = W[0, N - 1] = weight
    return WeightedDigraph(W, name=f"split-ring({k})")


def named_graph(spec, N):
    """Build a graph from a generator name such as "ring" or "split-ring(1)"."""
    spec = spec.strip()
    if spec == "ring":
        return ring(N)
    if spec == "undirected-ring":
        return undirected_ring(N)
    if spec == "star":
        return star(N)
    if spec == "complete":
        return complete(N)
    if spec.startswith("split-ring(") and spec.endswith(")"):
        return split_ring(N, int(spec[len("split-ring("):-1]))
    raise ConfigError(f"unknown graph generator {spec!r}")
