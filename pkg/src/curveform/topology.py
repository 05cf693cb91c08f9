"""Directed interaction graphs and the Lyapunov matrices built from them.

Agents are indexed from 0 in code (agent 0 is the leader); files and CLI
output use 1-based agent numbers. ``weights[i, j] > 0`` means agent ``i``
receives information from agent ``j``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from curveform.errors import InvalidArgument, NotSpanningTree

LEADER = 0
PD_THRESHOLD = 1e-12


@dataclass(frozen=True)
class DirectedTopology:
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        A = np.array(self.weights, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise InvalidArgument(f"adjacency must be a nonempty square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InvalidArgument("adjacency weights must be finite")
        if np.any(A < 0):
            i, j = np.argwhere(A < 0)[0]
            raise InvalidArgument(f"negative weight {A[i, j]} on edge {j + 1} -> {i + 1}")
        if np.any(np.diag(A) != 0):
            i = int(np.flatnonzero(np.diag(A))[0])
            raise InvalidArgument(f"self-loop on agent {i + 1}")
        A.setflags(write=False)
        object.__setattr__(self, "weights", A)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "DirectedTopology":
        """Build from 1-based ``(receiver, sender, weight)`` triples."""
        if isinstance(n, bool) or int(n) != n or n < 1:
            raise InvalidArgument(f"agent count must be a positive integer, got {n!r}")
        A = np.zeros((int(n), int(n)))
        for k, edge in enumerate(edges):
            if len(edge) not in (2, 3):
                raise InvalidArgument(f"edge #{k + 1} must be (receiver, sender[, weight]), got {edge!r}")
            recv, send = edge[0], edge[1]
            weight = float(edge[2]) if len(edge) == 3 else 1.0
            for who in (recv, send):
                if isinstance(who, bool) or int(who) != who or not 1 <= who <= n:
                    raise InvalidArgument(f"edge #{k + 1} refers to agent {who!r}, valid range 1..{n}")
            if weight < 0:
                raise InvalidArgument(f"edge #{k + 1} has negative weight {weight}")
            A[int(recv) - 1, int(send) - 1] = weight
        return cls(A)

    def edges(self) -> list[tuple[int, int, float]]:
        """1-based ``(receiver, sender, weight)`` triples."""
        return [(int(i) + 1, int(j) + 1, float(self.weights[i, j])) for i, j in np.argwhere(self.weights > 0)]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.weights[i] > 0)

    @property
    def leader_has_inputs(self) -> bool:
        return bool(np.any(self.weights[LEADER] > 0))


def chain(n: int, weight: float = 1.0) -> DirectedTopology:
    """Directed path 1 -> 2 -> ... -> n."""
    A = np.zeros((n, n))
    for i in range(1, n):
        A[i, i - 1] = weight
    return DirectedTopology(A)


def chain_with_shortcuts(n: int, weight: float = 1.0) -> DirectedTopology:
    """Directed path plus an edge from agent i-2 into every agent i >= 3."""
    A = chain(n, weight).weights.copy()
    for i in range(2, n):
        A[i, i - 2] = weight
    return DirectedTopology(A)


NAMED_TOPOLOGIES = {"chain": chain, "chain-shortcut": chain_with_shortcuts}


def random_rooted_digraph(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3,
                          weight_range=(0.5, 2.0)) -> DirectedTopology:
    """Random weighted digraph whose spanning tree is rooted at agent 1.

    A random tree is grown from the leader, then extra edges are sprinkled
    among the followers. The leader never receives.
    """
    A = np.zeros((n, n))
    order = [LEADER] + list(rng.permutation(np.arange(1, n)))
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        A[order[k], parent] = rng.uniform(*weight_range)
    for i in range(1, n):
        for j in range(n):
            if i != j and A[i, j] == 0 and rng.random() < extra_edge_prob:
                A[i, j] = rng.uniform(*weight_range)
    return DirectedTopology(A)


def _weights(topology) -> np.ndarray:
    if isinstance(topology, DirectedTopology):
        return topology.weights
    return np.asarray(topology, dtype=float)


def build_laplacian(topology) -> np.ndarray:
    """``L = diag(in-weight row sums) - A``, so ``L @ 1 == 0``."""
    A = _weights(topology)
    if np.any(A < 0):
        raise InvalidArgument("Laplacian of a graph with negative weights is not defined here")
    A = A - np.diag(np.diag(A))
    return np.diag(A.sum(axis=1)) - A


def reachable_from(topology, root: int) -> np.ndarray:
    """Boolean mask of agents reachable from ``root`` along information flow."""
    A = _weights(topology)
    n = A.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    queue = deque([root])
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(A[:, j] > 0):
            if not seen[i]:
                seen[i] = True
                queue.append(i)
    return seen


def has_rooted_spanning_tree(topology, root: int = LEADER) -> bool:
    return bool(reachable_from(topology, root).all())


def leader_selector(n: int) -> np.ndarray:
    Lam = np.zeros((n, n))
    Lam[LEADER, LEADER] = 1.0
    return Lam


def extend_matrix(M) -> np.ndarray:
    """``M kron I_2``: lift an agent-level matrix to stacked planar coordinates."""
    return np.kron(np.asarray(M, dtype=float), np.eye(2))


@dataclass(frozen=True)
class TheoremOneMatrices:
    q: np.ndarray
    p: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    min_eig_P: float
    min_eig_Q: float

    @property
    def positive_definite(self) -> bool:
        return self.min_eig_P > PD_THRESHOLD and self.min_eig_Q > PD_THRESHOLD


def theorem1_matrices(L, B=None) -> TheoremOneMatrices:
    """Diagonal Lyapunov weight ``P`` and ``Q = P M + M^T P`` for ``M = L + B``.

    ``q = M^-1 1``, ``p = M^-T 1`` and ``P = diag(p / q)``. ``B`` defaults to
    the leader selector. Raises :class:`NotSpanningTree` when ``M`` is singular
    or the resulting ``q``/``p`` are not strictly positive.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    B = leader_selector(n) if B is None else np.asarray(B, dtype=float)
    M = L + B
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1.0):
        raise NotSpanningTree(
            "L + B is singular: the augmented graph has no spanning tree rooted at the leader"
        )
    ones = np.ones(n)
    q = np.linalg.solve(M, ones)
    p = np.linalg.solve(M.T, ones)
    if np.any(q <= 0) or np.any(p <= 0):
        raise NotSpanningTree(f"non-positive entries in q={q} or p={p}")
    P = np.diag(p / q)
    Q = P @ M + M.T @ P
    return TheoremOneMatrices(
        q=q,
        p=p,
        P=P,
        Q=Q,
        min_eig_P=float(np.min(p / q)),
        min_eig_Q=float(np.linalg.eigvalsh(0.5 * (Q + Q.T))[0]),
    )
