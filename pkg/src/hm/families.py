"""Deterministic and seeded generators for the graph families used in checks.

Every generator returns the simple-random-walk Chain of the graph, tagged
with provenance metadata so structured vertex sets (leaves+root of the tree
expander, torus nets) can be rebuilt later.  Randomized families are pure
functions of (params, seed).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .chain import Chain, ConstructionError, ValidationError, VertexSet, build_from_weights

PAIRING_BUDGET = 10_000

FAMILIES = (
    "complete",
    "cycle",
    "path",
    "torus",
    "random_regular",
    "tree_expander",
    "lamplighter",
)


@dataclass(frozen=True)
class FamilySpec:
    """Which family to build and with which integer parameters."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0


class GenerationError(ConstructionError):
    """A randomized generator exhausted its rejection budget."""


def generate(spec: FamilySpec) -> Chain:
    """Build the simple-random-walk chain of the requested family."""
    fam = spec.family.replace("-", "_")
    if fam not in FAMILIES:
        raise ValidationError(f"unknown family {spec.family!r}")
    p = spec.params
    if fam == "complete":
        return complete(p["n"])
    if fam == "cycle":
        return cycle(p["n"])
    if fam == "path":
        return path(p["n"])
    if fam == "torus":
        return torus(p["n"], p["d"])
    if fam == "random_regular":
        return random_regular(p["n"], p["d"], spec.seed)
    if fam == "tree_expander":
        return tree_expander(p["k"], spec.seed)
    return lamplighter(p["n"])


def _unit(edges) -> list[tuple[int, int, float]]:
    return [(x, y, 1.0) for x, y in edges]


def complete(n: int) -> Chain:
    if n < 2:
        raise ValidationError("complete graph needs n >= 2")
    edges = [(x, y) for x in range(n) for y in range(x + 1, n)]
    return build_from_weights(n, _unit(edges), meta={"family": "complete", "n": n})


def cycle(n: int) -> Chain:
    if n < 3:
        raise ValidationError("cycle needs n >= 3")
    edges = [(i, (i + 1) % n) for i in range(n)]
    return build_from_weights(n, _unit(edges), meta={"family": "cycle", "n": n})


def path(n: int) -> Chain:
    if n < 2:
        raise ValidationError("path needs n >= 2")
    edges = [(i, i + 1) for i in range(n - 1)]
    return build_from_weights(n, _unit(edges), meta={"family": "path", "n": n})


def torus(n: int, d: int) -> Chain:
    """(Z/nZ)^d with nearest-neighbour edges; 2d-regular for n >= 3."""
    if n < 3 or d < 1:
        raise ValidationError("torus needs n >= 3 and d >= 1")
    size = n**d
    edges = []
    for v in range(size):
        coords = _torus_coords(v, n, d)
        for axis in range(d):
            w = list(coords)
            w[axis] = (w[axis] + 1) % n
            edges.append((v, _torus_index(w, n)))
    return build_from_weights(size, _unit(edges), meta={"family": "torus", "n": n, "d": d})


def _torus_coords(v: int, n: int, d: int) -> list[int]:
    out = []
    for _ in range(d):
        out.append(v % n)
        v //= n
    return out


def _torus_index(coords, n: int) -> int:
    v = 0
    for c in reversed(coords):
        v = v * n + c
    return v


def _pairing_attempt(n: int, d: int, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    stubs = np.repeat(np.arange(n), d)
    rng.shuffle(stubs)
    edges: set[tuple[int, int]] = set()
    for i in range(0, stubs.size, 2):
        a, b = int(stubs[i]), int(stubs[i + 1])
        if a == b:
            return None
        key = (min(a, b), max(a, b))
        if key in edges:
            return None
        edges.add(key)
    return edges


def random_regular_edges(n: int, d: int, seed: int) -> list[tuple[int, int]]:
    """A uniform-ish simple connected d-regular graph via pairing with rejection."""
    if d < 3:
        raise ValidationError("random_regular needs d >= 3")
    if (n * d) % 2 != 0 or n <= d:
        raise ValidationError("random_regular needs n*d even and n > d")
    rng = np.random.default_rng(seed)
    for _ in range(PAIRING_BUDGET):
        edges = _pairing_attempt(n, d, rng)
        if edges is None:
            continue
        pairs = sorted(edges)
        if _bfs_connected(n, pairs):
            return pairs
    raise GenerationError(f"pairing model budget exhausted (n={n}, d={d}, seed={seed})")


def _bfs_connected(n: int, pairs) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for x, y in pairs:
        adj[x].append(y)
        adj[y].append(x)
    seen = np.zeros(n, dtype=bool)
    queue = deque([0])
    seen[0] = True
    count = 1
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n


def random_regular(n: int, d: int, seed: int) -> Chain:
    edges = random_regular_edges(n, d, seed)
    return build_from_weights(
        n, _unit(edges), meta={"family": "random_regular", "n": n, "d": d, "seed": seed}
    )


def tree_expander(k: int, seed: int) -> Chain:
    """Depth-k binary tree plus a random 3-regular graph on its 2^k leaves.

    Heap indexing: root 0, children of i are 2i+1 and 2i+2; leaves occupy
    indices 2^k-1 .. 2^(k+1)-2.  Degrees: root 2, internal 3, leaves 4,
    hence pi_max = 2*pi_min.
    """
    if k < 2:
        raise ValidationError("tree_expander needs k >= 2")
    n = 2 ** (k + 1) - 1
    first_leaf = 2**k - 1
    edges = [(i, 2 * i + 1) for i in range(first_leaf)]
    edges += [(i, 2 * i + 2) for i in range(first_leaf)]
    leaf_graph = random_regular_edges(2**k, 3, seed)
    edges += [(first_leaf + a, first_leaf + b) for a, b in leaf_graph]
    return build_from_weights(
        n, _unit(edges), meta={"family": "tree_expander", "k": k, "seed": seed}
    )


def lamplighter(n: int) -> Chain:
    """Walk on lamp configurations over Z/nZ with toggle and step generators.

    States are (config, position) pairs indexed config*n + pos.  Parallel
    step generators (n = 2) collapse to a single weighted edge.
    """
    if n < 2:
        raise ValidationError("lamplighter needs n >= 2")
    size = n * (1 << n)
    edges: list[tuple[int, int, float]] = []
    for config in range(1 << n):
        base = config * n
        for pos in range(n):
            if not (config >> pos) & 1:  # list each toggle edge once
                edges.append((base + pos, (config ^ (1 << pos)) * n + pos, 1.0))
            if n == 2:
                if pos == 0:
                    edges.append((base, base + 1, 2.0))
            else:
                edges.append((base + pos, base + (pos + 1) % n, 1.0))
    return build_from_weights(size, edges, meta={"family": "lamplighter", "n": n})


def leaves_and_root_set(chain: Chain, k: int | None = None) -> tuple[VertexSet, int]:
    """The 2^k leaves plus the root of a tree_expander chain; returns (S, root)."""
    if chain.meta.get("family") != "tree_expander":
        raise ValidationError("chain was not generated by tree_expander")
    if k is None:
        k = int(chain.meta["k"])
    elif k != int(chain.meta["k"]):
        raise ValidationError(f"chain has depth {chain.meta['k']}, not {k}")
    first_leaf = 2**k - 1
    indices = [0] + list(range(first_leaf, 2 ** (k + 1) - 1))
    return VertexSet.from_iterable(indices, chain.n), 0


def bfs_distances(chain: Chain, sources) -> np.ndarray:
    """Unit-edge BFS distances from a vertex or a set of vertices."""
    if np.ndim(sources) == 0:
        sources = [int(sources)]
    dist = np.full(chain.n, -1, dtype=np.int64)
    queue = deque()
    for s in sources:
        dist[s] = 0
        queue.append(int(s))
    while queue:
        v = queue.popleft()
        for w in chain.neighbors(v):
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(int(w))
    return dist


def torus_net_set(chain: Chain, r: int) -> VertexSet:
    """Greedy farthest-point r-net on a torus chain.

    Every vertex ends within distance r of the returned centers; selection
    starts at vertex 0 and always adds the farthest vertex, breaking ties by
    smallest index, so the result is deterministic.
    """
    if chain.meta.get("family") != "torus":
        raise ValidationError("chain was not generated by torus")
    n, d = int(chain.meta["n"]), int(chain.meta["d"])
    diameter = d * (n // 2)
    if not 0 < r < diameter:
        raise ValidationError(f"radius must satisfy 0 < r < diameter ({diameter})")
    centers = [0]
    dist = bfs_distances(chain, 0)
    while dist.max() > r:
        far = int(np.argmax(dist))  # argmax takes the smallest index on ties
        centers.append(far)
        dist = np.minimum(dist, bfs_distances(chain, far))
    return VertexSet.from_iterable(centers, chain.n)
