"""Reversible finite Markov chains: construction, validation, laziness, walks.

A Chain bundles a row-stochastic kernel P with its reversing measure pi and a
cached spectrum of the symmetrized operator.  Chains are immutable after
construction and safe for concurrent reads; every mutation-like operation
(lazify) returns a new Chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ROW_SUM_TOL = 1e-12
BALANCE_TOL = 1e-12
# eigenvalue threshold that triggers automatic lazification at construction
LAZY_EIG_TOL = 1e-9


class ChainError(ValueError):
    """Base class for chain construction and usage errors."""


class ValidationError(ChainError):
    """Malformed input: bad weights, non-stochastic kernel, broken balance."""


class ConstructionError(ChainError):
    """Structurally impossible request, e.g. a disconnected graph."""


class NumericalError(RuntimeError):
    """A solver failed to reach the required residual."""


@dataclass(eq=False)
class VertexSet:
    """An ordered subset of states with O(1) membership tests.

    `indices` is strictly increasing; the complement is computed lazily.
    """

    indices: np.ndarray
    n: int
    _mask: np.ndarray | None = field(default=None, repr=False)
    _complement: "VertexSet | None" = field(default=None, repr=False)

    @classmethod
    def from_iterable(cls, indices: Iterable[int], n: int) -> "VertexSet":
        idx = np.asarray(sorted(int(i) for i in indices), dtype=np.int64)
        if idx.size and (idx[0] < 0 or idx[-1] >= n):
            raise ValidationError(f"vertex index out of range [0, {n})")
        if idx.size != np.unique(idx).size:
            raise ValidationError("duplicate vertex indices")
        return cls(indices=idx, n=n)

    @property
    def mask(self) -> np.ndarray:
        if self._mask is None:
            m = np.zeros(self.n, dtype=bool)
            m[self.indices] = True
            self._mask = m
        return self._mask

    def complement(self) -> "VertexSet":
        if self._complement is None:
            comp = np.flatnonzero(~self.mask)
            self._complement = VertexSet(indices=comp, n=self.n)
        return self._complement

    def __len__(self) -> int:
        return int(self.indices.size)

    def __contains__(self, x: int) -> bool:
        return bool(self.mask[x])

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump({"indices": [int(i) for i in self.indices]}, fh)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str, n: int) -> "VertexSet":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_iterable(data["indices"], n)


@dataclass(eq=False)
class MeasureOnSet:
    """A probability vector supported on a VertexSet."""

    support: VertexSet
    weights: np.ndarray

    SUM_TOL = 1e-10

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.support),):
            raise ValidationError("weights do not match support size")
        if np.any(w < -self.SUM_TOL):
            raise ValidationError("negative weight in measure")
        if abs(w.sum() - 1.0) > self.SUM_TOL:
            raise ValidationError(f"measure mass {w.sum()} != 1")
        self.weights = np.clip(w, 0.0, None)

    @classmethod
    def point_mass(cls, x: int, n: int) -> "MeasureOnSet":
        return cls(VertexSet.from_iterable([x], n), np.ones(1))

    def full_vector(self) -> np.ndarray:
        v = np.zeros(self.support.n)
        v[self.support.indices] = self.weights
        return v

    def sample(self, rng: np.random.Generator) -> int:
        j = int(rng.choice(len(self.support), p=self.weights / self.weights.sum()))
        return int(self.support.indices[j])


@dataclass(eq=False)
class WalkPath:
    """An ordered record of visited states; length is the step count."""

    states: np.ndarray
    truncated: bool = False

    @property
    def length(self) -> int:
        return int(self.states.size - 1)

    def validate(self, chain: "Chain") -> None:
        """Check that every transition taken has positive kernel mass."""
        s = self.states
        if np.any(chain.kernel[s[:-1], s[1:]] <= 0):
            raise ValidationError("walk contains a zero-probability transition")


class Chain:
    """A reversible finite Markov chain (dense kernel, explicit pi).

    Invariants enforced at construction:
      * rows of `kernel` sum to 1 within 1e-12,
      * pi is strictly positive and sums to 1 within 1e-12,
      * detailed balance |pi(x)P(x,y) - pi(y)P(y,x)| <= 1e-12 for all pairs.

    When any eigenvalue of the kernel is <= -1 + 1e-9 the chain is replaced
    by its lazy version (I+P)/2 at construction, and `laziness_applied`
    records this so downstream reports can disclose it.
    """

    def __init__(
        self,
        kernel: np.ndarray,
        pi: np.ndarray,
        *,
        auto_lazify: bool = True,
        edges: list[tuple[int, int, float]] | None = None,
        meta: dict | None = None,
        _eigenvalues: np.ndarray | None = None,
        _laziness_applied: bool = False,
    ):
        kernel = np.ascontiguousarray(kernel, dtype=float)
        pi = np.asarray(pi, dtype=float)
        n = kernel.shape[0]
        if kernel.shape != (n, n):
            raise ValidationError("kernel must be square")
        if pi.shape != (n,):
            raise ValidationError("pi has wrong length")
        if np.any(kernel < 0):
            raise ValidationError("kernel has negative entries")
        row_err = np.abs(kernel.sum(axis=1) - 1.0).max()
        if row_err > ROW_SUM_TOL:
            raise ValidationError(f"kernel rows deviate from 1 by {row_err:.3e}")
        if np.any(pi <= 0):
            raise ValidationError("pi must be strictly positive")
        if abs(pi.sum() - 1.0) > ROW_SUM_TOL:
            raise ValidationError(f"pi mass {pi.sum()} != 1")
        balance = np.abs(pi[:, None] * kernel - (pi[:, None] * kernel).T).max()
        if balance > BALANCE_TOL:
            raise ValidationError(
                f"detailed balance violated by {balance:.3e}; chain rejected"
            )

        self.n = n
        self.kernel = kernel
        self.pi = pi
        self.pi_min = float(pi.min())
        self.pi_max = float(pi.max())
        self.laziness_applied = _laziness_applied
        self.edges = edges
        self.meta = dict(meta or {})
        self._eigenvalues = _eigenvalues
        self._eigenvectors: np.ndarray | None = None
        self._cumrows: np.ndarray | None = None
        self._adjacency: list[np.ndarray] | None = None
        self._cache: dict = {}

        if auto_lazify and self.eigenvalues()[0] <= -1.0 + LAZY_EIG_TOL:
            lazy = 0.5 * (np.eye(n) + kernel)
            self.kernel = np.ascontiguousarray(lazy)
            self._eigenvalues = 0.5 * (1.0 + self._eigenvalues)
            self.laziness_applied = True

    # -- spectral cache -------------------------------------------------

    def symmetrized(self) -> np.ndarray:
        """D^{1/2} P D^{-1/2} with D = diag(pi); symmetric by detailed balance."""
        s = np.sqrt(self.pi)
        m = (s[:, None] * self.kernel) / s[None, :]
        return 0.5 * (m + m.T)

    def eigenvalues(self) -> np.ndarray:
        """Real spectrum of P, ascending (cached)."""
        if self._eigenvalues is None:
            self._eigenvalues = np.linalg.eigvalsh(self.symmetrized())
        return self._eigenvalues

    def eigensystem(self) -> tuple[np.ndarray, np.ndarray]:
        """(eigenvalues ascending, eigenvectors) of the symmetrized operator."""
        if self._eigenvectors is None:
            vals, vecs = np.linalg.eigh(self.symmetrized())
            self._eigenvalues, self._eigenvectors = vals, vecs
        return self._eigenvalues, self._eigenvectors

    # -- adjacency / sampling helpers ------------------------------------

    def neighbors(self, x: int) -> np.ndarray:
        if self._adjacency is None:
            self._adjacency = [
                np.flatnonzero((self.kernel[i] > 0) & (np.arange(self.n) != i))
                for i in range(self.n)
            ]
        return self._adjacency[x]

    def row_cumsums(self) -> np.ndarray:
        if self._cumrows is None:
            self._cumrows = np.cumsum(self.kernel, axis=1)
        return self._cumrows

    def step(self, x: int, u: float) -> int:
        """Next state from x given a uniform draw u in [0,1)."""
        j = int(np.searchsorted(self.row_cumsums()[x], u, side="right"))
        return min(j, self.n - 1)

    # -- serialization ---------------------------------------------------

    def to_json(self, path: str) -> None:
        """Write the documented chain file format.

        Chains that remember their defining weighted edges are written as
        weighted-edges (reloading reproduces them exactly, including the
        automatic lazification); anything else is written as an explicit
        kernel with pi.
        """
        if self.edges is not None:
            data = {
                "n": self.n,
                "format": "weighted-edges",
                "edges": [[int(x), int(y), float(w)] for x, y, w in self.edges],
            }
        else:
            data = {
                "format": "kernel",
                "P": self.kernel.tolist(),
                "pi": self.pi.tolist(),
            }
        if self.meta:
            data["meta"] = self.meta
        with open(path, "w") as fh:
            json.dump(data, fh)
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "Chain":
        with open(path) as fh:
            data = json.load(fh)
        meta = data.get("meta")
        fmt = data.get("format")
        if fmt == "weighted-edges":
            edges = [(int(x), int(y), float(w)) for x, y, w in data["edges"]]
            return build_from_weights(int(data["n"]), edges, meta=meta)
        if fmt == "kernel":
            P = np.asarray(data["P"], dtype=float)
            if "pi" not in data:
                raise ValidationError("kernel format requires an explicit pi")
            return cls(P, np.asarray(data["pi"], dtype=float), meta=meta)
        raise ValidationError(f"unknown chain format {fmt!r}")


def _connected(n: int, pairs: Sequence[tuple[int, int]]) -> bool:
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for x, y in pairs:
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry
    root = find(0)
    return all(find(v) == root for v in range(n))


def build_from_weights(
    n: int,
    edges: Sequence[tuple[int, int, float]],
    *,
    auto_lazify: bool = True,
    meta: dict | None = None,
) -> Chain:
    """Simple random walk on a weighted graph: P(x,y) = w(x,y)/w(x), pi ~ w(x).

    Each undirected edge must be listed exactly once; weights must be
    positive; the graph must be connected.  pi comes in closed form from
    the incident weights, never from iteration.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    W = np.zeros((n, n))
    seen: set[tuple[int, int]] = set()
    for x, y, w in edges:
        x, y, w = int(x), int(y), float(w)
        if not (0 <= x < n and 0 <= y < n):
            raise ValidationError(f"edge ({x},{y}) out of range")
        if w <= 0:
            raise ValidationError(f"nonpositive weight {w} on edge ({x},{y})")
        key = (min(x, y), max(x, y))
        if key in seen:
            raise ValidationError(f"edge ({x},{y}) listed more than once")
        seen.add(key)
        W[x, y] += w
        if x != y:
            W[y, x] += w
    strength = W.sum(axis=1)
    if np.any(strength == 0):
        raise ConstructionError("isolated vertex: graph is disconnected")
    if not _connected(n, [(x, y) for x, y in seen if x != y]):
        raise ConstructionError("graph is disconnected")
    kernel = W / strength[:, None]
    pi = strength / strength.sum()
    return Chain(
        kernel,
        pi,
        auto_lazify=auto_lazify,
        edges=[(x, y, float(W[x, y]) if x != y else float(W[x, x])) for x, y in sorted(seen)],
        meta=meta,
    )


def lazify(chain: Chain) -> Chain:
    """Replace the kernel by (I+P)/2.

    pi is unchanged, the spectrum maps affinely via l -> (1+l)/2, and every
    harmonic measure is preserved.  Applying this twice keeps transforming;
    it is not idempotent.
    """
    lazy_kernel = 0.5 * (np.eye(chain.n) + chain.kernel)
    return Chain(
        lazy_kernel,
        chain.pi,
        auto_lazify=False,
        meta=chain.meta,
        _eigenvalues=0.5 * (1.0 + chain.eigenvalues()),
        _laziness_applied=True,
    )


def sample_walk(
    chain: Chain,
    start: int | np.ndarray | MeasureOnSet,
    stop: VertexSet,
    rng: np.random.Generator,
    cap: int,
) -> WalkPath:
    """Run the chain from `start` until it first enters `stop` (time >= 0).

    A start state already inside `stop` yields a length-0 path.  If the walk
    has not entered `stop` after `cap` steps the path is returned truncated;
    callers that cannot tolerate truncation enlarge the cap.
    """
    if len(stop) == 0:
        raise ValidationError("stop set must be nonempty")
    if cap < 1:
        raise ValidationError("cap must be >= 1")
    if isinstance(start, MeasureOnSet):
        x = start.sample(rng)
    elif np.ndim(start) == 0:
        x = int(start)
    else:
        p = np.asarray(start, dtype=float)
        x = int(rng.choice(chain.n, p=p / p.sum()))
    stop_mask = stop.mask
    states = [x]
    if stop_mask[x]:
        return WalkPath(np.asarray(states, dtype=np.int64))
    cum = chain.row_cumsums()
    for _ in range(cap):
        u = rng.random()
        x = min(int(np.searchsorted(cum[x], u, side="right")), chain.n - 1)
        states.append(x)
        if stop_mask[x]:
            return WalkPath(np.asarray(states, dtype=np.int64))
    return WalkPath(np.asarray(states, dtype=np.int64), truncated=True)
