"""Diffusion limited aggregation on a finite chain, with growth statistics.

One particle is added per step, sampled from the stationary-start harmonic
measure of the aggregate boundary; the process stops when the end vertex is
absorbed.  Two interchangeable step modes exist: "exact" samples the solved
harmonic measure, "walk" runs an actual random walk from stationarity.

Boundary semantics: the growth boundary is the *outer* boundary
{x not in A : P(y,x) > 0 for some y in A}.  Reading the boundary as the
inner one (as the Cheeger constant does) leaves the first sampled vertex
inside the aggregate and the process stalls immediately; the inner reading
is still exposed via boundary="inner" so reports can demonstrate that, but
it is not the growth process.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .chain import Chain, ValidationError, VertexSet
from .families import bfs_distances
from .harmonic import harmonic_stationary
from .spectral import inner_boundary, spectral_gap

WALK_CAP_FACTOR = 1e3
MIN_REPLICAS_PER_SIZE = 100


class StepCapError(RuntimeError):
    """A walk-mode step exceeded its cap; the seed is in the message."""


@dataclass(eq=False)
class DlaTrace:
    """Ordered record of one run: additions, radius curve, absorption step."""

    n: int
    start: int
    end: int
    mode: str
    seed: int
    additions: list[tuple[int, int]]  # (t, a_t)
    tau: int
    radius_curve: list[int]  # r(t) for t = 0..tau
    boundary: str = "outer"
    stalled: bool = False
    error: str | None = None
    meta: dict = field(default_factory=dict)

    def validate(self, chain: Chain) -> None:
        """Post-run invariant check for complete (non-stalled) traces."""
        if self.stalled or self.error:
            raise ValidationError("cannot validate a stalled or failed trace")
        agg = {self.start}
        dist = bfs_distances(chain, self.start)
        r = 0
        for t, a in self.additions:
            if a in agg:
                raise ValidationError(f"vertex {a} added twice at t={t}")
            # connectivity under the outer-boundary reading
            if not any(chain.kernel[b, a] > 0 for b in agg):
                raise ValidationError(f"vertex {a} not adjacent to the aggregate")
            agg.add(a)
            r = max(r, int(dist[a]))
            if self.radius_curve[t] != r:
                raise ValidationError(f"radius curve mismatch at t={t}")
        if self.additions[-1][1] != self.end or self.tau != self.additions[-1][0]:
            raise ValidationError("trace does not stop at the end vertex")
        if self.radius_curve[self.tau] != dist[self.end]:
            raise ValidationError("final radius != dist(end, start)")

    def to_json_line(self) -> str:
        data = {
            "n": self.n,
            "start": self.start,
            "end": self.end,
            "mode": self.mode,
            "seed": self.seed,
            "tau": self.tau,
            "additions": [[int(t), int(a)] for t, a in self.additions],
            "radius_curve": [int(r) for r in self.radius_curve],
            "boundary": self.boundary,
            "stalled": self.stalled,
            "error": self.error,
            "meta": self.meta,
        }
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "DlaTrace":
        d = json.loads(line)
        return cls(
            n=d["n"],
            start=d["start"],
            end=d["end"],
            mode=d["mode"],
            seed=d["seed"],
            additions=[(int(t), int(a)) for t, a in d["additions"]],
            tau=d["tau"],
            radius_curve=list(d["radius_curve"]),
            boundary=d.get("boundary", "outer"),
            stalled=d.get("stalled", False),
            error=d.get("error"),
            meta=d.get("meta", {}),
        )


def outer_boundary(chain: Chain, A: VertexSet) -> VertexSet:
    """Non-aggregate states reachable in one step from the aggregate."""
    if len(A) == 0:
        raise ValidationError("A must be nonempty")
    if len(A) == chain.n:
        raise ValidationError("A already covers the whole graph")
    reach = (chain.kernel[A.indices] > 0).any(axis=0)
    return VertexSet.from_iterable(np.flatnonzero(reach & ~A.mask), chain.n)


def _growth_set(chain: Chain, A: VertexSet, boundary: str) -> VertexSet:
    if boundary == "outer":
        return outer_boundary(chain, A)
    if boundary == "inner":
        return inner_boundary(chain, A)
    raise ValidationError(f"unknown boundary {boundary!r}")


def dla_step_exact(
    chain: Chain, A: VertexSet, rng: np.random.Generator, boundary: str = "outer"
) -> int:
    """Sample the next vertex from the solved harmonic measure of the boundary."""
    B = _growth_set(chain, A, boundary)
    h = harmonic_stationary(chain, B)
    return h.sample(rng)


def dla_step_walk(
    chain: Chain,
    A: VertexSet,
    rng: np.random.Generator,
    boundary: str = "outer",
    cap: int | None = None,
) -> int:
    """Run a walk from stationarity until it first enters the boundary."""
    B = _growth_set(chain, A, boundary)
    if cap is None:
        cap = int(WALK_CAP_FACTOR * chain.n / spectral_gap(chain))
    stop = B.mask
    cum_pi = np.cumsum(chain.pi)
    x = min(int(np.searchsorted(cum_pi, rng.random(), side="right")), chain.n - 1)
    if stop[x]:
        return x
    cum = chain.row_cumsums()
    for _ in range(cap):
        x = min(int(np.searchsorted(cum[x], rng.random(), side="right")), chain.n - 1)
        if stop[x]:
            return x
    raise StepCapError(f"walk exceeded {cap} steps before hitting the boundary")


def _walk_to_mask(
    chain: Chain,
    stop: np.ndarray,
    cum: np.ndarray,
    cum_pi: np.ndarray,
    rng: np.random.Generator,
    cap: int,
) -> int:
    """Walk from stationarity until the first state with stop[x] True."""
    x = min(int(np.searchsorted(cum_pi, rng.random(), side="right")), chain.n - 1)
    if stop[x]:
        return x
    for _ in range(cap):
        x = min(int(np.searchsorted(cum[x], rng.random(), side="right")), chain.n - 1)
        if stop[x]:
            return x
    raise StepCapError(f"walk exceeded {cap} steps before hitting the boundary")


def dla_run(
    chain: Chain,
    s: int,
    e: int,
    mode: str = "exact",
    rng: np.random.Generator | int | None = None,
    boundary: str = "outer",
    seed_label: int | None = None,
) -> DlaTrace:
    """Grow from A_0 = {s} until e is absorbed; record the full trace.

    Stalled runs (possible only under the literal inner-boundary reading)
    and step-cap failures return partial traces flagged accordingly rather
    than raising, so harnesses can persist what happened.
    """
    if s == e:
        raise ValidationError("start and end must differ")
    if mode not in ("exact", "walk"):
        raise ValidationError(f"unknown mode {mode!r}")
    if isinstance(rng, (int, np.integer)) or rng is None:
        seed_label = int(rng or 0) if seed_label is None else seed_label
        rng = np.random.default_rng(rng)
    dist = bfs_distances(chain, s)
    mask = np.zeros(chain.n, dtype=bool)
    mask[s] = True
    # incremental outer boundary: non-aggregate neighbours of the aggregate
    bmask = np.zeros(chain.n, dtype=bool)
    bmask[chain.neighbors(s)] = True
    bmask[s] = False
    cum = chain.row_cumsums() if mode == "walk" else None
    cum_pi = np.cumsum(chain.pi) if mode == "walk" else None
    walk_cap = int(WALK_CAP_FACTOR * chain.n / spectral_gap(chain))
    additions: list[tuple[int, int]] = []
    radius = [0]
    stalled = False
    error = None
    t = 0
    while True:
        t += 1
        try:
            if boundary != "outer":
                A = VertexSet(indices=np.flatnonzero(mask).astype(np.int64), n=chain.n)
                if mode == "exact":
                    a = dla_step_exact(chain, A, rng, boundary)
                else:
                    a = dla_step_walk(chain, A, rng, boundary)
            elif mode == "exact":
                B = VertexSet(indices=np.flatnonzero(bmask).astype(np.int64), n=chain.n)
                a = harmonic_stationary(chain, B).sample(rng)
            else:
                a = _walk_to_mask(chain, bmask, cum, cum_pi, rng, walk_cap)
        except StepCapError as exc:
            error = str(exc)
            t -= 1
            break
        if mask[a]:
            stalled = True  # literal inner-boundary reading: no growth possible
            t -= 1
            break
        mask[a] = True
        bmask[a] = False
        nbrs = chain.neighbors(a)
        bmask[nbrs[~mask[nbrs]]] = True
        additions.append((t, int(a)))
        radius.append(max(radius[-1], int(dist[a])))
        if a == e:
            break
    return DlaTrace(
        n=chain.n,
        start=int(s),
        end=int(e),
        mode=mode,
        seed=int(seed_label if seed_label is not None else -1),
        additions=additions,
        tau=t,
        radius_curve=radius,
        boundary=boundary,
        stalled=stalled,
        error=error,
        meta=dict(chain.meta),
    )


def diameter_pair(chain: Chain) -> tuple[int, int, int]:
    """A (s, e, dist) pair realizing the diameter.

    Exact all-pairs BFS for n <= 1024; beyond that a double-sweep heuristic
    checked against 64 seeded BFS probes.  Ties resolve lexicographically.
    """
    if chain.n <= 1024:
        best = (0, 0, -1)
        for v in range(chain.n):
            dist = bfs_distances(chain, v)
            w = int(np.argmax(dist))
            if dist[w] > best[2]:
                best = (v, w, int(dist[w]))
        s, e, d = best
        return (min(s, e), max(s, e), d)
    d0 = bfs_distances(chain, 0)
    a = int(np.argmax(d0))
    da = bfs_distances(chain, a)
    b = int(np.argmax(da))
    best = (min(a, b), max(a, b), int(da[b]))
    rng = np.random.default_rng(0)
    for v in rng.integers(chain.n, size=64):
        dv = bfs_distances(chain, int(v))
        w = int(np.argmax(dv))
        if dv[w] > best[2]:
            best = (min(int(v), w), max(int(v), w), int(dv[w]))
    return best


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares slope of log mean(tau) against log n, with bootstrap CI."""

    sizes: list[int]
    mean_tau: list[float]
    counts: list[int]
    slope: float
    ci_low: float
    ci_high: float
    bootstrap: int


def growth_fit(
    traces, bootstrap: int = 1000, seed: int = 0, min_replicas: int = MIN_REPLICAS_PER_SIZE
) -> GrowthFit:
    """Fit the growth exponent from traces grouped by graph size."""
    groups: dict[int, list[float]] = {}
    for tr in traces:
        if tr.stalled or tr.error:
            continue
        groups.setdefault(tr.n, []).append(float(tr.tau))
    if len(groups) < 3:
        raise ValidationError(f"need >= 3 sizes, got {len(groups)}")
    for n, taus in groups.items():
        if len(taus) < min_replicas:
            raise ValidationError(f"size {n} has {len(taus)} replicas < {min_replicas}")
    sizes = sorted(groups)
    taus = [np.asarray(groups[n]) for n in sizes]
    log_n = np.log(np.asarray(sizes, dtype=float))

    def fit(means: np.ndarray) -> float:
        return float(np.polyfit(log_n, np.log(means), 1)[0])

    slope = fit(np.asarray([t.mean() for t in taus]))
    rng = np.random.default_rng(seed)
    boot = np.empty(bootstrap)
    for i in range(bootstrap):
        means = np.asarray(
            [t[rng.integers(t.size, size=t.size)].mean() for t in taus]
        )
        boot[i] = fit(means)
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return GrowthFit(
        sizes=[int(n) for n in sizes],
        mean_tau=[float(t.mean()) for t in taus],
        counts=[int(t.size) for t in taus],
        slope=slope,
        ci_low=float(lo),
        ci_high=float(hi),
        bootstrap=bootstrap,
    )


def bernstein_tail(eb: float, c: float) -> float:
    """exp(-EB * C * log(C/e)), the Bernoulli-sum upper-tail bound."""
    if c <= 1:
        raise ValidationError("C must exceed 1")
    if eb <= 0:
        raise ValidationError("EB must be positive")
    return float(math.exp(-eb * c * (math.log(c) - 1.0)))


def bernstein_mc_check(
    means, c: float, draws: int = 1_000_000, seed: int = 0, chunk: int = 200_000
) -> dict:
    """Monte-Carlo estimate of Pr[B >= C E B] against the tail bound.

    B is the sum of independent Bernoulli(p_i); the estimate may not exceed
    the bound by more than 3 standard errors of the estimate.
    """
    p = np.asarray(means, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValidationError("Bernoulli means must lie in [0,1]")
    eb = float(p.sum())
    bound = bernstein_tail(eb, c)
    rng = np.random.default_rng(seed)
    threshold = c * eb
    hits = 0
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        counts = np.zeros(m, dtype=np.int64)
        for pi in p:
            counts += rng.random(m) < pi
        hits += int((counts >= threshold).sum())
        done += m
    p_hat = hits / draws
    se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / draws)
    return {
        "eb": eb,
        "c": float(c),
        "bound": bound,
        "mc_estimate": p_hat,
        "se": se,
        "pass": p_hat <= bound + 3 * se,
    }
