"""Exact harmonic measures, path-reversal identities, and measure bounds.

h_{y,S} is the distribution of the first state of S visited by a walk from
y; h_S is its average over a stationary start.  Everything is computed by
dense absorbing solves.  The check_* and bound_* functions return plain
dicts shaped for the report layer: {"lhs", "rhs", "pass", ...}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import Chain, MeasureOnSet, NumericalError, ValidationError, VertexSet
from .hitting import expected_hitting, uniform_transience
from .spectral import boundary_ratio, cheeger, inner_boundary, spectral_gap

IDENTITY_TOL = 1e-8
MEASURE_TOL = 1e-10
HALF_TOL = 1e-9  # inclusive comparisons against the 1/2 mass threshold
BETA_EXACT_MAX_N = 14


@dataclass(eq=False)
class HarmonicMeasure(MeasureOnSet):
    """A harmonic measure on S, from a single state or the stationary start."""

    start: int | str = "stationary"

    def mass(self, A: VertexSet | np.ndarray) -> float:
        """Total weight the measure puts on A (indices outside S count 0)."""
        idx = A.indices if isinstance(A, VertexSet) else np.asarray(A, dtype=np.int64)
        sel = np.isin(self.support.indices, idx)
        return float(self.weights[sel].sum())


@dataclass(frozen=True)
class BetaResult:
    """beta_S minimized over admissible S; greedy mode is an upper bound."""

    beta: float
    witness_S: VertexSet
    witness_A: VertexSet
    mode: str


def _absorbing_parts(chain: Chain, S: VertexSet):
    off = S.complement().indices
    A = np.eye(off.size) - chain.kernel[np.ix_(off, off)]
    R = chain.kernel[np.ix_(off, S.indices)]
    return off, A, R


def _residual_or_raise(A, x, b) -> None:
    scale = max(1.0, float(np.abs(x).max(initial=0.0)))
    res = float(np.abs(A @ x - b).max(initial=0.0)) / scale
    if res > 1e-9:
        raise NumericalError(f"absorbing solve residual {res:.3e}")


def harmonic_from(chain: Chain, S: VertexSet, y: int) -> HarmonicMeasure:
    """h_{y,S}: point mass for y in S, else one adjoint absorbing solve."""
    if len(S) == 0:
        raise ValidationError("S must be nonempty")
    if y in S:
        w = (S.indices == y).astype(float)
        return HarmonicMeasure(support=S, weights=w, start=int(y))
    off, A, R = _absorbing_parts(chain, S)
    e = (off == y).astype(float)
    z = scipy.linalg.solve(A.T, e)
    _residual_or_raise(A.T, z, e)
    return HarmonicMeasure(support=S, weights=z @ R, start=int(y))


def harmonic_matrix(chain: Chain, S: VertexSet) -> np.ndarray:
    """All rows h_{y,S} stacked into an (n, |S|) matrix (one factorization)."""
    H = np.zeros((chain.n, len(S)))
    H[S.indices, np.arange(len(S))] = 1.0
    off, A, R = _absorbing_parts(chain, S)
    if off.size:
        X = scipy.linalg.solve(A, R)
        _residual_or_raise(A, X, R)
        H[off] = X
    return H


def harmonic_stationary(chain: Chain, S: VertexSet) -> HarmonicMeasure:
    """h_S = sum_y pi(y) h_{y,S}, via the adjoint system in one solve."""
    if len(S) == 0:
        raise ValidationError("S must be nonempty")
    off, A, R = _absorbing_parts(chain, S)
    w = chain.pi[S.indices].copy()
    if off.size:
        z = scipy.linalg.solve(A.T, chain.pi[off])
        _residual_or_raise(A.T, z, chain.pi[off])
        w = w + z @ R
    return HarmonicMeasure(support=S, weights=w, start="stationary")


def _absorb_at(chain: Chain, S: VertexSet, y: int) -> np.ndarray:
    """q(z) = Pr_z[T_y < T_S] for y outside S, solving afresh at S u {y}."""
    off = np.setdiff1d(S.complement().indices, [y])
    q = np.zeros(chain.n)
    q[y] = 1.0
    if off.size:
        A = np.eye(off.size) - chain.kernel[np.ix_(off, off)]
        b = chain.kernel[off, y]
        sol = scipy.linalg.solve(A, b)
        _residual_or_raise(A, sol, b)
        q[off] = sol
    return q


def check_reverse_path(chain: Chain, S: VertexSet) -> dict:
    """Path-reversal identity pi(y) h_{y,S}(x) * Pr_y[T_S < T_y^+] = pi(x) Pr_x[T_y < T_S^+].

    The left side comes from the harmonic matrix (absorbed at S); the right
    side re-solves an absorbing system at S u {y} for every y, so the two
    routes share no factorization.  Returns the max absolute residual.
    """
    if len(S) == 0 or len(S) == chain.n:
        raise ValidationError("S must be a nonempty proper subset")
    H = harmonic_matrix(chain, S)
    pi = chain.pi
    worst, arg = 0.0, (int(S.indices[0]), int(S.indices[0]))
    # columns y in S are the degenerate case: both sides pi(x) 1{x=y}
    for j, y in enumerate(S.indices):
        lhs = pi[y] * H[y]
        rhs = np.where(S.indices == y, pi[S.indices], 0.0)
        col = np.abs(lhs - rhs)
        m = int(np.argmax(col))
        if col[m] > worst:
            worst, arg = float(col[m]), (int(S.indices[m]), int(y))
    for y in S.complement().indices:
        q = _absorb_at(chain, S, int(y))
        num = chain.kernel[S.indices] @ q
        den = float(chain.kernel[y] @ (1.0 - q))
        lhs = pi[y] * H[y]
        rhs = pi[S.indices] * num / den
        col = np.abs(lhs - rhs)
        m = int(np.argmax(col))
        if col[m] > worst:
            worst, arg = float(col[m]), (int(S.indices[m]), int(y))
    return {
        "max_residual": worst,
        "worst_pair": arg,
        "tolerance": IDENTITY_TOL,
        "pass": worst <= IDENTITY_TOL,
    }


def _distinct_before_return(chain: Chain, S: VertexSet, x: int, rng, cap: int) -> int | None:
    """|X[0, T_S^+ - 1]| for one sampled walk from x, or None if capped."""
    visited = {int(x)}
    cum = chain.row_cumsums()
    stop = S.mask
    state = int(x)
    for _ in range(cap):
        u = rng.random()
        state = min(int(np.searchsorted(cum[state], u, side="right")), chain.n - 1)
        if stop[state]:
            return len(visited)
        visited.add(state)
    return None


def check_sum_path_reversal(
    chain: Chain,
    S: VertexSet,
    x: int,
    rng: np.random.Generator | None = None,
    mc_walks: int = 0,
) -> dict:
    """sum_y Pr_x[T_y < T_S^+] <= E_x[T_S^+], with an optional MC cross-check.

    The left side counts expected distinct states visited before the return
    to S, which the Monte Carlo estimate reproduces within a 4-sigma band.
    """
    if x not in S:
        raise ValidationError("x must lie in S")
    lhs = 1.0  # the y = x term; other y in S contribute 0
    for y in S.complement().indices:
        q = _absorb_at(chain, S, int(y))
        lhs += float(chain.kernel[x] @ q)
    rhs = float(expected_hitting(chain, S).t_return[x])
    out = {"lhs": lhs, "rhs": rhs, "pass": lhs <= rhs + IDENTITY_TOL, "x": int(x)}
    if mc_walks > 0:
        if rng is None:
            raise ValidationError("Monte Carlo cross-check needs an rng")
        cap = max(1000, int(50 * rhs))
        for attempt in range(2):
            counts = []
            capped = False
            for _ in range(mc_walks):
                c = _distinct_before_return(chain, S, x, rng, cap)
                if c is None:
                    capped = True
                    break
                counts.append(c)
            if not capped:
                break
            cap *= 10  # enlarge once, then give up
        else:
            raise NumericalError(f"walks still truncated at cap {cap}")
        counts = np.asarray(counts, dtype=float)
        mc_mean = float(counts.mean())
        mc_sigma = float(counts.std(ddof=1) / np.sqrt(len(counts)))
        out["mc_mean"] = mc_mean
        out["mc_sigma"] = mc_sigma
        out["pass"] = out["pass"] and abs(mc_mean - lhs) <= 4.0 * mc_sigma
    return out


def bound_har(chain: Chain, S: VertexSet, u: float | None = None) -> dict:
    """h_S(x) <= pi(x) E_x[T_S^+] / u for every x in S; reports tightness."""
    if u is None:
        u = uniform_transience(chain, "full").u
    h = harmonic_stationary(chain, S).weights
    t_ret = expected_hitting(chain, S).t_return[S.indices]
    rhs = chain.pi[S.indices] * t_ret / u
    ratio = h / rhs
    return {
        "u": float(u),
        "max_ratio": float(ratio.max()),
        "violations": int((h > rhs + IDENTITY_TOL).sum()),
        "pass": bool(np.all(h <= rhs + IDENTITY_TOL)),
    }


def bound_main(chain: Chain, S: VertexSet, u: float | None = None) -> dict:
    """h_S(x) <= 3 pi(x) (log(2e/pi_min) v 1/pi(S)) / (u gap) for x in S.

    The constant 3 is pinned by the proof chain through the mixing-time
    bound on E_x[T_S^+]; the empirical constant is recorded so tightness can
    be tracked across the corpus.
    """
    if u is None:
        u = uniform_transience(chain, "full").u
    gap = spectral_gap(chain)
    if gap <= 0:
        raise ValidationError("needs a positive spectral gap")
    h = harmonic_stationary(chain, S).weights
    ps = float(chain.pi[S.indices].sum())
    budget = max(np.log(2.0 * np.e / chain.pi_min), 1.0 / ps)
    rhs = 3.0 * chain.pi[S.indices] * budget / (u * gap)
    empirical = float((h * u * gap / (chain.pi[S.indices] * budget)).max())
    return {
        "u": float(u),
        "gap": gap,
        "budget": float(budget),
        "constant": 3.0,
        "empirical_constant": empirical,
        "violations": int((h > rhs + IDENTITY_TOL).sum()),
        "pass": bool(np.all(h <= rhs + IDENTITY_TOL)),
    }


def bound_no_makarov(chain: Chain, S: VertexSet, A: VertexSet) -> dict:
    """Proof-form bound on h_S(A) for A inside S with pi(A) < pi(S \\ A).

    h_S(A) <= (2/gap)(pi(A)/pi(B)) log(pi(B)/pi(A)) + pi(A) + pi(A)/pi(B),
    B = S minus A.  Degenerate mass splits are skipped with a reason; an
    empty A passes trivially.  Also reports the packaged-form constant
    h_S(A) * gap / (eps log(1/eps)) with eps = pi(A)/pi(S).
    """
    if not np.all(S.mask[A.indices]):
        raise ValidationError("A must be a subset of S")
    if len(A) == 0:
        return {"lhs": 0.0, "rhs": 0.0, "eps": 0.0, "pass": True, "skipped": False, "reason": None}
    if len(A) == len(S):
        return {"pass": True, "skipped": True, "reason": "A = S leaves no B"}
    pa = float(chain.pi[A.indices].sum())
    b_idx = np.setdiff1d(S.indices, A.indices)
    pb = float(chain.pi[b_idx].sum())
    if pa >= pb:
        return {"pass": True, "skipped": True, "reason": f"pi(A)={pa:.4g} >= pi(B)={pb:.4g}"}
    gap = spectral_gap(chain)
    hA = harmonic_stationary(chain, S).mass(A)
    rhs = (2.0 / gap) * (pa / pb) * np.log(pb / pa) + pa + pa / pb
    eps = pa / float(chain.pi[S.indices].sum())
    packaged = hA * gap / (eps * np.log(1.0 / eps)) if 0 < eps < 1 else float("nan")
    return {
        "lhs": float(hA),
        "rhs": float(rhs),
        "eps": float(eps),
        "packaged_constant": float(packaged),
        "pass": bool(hA <= rhs + IDENTITY_TOL),
        "skipped": False,
        "reason": None,
    }


def _subset_sums(values: np.ndarray) -> np.ndarray:
    """Sums of values over all bitmask subsets, index = mask."""
    m = values.size
    bits = ((np.arange(1 << m)[:, None] >> np.arange(m)[None, :]) & 1).astype(float)
    return bits @ values


def _greedy_half_prefix(h: np.ndarray, pi_vals: np.ndarray) -> np.ndarray:
    """Indices (into S) of the shortest h/pi-greedy prefix with h-mass >= 1/2."""
    order = np.lexsort((np.arange(h.size), -h / pi_vals))
    cum = np.cumsum(h[order])
    k = int(np.searchsorted(cum, 0.5 - HALF_TOL)) + 1
    return np.sort(order[:k])


def beta(
    chain: Chain,
    mode: str = "exact",
    sets: list[VertexSet] | None = None,
    seed: int = 0,
    num_sets: int = 32,
) -> BetaResult:
    """beta_S = min{pi(A)/pi(S) : A in S, h_S(A) >= 1/2}, minimized over S.

    Exact mode enumerates every S with pi(S) <= 1/2 and every A inside it
    (n <= 14); greedy mode scans supplied or sampled sets, ranking states by
    h_S(x)/pi(x), and returns an upper bound.
    """
    if mode == "exact":
        if chain.n > BETA_EXACT_MAX_N:
            raise ValidationError(f"exact beta limited to n <= {BETA_EXACT_MAX_N}")
        n = chain.n
        best = (np.inf, None, None)
        for mask in range(1, 1 << n):
            idx = np.flatnonzero([(mask >> i) & 1 for i in range(n)])
            ps = float(chain.pi[idx].sum())
            if ps > 0.5 + HALF_TOL:
                continue
            S = VertexSet(indices=idx.astype(np.int64), n=n)
            h = harmonic_stationary(chain, S).weights
            hsum = _subset_sums(h)
            pisum = _subset_sums(chain.pi[idx])
            feasible = hsum >= 0.5 - HALF_TOL
            pisum = np.where(feasible, pisum, np.inf)
            a_mask = int(np.argmin(pisum))
            val = pisum[a_mask] / ps
            if val < best[0] - 1e-15:
                a_idx = idx[[(a_mask >> j) & 1 == 1 for j in range(len(idx))]]
                best = (float(val), S, VertexSet.from_iterable(a_idx, n))
        if best[1] is None:
            raise ValidationError("no admissible S with pi(S) <= 1/2")
        return BetaResult(beta=best[0], witness_S=best[1], witness_A=best[2], mode="exact")

    if mode == "greedy":
        if sets is None:
            rng = np.random.default_rng(seed)
            sets = []
            for density in (0.125, 0.25, 0.5):
                size = max(1, int(round(density * chain.n)))
                for _ in range(max(1, num_sets // 3)):
                    idx = rng.choice(chain.n, size=size, replace=False)
                    if chain.pi[idx].sum() <= 0.5 + HALF_TOL:
                        sets.append(VertexSet.from_iterable(idx, chain.n))
        best = (np.inf, None, None)
        for S in sets:
            ps = float(chain.pi[S.indices].sum())
            if not 0 < ps <= 0.5 + HALF_TOL:
                continue
            h = harmonic_stationary(chain, S).weights
            prefix = _greedy_half_prefix(h, chain.pi[S.indices])
            val = float(chain.pi[S.indices[prefix]].sum()) / ps
            if val < best[0]:
                best = (val, S, VertexSet.from_iterable(S.indices[prefix], chain.n))
        if best[1] is None:
            raise ValidationError("no admissible S among the supplied sets")
        return BetaResult(beta=best[0], witness_S=best[1], witness_A=best[2], mode="greedy")

    raise ValidationError(f"unknown beta mode {mode!r}")


def check_expander_characterization(chain: Chain) -> dict:
    """beta(G) <= Phi(G), both exhaustive, plus the Folner-set closed form.

    On the Cheeger witness S the harmonic mass of the inner boundary obeys
    h_S(dS) = 1 - (1-Phi) pi(S) exactly; the residual is reported.
    """
    if chain.n > BETA_EXACT_MAX_N:
        raise ValidationError(f"both-exhaustive check limited to n <= {BETA_EXACT_MAX_N}")
    b = beta(chain, "exact")
    c = cheeger(chain, "exact")
    S = c.witness
    h = harmonic_stationary(chain, S)
    ps = float(chain.pi[S.indices].sum())
    closed_form = 1.0 - (1.0 - c.phi) * ps
    folner_residual = abs(h.mass(inner_boundary(chain, S)) - closed_form)
    return {
        "beta": b.beta,
        "phi": c.phi,
        "folner_residual": float(folner_residual),
        "pass": bool(b.beta <= c.phi + 1e-12 and folner_residual <= IDENTITY_TOL),
    }


@dataclass(frozen=True)
class SupportProfile:
    vertices: VertexSet
    pi_mass: float
    greedy_rule: str  # "h" for uniform pi (exact), "h-over-pi" heuristic otherwise


def support_profile(chain: Chain, S: VertexSet, q: float) -> SupportProfile:
    """Smallest greedy subset of S carrying h_S-mass at least q."""
    if not 0 < q <= 1:
        raise ValidationError("q must lie in (0, 1]")
    h = harmonic_stationary(chain, S).weights
    pi_vals = chain.pi[S.indices]
    uniform = float(np.ptp(chain.pi)) <= 1e-12
    key = h if uniform else h / pi_vals
    order = np.lexsort((np.arange(h.size), -key))
    cum = np.cumsum(h[order])
    k = int(np.searchsorted(cum, q - HALF_TOL)) + 1
    k = min(k, h.size)
    chosen = np.sort(order[:k])
    vs = VertexSet.from_iterable(S.indices[chosen], chain.n)
    return SupportProfile(
        vertices=vs,
        pi_mass=float(pi_vals[chosen].sum()),
        greedy_rule="h" if uniform else "h-over-pi",
    )
