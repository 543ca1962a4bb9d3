"""Spectrum, mixing time and the Cheeger constant of a reversible chain.

The Cheeger constant here uses the *inner vertex boundary*: the states of S
accessible in one step from outside S.  This differs from the usual
edge-conductance; the exact mode enumerates all subsets (n <= 20), the sweep
mode orders states by the second eigenvector and reports an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import Chain, ChainError, ValidationError, VertexSet

EXACT_CHEEGER_MAX_N = 20
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class SpectralSummary:
    """Eigenvalues (descending), the nontrivial modulus, gap and t_mix."""

    eigenvalues: np.ndarray
    lam: float
    gap: float
    t_mix: int


@dataclass(frozen=True)
class CheegerResult:
    phi: float
    witness: VertexSet
    mode: str  # "exact" is the minimum; "sweep" only an upper bound


def spectrum(chain: Chain) -> SpectralSummary:
    """Full real spectrum via the symmetrized operator, plus derived scalars."""
    evs = chain.eigenvalues()[::-1].copy()
    if abs(evs[0] - 1.0) > 1e-9:
        raise ChainError(f"leading eigenvalue {evs[0]} != 1; kernel not stochastic?")
    lam = float(np.abs(evs[1:]).max()) if evs.size > 1 else 0.0
    gap = 1.0 - lam
    t_mix = mixing_time(chain) if gap > DEGENERATE_GAP else 0
    return SpectralSummary(eigenvalues=evs, lam=lam, gap=gap, t_mix=t_mix)


def nontrivial_modulus(chain: Chain) -> float:
    evs = chain.eigenvalues()
    return float(max(abs(evs[0]), abs(evs[-2]))) if evs.size > 1 else 0.0


def spectral_gap(chain: Chain) -> float:
    return 1.0 - nontrivial_modulus(chain)


def mixing_time(chain: Chain) -> int:
    """ceil( log(2/pi_min) / gap ), natural log."""
    gap = spectral_gap(chain)
    if gap <= DEGENERATE_GAP:
        raise ChainError(f"degenerate spectral gap {gap:.3e}")
    return int(math.ceil(math.log(2.0 / chain.pi_min) / gap))


def check_mix_sandwich(chain: Chain, t: int) -> dict:
    """Verify (1/2) pi(y) <= P^t(x,y) <= (3/2) pi(y) for all pairs.

    Requires t at least the un-ceiled mixing threshold.  The kernel power is
    computed by repeated squaring; returns the worst ratios observed.
    """
    gap = spectral_gap(chain)
    threshold = math.log(2.0 / chain.pi_min) / gap
    if t < threshold:
        raise ValidationError(f"t={t} below the mixing threshold {threshold:.3f}")
    Pt = np.linalg.matrix_power(chain.kernel, int(t))
    ratios = Pt / chain.pi[None, :]
    lo, hi = float(ratios.min()), float(ratios.max())
    ok = lo >= 0.5 and hi <= 1.5
    worst = None
    if not ok:
        bad = np.unravel_index(
            int(np.argmax(np.maximum(0.5 - ratios, ratios - 1.5))), ratios.shape
        )
        worst = (int(bad[0]), int(bad[1]))
    return {"t": int(t), "min_ratio": lo, "max_ratio": hi, "pass": ok, "worst_pair": worst}


def inner_boundary(chain: Chain, S: VertexSet) -> VertexSet:
    """States of S reachable in one step from outside S."""
    outside = S.complement().indices
    if outside.size == 0:
        return VertexSet.from_iterable([], chain.n)
    reach = (chain.kernel[np.ix_(outside, S.indices)] > 0).any(axis=0)
    return VertexSet.from_iterable(S.indices[reach], chain.n)


def boundary_ratio(chain: Chain, S: VertexSet) -> float:
    """pi(inner boundary of S) / pi(S), recomputed from scratch."""
    ps = float(chain.pi[S.indices].sum())
    if ps <= 0:
        raise ValidationError("S must have positive mass")
    return float(chain.pi[inner_boundary(chain, S).indices].sum()) / ps


def _exact_cheeger(chain: Chain) -> CheegerResult:
    n = chain.n
    masks = np.arange(1, 1 << n, dtype=np.uint64)
    pi = chain.pi
    in_mask = np.zeros(n, dtype=np.uint64)  # in_mask[x] = bitset of {y != x : P(y,x) > 0}
    for x in range(n):
        ys = np.flatnonzero((chain.kernel[:, x] > 0) & (np.arange(n) != x))
        in_mask[x] = np.bitwise_or.reduce(np.left_shift(np.uint64(1), ys.astype(np.uint64)), initial=np.uint64(0))
    set_mass = np.zeros(masks.size)
    boundary_mass = np.zeros(masks.size)
    one = np.uint64(1)
    for x in range(n):
        member = ((masks >> np.uint64(x)) & one).astype(bool)
        touched = (np.bitwise_and(np.bitwise_not(masks), in_mask[x]) != 0)
        set_mass += pi[x] * member
        boundary_mass += pi[x] * (member & touched)
    valid = set_mass <= 0.5 + 1e-12
    ratio = np.where(valid, boundary_mass / set_mass, np.inf)
    best = int(np.argmin(ratio))  # ties: smallest bitmask, deterministic
    witness_bits = [x for x in range(n) if (int(masks[best]) >> x) & 1]
    witness = VertexSet.from_iterable(witness_bits, n)
    phi = boundary_ratio(chain, witness)  # independent recomputation
    if not 0.0 < phi <= 1.0 + 1e-12:
        raise ChainError(f"Cheeger value {phi} outside (0,1]")
    return CheegerResult(phi=min(phi, 1.0), witness=witness, mode="exact")


def _sweep_cheeger(chain: Chain) -> CheegerResult:
    vals, vecs = chain.eigensystem()
    embedding = vecs[:, -2] / np.sqrt(chain.pi)  # second eigenvector, pi-weighted
    order = np.argsort(embedding, kind="stable")
    best_phi, best_set = np.inf, None
    for direction in (order, order[::-1]):
        for j in range(1, chain.n):
            side = direction[:j]
            if chain.pi[side].sum() > 0.5 + 1e-12:
                side = direction[j:]
            if not 0 < chain.pi[side].sum() <= 0.5 + 1e-12:
                continue
            S = VertexSet.from_iterable(side, chain.n)
            phi = boundary_ratio(chain, S)
            if phi < best_phi:
                best_phi, best_set = phi, S
    if best_set is None:
        raise ChainError("sweep found no admissible cut")
    return CheegerResult(phi=float(best_phi), witness=best_set, mode="sweep")


def cheeger(chain: Chain, mode: str = "exact") -> CheegerResult:
    """Minimize pi(inner boundary)/pi(S) over sets with 0 < pi(S) <= 1/2.

    mode="exact" enumerates all 2^n subsets (n <= 20); mode="sweep" scans
    prefix cuts of the second-eigenvector order in both orientations and is
    an upper bound on the true constant.
    """
    if mode == "exact":
        if chain.n > EXACT_CHEEGER_MAX_N:
            raise ValidationError(
                f"exact Cheeger limited to n <= {EXACT_CHEEGER_MAX_N}; use mode='sweep'"
            )
        return _exact_cheeger(chain)
    if mode == "sweep":
        return _sweep_cheeger(chain)
    raise ValidationError(f"unknown Cheeger mode {mode!r}")


def check_cheeger_gap_relation(chain: Chain, result: CheegerResult | None = None) -> dict:
    """Report the ratios gap/phi^2 and phi/gap.

    The relation C^{-1} phi^2 <= gap <= C phi holds for some universal C;
    the harness asserts both ratios stay below a corpus-calibrated envelope
    of 8 on the small-graph corpus (a sanity net, not a theorem test).
    """
    if result is None:
        result = cheeger(chain, "exact")
    gap = spectral_gap(chain)
    phi = result.phi
    r1 = gap / phi**2
    r2 = phi / gap
    return {
        "phi": phi,
        "gap": gap,
        "gap_over_phi_sq": float(r1),
        "phi_over_gap": float(r2),
        "envelope": 8.0,
        "pass": bool(r1 <= 8.0 and r2 <= 8.0),
    }
