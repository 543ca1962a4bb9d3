"""Exact hitting and return expectations, return-time tails, escape and u(P).

All expectations come from dense linear solves against the absorbing part of
the kernel; tails iterate the sub-stochastic operator so they stay exact in
t.  Nothing here is Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import Chain, NumericalError, ValidationError, VertexSet
from .spectral import spectral_gap

SOLVE_RTOL = 1e-9


@dataclass(frozen=True)
class HittingStats:
    """E_x[T_S] and E_x[T_S^+] for every start x, plus the pi-average return."""

    target: VertexSet
    t_hit: np.ndarray
    t_return: np.ndarray
    stationary_return: float


@dataclass(frozen=True)
class EscapeTable:
    """u(P) = min_{x!=y} Pr_x[T_y < T_x^+] with the minimizing pair.

    mode "sampled" evaluates only k pairs, so its value is an upper bound.
    """

    u: float
    argmin: tuple[int, int]
    mode: str
    table: np.ndarray | None = None


def _check_residual(A: np.ndarray, x: np.ndarray, b: np.ndarray) -> None:
    scale = max(1.0, float(np.abs(x).max(initial=0.0)))
    res = float(np.abs(A @ x - b).max(initial=0.0)) / scale
    if res > SOLVE_RTOL:
        raise NumericalError(f"linear solve residual {res:.3e} exceeds {SOLVE_RTOL}")


def expected_hitting(chain: Chain, S: VertexSet) -> HittingStats:
    """Solve (I-Q)h = 1 off S for E_x[T_S]; derive E_x[T_S^+] by one step."""
    if len(S) == 0:
        raise ValidationError("S must be nonempty")
    off = S.complement().indices
    h = np.zeros(chain.n)
    if off.size:
        A = np.eye(off.size) - chain.kernel[np.ix_(off, off)]
        try:
            sol = scipy.linalg.solve(A, np.ones(off.size))
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover - connected chains
            raise NumericalError(f"singular hitting system: {exc}") from exc
        _check_residual(A, sol, np.ones(off.size))
        h[off] = sol
    t_return = 1.0 + chain.kernel @ h
    return HittingStats(
        target=S,
        t_hit=h,
        t_return=t_return,
        stationary_return=float(chain.pi @ t_return),
    )


def return_tail_curve(chain: Chain, S: VertexSet, t_max: int) -> np.ndarray:
    """Exact Pr_pi[T_S^+ > t] for t = 0..t_max.

    Iterates v <- vQ with Q(x,y) = P(x,y) 1{y not in S}; by stationarity
    the t=1 vector is simply pi masked off S.
    """
    if t_max < 0:
        raise ValidationError("t_max must be >= 0")
    out = np.empty(t_max + 1)
    out[0] = 1.0  # T_S^+ >= 1 always
    off_mask = ~S.mask
    v = chain.pi * off_mask
    for t in range(1, t_max + 1):
        out[t] = v.sum()
        if t < t_max:
            v = (v @ chain.kernel) * off_mask
    return out


def expander_mixing_bound(chain: Chain, S: VertexSet, t) -> np.ndarray:
    """The return-tail bound (1 - gap * pi(S))^(t/2)."""
    gap = spectral_gap(chain)
    ps = float(chain.pi[S.indices].sum())
    base = max(1.0 - gap * ps, 0.0)
    return np.power(base, np.asarray(t, dtype=float) / 2.0)


def return_tail(chain: Chain, S: VertexSet, t: int) -> tuple[float, float]:
    """(exact Pr_pi[T_S^+ > t], bound value) at a single t."""
    exact = return_tail_curve(chain, S, t)[t]
    bound = float(expander_mixing_bound(chain, S, t))
    return float(exact), bound


def _absorbed_at_target(chain: Chain, absorbing: np.ndarray, target: int) -> np.ndarray:
    """q(z) = Pr_z[hit `target` first among `absorbing`], for every state z."""
    absorbing_mask = np.zeros(chain.n, dtype=bool)
    absorbing_mask[absorbing] = True
    off = np.flatnonzero(~absorbing_mask)
    q = np.zeros(chain.n)
    q[target] = 1.0
    if off.size:
        A = np.eye(off.size) - chain.kernel[np.ix_(off, off)]
        b = chain.kernel[off, target]
        sol = scipy.linalg.solve(A, b)
        _check_residual(A, sol, b)
        q[off] = sol
    return q


def escape_prob(chain: Chain, x: int, y: int) -> float:
    """Pr_x[T_y < T_x^+] via the absorbing system with q(y)=1, q(x)=0."""
    if x == y:
        raise ValidationError("escape probability needs x != y")
    q = _absorbed_at_target(chain, np.array([x, y]), y)
    return float(chain.kernel[x] @ q)


def uniform_transience(
    chain: Chain,
    mode: str = "full",
    k: int = 0,
    seed: int = 0,
    keep_table: bool = False,
) -> EscapeTable:
    """u(P) over all ordered pairs (full) or a seeded sample of pairs.

    Full mode runs one hitting solve per target state and converts commute
    sums through Pr_x[T_y < T_x^+] = 1 / (pi(x) (E_x[T_y] + E_y[T_x])); the
    independent per-pair absorbing route stays available in escape_prob for
    cross-checks.  Sampled mode evaluates k random pairs directly and its
    minimum is only an upper bound on u.
    """
    if mode == "full":
        if chain.n > 1024:
            raise ValidationError("full mode limited to n <= 1024; use sampled")
        hit = np.empty((chain.n, chain.n))  # hit[x, y] = E_x[T_y]
        for y in range(chain.n):
            hit[:, y] = expected_hitting(chain, VertexSet.from_iterable([y], chain.n)).t_hit
        commute = hit + hit.T
        with np.errstate(divide="ignore"):
            table = 1.0 / (chain.pi[:, None] * commute)
        np.fill_diagonal(table, np.inf)
        flat = int(np.argmin(table))
        x, y = divmod(flat, chain.n)
        return EscapeTable(
            u=float(table[x, y]),
            argmin=(int(x), int(y)),
            mode="full",
            table=table if keep_table else None,
        )
    if mode == "sampled":
        if k < 1:
            raise ValidationError("sampled mode needs k >= 1")
        rng = np.random.default_rng(seed)
        best, arg = np.inf, (-1, -1)
        for _ in range(k):
            x = int(rng.integers(chain.n))
            y = int(rng.integers(chain.n - 1))
            y = y + 1 if y >= x else y
            p = escape_prob(chain, x, y)
            if p < best:
                best, arg = p, (x, y)
        return EscapeTable(u=float(best), argmin=arg, mode="sampled")
    raise ValidationError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class CommuteCheck:
    lhs: float
    rhs: float
    residual: float


def check_commute_identity(chain: Chain, x: int, y: int) -> CommuteCheck:
    """Pr_x[T_y < T_x^+] against 1/(pi(x)(E_x[T_y^+] + E_y[T_x^+])).

    The two sides come from independent linear systems: a per-pair absorbing
    solve on the left, two single-target hitting solves on the right.
    """
    if x == y:
        raise ValidationError("needs x != y")
    lhs = escape_prob(chain, x, y)
    ex_ty = expected_hitting(chain, VertexSet.from_iterable([y], chain.n)).t_hit[x]
    ey_tx = expected_hitting(chain, VertexSet.from_iterable([x], chain.n)).t_hit[y]
    rhs = 1.0 / (chain.pi[x] * (ex_ty + ey_tx))
    return CommuteCheck(lhs=float(lhs), rhs=float(rhs), residual=float(abs(lhs - rhs)))
