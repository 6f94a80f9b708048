"""Exact solvers for the cardinality-constrained integer quadratic programme

    minimise 0.5 v'Kv + c'v   s.t.  sum(v) = s,  v in N_0^n  (or {0,1}^n),

and a Frank-Wolfe solver for the simplex-weighted quadratic programme.

Every solver scores a multiset through the same incremental recursion
(:func:`_increments`), so objective values, and therefore tie-breaks, agree
bitwise between solvers. Ties go to the lexicographically smallest sorted
index tuple, e.g. ``(0, 1)`` before ``(0, 2)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DataError, SizeGuardError

EXHAUSTIVE_LIMIT = 2_000_000
AUTO_EXHAUSTIVE_LIMIT = 100_000
# Row-block size for vectorised pair evaluation.
_PAIR_BLOCK = 512


@dataclass
class IqpProblem:
    K: np.ndarray
    c: np.ndarray
    s: int
    binary: bool = False

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        c = np.asarray(self.c, dtype=float).ravel()
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] != c.shape[0]:
            raise DataError(f"K must be n x n and c length n; got {K.shape} and {c.shape}")
        if not (np.all(np.isfinite(K)) and np.all(np.isfinite(c))):
            raise DataError("non-finite entries in IQP data")
        if np.max(np.abs(K - K.T), initial=0.0) > 1e-12:
            raise DataError("K must be symmetric")
        self.s = int(self.s)
        if self.s < 1:
            raise ConfigurationError("cardinality s must be at least 1")
        if self.binary and self.s > K.shape[0]:
            raise ConfigurationError(f"binary mode needs s <= n, got s={self.s}, n={K.shape[0]}")
        self.K, self.c = K, c

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def enumeration_count(self) -> int:
        if self.binary:
            return math.comb(self.n, self.s)
        return math.comb(self.n + self.s - 1, self.s)

    def objective(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(0.5 * v @ self.K @ v + self.c @ v)


@dataclass
class IqpSolution:
    v: np.ndarray
    objective: float
    nodes_explored: int
    proof: str = "exact"

    @property
    def indices(self):
        """Selected indices as a sorted multiset, repeats included."""
        return np.repeat(np.arange(self.v.size), self.v)


@dataclass
class SimplexWeightSolution:
    w: np.ndarray
    phi_squared: float
    fw_iterations: int
    duality_gap: float
    history: np.ndarray | None = None


def _increments(problem, prefsum):
    """Objective increase from adding one copy of each candidate to a prefix.

    ``prefsum`` is ``sum_p K[p, :]`` over the prefix, accumulated in order.
    """
    return problem.c + 0.5 * np.diag(problem.K) + prefsum


def tuple_objective(problem: IqpProblem, indices) -> float:
    """Canonical objective of a sorted index multiset (the solvers' scoring)."""
    obj = 0.0
    prefsum = np.zeros(problem.n)
    for j in sorted(int(i) for i in indices):
        obj = obj + _increments(problem, prefsum)[j]
        prefsum = prefsum + problem.K[j]
    return float(obj)


def _to_solution(problem, best_tuple, best_obj, nodes, proof="exact"):
    v = np.bincount(np.asarray(best_tuple, dtype=int), minlength=problem.n).astype(int)
    return IqpSolution(v=v, objective=float(best_obj), nodes_explored=nodes, proof=proof)


class _Search:
    """Depth-first search over sorted index tuples, with optional pruning."""

    def __init__(self, problem, prune, relaxation, time_limit=None):
        self.p = problem
        self.deadline = None if time_limit is None else time.perf_counter() + time_limit
        self.timed_out = False
        self.prune = prune
        self.relaxation = relaxation and prune
        self.best_obj = math.inf
        self.best_tuple = None
        self.nodes = 0
        K = problem.K
        self.kmin = float(K.min())
        self.diag_half = 0.5 * np.diag(K)
        self.lam_min = None
        if self.relaxation and problem.s >= 3:
            self.lam_min = float(np.linalg.eigvalsh(K)[0])

    def offer(self, obj, tup):
        if obj < self.best_obj or (obj == self.best_obj and tup < self.best_tuple):
            self.best_obj = obj
            self.best_tuple = tup

    def _tol(self):
        return 1e-9 * (1.0 + abs(self.best_obj)) if math.isfinite(self.best_obj) else math.inf

    def _prunable(self, bound):
        return self.prune and bound > self.best_obj + self._tol()

    def warm_start(self):
        """Greedy one-at-a-time fill to seed the incumbent."""
        p = self.p
        prefsum = np.zeros(p.n)
        obj = 0.0
        tup = []
        lo = 0
        for _ in range(p.s):
            inc = _increments(p, prefsum)
            start = lo + 1 if (p.binary and tup) else lo
            # Sorted tuples only: later picks may not precede earlier ones.
            j = start + int(np.argmin(inc[start:]))
            if p.binary and p.n - j - 1 < p.s - len(tup) - 1:
                return
            obj = obj + inc[j]
            prefsum = prefsum + p.K[j]
            tup.append(j)
            lo = j
        self.offer(float(obj), tuple(tup))
        self._improve(list(tup))

    def _improve(self, picks, max_passes=20):
        """Best single-swap local search from ``picks`` (multiset mode only)."""
        p = self.p
        if p.binary:
            return
        K, c, dh = p.K, p.c, self.diag_half
        for _ in range(max_passes):
            total = K[picks].sum(axis=0)
            best = (0.0, None, None)
            for pos, q in enumerate(picks):
                # Change from replacing pick q by candidate k, for all k at once.
                rest = total - K[q]
                delta = (c + dh + rest) - (c[q] + dh[q] + rest[q])
                k = int(np.argmin(delta))
                if delta[k] < best[0] - 1e-12:
                    best = (float(delta[k]), pos, k)
            if best[1] is None:
                return
            picks[best[1]] = best[2]
            tup = tuple(sorted(picks))
            self.offer(tuple_objective(p, tup), tup)

    def run(self):
        p = self.p
        if self.prune:
            self.warm_start()
        self._node((), 0.0, np.zeros(p.n), 0, p.s)

    def _free_start(self, prefix, lo):
        return lo + 1 if (self.p.binary and prefix) else lo

    def _relaxation_bound(self, obj, prefsum, start, rem):
        # min 0.5 w'Kw + g'w over w >= 0, sum w = rem, with K shifted to PSD.
        p = self.p
        K = p.K[start:, start:]
        g = (p.c + prefsum)[start:]
        shift = min(self.lam_min, 0.0)
        Q = K - shift * np.eye(K.shape[0]) if shift < 0 else K
        fw = _frank_wolfe(rem * rem * Q, rem * g, max_iter=200, tol=1e-9)
        lower = fw.phi_squared - fw.duality_gap
        return obj + lower + 0.5 * shift * rem * rem

    def _node(self, prefix, obj, prefsum, lo, rem):
        p = self.p
        self.nodes += 1
        if self.deadline is not None and (self.timed_out or time.perf_counter() > self.deadline):
            self.timed_out = True
            return
        start = self._free_start(prefix, lo)
        free = p.n - start
        if free <= 0 or (p.binary and free < rem):
            return
        if rem == 1:
            vals = obj + _increments(p, prefsum)[start:]
            j = int(np.argmin(vals))
            self.offer(float(vals[j]), prefix + (start + j,))
            return
        if rem == 2:
            self._pairs(prefix, obj, prefsum, start)
            return
        if self.relaxation and self._prunable(self._relaxation_bound(obj, prefsum, start, rem)):
            return
        inc = _increments(p, prefsum)
        child_obj = obj + inc[start:]
        order = np.arange(start, p.n)
        if self.prune:
            bounds = child_obj + self._completion_bound(inc, start, rem - 1)
            keep = ~(bounds > self.best_obj + self._tol())
            order, bounds = order[keep], bounds[keep]
            perm = np.argsort(bounds, kind="stable")
            order, bounds = order[perm], bounds[perm]
        else:
            bounds = np.full(order.size, -math.inf)
        for j, b in zip(order.tolist(), bounds.tolist()):
            # Incumbent may have improved since the bounds were computed.
            if self._prunable(b):
                continue
            self._node(prefix + (j,), obj + inc[j], prefsum + p.K[j], j, rem - 1)

    def _completion_bound(self, inc, start, t):
        """Lower bounds on adding ``t`` more picks after choosing each child ``j >= start``.

        Two bounds, the larger wins. (1) Each later pick ``k >= j`` costs at
        least ``inc[k] + K[j, k]``. (2) Later picks grouped in pairs cost at
        least the cheapest pair value ``inc[k] + inc[l] + K[k, l]`` with
        ``j <= k <= l``. Interactions not accounted for are at least ``min(K)``.
        """
        p = self.p
        off = 1 if p.binary else 0
        m = p.n - start
        # row_min[j] = min over later k of inc[k] + K[j, k]
        row_min = np.full(m, np.inf)
        for a in range(0, m, _PAIR_BLOCK):
            rr = np.arange(start + a, min(start + a + _PAIR_BLOCK, p.n))
            first = int(rr[0]) + off
            if first >= p.n:
                continue
            M = inc[None, first:] + p.K[rr][:, first:]
            cols = np.arange(first, p.n)
            M = np.where(cols[None, :] < rr[:, None] + off, np.inf, M)
            row_min[a:a + rr.size] = M.min(axis=1)
        kmin = self.kmin
        single = t * row_min + 0.5 * t * (t - 1) * kmin
        if t < 2:
            return single
        pair_val = inc[start:] + row_min
        suffix = lambda x: np.minimum.accumulate(x[::-1])[::-1]  # noqa: E731
        suf_pair, suf_inc = suffix(pair_val), suffix(inc[start:])
        if off:
            shift = lambda x: np.append(x[1:], np.inf)  # noqa: E731
            suf_pair, suf_inc = shift(suf_pair), shift(suf_inc)
        n_pairs = t // 2
        other = 0.5 * (t + 1) * t - n_pairs
        with np.errstate(invalid="ignore"):
            grouped = n_pairs * suf_pair + (t % 2) * suf_inc + other * kmin
        grouped = np.where(np.isnan(grouped), np.inf, grouped)
        return np.maximum(single, grouped)

    def _pairs(self, prefix, obj, prefsum, start):
        """Exact best completion with two picks, scored via the recursion."""
        p = self.p
        self.nodes += 1
        inc = _increments(p, prefsum)
        base = p.c + 0.5 * np.diag(p.K)
        off = 1 if p.binary else 0
        best_val, best_pair = math.inf, None
        rows_all = np.arange(start, p.n - off)
        if self.prune and rows_all.size:
            # Cheap row filter: second pick costs at least min(inc[k >= j]) + min(K).
            sufmin = np.minimum.accumulate(inc[::-1])[::-1]
            later = sufmin[rows_all + off]
            bound = obj + inc[rows_all] + later + self.kmin
            rows_all = rows_all[~(bound > self.best_obj + self._tol())]
        for a in range(0, rows_all.size, _PAIR_BLOCK):
            rows = rows_all[a:a + _PAIR_BLOCK]
            first = int(rows[0]) + off
            # Same association as the recursion: base + (prefsum + K[j]).
            second = base[None, first:] + (prefsum[None, first:] + p.K[rows][:, first:])
            vals = (obj + inc[rows])[:, None] + second
            cols = np.arange(first, p.n)
            vals = np.where(cols[None, :] < rows[:, None] + off, np.inf, vals)
            flat = int(np.argmin(vals))
            r, col = divmod(flat, vals.shape[1])
            v = float(vals[r, col])
            if v < best_val:
                best_val, best_pair = v, (int(rows[r]), int(first + col))
        if best_pair is not None:
            self.offer(best_val, prefix + best_pair)


def solve_exhaustive(problem: IqpProblem) -> IqpSolution:
    """Global minimiser by complete enumeration (refuses above 2e6 multisets)."""
    count = problem.enumeration_count()
    if count > EXHAUSTIVE_LIMIT:
        raise SizeGuardError(
            f"exhaustive enumeration of {count} candidate selections exceeds {EXHAUSTIVE_LIMIT} "
            f"(n={problem.n}, s={problem.s})",
            count=count,
        )
    search = _Search(problem, prune=False, relaxation=False)
    search.run()
    return _to_solution(problem, search.best_tuple, search.best_obj, search.nodes)


def solve_branch_bound(problem: IqpProblem, prune: bool = True, relaxation: bool = False,
                       time_limit: float | None = None) -> IqpSolution:
    """Exact branch-and-bound over sorted index tuples.

    Nodes are bounded by single-pick and pair-grouped completion bounds. With
    ``relaxation=True`` nodes with three or more remaining picks are also
    bounded by the continuous relaxation over the scaled simplex with ``K``
    shifted by its smallest eigenvalue (valid via the Frank-Wolfe gap); it
    prunes more nodes but costs more wall-clock on typical instances.

    With ``time_limit`` (seconds) the search stops once the budget is spent
    and returns the incumbent labelled ``proof="heuristic"``; the default is
    an exact, unbounded search.
    """
    if time_limit is not None and not time_limit > 0:
        raise ConfigurationError(f"time limit must be positive, got {time_limit!r}")
    search = _Search(problem, prune=prune, relaxation=relaxation, time_limit=time_limit)
    search.run()
    proof = "heuristic" if search.timed_out else "exact"
    return _to_solution(problem, search.best_tuple, search.best_obj, search.nodes, proof)


SOLVERS = ("auto", "exhaustive", "bnb")


def solve(problem: IqpProblem, method: str = "auto", time_limit: float | None = None) -> IqpSolution:
    """Dispatch by name; ``time_limit`` only applies to branch-and-bound."""
    if method == "auto":
        method = "exhaustive" if problem.enumeration_count() <= AUTO_EXHAUSTIVE_LIMIT else "bnb"
    if method == "exhaustive":
        return solve_exhaustive(problem)
    if method == "bnb":
        return solve_branch_bound(problem, time_limit=time_limit)
    raise ConfigurationError(f"unknown solver {method!r}; choose from {SOLVERS}")


def _quad(Q, g, u):
    return float(0.5 * u @ Q @ u + g @ u)


def _correct(Q, g, u, sweeps=50):
    """Fully-corrective step: minimise over the face spanned by the support of ``u``.

    Primal active-set iterations: move towards the affine-hull minimiser,
    stopping at the first coordinate that hits zero and dropping it. Only
    accepted while the objective does not increase.
    """
    cur = _quad(Q, g, u)
    for _ in range(sweeps):
        S = np.flatnonzero(u > 0)
        k = S.size
        if k < 2:
            break
        A = np.empty((k + 1, k + 1))
        A[:k, :k] = Q[np.ix_(S, S)]
        A[:k, k] = 1.0
        A[k, :k] = 1.0
        A[k, k] = 0.0
        rhs = np.concatenate([-g[S], [1.0]])
        z = np.linalg.lstsq(A, rhs, rcond=None)[0][:k]
        d = z - u[S]
        neg = d < 0
        ratio = np.full(k, np.inf)
        ratio[neg] = u[S][neg] / -d[neg]
        j = int(np.argmin(ratio))
        step = min(1.0, float(ratio[j]))
        new = u.copy()
        new[S] = u[S] + step * d
        if step < 1.0:
            new[S[j]] = 0.0
        np.maximum(new, 0.0, out=new)
        new /= new.sum()
        val = _quad(Q, g, new)
        if not val <= cur:
            break
        u, cur = new, val
        if step >= 1.0:
            break
    return u


def _frank_wolfe(Q, g, max_iter=100_000, tol=1e-10, record=False, correct_every=100):
    """Away-step Frank-Wolfe for ``min 0.5 u'Qu + g'u`` on the probability simplex.

    Exact line search along each direction, with a fully-corrective step over
    the current support every ``correct_every`` iterations (0 disables it);
    plain away steps crawl on the near-singular Gram matrices typical of
    smooth kernels. Returns objective in ``phi_squared`` (without constant)
    and the final Frank-Wolfe gap.
    """
    n = g.shape[0]
    u = np.zeros(n)
    i0 = int(np.argmin(0.5 * np.diag(Q) + g))
    u[i0] = 1.0
    Qu = Q[:, i0].copy()
    history = [] if record else None
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        if correct_every and it % correct_every == 0:
            u = _correct(Q, g, u)
            Qu = Q @ u
        elif it % 200 == 0:
            Qu = Q @ u
        grad = Qu + g
        if record:
            history.append(0.5 * u @ Qu + g @ u)
        s = int(np.argmin(grad))
        gu = float(grad @ u)
        gap = gu - float(grad[s])
        if gap <= tol:
            break
        support = np.flatnonzero(u > 0)
        a = int(support[np.argmax(grad[support])])
        uQu = float(u @ Qu)
        if gap >= float(grad[a]) - gu or u[a] >= 1.0:
            slope = float(grad[s]) - gu
            curv = Q[s, s] - 2.0 * Qu[s] + uQu
            gmax = 1.0
            step = gmax if curv <= 0 else min(gmax, -slope / curv)
            u *= 1.0 - step
            u[s] += step
            Qu = (1.0 - step) * Qu + step * Q[:, s]
        else:
            slope = gu - float(grad[a])
            curv = uQu - 2.0 * Qu[a] + Q[a, a]
            gmax = u[a] / (1.0 - u[a])
            step = gmax if curv <= 0 else min(gmax, -slope / curv)
            u *= 1.0 + step
            u[a] -= step
            if step == gmax:
                u[a] = 0.0
            Qu = (1.0 + step) * Qu - step * Q[:, a]
        np.maximum(u, 0.0, out=u)
    u /= u.sum()
    Qu = Q @ u
    value = float(0.5 * u @ Qu + g @ u)
    grad = Qu + g
    gap = max(float(grad @ u - grad.min()), 0.0)
    if record:
        history.append(value)
    return SimplexWeightSolution(
        w=u, phi_squared=value, fw_iterations=it, duality_gap=gap,
        history=None if history is None else np.asarray(history),
    )


def solve_simplex_qp(K, h, c2: float = 0.0, max_iter: int = 100_000, tol: float = 1e-10) -> SimplexWeightSolution:
    """Minimise ``w'Kw - 2 w'h + c2`` over the probability simplex.

    This is the smallest squared discrepancy reachable by reweighting the
    candidates. The returned ``duality_gap`` bounds the distance to the optimum.
    """
    K = np.asarray(K, dtype=float)
    h = np.asarray(h, dtype=float).ravel()
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(h)) and math.isfinite(c2)):
        raise DataError("non-finite entries in simplex QP data")
    if K.shape != (h.size, h.size):
        raise DataError(f"K shape {K.shape} does not match h length {h.size}")
    sol = _frank_wolfe(2.0 * K, -2.0 * h, max_iter=max_iter, tol=tol, record=True)
    w = sol.w
    phi2 = float(w @ K @ w - 2.0 * w @ h + c2)
    if -1e-10 <= phi2 < 0:
        phi2 = 0.0
    sol.phi_squared = phi2
    sol.history = sol.history + c2
    return sol
