"""Semidefinite relaxation of the binary selection problem, with hyperplane rounding.

The lifted problem is ``min <A, M>`` subject to ``diag(M) = 1``,
``<B, M> = 2s - n`` and ``M >= 0``. It is attacked with a low-rank factor
``M = U U'`` (unit rows) and a quadratic penalty on the cardinality
constraint; this is a local heuristic, not a certified SDP solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DataError
from .solvers import IqpProblem, IqpSolution, tuple_objective


@dataclass
class SdrProblem:
    A: np.ndarray
    B: np.ndarray
    s: int
    n: int
    K: np.ndarray
    c: np.ndarray
    constant: float = 0.0

    @property
    def rhs(self) -> float:
        return 2.0 * self.s - self.n

    def lifted_objective(self, M) -> float:
        return float(np.sum(M * self.A))

    def iqp(self) -> IqpProblem:
        return IqpProblem(self.K, self.c, self.s, binary=True)


@dataclass
class SdrFactor:
    U: np.ndarray
    converged: bool
    violation: float
    iterations: int
    penalty: float
    # Penalised objective of every accepted iterate and the penalty stage it
    # belongs to; within a stage the sequence is non-increasing.
    history: np.ndarray = field(default=None, repr=False)
    stages: np.ndarray = field(default=None, repr=False)


@dataclass
class SdrSolution:
    U: np.ndarray
    v: np.ndarray
    objective: float
    draws: int
    best_draw_index: int
    draw_objectives: np.ndarray = field(default=None, repr=False)


def sdr_assemble(K, c, s: int) -> SdrProblem:
    """Lift ``min 0.5 v'Kv + c'v, sum(v) = s, v binary`` to the SDP cost/constraint pair.

    With ``vt = 2v - 1`` and ``M = [1; vt][1; vt]'`` the cost matrix built
    from ``Q = K / 2`` gives ``<A, M> = 4 (0.5 v'Kv + c'v)`` exactly, so
    ``constant`` is zero and rounded objectives sit on the IQP scale.
    """
    K = np.asarray(K, dtype=float)
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    if K.shape != (n, n):
        raise DataError(f"K shape {K.shape} does not match c length {n}")
    if not 1 <= s <= n:
        raise ConfigurationError(f"cardinality s must satisfy 1 <= s <= n, got s={s}, n={n}")
    Q = 0.5 * K
    border = Q.sum(axis=1) + c
    A = np.empty((n + 1, n + 1))
    A[0, 0] = Q.sum() + 2.0 * c.sum()
    A[0, 1:] = border
    A[1:, 0] = border
    A[1:, 1:] = Q
    B = np.zeros((n + 1, n + 1))
    B[0, 1:] = 0.5
    B[1:, 0] = 0.5
    return SdrProblem(A=A, B=B, s=int(s), n=n, K=K, c=c, constant=0.0)


def _normalise_rows(U):
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return U / norms


def sdr_solve_lowrank(
    problem: SdrProblem,
    rank: int | None = None,
    max_iter: int = 3000,
    tol: float = 1e-6,
    seed: int = 0,
    stage_length: int = 100,
) -> SdrFactor:
    """Projected gradient on unit-row factors with a doubling quadratic penalty.

    The penalty weight doubles every ``stage_length`` iterations while the
    cardinality constraint is violated by more than ``tol``.
    """
    N = problem.n + 1
    r = min(N, 25) if rank is None else int(rank)
    if r < 2:
        raise ConfigurationError("SDR factor rank must be at least 2")
    A, rhs = problem.A, problem.rhs
    scale = max(float(np.abs(A).max()), 1.0)
    rng = np.random.default_rng(seed)
    U = _normalise_rows(rng.standard_normal((N, r)))

    def parts(U):
        viol = float(U[0] @ U[1:].sum(axis=0)) - rhs
        return float(np.sum(U * (A @ U))), viol

    rho = scale
    obj, viol = parts(U)
    value = obj + 0.5 * rho * viol * viol
    step = 1.0 / (4.0 * scale * N)
    history, stages = [value], [0]
    stage = 0
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        BU = np.empty_like(U)
        BU[0] = 0.5 * U[1:].sum(axis=0)
        BU[1:] = 0.5 * U[0]
        grad = 2.0 * (A @ U) + 2.0 * rho * viol * BU
        # Tangent component only; radial parts are undone by normalisation.
        grad -= np.sum(grad * U, axis=1, keepdims=True) * U
        gnorm = float(np.linalg.norm(grad))
        accepted = False
        while step > 1e-16:
            cand = _normalise_rows(U - step * grad)
            c_obj, c_viol = parts(cand)
            c_value = c_obj + 0.5 * rho * c_viol * c_viol
            if c_value <= value - 1e-4 * step * gnorm * gnorm:
                U, obj, viol, value = cand, c_obj, c_viol, c_value
                accepted = True
                step *= 1.5
                break
            step *= 0.5
        if accepted:
            history.append(value)
            stages.append(stage)
        stalled = not accepted or gnorm <= 1e-9 * scale
        if abs(viol) <= tol and stalled:
            converged = True
            break
        if it % stage_length == 0 or stalled:
            if abs(viol) > tol:
                rho *= 2.0
                stage += 1
                value = obj + 0.5 * rho * viol * viol
                step = max(step, 1.0 / (4.0 * scale * N))
            elif stalled:
                converged = True
                break
    if not converged and abs(viol) <= tol:
        converged = True
    return SdrFactor(
        U=U, converged=converged, violation=abs(viol), iterations=it, penalty=rho,
        history=np.asarray(history), stages=np.asarray(stages),
    )


def sdr_round(U, problem: SdrProblem, draws: int = 50, seed: int = 0, evaluator=None) -> SdrSolution:
    """Best-of-``draws`` random-hyperplane rounding to exactly ``s`` selections.

    Each draw scores candidates by their projection on a random direction
    (sign-corrected by the homogenising row) and keeps the ``s`` largest; this
    is the hyperplane translated until ``s`` points are cut off.
    """
    if draws < 1:
        raise ConfigurationError("need at least one rounding draw")
    U = np.asarray(U, dtype=float)
    n, s = problem.n, problem.s
    if evaluator is None:
        iqp = problem.iqp()
        evaluator = lambda idx: tuple_objective(iqp, idx)  # noqa: E731
    rng = np.random.default_rng(seed)
    order_tiebreak = np.arange(n)
    best_obj, best_v, best_draw = math.inf, None, -1
    objs = np.empty(draws)
    for k in range(draws):
        g = rng.standard_normal(U.shape[1])
        g /= np.linalg.norm(g)
        sign = 1.0 if U[0] @ g >= 0 else -1.0
        scores = (U[1:] @ g) * sign
        chosen = np.sort(np.lexsort((order_tiebreak, -scores))[:s])
        obj = float(evaluator(chosen))
        objs[k] = obj
        if obj < best_obj:
            best_obj, best_draw = obj, k
            best_v = np.zeros(n, dtype=int)
            best_v[chosen] = 1
    return SdrSolution(U=U, v=best_v, objective=best_obj, draws=draws,
                       best_draw_index=best_draw, draw_objectives=objs)


def solve_sdr(iqp: IqpProblem, rank=None, draws=50, tol=1e-6, max_iter=3000, seed=0) -> IqpSolution:
    """Heuristic binary solution of an IQP via relaxation and rounding."""
    problem = sdr_assemble(iqp.K, iqp.c, iqp.s)
    factor = sdr_solve_lowrank(problem, rank=rank, max_iter=max_iter, tol=tol, seed=seed)
    rounded = sdr_round(factor.U, problem, draws=draws, seed=seed)
    return IqpSolution(v=rounded.v, objective=rounded.objective,
                       nodes_explored=factor.iterations, proof="heuristic")
