"""Greedy selection of representative points from a candidate set.

All algorithms minimise the squared discrepancy of the running uniform
measure. Per iteration ``i`` (1-based) with ``s`` picks, the subset problem is
the IQP ``0.5 v'Kv + c'v`` with ``c_j = r_j - i s h(x_j)``, where ``r_j`` is
the summed kernel between candidate ``j`` and everything chosen so far.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .candidates import CandidateSet
from .discrepancy import GRAM_THRESHOLD, GramOperator, candidate_scores, state_init, state_update
from .exceptions import ConfigurationError, DataError
from .solvers import IqpProblem, solve
from .target import TargetModel

ALGORITHMS = ("myopic", "nonmyopic", "minibatch", "oneshot", "sdr")
BATCH_STRATEGIES = ("uniform_without_replacement", "sequential_blocks")


@dataclass
class SelectionConfig:
    m: int = 1
    s: int = 1
    b: int = 0
    batch_strategy: str = "uniform_without_replacement"
    seed: int = 0
    solver: str = "auto"
    binary: bool = False
    gram_threshold: int = GRAM_THRESHOLD
    rank: int | None = None
    draws: int = 50
    sdr_tol: float = 1e-6
    sdr_max_iter: int = 3000
    time_limit: float | None = None

    def validate(self, n: int):
        if self.m < 1:
            raise ConfigurationError("number of iterations m must be at least 1")
        if self.s < 1:
            raise ConfigurationError("points per iteration s must be at least 1")
        if self.batch_strategy not in BATCH_STRATEGIES:
            raise ConfigurationError(f"batch strategy must be one of {BATCH_STRATEGIES}")
        if self.b:
            if self.b > n:
                raise ConfigurationError(f"batch size b={self.b} exceeds candidate count n={n}")
            if self.b < self.s:
                raise ConfigurationError(f"batch size b={self.b} is smaller than s={self.s}")
        pool = self.b or n
        if self.binary and self.s > pool:
            raise ConfigurationError(f"binary selection of s={self.s} from {pool} candidates is infeasible")


@dataclass
class SelectionResult:
    """Selected indices ``pi`` (m x s, 0-based, global) and per-iteration trace."""

    pi: np.ndarray
    trace: np.ndarray
    timings_ms: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def indices(self):
        return self.pi.ravel()

    @property
    def final_mmd_squared(self) -> float:
        return float(self.trace[-1])

    @property
    def cumulative_ms(self):
        return np.cumsum(self.timings_ms)


def batch_schedule(n: int, b: int, m: int, strategy: str = "uniform_without_replacement", seed: int = 0):
    """Candidate indices considered at each iteration, each sorted ascending.

    ``uniform_without_replacement`` draws an independent subset per iteration;
    ``sequential_blocks`` cycles through contiguous blocks (the last block is
    aligned to the end so every block has exactly ``b`` entries).
    """
    if not 1 <= b <= n:
        raise ConfigurationError(f"batch size must satisfy 1 <= b <= n, got b={b}, n={n}")
    if strategy == "uniform_without_replacement":
        rng = np.random.default_rng(seed)
        return [np.sort(rng.choice(n, size=b, replace=False)) for _ in range(m)]
    if strategy == "sequential_blocks":
        n_blocks = -(-n // b)
        starts = [min(k * b, n - b) for k in range(n_blocks)]
        return [np.arange(starts[i % n_blocks], starts[i % n_blocks] + b) for i in range(m)]
    raise ConfigurationError(f"unknown batch strategy {strategy!r}")


class _Run:
    """Shared bookkeeping: Gram access, running state, trace and timings."""

    def __init__(self, candidates, target, kernel, config):
        if not isinstance(candidates, CandidateSet):
            candidates = CandidateSet(candidates)
        if candidates.dim != target.dim:
            raise DataError(f"candidate dimension {candidates.dim} does not match target dimension {target.dim}")
        config.validate(candidates.n)
        self.candidates = candidates
        self.config = config
        scores = candidate_scores(candidates, target, kernel)
        self.gram = GramOperator(kernel, candidates.points, scores, threshold=config.gram_threshold)
        self.state = state_init(candidates, target, kernel)
        self.rows, self.trace, self.times = [], [], []
        self.heuristic_iterations = 0
        self._t0 = None

    def linear_term(self, i, s):
        return self.state.r - (i * s) * self.state.h

    def start(self):
        self._t0 = time.perf_counter()

    def commit(self, chosen):
        state_update(self.state, chosen, self.gram)
        self.times.append((time.perf_counter() - self._t0) * 1e3)
        self.rows.append(np.asarray(chosen, dtype=int))
        self.trace.append(self.state.mmd_squared)

    def result(self, algorithm, **extra):
        echo = asdict(self.config)
        echo.update(algorithm=algorithm, n=self.candidates.n, heuristic_iterations=self.heuristic_iterations,
                    **extra)
        return SelectionResult(
            pi=np.vstack(self.rows), trace=np.asarray(self.trace),
            timings_ms=np.asarray(self.times), config=echo,
        )


def select_myopic(candidates, target: TargetModel, kernel, m: int, seed: int = 0, config=None) -> SelectionResult:
    """One point per iteration: the candidate minimising the greedy bracket.

    Ties go to the lowest index. ``seed`` is accepted for interface
    uniformity and unused.
    """
    config = config or SelectionConfig(m=m, s=1, seed=seed)
    run = _Run(candidates, target, kernel, SelectionConfig(**{**asdict(config), "m": m, "s": 1}))
    half_diag = 0.5 * run.gram.diag
    zeros = np.zeros(run.candidates.n)
    for i in range(1, m + 1):
        run.start()
        # Same association as the IQP solvers' scoring so ties resolve identically.
        bracket = run.linear_term(i, 1) + half_diag + zeros
        run.commit([int(np.argmin(bracket))])
    return run.result("myopic")


def _solve_iteration(run, K, c, s):
    cfg = run.config
    problem = IqpProblem(K, c, s, binary=cfg.binary)
    sol = solve(problem, cfg.solver, time_limit=cfg.time_limit)
    if sol.proof != "exact":
        run.heuristic_iterations += 1
    return sol.indices


def select_nonmyopic(candidates, target: TargetModel, kernel, m: int, s: int, config=None) -> SelectionResult:
    """``s`` points per iteration, each iteration solved exactly as an IQP."""
    config = SelectionConfig(**{**asdict(config or SelectionConfig()), "m": m, "s": s, "b": 0})
    run = _Run(candidates, target, kernel, config)
    K = run.gram.full()
    for i in range(1, m + 1):
        run.start()
        run.commit(_solve_iteration(run, K, run.linear_term(i, s), s))
    return run.result("nonmyopic")


def select_minibatch(candidates, target: TargetModel, kernel, config: SelectionConfig) -> SelectionResult:
    """Non-myopic selection restricted to a batch of ``b`` candidates per iteration.

    Running sums are kept for all candidates, so interactions with points
    chosen from earlier batches are exact.
    """
    if not config.b:
        raise ConfigurationError("mini-batch selection needs a batch size b >= 1")
    run = _Run(candidates, target, kernel, config)
    schedule = batch_schedule(run.candidates.n, config.b, config.m, config.batch_strategy, config.seed)
    for i, batch in enumerate(schedule, start=1):
        run.start()
        c = run.linear_term(i, config.s)[batch]
        local = _solve_iteration(run, run.gram.submatrix(batch), c, config.s)
        run.commit(batch[local])
    return run.result("minibatch")


def select_oneshot(candidates, target: TargetModel, kernel, m: int, config=None) -> SelectionResult:
    """All ``m`` points chosen jointly in a single exact IQP solve."""
    config = SelectionConfig(**{**asdict(config or SelectionConfig()), "m": 1, "s": m, "b": 0})
    run = _Run(candidates, target, kernel, config)
    run.start()
    run.commit(_solve_iteration(run, run.gram.full(), run.linear_term(1, m), m))
    return run.result("oneshot", points=m)


def select_sdr(candidates, target: TargetModel, kernel, config: SelectionConfig) -> SelectionResult:
    """Sequential selection with each iteration's subset problem solved by the
    semidefinite relaxation and best-of-``draws`` rounding.

    Within an iteration a candidate is chosen at most once; ``b > 0`` enables
    mini-batching as in :func:`select_minibatch`; ``m = 1`` with ``s`` equal
    to the total gives the one-shot relaxation.
    """
    from .sdr import solve_sdr

    config = SelectionConfig(**{**asdict(config), "binary": True})
    run = _Run(candidates, target, kernel, config)
    n = run.candidates.n
    if config.b:
        schedule = batch_schedule(n, config.b, config.m, config.batch_strategy, config.seed)
    else:
        schedule = [np.arange(n)] * config.m
    for i, batch in enumerate(schedule, start=1):
        run.start()
        iqp = IqpProblem(run.gram.submatrix(batch), run.linear_term(i, config.s)[batch], config.s, binary=True)
        sol = solve_sdr(iqp, rank=config.rank, draws=config.draws, tol=config.sdr_tol,
                        max_iter=config.sdr_max_iter, seed=config.seed + i)
        run.heuristic_iterations += 1
        run.commit(batch[sol.indices])
    return run.result("sdr")


def select(candidates, target: TargetModel, kernel, algorithm: str, config: SelectionConfig) -> SelectionResult:
    """Dispatch by algorithm name."""
    if algorithm == "myopic":
        if config.s != 1:
            raise ConfigurationError("the myopic algorithm selects one point per iteration (s=1)")
        return select_myopic(candidates, target, kernel, config.m, config.seed, config)
    if algorithm == "nonmyopic":
        return select_nonmyopic(candidates, target, kernel, config.m, config.s, config)
    if algorithm == "minibatch":
        return select_minibatch(candidates, target, kernel, config)
    if algorithm == "oneshot":
        return select_oneshot(candidates, target, kernel, config.m * config.s, config)
    if algorithm == "sdr":
        return select_sdr(candidates, target, kernel, config)
    raise ConfigurationError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
