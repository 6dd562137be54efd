"""Adaptive identification strategies and their evaluation.

Four strategies: individual testing, pair-halving for n=4, a fixed
stage-parallel decision tree for n=4, and a fully-adaptive policy for
general n that alternates whole-pool tests with binary-search extraction.
Expected tests per person are computed by exact enumeration (small n,
perfect assay) or seeded Monte Carlo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    IdentifiedSet,
    InfectionVector,
    InputError,
    NoiseModel,
    NOISELESS,
    Pool,
    PriorModel,
    IidPrior,
    ExplicitPrior,
    ProtocolViolation,
    Stage,
    TestOutcome,
    Verdict,
    run_strategy,
)
from .parallel import pmap

P = TestOutcome.POSITIVE
N = TestOutcome.NEGATIVE

STRATEGY_KINDS = ("individual", "halving4", "soms4", "sofa")


@dataclass(frozen=True)
class Individual:
    """One test per person, all in a single stage."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise InputError("population size must be >= 1")

    def plan(self, history: Sequence[tuple[Pool, TestOutcome]]) -> Union[Stage, Verdict]:
        if not history:
            return Stage(tuple(Pool.of(k) for k in range(self.n)))
        infected = frozenset(
            pool.sorted_members()[0] for pool, out in history if out is P
        )
        return IdentifiedSet(infected)


@dataclass(frozen=True)
class Halving4:
    """Two pair pools, then left-first singleton resolution of positives.

    The last uncleared member of a positive pair is inferred infected
    without a test.
    """

    n: int = 4

    def __post_init__(self):
        if self.n != 4:
            raise InputError("halving4 is defined for n=4 only")

    def plan(self, history: Sequence[tuple[Pool, TestOutcome]]) -> Union[Stage, Verdict]:
        if not history:
            return Stage((Pool.of(0, 1), Pool.of(2, 3)))
        status: dict[int, bool] = {}
        i = 2  # cursor past the pair stage
        for (a, b), out in zip(((0, 1), (2, 3)), (history[0][1], history[1][1])):
            if out is N:
                status[a] = status[b] = False
                continue
            if i >= len(history):
                return Stage((Pool.of(a),))
            left = history[i][1]
            i += 1
            if left is N:
                # pair positive with a cleared: b is infected by inference
                status[a], status[b] = False, True
            else:
                status[a] = True
                if i >= len(history):
                    return Stage((Pool.of(b),))
                status[b] = history[i][1] is P
                i += 1
        return IdentifiedSet(frozenset(k for k, v in status.items() if v))


@dataclass(frozen=True)
class Soms4:
    """Fixed decision tree for n=4.

    Root pool {0,1,2,3}; on Positive a parallel stage of {0,1}, {2,3},
    {0,2}; then by outcome pattern either a terminal verdict, one followup
    singleton, or all four individuals.
    """

    n: int = 4

    def __post_init__(self):
        if self.n != 4:
            raise InputError("soms4 is defined for n=4 only")

    def plan(self, history: Sequence[tuple[Pool, TestOutcome]]) -> Union[Stage, Verdict]:
        if not history:
            return Stage((Pool.of(0, 1, 2, 3),))
        if history[0][1] is N:
            return IdentifiedSet(frozenset())
        if len(history) == 1:
            return Stage((Pool.of(0, 1), Pool.of(2, 3), Pool.of(0, 2)))
        pat = (history[1][1], history[2][1], history[3][1])
        if pat[0] is N and pat[1] is N:
            raise ProtocolViolation(
                "root pool positive but both half pools negative"
            )
        if pat == (N, P, N):
            return IdentifiedSet(frozenset({3}))
        if pat == (P, N, N):
            return IdentifiedSet(frozenset({1}))
        if pat == (P, P, N):
            return IdentifiedSet(frozenset({1, 3}))
        if pat == (N, P, P):
            # persons 0,1 cleared, 2 pinned by {0,2}; only 3 is open
            if len(history) == 4:
                return Stage((Pool.of(3),))
            extra = {3} if history[4][1] is P else set()
            return IdentifiedSet(frozenset({2} | extra))
        if pat == (P, N, P):
            # persons 2,3 cleared, 0 pinned by {0,2}; only 1 is open
            if len(history) == 4:
                return Stage((Pool.of(1),))
            extra = {1} if history[4][1] is P else set()
            return IdentifiedSet(frozenset({0} | extra))
        # (P, P, P): nothing is cleared, fall back to individual tests
        if len(history) == 4:
            return Stage(tuple(Pool.of(k) for k in range(4)))
        infected = frozenset(k for k in range(4) if history[4 + k][1] is P)
        if not infected:
            raise ProtocolViolation("root pool positive but every person negative")
        return IdentifiedSet(infected)


@dataclass(frozen=True)
class Sofa:
    """Fully-adaptive strategy for general n.

    Repeatedly tests the pool of all unresolved people.  The policy picks
    between a stop-check and a search depending on whether the infected
    count found so far exceeds n*p; both branches open with the same
    unresolved-pool test, and a Positive always triggers a binary-search
    extraction of exactly one infected person (left half first, sizes
    ceil/floor, with the last uncleared member of a positive pool inferred
    without a test).
    """

    n: int
    p: float = 0.0

    def __post_init__(self):
        if not 1 <= self.n <= 2**20:
            raise InputError(f"population size {self.n} outside 1..2^20")
        if not 0.0 <= self.p <= 1.0:
            raise InputError(f"design prevalence {self.p} outside [0, 1]")

    def plan(self, history: Sequence[tuple[Pool, TestOutcome]]) -> Union[Stage, Verdict]:
        found: set[int] = set()
        cleared: set[int] = set()
        i = 0
        while True:
            unresolved = [k for k in range(self.n) if k not in found and k not in cleared]
            if not unresolved:
                return IdentifiedSet(frozenset(found))
            # policy point: k_found > n*p picks the stop-check, otherwise the
            # search; both administer the same unresolved-pool test next
            if i >= len(history):
                return Stage((Pool(frozenset(unresolved)),))
            out = history[i][1]
            i += 1
            if out is N:
                cleared.update(unresolved)
                continue
            if len(unresolved) == 1:
                found.add(unresolved[0])
                continue
            current = unresolved
            while True:
                half = (len(current) + 1) // 2
                left, right = current[:half], current[half:]
                if i >= len(history):
                    return Stage((Pool(frozenset(left)),))
                lout = history[i][1]
                i += 1
                if lout is P:
                    if len(left) == 1:
                        found.add(left[0])
                        break
                    current = left
                else:
                    cleared.update(left)
                    if len(right) == 1:
                        # positive pool with all but one member cleared
                        found.add(right[0])
                        break
                    current = right


StrategyKind = Union[Individual, Halving4, Soms4, Sofa]


def make_strategy(kind: str, n: int, p: float = 0.0) -> StrategyKind:
    if kind == "individual":
        return Individual(n)
    if kind == "halving4":
        return Halving4(n)
    if kind == "soms4":
        return Soms4(n)
    if kind == "sofa":
        return Sofa(n, p)
    raise InputError(f"unknown strategy kind {kind!r}; expected one of {STRATEGY_KINDS}")


@dataclass(frozen=True)
class EvalReport:
    expected_tests: float
    tests_per_person: float
    method: str  # "exact" or "monte_carlo"
    trials: Optional[int] = None
    seed: Optional[int] = None
    std_error: Optional[float] = None


EXACT_N_CAP = 20


def _prior_n(prior: PriorModel, strategy_n: int) -> None:
    if isinstance(prior, ExplicitPrior) and prior.n != strategy_n:
        raise InputError(
            f"explicit prior over n={prior.n} does not match strategy n={strategy_n}"
        )


def expected_tests(
    strategy: StrategyKind,
    prior: PriorModel,
    noise: NoiseModel = NOISELESS,
    mode: str = "exact",
    trials: int = 10**5,
    seed: int = 0,
) -> EvalReport:
    """Expected number of tests under a prior.

    mode="exact" enumerates all 2^n vectors (n <= 20, perfect assay only);
    mode="monte_carlo" draws seeded trials and reports a standard error.
    """
    _prior_n(prior, strategy.n)
    if mode == "exact":
        if strategy.n > EXACT_N_CAP:
            raise InputError(f"exact enumeration capped at n={EXACT_N_CAP}")
        if not noise.deterministic:
            raise InputError("exact enumeration requires a perfect assay")
        total = 0.0
        for code in range(1 << strategy.n):
            x = InfectionVector.from_int(code, strategy.n)
            mass = prior.pmf(x)
            if mass == 0.0:
                continue
            total += mass * run_strategy(strategy, x).test_count
        return EvalReport(total, total / strategy.n, "exact")
    if mode != "monte_carlo":
        raise InputError(f"unknown mode {mode!r}")
    if trials < 10**4:
        raise InputError("monte_carlo requires at least 10^4 trials")
    counts = _mc_test_counts(strategy, prior, noise, trials, seed)
    mean = float(np.mean(counts))
    se = float(np.std(counts, ddof=1) / math.sqrt(trials))
    return EvalReport(
        mean, mean / strategy.n, "monte_carlo", trials=trials, seed=seed,
        std_error=se,
    )


def _mc_test_counts(
    strategy: StrategyKind,
    prior: PriorModel,
    noise: NoiseModel,
    trials: int,
    seed: int,
) -> np.ndarray:
    """Per-trial test counts for `trials` truth draws from the prior.

    With a perfect assay the trace is a pure function of the truth vector,
    so counts are memoized by its integer encoding; prevalent vectors are
    evaluated once.  Noisy runs execute every trial individually.
    """
    rng = np.random.default_rng(seed)
    n = strategy.n
    counts = np.empty(trials, dtype=np.int64)
    if isinstance(prior, IidPrior):
        bits = rng.random((trials, n)) < prior.p
    else:
        codes_drawn = rng.choice(len(prior.probs), size=trials, p=prior.probs)
        bits = (codes_drawn[:, None] >> np.arange(n)) & 1 == 1
    weights = np.uint64(1) << np.arange(n, dtype=np.uint64)
    codes = (bits.astype(np.uint64) * weights).sum(axis=1)
    if noise.deterministic:
        memo: dict[int, int] = {}
        for t in range(trials):
            code = int(codes[t])
            got = memo.get(code)
            if got is None:
                x = InfectionVector.from_int(code, n)
                got = run_strategy(strategy, x).test_count
                memo[code] = got
            counts[t] = got
    else:
        trial_seeds = np.random.SeedSequence(seed).spawn(trials)
        for t in range(trials):
            x = InfectionVector.from_int(int(codes[t]), n)
            sub_seed = int(trial_seeds[t].generate_state(1)[0])
            counts[t] = run_strategy(strategy, x, noise, sub_seed).test_count
    return counts


@dataclass(frozen=True)
class SweepRow:
    strategy: str
    n: int
    p: float
    tests_per_person: float
    method: str
    seed: Optional[int]
    std_error: Optional[float]


SWEEP_HEADER = "strategy,n,p,tests_per_person,method,seed,std_error"


def sweep_tests_per_person(
    kind: str,
    n_values: Sequence[int],
    p_values: Sequence[float],
    mode: str = "exact",
    trials: int = 10**5,
    seed: int = 0,
    threads: int = 1,
) -> list[SweepRow]:
    """One expected-tests evaluation per (n, p) grid point.

    The adaptive policy's design prevalence follows the grid point.
    Monte Carlo points get independent seeds derived from the master seed
    and the point index, so results do not depend on evaluation order or
    thread count.
    """
    if not n_values or not p_values:
        raise InputError("n and p grids must be nonempty")
    points = [(n, p) for n in n_values for p in p_values]

    def eval_point(indexed: tuple[int, tuple[int, float]]) -> SweepRow:
        idx, (n, p) = indexed
        strategy = make_strategy(kind, n, p)
        report = expected_tests(
            strategy, IidPrior(p), NOISELESS, mode,
            trials=trials, seed=point_seed_for(seed, idx),
        )
        return SweepRow(
            kind, n, p, report.tests_per_person, report.method,
            report.seed, report.std_error,
        )

    return pmap(eval_point, list(enumerate(points)), threads)


def point_seed_for(master_seed: int, index: int) -> int:
    """Stable per-grid-point seed, independent of scheduling."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def format_sweep_rows(rows: Sequence[SweepRow]) -> str:
    lines = [SWEEP_HEADER]
    for r in rows:
        seed = "" if r.seed is None else str(r.seed)
        se = "" if r.std_error is None else f"{r.std_error:.6g}"
        lines.append(
            f"{r.strategy},{r.n},{r.p:.10g},{r.tests_per_person:.10g},"
            f"{r.method},{seed},{se}"
        )
    return "\n".join(lines)
