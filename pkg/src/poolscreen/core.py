"""Domain types shared by every testing strategy.

Populations, pools, outcomes, priors, assay noise, and the deterministic
execution harness that drives a strategy against a ground-truth vector.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence, Union

import numpy as np


class InputError(ValueError):
    """Caller handed us something invalid (bad sizes, indices, probabilities)."""


class ProtocolViolation(RuntimeError):
    """Submitted outcomes are impossible under the strategy's noiseless semantics."""


class InternalError(RuntimeError):
    """Engine bug guard, e.g. a strategy that refuses to terminate."""


class TestOutcome(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"

    @classmethod
    def from_str(cls, s: str) -> "TestOutcome":
        try:
            return cls(s.lower())
        except ValueError:
            raise InputError(f"unknown outcome {s!r}; expected positive/negative")


@dataclass(frozen=True)
class InfectionVector:
    """Ground-truth infection status, person k infected iff bits[k] == 1."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 1:
            raise InputError("infection vector must have length >= 1")
        if any(b not in (0, 1) for b in self.bits):
            raise InputError("infection vector entries must be 0 or 1")

    @classmethod
    def from_string(cls, s: str) -> "InfectionVector":
        if not s or set(s) - {"0", "1"}:
            raise InputError(f"bad bitstring {s!r}")
        return cls(tuple(int(c) for c in s))

    @classmethod
    def from_int(cls, code: int, n: int) -> "InfectionVector":
        # bit k of the integer is person k's status
        if code < 0 or code >= (1 << n):
            raise InputError(f"code {code} out of range for n={n}")
        return cls(tuple((code >> k) & 1 for k in range(n)))

    def to_int(self) -> int:
        return sum(b << k for k, b in enumerate(self.bits))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    @property
    def n(self) -> int:
        return len(self.bits)

    def support(self) -> frozenset[int]:
        return frozenset(k for k, b in enumerate(self.bits) if b)

    def weight(self) -> int:
        return sum(self.bits)


@dataclass(frozen=True)
class Pool:
    """A set of 0-based person (or subpool) indices tested together."""

    members: frozenset[int]

    def __post_init__(self):
        if not self.members:
            raise InputError("pool must be nonempty")
        if any(m < 0 for m in self.members):
            raise InputError("pool indices must be nonnegative")

    @classmethod
    def of(cls, *members: int) -> "Pool":
        return cls(frozenset(members))

    def validate_against(self, n: int) -> None:
        bad = [m for m in self.members if m >= n]
        if bad:
            raise InputError(f"pool indices {sorted(bad)} out of range for n={n}")

    def sorted_members(self) -> list[int]:
        return sorted(self.members)


@dataclass(frozen=True)
class IidPrior:
    """Independent infection with common marginal probability p."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InputError(f"p={self.p} outside [0, 1]")

    def pmf(self, x: InfectionVector) -> float:
        w = x.weight()
        return self.p**w * (1.0 - self.p) ** (x.n - w)


@dataclass(frozen=True)
class ExplicitPrior:
    """Arbitrary distribution over 2^n vectors, indexed by integer encoding."""

    probs: tuple[float, ...]

    def __post_init__(self):
        k = len(self.probs).bit_length() - 1
        if len(self.probs) != 1 << k or k < 1:
            raise InputError("explicit prior length must be 2^n with n >= 1")
        if any(p < 0 for p in self.probs):
            raise InputError("explicit prior entries must be >= 0")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise InputError("explicit prior must sum to 1")

    @property
    def n(self) -> int:
        return len(self.probs).bit_length() - 1

    def pmf(self, x: InfectionVector) -> float:
        if x.n != self.n:
            raise InputError(f"vector length {x.n} does not match prior n={self.n}")
        return self.probs[x.to_int()]


PriorModel = Union[IidPrior, ExplicitPrior]


@dataclass(frozen=True)
class NoiseModel:
    """Assay sensitivity; specificity is fixed at 1 (no false positives)."""

    sensitivity: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.sensitivity <= 1.0:
            raise InputError(f"sensitivity={self.sensitivity} outside [0, 1]")

    @property
    def deterministic(self) -> bool:
        return self.sensitivity >= 1.0


NOISELESS = NoiseModel(1.0)


@dataclass(frozen=True)
class IdentifiedSet:
    """Terminal verdict of an identification strategy."""

    infected: frozenset[int]


class Decision(enum.Enum):
    H0 = "H0"
    H1 = "H1"


@dataclass(frozen=True)
class HypothesisDecision:
    decision: Decision


Verdict = Union[IdentifiedSet, HypothesisDecision]


@dataclass(frozen=True)
class Stage:
    """One batch of pools a strategy wants tested in parallel."""

    pools: tuple[Pool, ...]

    def __post_init__(self):
        if not self.pools:
            raise InputError("stage must prescribe at least one pool")


class Strategy(Protocol):
    """Deterministic stage planner.

    plan() maps the full outcome history onto either the next Stage or a
    terminal Verdict.  The same planner drives offline evaluation and the
    interactive session service, so there is exactly one implementation of
    each protocol's logic.
    """

    n: int

    def plan(self, history: Sequence[tuple[Pool, TestOutcome]]) -> Union[Stage, Verdict]:
        ...


@dataclass(frozen=True)
class StrategyTrace:
    """Record of one complete strategy execution."""

    tests: tuple[tuple[Pool, TestOutcome], ...]
    verdict: Verdict

    @property
    def test_count(self) -> int:
        return len(self.tests)


def oracle_test(
    pool: Pool,
    truth: InfectionVector,
    noise: NoiseModel = NOISELESS,
    draw: float = 0.0,
) -> TestOutcome:
    """Assay a pool against ground truth.

    A pool with no infected member is always Negative.  A pool containing
    at least one infected member is Positive iff draw < sensitivity; with
    sensitivity 1 the draw is ignored.
    """
    pool.validate_against(truth.n)
    if not any(truth.bits[m] for m in pool.members):
        return TestOutcome.NEGATIVE
    if noise.deterministic or draw < noise.sensitivity:
        return TestOutcome.POSITIVE
    return TestOutcome.NEGATIVE


def run_strategy(
    strategy: Strategy,
    truth: InfectionVector,
    noise: NoiseModel = NOISELESS,
    seed: Optional[int] = None,
) -> StrategyTrace:
    """Drive a strategy to termination against a truth vector.

    Deterministic given (strategy, truth, seed); with sensitivity 1 the
    seed is irrelevant.  One noise draw is consumed per administered test,
    independent across tests.
    """
    if strategy.n != truth.n:
        raise InputError(
            f"strategy population {strategy.n} != truth length {truth.n}"
        )
    rng = np.random.default_rng(seed)
    history: list[tuple[Pool, TestOutcome]] = []
    budget = 4 * truth.n  # no shipped strategy legitimately exceeds this
    while True:
        step = strategy.plan(history)
        if isinstance(step, (IdentifiedSet, HypothesisDecision)):
            return StrategyTrace(tests=tuple(history), verdict=step)
        if len(history) + len(step.pools) > budget:
            raise InternalError(
                f"strategy exceeded {budget} tests without terminating"
            )
        for pool in step.pools:
            draw = float(rng.random()) if not noise.deterministic else 0.0
            history.append((pool, oracle_test(pool, truth, noise, draw)))


def replay_strategy(
    strategy: Strategy,
    outcomes: Iterable[TestOutcome],
) -> StrategyTrace:
    """Re-run a strategy against a recorded outcome sequence.

    Used for session audit: the recorded outcomes stand in for the assay.
    Raises ProtocolViolation if the sequence is shorter than the strategy
    demands or inconsistent with its stage structure.
    """
    feed = list(outcomes)
    pos = 0
    history: list[tuple[Pool, TestOutcome]] = []
    budget = 4 * strategy.n
    while True:
        step = strategy.plan(history)
        if isinstance(step, (IdentifiedSet, HypothesisDecision)):
            if pos != len(feed):
                raise ProtocolViolation(
                    f"{len(feed) - pos} recorded outcomes left over after verdict"
                )
            return StrategyTrace(tests=tuple(history), verdict=step)
        if len(history) + len(step.pools) > budget:
            raise InternalError(f"strategy exceeded {budget} tests during replay")
        for pool in step.pools:
            if pos >= len(feed):
                raise ProtocolViolation("recorded outcome sequence ended mid-stage")
            history.append((pool, feed[pos]))
            pos += 1
