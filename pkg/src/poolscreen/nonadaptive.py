"""Non-adaptive testing matrices: separability checks and Boolean-OR decoding."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .core import InfectionVector, InputError, TestOutcome


@dataclass(frozen=True)
class TestingMatrix:
    """Binary m x n matrix; row i lists the members of pool i."""

    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.rows:
            raise InputError("testing matrix needs at least one row")
        n = len(self.rows[0])
        if n < 1 or any(len(r) != n for r in self.rows):
            raise InputError("testing matrix rows must be nonempty and equal length")
        for i, r in enumerate(self.rows):
            if any(b not in (0, 1) for b in r):
                raise InputError(f"row {i} contains non-binary entries")
            if not any(r):
                raise InputError(f"row {i} is all-zero; a test on nobody is meaningless")

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self.rows[0])

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(r[j] for r in self.rows)

    # Text format: first line "m n", then m lines of 0/1 characters.
    @classmethod
    def from_text(cls, text: str) -> "TestingMatrix":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise InputError("empty matrix text")
        try:
            m, n = (int(t) for t in lines[0].split())
        except ValueError:
            raise InputError(f"bad header line {lines[0]!r}; expected 'm n'")
        if len(lines) != m + 1:
            raise InputError(f"expected {m} matrix rows, got {len(lines) - 1}")
        rows = []
        for ln in lines[1:]:
            if len(ln) != n or set(ln) - {"0", "1"}:
                raise InputError(f"bad matrix row {ln!r} for n={n}")
            rows.append(tuple(int(c) for c in ln))
        return cls(tuple(rows))

    def to_text(self) -> str:
        head = f"{self.m} {self.n}"
        return "\n".join([head] + ["".join(str(b) for b in r) for r in self.rows])


def _or_signature(matrix: TestingMatrix, subset: Sequence[int]) -> tuple[int, ...]:
    # Boolean sum (bitwise OR) of the chosen columns
    sig = [0] * matrix.m
    for j in subset:
        for i, r in enumerate(matrix.rows):
            if r[j]:
                sig[i] = 1
    return tuple(sig)


def encode(matrix: TestingMatrix, x: InfectionVector) -> list[TestOutcome]:
    """Noiseless outcomes: test i is Positive iff pool i contains an infected person."""
    if x.n != matrix.n:
        raise InputError(f"vector length {x.n} != matrix columns {matrix.n}")
    out = []
    for r in matrix.rows:
        hit = any(ri and xi for ri, xi in zip(r, x.bits))
        out.append(TestOutcome.POSITIVE if hit else TestOutcome.NEGATIVE)
    return out


def is_separable(matrix: TestingMatrix, k: int, up_to_k: bool = False) -> bool:
    """Whether all Boolean column sums over the allowed subsets are distinct.

    up_to_k=False checks subsets of size exactly k; up_to_k=True checks all
    subsets of size <= k, the empty set included with its all-zero sum.
    """
    if not 1 <= k <= matrix.n:
        raise InputError(f"k={k} must be in 1..{matrix.n}")
    seen: set[tuple[int, ...]] = set()
    sizes = range(0, k + 1) if up_to_k else (k,)
    for size in sizes:
        for subset in combinations(range(matrix.n), size):
            sig = _or_signature(matrix, subset)
            if sig in seen:
                return False
            seen.add(sig)
    return True


class DecodeFailure(InputError):
    """No sparsity-respecting vector explains the outcomes.

    Signals assay noise or a violated sparsity assumption.  candidates
    holds every support set whose noiseless image is nearest to the
    observed outcomes in Hamming distance.
    """

    def __init__(self, distance: int, candidates: list[frozenset[int]]):
        self.distance = distance
        self.candidates = candidates
        shown = ", ".join(
            "{" + ",".join(str(i) for i in sorted(c)) + "}" for c in candidates[:8]
        )
        more = "" if len(candidates) <= 8 else f" (+{len(candidates) - 8} more)"
        super().__init__(
            f"no consistent infection vector; nearest candidates at Hamming "
            f"distance {distance}: {shown}{more}"
        )


def decode(
    matrix: TestingMatrix,
    outcomes: Sequence[TestOutcome],
    k_max: int,
) -> frozenset[int]:
    """Recover the unique support of size <= k_max matching the outcomes.

    Brute-force subset search; in-scope instances are small.  Raises
    DecodeFailure with nearest-candidate diagnostics when nothing matches.
    """
    if len(outcomes) != matrix.m:
        raise InputError(f"expected {matrix.m} outcomes, got {len(outcomes)}")
    if not 1 <= k_max <= matrix.n:
        raise InputError(f"k_max={k_max} must be in 1..{matrix.n}")
    target = tuple(1 if o is TestOutcome.POSITIVE else 0 for o in outcomes)
    best_dist = matrix.m + 1
    best: list[frozenset[int]] = []
    for size in range(0, k_max + 1):
        for subset in combinations(range(matrix.n), size):
            sig = _or_signature(matrix, subset)
            if sig == target:
                return frozenset(subset)
            dist = sum(a != b for a, b in zip(sig, target))
            if dist < best_dist:
                best_dist, best = dist, [frozenset(subset)]
            elif dist == best_dist:
                best.append(frozenset(subset))
    raise DecodeFailure(best_dist, best)
