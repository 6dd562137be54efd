"""Infection-rate classification via pooled subpool screening.

A sample of N people is split into L equal subpools.  Whether the number
of infected subpools exceeds an integer threshold V decides between two
candidate prevalence rates.  Instead of testing every subpool, a
level-synchronous binary-splitting protocol resolves just enough of the
subpool status vector to compare its count against V, with bounds that
allow early stopping in both directions.

Closed-form error probabilities, exact enumeration, and a vectorized
Monte Carlo simulator are provided; the protocol itself is a stage
planner shared with the interactive session service.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    Decision,
    HypothesisDecision,
    InfectionVector,
    InputError,
    InternalError,
    NoiseModel,
    Pool,
    Stage,
    TestOutcome,
    Verdict,
    run_strategy,
)
from .parallel import pmap

P = TestOutcome.POSITIVE


@dataclass(frozen=True)
class HypothesisPair:
    """Two candidate prevalence rates with prior weights."""

    p0: float
    p1: float
    pi0: float = 0.5
    pi1: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p0 < self.p1 < 1.0:
            raise InputError(
                f"need 0 < p0 < p1 < 1, got p0={self.p0}, p1={self.p1}"
            )
        if self.pi0 <= 0 or self.pi1 <= 0 or abs(self.pi0 + self.pi1 - 1.0) > 1e-12:
            raise InputError("priors must be positive and sum to 1")


def subpool_q(p: float, n_people: int, n_subpools: int) -> float:
    """Probability a subpool of n_people/n_subpools members is infected."""
    if n_subpools < 1 or n_people % n_subpools != 0:
        raise InputError(
            f"subpool count {n_subpools} must divide sample size {n_people}"
        )
    if not 0.0 <= p <= 1.0:
        raise InputError(f"prevalence {p} outside [0, 1]")
    return 1.0 - (1.0 - p) ** (n_people // n_subpools)


@dataclass(frozen=True)
class ClassifierConfig:
    """Protocol parameters.

    tau is the depth of the splitting tree where testing begins: 0 starts
    with the single root pool of all L subpools, 1 with the two half
    pools, and so on.  V may be -1 (reject immediately unless nothing is
    infected, which still takes the first stage to learn).
    """

    n_people: int
    n_subpools: int
    threshold: int
    tau: int = 0
    rho: float = 1.0

    def __post_init__(self):
        if self.n_subpools < 2:
            raise InputError("need at least 2 subpools")
        if self.n_people % self.n_subpools != 0:
            raise InputError(
                f"subpool count {self.n_subpools} must divide {self.n_people}"
            )
        depth = max_depth(self.n_subpools)
        if not 0 <= self.tau <= depth:
            raise InputError(f"tau={self.tau} outside 0..{depth}")
        if not -1 <= self.threshold < self.n_subpools:
            raise InputError(
                f"threshold {self.threshold} outside -1..{self.n_subpools - 1}"
            )
        if not 0.0 <= self.rho <= 1.0:
            raise InputError(f"rho={self.rho} outside [0, 1]")


def max_depth(n_subpools: int) -> int:
    return math.ceil(math.log2(n_subpools))


def q_pair(hp: HypothesisPair, cfg: ClassifierConfig) -> tuple[float, float]:
    return (
        subpool_q(hp.p0, cfg.n_people, cfg.n_subpools),
        subpool_q(hp.p1, cfg.n_people, cfg.n_subpools),
    )


def llr(n_positive: int, hp: HypothesisPair, cfg: ClassifierConfig) -> float:
    """Log likelihood ratio of H0 against H1 given the infected-subpool count.

    Depends on the status vector only through its count.  Degenerate q
    values collapse one hypothesis to zero mass and return an infinite
    sentinel of the matching sign.
    """
    L = cfg.n_subpools
    if not 0 <= n_positive <= L:
        raise InputError(f"count {n_positive} outside 0..{L}")
    q0, q1 = q_pair(hp, cfg)

    def logmass(q: float) -> float:
        if q in (0.0, 1.0):
            ok = (q == 0.0 and n_positive == 0) or (q == 1.0 and n_positive == L)
            return 0.0 if ok else -math.inf
        return n_positive * math.log(q) + (L - n_positive) * math.log(1.0 - q)

    m0, m1 = logmass(q0), logmass(q1)
    if math.isinf(m0) and math.isinf(m1):
        raise InputError("count impossible under both hypotheses")
    if math.isinf(m0):
        return -math.inf
    if math.isinf(m1):
        return math.inf
    return math.log(hp.pi0 / hp.pi1) + m0 - m1


def threshold_v(hp: HypothesisPair, n_people: int, n_subpools: int) -> int:
    """Largest count still favoring H0: decide H0 iff count <= V."""
    q0 = subpool_q(hp.p0, n_people, n_subpools)
    q1 = subpool_q(hp.p1, n_people, n_subpools)
    if q0 in (0.0, 1.0) or q1 in (0.0, 1.0) or q0 == q1:
        raise InputError("threshold undefined for degenerate subpool probabilities")
    L = n_subpools
    num = math.log(hp.pi0 / hp.pi1) + L * math.log((1.0 - q0) / (1.0 - q1))
    den = -math.log(q0 / q1) + math.log((1.0 - q0) / (1.0 - q1))
    return math.floor(num / den)


def closed_form_pf_pd(q0: float, q1: float, L: int, V: int) -> tuple[float, float]:
    """Binomial tail probabilities of declaring H1 under each hypothesis."""
    if not -1 <= V < L:
        raise InputError(f"V={V} outside -1..{L - 1}")

    def tail(q: float) -> float:
        return sum(
            math.comb(L, j) * q**j * (1.0 - q) ** (L - j) for j in range(V + 1, L + 1)
        )

    return tail(q0), tail(q1)


# ── splitting tree ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class TreeNode:
    lo: int
    hi: int
    depth: int
    left: int = -1   # child indices into the node table, -1 for leaves
    right: int = -1

    @property
    def size(self) -> int:
        return self.hi - self.lo


def build_tree(n_subpools: int) -> list[TreeNode]:
    """Complete halving tree over [0, L), left halves of size ceil(n/2)."""
    nodes: list[TreeNode] = []
    queue = [(0, n_subpools, 0)]
    while queue:
        lo, hi, depth = queue.pop(0)
        idx = len(nodes)
        nodes.append(TreeNode(lo, hi, depth))
        if hi - lo >= 2:
            mid = lo + (hi - lo + 1) // 2
            queue.append((lo, mid, depth + 1))
            queue.append((mid, hi, depth + 1))
    # queue order is breadth-first, so children positions are computable in
    # a second pass: nodes are appended level by level
    by_span = {(nd.lo, nd.hi): i for i, nd in enumerate(nodes)}
    fixed = []
    for nd in nodes:
        if nd.size >= 2:
            mid = nd.lo + (nd.size + 1) // 2
            fixed.append(
                TreeNode(nd.lo, nd.hi, nd.depth,
                         by_span[(nd.lo, mid)], by_span[(mid, nd.hi)])
            )
        else:
            fixed.append(nd)
    return fixed


def frontier(n_subpools: int, tau: int) -> list[tuple[int, int]]:
    """Intervals forming the starting frontier at depth tau.

    Branches that bottom out above tau contribute their singleton leaf.
    """
    out: list[tuple[int, int]] = []

    def descend(lo: int, hi: int, depth: int) -> None:
        if depth == tau or hi - lo == 1:
            out.append((lo, hi))
            return
        mid = lo + (hi - lo + 1) // 2
        descend(lo, mid, depth + 1)
        descend(mid, hi, depth + 1)

    descend(0, n_subpools, 0)
    return out


# ── stage planner (shared with the session service) ─────────────────────

@dataclass(frozen=True)
class ClassifierPlanner:
    """Level-synchronous splitting protocol as a stage planner.

    Every stage tests all unresolved frontier pools at once.  After a
    stage, lower bound = confirmed singletons + number of pending positive
    pools, upper bound = confirmed + total subpools inside pending pools.
    Decide H1 when lower > V, H0 when upper <= V, otherwise split every
    pending pool and continue.  Negative pools are resolved healthy and
    never revisited.
    """

    cfg: ClassifierConfig

    @property
    def n(self) -> int:
        return self.cfg.n_subpools

    def plan(self, history: Sequence[tuple[Pool, TestOutcome]]) -> Union[Stage, Verdict]:
        V = self.cfg.threshold
        active = frontier(self.cfg.n_subpools, self.cfg.tau)
        confirmed = 0
        pos = 0
        while True:
            if pos + len(active) > len(history):
                pools = tuple(Pool(frozenset(range(lo, hi))) for lo, hi in active)
                return Stage(pools)
            outcomes = [history[pos + i][1] for i in range(len(active))]
            pos += len(active)
            pending: list[tuple[int, int]] = []
            for (lo, hi), out in zip(active, outcomes):
                if out is not P:
                    continue
                if hi - lo == 1:
                    confirmed += 1
                else:
                    pending.append((lo, hi))
            lower = confirmed + len(pending)
            upper = confirmed + sum(hi - lo for lo, hi in pending)
            if lower > V:
                return HypothesisDecision(Decision.H1)
            if upper <= V:
                return HypothesisDecision(Decision.H0)
            nxt: list[tuple[int, int]] = []
            for lo, hi in pending:
                mid = lo + (hi - lo + 1) // 2
                nxt.append((lo, mid))
                nxt.append((mid, hi))
            active = nxt


def classify(
    status: InfectionVector,
    cfg: ClassifierConfig,
    seed: Optional[int] = None,
) -> tuple[Decision, int, tuple]:
    """Run the protocol against a known subpool status vector.

    Noise comes from cfg.rho; the seed matters only when rho < 1.
    Returns (decision, tests used, administered-test trace).
    """
    if status.n != cfg.n_subpools:
        raise InputError(
            f"status length {status.n} != subpool count {cfg.n_subpools}"
        )
    trace = run_strategy(
        ClassifierPlanner(cfg), status, NoiseModel(cfg.rho), seed
    )
    assert isinstance(trace.verdict, HypothesisDecision)
    return trace.verdict.decision, trace.test_count, trace.tests


def max_tests(cfg: ClassifierConfig) -> int:
    """Every trace fits in frontier size plus one test per tree edge below it."""
    return 2 * cfg.n_subpools - 1 + len(frontier(cfg.n_subpools, cfg.tau))


# ── evaluation ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ClassifierReport:
    pf: float
    pd: float
    expected_tests: float
    method: str  # "exact" or "monte_carlo"
    trials: Optional[int] = None
    seed: Optional[int] = None
    pf_std_error: Optional[float] = None
    pd_std_error: Optional[float] = None
    eg_std_error: Optional[float] = None


EXACT_L_CAP = 20


def evaluate(
    cfg: ClassifierConfig,
    hp: HypothesisPair,
    mode: str = "exact",
    trials: int = 10**5,
    seed: int = 0,
) -> ClassifierReport:
    """Error rates and expected tests under the two hypotheses.

    Exact mode enumerates all 2^L status vectors (perfect assay, L <= 20)
    and cross-checks the rates against the closed-form tails.  Monte Carlo
    draws person-level infection counts per subpool under each hypothesis;
    expected tests are averaged with the prior weights.
    """
    if mode == "exact":
        if cfg.n_subpools > EXACT_L_CAP:
            raise InputError(f"exact enumeration capped at L={EXACT_L_CAP}")
        if cfg.rho < 1.0:
            raise InputError("exact enumeration requires a perfect assay")
        return _evaluate_exact(cfg, hp)
    if mode != "monte_carlo":
        raise InputError(f"unknown mode {mode!r}")
    if trials < 10**4:
        raise InputError("monte_carlo requires at least 10^4 trials")
    return _evaluate_mc(cfg, hp, trials, seed)


def _evaluate_exact(cfg: ClassifierConfig, hp: HypothesisPair) -> ClassifierReport:
    L = cfg.n_subpools
    q0, q1 = q_pair(hp, cfg)
    reject = [0.0, 0.0]  # P(declare H1 | H_i)
    e_tests = [0.0, 0.0]
    for code in range(1 << L):
        x = InfectionVector.from_int(code, L)
        decision, gamma, _ = classify(x, cfg)
        w = x.weight()
        for h, q in ((0, q0), (1, q1)):
            mass = q**w * (1.0 - q) ** (L - w)
            if decision is Decision.H1:
                reject[h] += mass
            e_tests[h] += mass * gamma
    pf_cf, pd_cf = closed_form_pf_pd(q0, q1, L, cfg.threshold)
    if abs(reject[0] - pf_cf) > 1e-12 or abs(reject[1] - pd_cf) > 1e-12:
        raise InternalError(
            "enumerated error rates disagree with the closed form: "
            f"({reject[0]}, {reject[1]}) vs ({pf_cf}, {pd_cf})"
        )
    eg = hp.pi0 * e_tests[0] + hp.pi1 * e_tests[1]
    return ClassifierReport(reject[0], reject[1], eg, "exact")


def _evaluate_mc(
    cfg: ClassifierConfig, hp: HypothesisPair, trials: int, seed: int
) -> ClassifierReport:
    rates = []
    means = []
    variances = []
    root = np.random.SeedSequence(seed)
    ss0, ss1 = root.spawn(2)
    for p, ss in ((hp.p0, ss0), (hp.p1, ss1)):
        decisions, gammas = simulate_protocol(cfg, p, trials, ss)
        rates.append(float(np.mean(decisions)))
        means.append(float(np.mean(gammas)))
        variances.append(float(np.var(gammas, ddof=1)))
    pf, pd_ = rates
    eg = hp.pi0 * means[0] + hp.pi1 * means[1]
    pf_se = math.sqrt(max(pf * (1 - pf), 1e-300) / trials)
    pd_se = math.sqrt(max(pd_ * (1 - pd_), 1e-300) / trials)
    eg_se = math.sqrt(
        (hp.pi0**2 * variances[0] + hp.pi1**2 * variances[1]) / trials
    )
    return ClassifierReport(
        pf, pd_, eg, "monte_carlo", trials=trials, seed=seed,
        pf_std_error=pf_se, pd_std_error=pd_se, eg_std_error=eg_se,
    )


def simulate_protocol(
    cfg: ClassifierConfig,
    prevalence: float,
    trials: int,
    seed_seq: np.random.SeedSequence,
    chunk: int = 50_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized protocol runs: (decisions in {0,1}, test counts) per trial.

    Subpool status is drawn from person-level infection counts.  The stage
    loop mirrors ClassifierPlanner exactly; equivalence is enforced by an
    exhaustive test rather than shared inner code, because the planner is
    per-session sequential while this path runs millions of trials.
    """
    rng = np.random.default_rng(seed_seq)
    members = cfg.n_people // cfg.n_subpools
    decisions = np.empty(trials, dtype=np.int8)
    gammas = np.empty(trials, dtype=np.int64)
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        infected_members = rng.binomial(members, prevalence, size=(t, cfg.n_subpools))
        decision, gamma = run_stage_process(cfg, infected_members > 0, rng)
        decisions[done : done + t] = decision
        gammas[done : done + t] = gamma
        done += t
    return decisions, gammas


def run_stage_process(
    cfg: ClassifierConfig,
    bits: np.ndarray,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stage loop over a batch of status vectors (rows of `bits`)."""
    t = bits.shape[0]
    V = cfg.threshold
    if cfg.rho < 1.0 and rng is None:
        raise InputError("noisy runs need a generator")
    nodes = build_tree(cfg.n_subpools)
    span_index = {(nd.lo, nd.hi): i for i, nd in enumerate(nodes)}
    start_ids = [span_index[iv] for iv in frontier(cfg.n_subpools, cfg.tau)]
    # bottom-up OR over the tree; children always follow their parent
    node_any = np.empty((t, len(nodes)), dtype=bool)
    for i in range(len(nodes) - 1, -1, -1):
        nd = nodes[i]
        if nd.size == 1:
            node_any[:, i] = bits[:, nd.lo]
        else:
            node_any[:, i] = node_any[:, nd.left] | node_any[:, nd.right]

    alive = np.ones(t, dtype=bool)
    confirmed = np.zeros(t, dtype=np.int64)
    gamma = np.zeros(t, dtype=np.int64)
    decision = np.full(t, -1, dtype=np.int8)
    active_ids = np.array(start_ids, dtype=np.int64)
    active = np.ones((t, len(active_ids)), dtype=bool)
    while active_ids.size:
        sizes = np.array([nodes[i].size for i in active_ids])
        tested = active & alive[:, None]
        outcome = tested & node_any[:, active_ids]
        if cfg.rho < 1.0:
            outcome &= rng.random((t, active_ids.size)) < cfg.rho
        gamma += tested.sum(axis=1)
        single = sizes == 1
        confirmed += (outcome & single[None, :]).sum(axis=1)
        pending = outcome & ~single[None, :]
        lower = confirmed + pending.sum(axis=1)
        upper = confirmed + pending.astype(np.int64) @ sizes
        d1 = alive & (lower > V)
        d0 = alive & ~d1 & (upper <= V)
        decision[d1] = 1
        decision[d0] = 0
        alive &= ~(d1 | d0)
        if not alive.any():
            break
        splittable = np.nonzero(~single)[0]
        if splittable.size == 0:
            break
        child_ids = []
        parent_cols = []
        for col in splittable:
            nd = nodes[active_ids[col]]
            child_ids.extend((nd.left, nd.right))
            parent_cols.extend((col, col))
        active = pending[:, parent_cols]
        active_ids = np.array(child_ids, dtype=np.int64)
    if alive.any():
        raise InternalError("protocol failed to resolve some trials")
    return decision, gamma


@dataclass(frozen=True)
class ClassifierRow:
    p0: float
    p1: float
    n_people: int
    n_subpools: int
    threshold: int
    tau: int
    rho: float
    pf: float
    pd: float
    eg: float
    method: str
    seed: Optional[int]


CLASSIFIER_HEADER = "p0,p1,N,L,V,tau,rho,PF,PD,EG,method,seed"


def roc_sweep(
    hp: HypothesisPair,
    n_subpools: int,
    threshold: int,
    n_people_grid: Sequence[int],
    tau: int = 0,
    rho: float = 1.0,
    mode: str = "exact",
    trials: int = 10**5,
    seed: int = 0,
    threads: int = 1,
) -> list[ClassifierRow]:
    """One evaluation per sample size N; traces an ROC as N varies."""
    if not n_people_grid:
        raise InputError("N grid must be nonempty")

    def eval_point(indexed: tuple[int, int]) -> ClassifierRow:
        idx, n_people = indexed
        cfg = ClassifierConfig(n_people, n_subpools, threshold, tau, rho)
        point_seed = int(np.random.SeedSequence([seed, idx]).generate_state(1)[0])
        rep = evaluate(cfg, hp, mode, trials=trials, seed=point_seed)
        return _row_from_report(cfg, hp, rep)

    return pmap(eval_point, list(enumerate(n_people_grid)), threads)


def _row_from_report(
    cfg: ClassifierConfig, hp: HypothesisPair, rep: ClassifierReport
) -> ClassifierRow:
    return ClassifierRow(
        hp.p0, hp.p1, cfg.n_people, cfg.n_subpools, cfg.threshold,
        cfg.tau, cfg.rho, rep.pf, rep.pd, rep.expected_tests,
        rep.method, rep.seed,
    )


def format_classifier_rows(rows: Sequence[ClassifierRow]) -> str:
    lines = [CLASSIFIER_HEADER]
    for r in rows:
        seed = "" if r.seed is None else str(r.seed)
        lines.append(
            f"{r.p0:.10g},{r.p1:.10g},{r.n_people},{r.n_subpools},"
            f"{r.threshold},{r.tau},{r.rho:.10g},{r.pf:.10g},{r.pd:.10g},"
            f"{r.eg:.10g},{r.method},{seed}"
        )
    return "\n".join(lines)
