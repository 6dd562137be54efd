"""Interactive protocol sessions with durable, replayable state.

A session wraps one strategy execution for a lab workflow: the engine
prescribes pools, the technician reports assay outcomes stage by stage,
and the verdict appears when the underlying planner terminates.  Each
session is an append-only JSONL event log on disk; in-memory state is
always reconstructible by replaying the log through the pure planner, so
a restart resumes every session exactly where it stopped.
"""
from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Union

from .adaptive import STRATEGY_KINDS, make_strategy
from .classifier import (
    ClassifierConfig,
    ClassifierPlanner,
    HypothesisPair,
    closed_form_pf_pd,
    q_pair,
    threshold_v,
)
from .core import (
    HypothesisDecision,
    IdentifiedSet,
    InputError,
    Pool,
    Stage,
    TestOutcome,
)


class UnknownSession(KeyError):
    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"no session {session_id!r}")


class StageConflict(RuntimeError):
    """Submission does not match the currently pending stage."""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class ProtocolSpec:
    """Validated protocol description; `raw` is the canonical payload echo."""

    raw: dict
    planner: object
    label_prefix: str  # "" for persons, "S" for subpools

    def labels_for(self, members: Sequence[int]) -> list[str]:
        return [f"{self.label_prefix}{m + 1}" for m in sorted(members)]


def parse_protocol(payload: dict) -> ProtocolSpec:
    """Validate a protocol payload and bind its planner.

    Identification: {"type": "identify", "strategy": ..., "n": ..., "p": ...}
    Classification: {"type": "classify", "p0": ..., "p1": ..., "N": ...,
                     "L": ..., "V": optional, "tau": ..., "rho": ...}
    """
    if not isinstance(payload, dict):
        raise InputError("protocol must be an object")
    ptype = payload.get("type")
    if ptype == "identify":
        kind = payload.get("strategy")
        if kind not in STRATEGY_KINDS:
            raise InputError(
                f"unknown strategy {kind!r}; expected one of {STRATEGY_KINDS}"
            )
        n = payload.get("n", 4)
        p = payload.get("p", 0.0)
        if not isinstance(n, int):
            raise InputError("n must be an integer")
        strategy = make_strategy(kind, n, float(p))
        raw = {"type": "identify", "strategy": kind, "n": n, "p": float(p)}
        return ProtocolSpec(raw, strategy, "")
    if ptype == "classify":
        try:
            hp = HypothesisPair(
                float(payload["p0"]), float(payload["p1"]),
                float(payload.get("pi0", 0.5)), float(payload.get("pi1", 0.5)),
            )
            n_people = int(payload["N"])
            n_subpools = int(payload["L"])
        except KeyError as missing:
            raise InputError(f"protocol missing field {missing.args[0]!r}")
        v = payload.get("V")
        if v is None:
            v = threshold_v(hp, n_people, n_subpools)
        cfg = ClassifierConfig(
            n_people, n_subpools, int(v),
            int(payload.get("tau", 0)), float(payload.get("rho", 1.0)),
        )
        raw = {
            "type": "classify", "p0": hp.p0, "p1": hp.p1,
            "pi0": hp.pi0, "pi1": hp.pi1,
            "N": cfg.n_people, "L": cfg.n_subpools, "V": cfg.threshold,
            "tau": cfg.tau, "rho": cfg.rho,
        }
        spec = ProtocolSpec(raw, ClassifierPlanner(cfg), "S")
        return spec
    raise InputError(f"unknown protocol type {ptype!r}; expected identify/classify")


@dataclass
class Session:
    id: str
    protocol: ProtocolSpec
    created_at: str
    updated_at: str
    history: list[tuple[Pool, TestOutcome]] = field(default_factory=list)

    def current_step(self) -> Union[Stage, IdentifiedSet, HypothesisDecision]:
        return self.protocol.planner.plan(self.history)

    def pending(self) -> list[dict]:
        step = self.current_step()
        if not isinstance(step, Stage):
            return []
        base = len(self.history)
        return [
            {
                "test_id": base + i + 1,
                "members": pool.sorted_members(),
                "labels": self.protocol.labels_for(pool.sorted_members()),
            }
            for i, pool in enumerate(step.pools)
        ]

    def verdict(self) -> Optional[dict]:
        step = self.current_step()
        if isinstance(step, IdentifiedSet):
            infected = sorted(step.infected)
            return {
                "kind": "identified",
                "infected": infected,
                "labels": self.protocol.labels_for(infected),
            }
        if isinstance(step, HypothesisDecision):
            out = {"kind": "decision", "decision": step.decision.value}
            raw = self.protocol.raw
            if raw["type"] == "classify":
                hp = HypothesisPair(raw["p0"], raw["p1"], raw["pi0"], raw["pi1"])
                cfg = ClassifierConfig(raw["N"], raw["L"], raw["V"], raw["tau"], raw["rho"])
                q0, q1 = q_pair(hp, cfg)
                pf, pd_ = closed_form_pf_pd(q0, q1, cfg.n_subpools, cfg.threshold)
                out["pf"] = pf
                out["pd"] = pd_
            return out
        return None

    def view(self) -> dict:
        verdict = self.verdict()
        return {
            "id": self.id,
            "protocol": self.protocol.raw,
            "status": "concluded" if verdict is not None else "awaiting_results",
            "pending": self.pending(),
            "history": [
                {
                    "test_id": i + 1,
                    "members": pool.sorted_members(),
                    "labels": self.protocol.labels_for(pool.sorted_members()),
                    "outcome": out.value,
                }
                for i, (pool, out) in enumerate(self.history)
            ],
            "verdict": verdict,
            "test_count": len(self.history),
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


class SessionStore:
    """Directory of per-session JSONL event logs with serialized updates."""

    def __init__(self, data_dir: Union[str, Path]):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        if not session_id.replace("-", "").isalnum():
            raise UnknownSession(session_id)
        return self.data_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        line = json.dumps(event, separators=(",", ":"))
        with open(self._path(session_id), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def create(self, protocol_payload: dict) -> Session:
        spec = parse_protocol(protocol_payload)
        # reject protocols whose very first plan() call cannot produce a stage
        first = spec.planner.plan([])
        if not isinstance(first, Stage):
            raise InputError("protocol concludes without any test")
        session_id = uuid.uuid4().hex[:16]
        now = _now()
        session = Session(session_id, spec, now, now)
        self._append(session_id, {
            "event": "created", "at": now, "protocol": spec.raw,
        })
        with self._registry_lock:
            self._cache[session_id] = session
        return session

    def _load(self, session_id: str) -> Session:
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSession(session_id)
        session: Optional[Session] = None
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event["event"] == "created":
                    spec = parse_protocol(event["protocol"])
                    session = Session(session_id, spec, event["at"], event["at"])
                elif event["event"] == "stage":
                    if session is None:
                        raise InputError(f"corrupt log for session {session_id}")
                    session.history.extend(self._validate_stage(session, event["results"]))
                    session.updated_at = event["at"]
        if session is None:
            raise UnknownSession(session_id)
        return session

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            cached = self._cache.get(session_id)
        if cached is not None:
            return cached
        session = self._load(session_id)
        with self._registry_lock:
            return self._cache.setdefault(session_id, session)

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.data_dir.glob("*.jsonl"))

    def list_sessions(self, status: Optional[str] = None) -> list[Session]:
        sessions = [self.get(sid) for sid in self.list_ids()]
        if status is not None:
            sessions = [s for s in sessions if s.view()["status"] == status]
        return sessions

    @staticmethod
    def _validate_stage(
        session: Session, results: list[dict]
    ) -> list[tuple[Pool, TestOutcome]]:
        """Check a submission against the pending stage; no mutation."""
        step = session.current_step()
        if not isinstance(step, Stage):
            raise StageConflict("session already concluded")
        base = len(session.history)
        expected_ids = [base + i + 1 for i in range(len(step.pools))]
        outcomes: dict[int, TestOutcome] = {}
        for r in results:
            try:
                tid = int(r["test_id"])
                outcome = TestOutcome.from_str(str(r["outcome"]))
            except InputError:
                raise
            except (KeyError, TypeError, ValueError):
                raise InputError(f"malformed result entry {r!r}")
            if tid in outcomes:
                raise StageConflict(f"duplicate result for test id {tid}")
            outcomes[tid] = outcome
        if sorted(outcomes) != expected_ids:
            raise StageConflict(
                f"stage requires results for test ids {expected_ids}, "
                f"got {sorted(outcomes)}"
            )
        return [(pool, outcomes[tid]) for tid, pool in zip(expected_ids, step.pools)]

    def submit(self, session_id: str, results: list[dict]) -> Session:
        with self._lock_for(session_id):
            session = self.get(session_id)
            entries = self._validate_stage(session, results)
            now = _now()
            # disk first, then memory: a crash in between is resolved by replay
            self._append(session_id, {
                "event": "stage", "at": now,
                "results": [
                    {"test_id": len(session.history) + i + 1, "outcome": out.value}
                    for i, (_, out) in enumerate(entries)
                ],
            })
            session.history.extend(entries)
            session.updated_at = now
            return session

    def delete(self, session_id: str) -> None:
        with self._lock_for(session_id):
            path = self._path(session_id)
            if not path.exists():
                raise UnknownSession(session_id)
            path.unlink()
            with self._registry_lock:
                self._cache.pop(session_id, None)

    def replay_verdict(self, session_id: str) -> Optional[dict]:
        """Recompute the verdict from the on-disk log alone (audit path)."""
        return self._load(session_id).verdict()
