// Mirrors of the session service payloads.  The UI renders these
// verbatim; it never derives pools, labels or verdicts on its own.

export type Outcome = "positive" | "negative";

export interface PendingTest {
  test_id: number;
  members: number[];
  labels: string[];
}

export interface HistoryEntry extends PendingTest {
  outcome: Outcome;
}

export interface IdentifiedVerdict {
  kind: "identified";
  infected: number[];
  labels: string[];
}

export interface DecisionVerdict {
  kind: "decision";
  decision: "H0" | "H1";
  pf: number;
  pd: number;
}

export type Verdict = IdentifiedVerdict | DecisionVerdict;

export interface IdentifyProtocol {
  type: "identify";
  strategy: string;
  n: number;
  p: number;
}

export interface ClassifyProtocol {
  type: "classify";
  p0: number;
  p1: number;
  pi0: number;
  pi1: number;
  N: number;
  L: number;
  V: number;
  tau: number;
  rho: number;
}

export type Protocol = IdentifyProtocol | ClassifyProtocol;

export interface SessionView {
  id: string;
  protocol: Protocol;
  status: "awaiting_results" | "concluded";
  pending: PendingTest[];
  history: HistoryEntry[];
  verdict: Verdict | null;
  test_count: number;
  created_at: string;
  updated_at: string;
}

// Create payloads; omitted fields take server defaults (V is derived).
export interface IdentifyRequest {
  type: "identify";
  strategy: string;
  n?: number;
  p?: number;
}

export interface ClassifyRequest {
  type: "classify";
  p0: number;
  p1: number;
  N: number;
  L: number;
  V?: number;
  tau?: number;
  rho?: number;
}

export type ProtocolRequest = IdentifyRequest | ClassifyRequest;

/** Operator's outcome choices for the pending stage, keyed by test_id. */
export type Draft = Map<number, Outcome>;
