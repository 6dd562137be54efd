// Pure view layer: every function here maps server payloads (plus the
// operator's outcome draft) to DOM nodes.  No fetching, no protocol
// logic; pools, labels and verdicts are rendered exactly as received.

import type {
  Draft,
  HistoryEntry,
  PendingTest,
  Protocol,
  SessionView,
  Verdict,
} from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function joinNames(labels: string[]): string {
  if (labels.length === 0) return "none";
  if (labels.length === 1) return labels[0];
  return labels.slice(0, -1).join(", ") + " and " + labels[labels.length - 1];
}

export function protocolSummary(protocol: Protocol): string {
  if (protocol.type === "identify") {
    const p = protocol.p > 0 ? `, p=${protocol.p}` : "";
    return `${protocol.strategy} identification, n=${protocol.n}${p}`;
  }
  return (
    `classifier N=${protocol.N}, L=${protocol.L}, V=${protocol.V}, ` +
    `tau=${protocol.tau}, rho=${protocol.rho} ` +
    `(p0=${protocol.p0}, p1=${protocol.p1})`
  );
}

export function percent(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

/** The stage can be sent once every pending pool has a recorded outcome. */
export function submitEnabled(
  pending: PendingTest[],
  draft: Draft,
  inFlight: boolean,
): boolean {
  if (inFlight || pending.length === 0) return false;
  return pending.every((t) => draft.has(t.test_id));
}

export function renderPoolCard(test: PendingTest, draft: Draft): HTMLElement {
  const card = el("div", "pool-card");
  card.dataset.testId = String(test.test_id);

  const title = el("div", "pool-title", `Test ${test.test_id}`);
  const membersLine = el("div", "pool-members", `{${test.labels.join(", ")}}`);
  card.append(title, membersLine);

  const chosen = draft.get(test.test_id);
  for (const outcome of ["positive", "negative"] as const) {
    const button = el("button", "toggle", outcome === "positive" ? "Positive" : "Negative");
    button.dataset.testId = String(test.test_id);
    button.dataset.outcome = outcome;
    if (chosen === outcome) button.classList.add("selected");
    card.append(button);
  }
  return card;
}

export function renderHistory(history: HistoryEntry[]): HTMLElement {
  const list = el("ol", "history");
  // server order is the timeline; do not sort
  for (const entry of history) {
    const item = el(
      "li",
      `history-entry ${entry.outcome}`,
      `Test ${entry.test_id} {${entry.labels.join(", ")}}: ${entry.outcome}`,
    );
    list.append(item);
  }
  return list;
}

export function renderVerdict(verdict: Verdict): HTMLElement {
  const banner = el("div", "verdict");
  if (verdict.kind === "identified") {
    const names =
      verdict.labels.length > 0
        ? `infected: persons ${joinNames(verdict.labels)}`
        : "infected: none";
    banner.append(el("div", "verdict-main", names));
  } else {
    banner.append(el("div", "verdict-main", `Decision: ${verdict.decision}`));
    banner.append(
      el(
        "div",
        "verdict-context",
        `P_F ${percent(verdict.pf)} / P_D ${percent(verdict.pd)}`,
      ),
    );
  }
  return banner;
}

export function renderSession(
  view: SessionView,
  draft: Draft,
  inFlight: boolean,
): HTMLElement {
  const root = el("div", "session");
  root.dataset.sessionId = view.id;

  const header = el("div", "session-header");
  header.append(el("div", "session-id", `Session ${view.id}`));
  header.append(el("div", "protocol-summary", protocolSummary(view.protocol)));
  header.append(
    el("div", "test-count", `${view.test_count} test${view.test_count === 1 ? "" : "s"} used`),
  );
  root.append(header);

  if (view.verdict) {
    root.append(renderVerdict(view.verdict));
  }

  if (view.pending.length > 0) {
    const stage = el("div", "stage");
    stage.append(el("h2", undefined, "Pending pools"));
    for (const test of view.pending) {
      stage.append(renderPoolCard(test, draft));
    }
    const submit = el("button", "submit", inFlight ? "Submitting…" : "Submit stage");
    submit.id = "submit";
    submit.disabled = !submitEnabled(view.pending, draft, inFlight);
    stage.append(submit);
    root.append(stage);
  }

  if (view.history.length > 0) {
    const block = el("div", "history-block");
    block.append(el("h2", undefined, "History"));
    block.append(renderHistory(view.history));
    root.append(block);
  }
  return root;
}
