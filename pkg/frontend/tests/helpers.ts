import type { SessionView } from "../src/types";

export async function until(cond: () => boolean, ms = 5000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > ms) throw new Error("condition not met in time");
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

export function card(root: HTMLElement, testId: number): HTMLElement {
  const node = root.querySelector(`.pool-card[data-test-id="${testId}"]`);
  if (!(node instanceof HTMLElement)) throw new Error(`no card for test ${testId}`);
  return node;
}

export function clickToggle(root: HTMLElement, testId: number, outcome: "positive" | "negative"): void {
  const button = root.querySelector(
    `button[data-test-id="${testId}"][data-outcome="${outcome}"]`,
  );
  if (!(button instanceof HTMLButtonElement)) {
    throw new Error(`no ${outcome} toggle for test ${testId}`);
  }
  button.click();
}

export function submitButton(root: HTMLElement): HTMLButtonElement {
  const button = root.querySelector("#submit");
  if (!(button instanceof HTMLButtonElement)) throw new Error("no submit button");
  return button;
}

export function text(root: HTMLElement, selector: string): string {
  return root.querySelector(selector)?.textContent ?? "";
}

export function somsStage1(): SessionView {
  return {
    id: "fix-soms-1",
    protocol: { type: "identify", strategy: "soms4", n: 4, p: 0 },
    status: "awaiting_results",
    pending: [{ test_id: 1, members: [0, 1, 2, 3], labels: ["1", "2", "3", "4"] }],
    history: [],
    verdict: null,
    test_count: 0,
    created_at: "2024-05-01T10:00:00+00:00",
    updated_at: "2024-05-01T10:00:00+00:00",
  };
}

export function somsStage2(): SessionView {
  return {
    ...somsStage1(),
    pending: [
      { test_id: 2, members: [0, 1], labels: ["1", "2"] },
      { test_id: 3, members: [2, 3], labels: ["3", "4"] },
      { test_id: 4, members: [0, 2], labels: ["1", "3"] },
    ],
    history: [{ test_id: 1, members: [0, 1, 2, 3], labels: ["1", "2", "3", "4"], outcome: "positive" }],
    test_count: 1,
  };
}

export function somsConcluded(): SessionView {
  return {
    ...somsStage1(),
    status: "concluded",
    pending: [],
    history: [
      { test_id: 1, members: [0, 1, 2, 3], labels: ["1", "2", "3", "4"], outcome: "positive" },
      { test_id: 2, members: [0, 1], labels: ["1", "2"], outcome: "positive" },
      { test_id: 3, members: [2, 3], labels: ["3", "4"], outcome: "positive" },
      { test_id: 4, members: [0, 2], labels: ["1", "3"], outcome: "negative" },
    ],
    verdict: { kind: "identified", infected: [1, 3], labels: ["2", "4"] },
    test_count: 4,
  };
}

export function classifyTau1(): SessionView {
  return {
    id: "fix-cls-tau1",
    protocol: {
      type: "classify", p0: 0.01, p1: 0.05, pi0: 0.5, pi1: 0.5,
      N: 64, L: 4, V: 1, tau: 1, rho: 1,
    },
    status: "awaiting_results",
    pending: [
      { test_id: 1, members: [0, 1], labels: ["S1", "S2"] },
      { test_id: 2, members: [2, 3], labels: ["S3", "S4"] },
    ],
    history: [],
    verdict: null,
    test_count: 0,
    created_at: "2024-05-01T10:00:00+00:00",
    updated_at: "2024-05-01T10:00:00+00:00",
  };
}

export function classifyConcluded(): SessionView {
  return {
    ...classifyTau1(),
    protocol: { ...classifyTau1().protocol, tau: 0 } as SessionView["protocol"],
    status: "concluded",
    pending: [],
    history: [
      { test_id: 1, members: [0, 1, 2, 3], labels: ["S1", "S2", "S3", "S4"], outcome: "positive" },
      { test_id: 2, members: [0, 1], labels: ["S1", "S2"], outcome: "negative" },
      { test_id: 3, members: [2, 3], labels: ["S3", "S4"], outcome: "positive" },
      { test_id: 4, members: [2], labels: ["S3"], outcome: "negative" },
      { test_id: 5, members: [3], labels: ["S4"], outcome: "positive" },
    ],
    verdict: {
      kind: "decision",
      decision: "H0",
      pf: 0.10762889880753441,
      pd: 0.7715420562961153,
    },
    test_count: 5,
  };
}
