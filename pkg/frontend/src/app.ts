import { ApiClient, ApiError } from "./api";
import { renderSession, submitEnabled } from "./render";
import type { Draft, Outcome, ProtocolRequest, SessionView } from "./types";

export const STRATEGIES = ["soms4", "sofa", "halving4", "individual"] as const;

// soms4 and halving4 are fixed four-person protocols
const FIXED_N4 = new Set(["soms4", "halving4"]);

export interface IdentifyForm {
  strategy: string;
  n: string;
  p: string;
}

export interface ClassifyForm {
  p0: string;
  p1: string;
  N: string;
  L: string;
  V: string;
  tau: string;
  rho: string;
}

function intField(raw: string, name: string, errors: string[]): number | null {
  const value = Number(raw);
  if (!Number.isInteger(value) || raw.trim() === "") {
    errors.push(`${name} must be an integer`);
    return null;
  }
  return value;
}

function floatField(raw: string, name: string, errors: string[]): number | null {
  const value = Number(raw);
  if (raw.trim() === "" || Number.isNaN(value)) {
    errors.push(`${name} must be a number`);
    return null;
  }
  return value;
}

// Client-side checks mirror the service's own preconditions so the
// operator gets instant feedback; the server stays the authority and
// anything it still rejects is surfaced inline.
export function validateIdentify(form: IdentifyForm): { errors: string[]; protocol?: ProtocolRequest } {
  const errors: string[] = [];
  if (!STRATEGIES.includes(form.strategy as (typeof STRATEGIES)[number])) {
    errors.push(`unknown strategy ${form.strategy}`);
    return { errors };
  }
  const n = FIXED_N4.has(form.strategy) ? 4 : intField(form.n, "n", errors);
  if (n !== null && n < 1) errors.push("n must be at least 1");
  const p = form.p.trim() === "" ? 0 : floatField(form.p, "p", errors);
  if (p !== null && (p < 0 || p >= 1)) errors.push("p must be in [0, 1)");
  if (errors.length > 0) return { errors };
  return {
    errors,
    protocol: { type: "identify", strategy: form.strategy, n: n as number, p: p as number },
  };
}

export function validateClassify(form: ClassifyForm): { errors: string[]; protocol?: ProtocolRequest } {
  const errors: string[] = [];
  const p0 = floatField(form.p0, "p0", errors);
  const p1 = floatField(form.p1, "p1", errors);
  const N = intField(form.N, "N", errors);
  const L = intField(form.L, "L", errors);
  if (p0 !== null && p1 !== null && !(0 < p0 && p0 < p1 && p1 < 1)) {
    errors.push("need 0 < p0 < p1 < 1");
  }
  if (L !== null && L < 2) errors.push("L must be at least 2");
  if (N !== null && L !== null && L >= 2 && N % L !== 0) {
    errors.push(`L must divide N (${N} is not a multiple of ${L})`);
  }
  const maxTau = L !== null && L >= 2 ? Math.ceil(Math.log2(L)) : null;
  const tau = form.tau.trim() === "" ? 0 : intField(form.tau, "tau", errors);
  if (tau !== null && maxTau !== null && (tau < 0 || tau > maxTau)) {
    errors.push(`tau must be in 0..${maxTau}`);
  }
  const V = form.V.trim() === "" ? undefined : intField(form.V, "V", errors);
  if (V !== undefined && V !== null && L !== null && (V < -1 || V >= L)) {
    errors.push(`V must be in -1..${L - 1}`);
  }
  const rho = form.rho.trim() === "" ? 1 : floatField(form.rho, "rho", errors);
  if (rho !== null && (rho < 0 || rho > 1)) errors.push("rho must be in [0, 1]");
  if (errors.length > 0) return { errors };
  const protocol: ProtocolRequest = {
    type: "classify",
    p0: p0 as number,
    p1: p1 as number,
    N: N as number,
    L: L as number,
    tau: tau as number,
    rho: rho as number,
  };
  if (V !== undefined && V !== null) protocol.V = V;
  return { errors, protocol };
}

interface AppState {
  view: SessionView | null;
  draft: Draft;
  inFlight: boolean;
  notice: string | null;
  conflict: boolean;
}

export function mountApp(root: HTMLElement, api: ApiClient): void {
  const state: AppState = {
    view: null,
    draft: new Map<number, Outcome>(),
    inFlight: false,
    notice: null,
    conflict: false,
  };

  root.innerHTML = `
    <h1>poolscreen lab assistant</h1>
    <div id="wizard">
      <h2>New session</h2>
      <label>Protocol
        <select id="ptype">
          <option value="identify">identify infected members</option>
          <option value="classify">classify prevalence</option>
        </select>
      </label>
      <div id="identify-fields">
        <label>Strategy
          <select id="strategy">
            ${STRATEGIES.map((s) => `<option value="${s}">${s}</option>`).join("")}
          </select>
        </label>
        <label>n <input id="n" value="4" size="6"></label>
        <label>p <input id="p" value="" size="6" placeholder="0"></label>
      </div>
      <div id="classify-fields" hidden>
        <label>p0 <input id="p0" value="0.01" size="6"></label>
        <label>p1 <input id="p1" value="0.05" size="6"></label>
        <label>N <input id="N" value="64" size="6"></label>
        <label>L <input id="L" value="4" size="6"></label>
        <label>V <input id="V" value="" size="6" placeholder="auto"></label>
        <label>tau <input id="tau" value="" size="6" placeholder="0"></label>
        <label>rho <input id="rho" value="" size="6" placeholder="1"></label>
      </div>
      <button id="create">Start session</button>
      <div id="wizard-errors" class="errors"></div>
    </div>
    <div id="notice-bar" hidden></div>
    <div id="session-root"></div>
  `;

  const q = <T extends HTMLElement>(selector: string): T => {
    const node = root.querySelector(selector);
    if (!node) throw new Error(`missing element ${selector}`);
    return node as T;
  };

  const wizard = q<HTMLDivElement>("#wizard");
  const ptype = q<HTMLSelectElement>("#ptype");
  const strategySelect = q<HTMLSelectElement>("#strategy");
  const nInput = q<HTMLInputElement>("#n");
  const wizardErrors = q<HTMLDivElement>("#wizard-errors");
  const noticeBar = q<HTMLDivElement>("#notice-bar");
  const sessionRoot = q<HTMLDivElement>("#session-root");

  function syncWizardMode(): void {
    const classify = ptype.value === "classify";
    q<HTMLDivElement>("#identify-fields").hidden = classify;
    q<HTMLDivElement>("#classify-fields").hidden = !classify;
    const fixed = FIXED_N4.has(strategySelect.value);
    nInput.disabled = fixed;
    if (fixed) nInput.value = "4";
  }
  ptype.addEventListener("change", syncWizardMode);
  strategySelect.addEventListener("change", syncWizardMode);
  syncWizardMode();

  function renderNotice(): void {
    if (state.notice === null) {
      noticeBar.hidden = true;
      noticeBar.textContent = "";
      return;
    }
    noticeBar.hidden = false;
    noticeBar.textContent = state.notice;
    if (state.conflict) {
      const refresh = document.createElement("button");
      refresh.id = "refresh";
      refresh.textContent = "Refresh";
      noticeBar.append(refresh);
    }
  }

  function paint(): void {
    renderNotice();
    sessionRoot.innerHTML = "";
    if (state.view === null) {
      wizard.hidden = false;
      return;
    }
    wizard.hidden = true;
    sessionRoot.append(renderSession(state.view, state.draft, state.inFlight));
    const back = document.createElement("button");
    back.id = "new-session";
    back.textContent = "New session";
    sessionRoot.append(back);
  }

  function showView(view: SessionView): void {
    state.view = view;
    state.draft.clear();
    state.inFlight = false;
    state.notice = null;
    state.conflict = false;
    paint();
  }

  async function refreshFromServer(): Promise<void> {
    if (state.view === null) return;
    try {
      showView(await api.getSession(state.view.id));
    } catch (err) {
      state.notice = err instanceof Error ? err.message : String(err);
      state.conflict = false;
      paint();
    }
  }

  async function createSession(): Promise<void> {
    const readValue = (id: string): string => q<HTMLInputElement>(`#${id}`).value;
    const checked =
      ptype.value === "identify"
        ? validateIdentify({ strategy: strategySelect.value, n: nInput.value, p: readValue("p") })
        : validateClassify({
            p0: readValue("p0"),
            p1: readValue("p1"),
            N: readValue("N"),
            L: readValue("L"),
            V: readValue("V"),
            tau: readValue("tau"),
            rho: readValue("rho"),
          });
    if (checked.errors.length > 0 || !checked.protocol) {
      wizardErrors.textContent = checked.errors.join("; ");
      return;
    }
    wizardErrors.textContent = "";
    try {
      showView(await api.createSession(checked.protocol));
    } catch (err) {
      // server rejections (422) land inline next to the form
      wizardErrors.textContent = err instanceof Error ? err.message : String(err);
    }
  }

  async function submitStage(): Promise<void> {
    const view = state.view;
    if (view === null || state.inFlight) return;
    if (!submitEnabled(view.pending, state.draft, state.inFlight)) return;
    const results = view.pending.map((t) => ({
      test_id: t.test_id,
      outcome: state.draft.get(t.test_id) as Outcome,
    }));
    state.inFlight = true;
    paint();
    try {
      showView(await api.submitResults(view.id, results));
    } catch (err) {
      state.inFlight = false;
      if (err instanceof ApiError && err.code === "stage_conflict") {
        state.notice = "Results for this stage were recorded elsewhere. Refresh to see the current state.";
        state.conflict = true;
      } else {
        state.notice = err instanceof Error ? err.message : String(err);
        state.conflict = false;
      }
      paint();
    }
  }

  root.addEventListener("click", (event) => {
    const target = event.target;
    if (!(target instanceof HTMLElement)) return;
    if (target.id === "create") {
      void createSession();
      return;
    }
    if (target.id === "submit") {
      void submitStage();
      return;
    }
    if (target.id === "refresh") {
      void refreshFromServer();
      return;
    }
    if (target.id === "new-session") {
      state.view = null;
      state.draft.clear();
      state.notice = null;
      state.conflict = false;
      paint();
      return;
    }
    if (target.dataset.outcome && target.dataset.testId) {
      if (state.inFlight) return;
      state.draft.set(Number(target.dataset.testId), target.dataset.outcome as Outcome);
      paint();
    }
  });

  paint();
}
