/** DOM wiring for the chat-search client.
 *
 * Two views over one session API: the Chat-IR loop (feedback per round)
 * and the CIR compose form (reference image + instruction). One query is
 * in flight at a time; submit stays disabled until the response lands.
 */

import { ApiError, Client } from "./api.js";
import type { ChatRound } from "./render.js";
import {
  renderChatHistory,
  renderErrorBanner,
  renderReferencePreview,
  renderResultGrid,
  renderTraceDrawer,
} from "./render.js";
import type { QueryKind, QueryResponse } from "./types.js";

const client = new Client("");

interface TabState {
  kind: QueryKind;
  sessionId: string | null;
  rounds: ChatRound[];
  pending: boolean;
  referenceB64: string | null;
  referenceDataUrl: string | null;
}

const state: TabState = {
  kind: "ChatIR",
  sessionId: null,
  rounds: [],
  pending: false,
  referenceB64: null,
  referenceDataUrl: null,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(html: string): void {
  el("banner").innerHTML = html;
}

function refreshControls(): void {
  const input = el<HTMLInputElement>("feedback-input");
  const submit = el<HTMLButtonElement>("submit-btn");
  const needsImage = state.kind === "CIR" && !state.referenceB64;
  submit.disabled = state.pending || input.value.trim() === "" || needsImage;
  submit.textContent = state.pending ? "searching…" : state.kind === "CIR" ? "compose" : "send";
  el("compose-panel").hidden = state.kind !== "CIR";
  el("round-counter").textContent = String(state.rounds.length);
}

function showResponse(payload: QueryResponse): void {
  el("results").innerHTML = renderResultGrid(payload, (id) => client.imageUrl(id));
  el("trace").innerHTML = renderTraceDrawer(payload);
}

async function ensureSession(): Promise<string> {
  if (state.sessionId) return state.sessionId;
  const info = await client.createSession(state.kind);
  state.sessionId = info.session_id;
  return info.session_id;
}

async function submitQuery(): Promise<void> {
  const input = el<HTMLInputElement>("feedback-input");
  const text = input.value.trim();
  if (text === "" || state.pending) return;
  if (state.kind === "CIR" && !state.referenceB64) {
    setBanner(renderErrorBanner({ code: "MissingReference", message: "select a reference image first" }));
    return;
  }
  state.pending = true;
  setBanner("");
  refreshControls();
  try {
    const sessionId = await ensureSession();
    const payload = await client.query(
      sessionId,
      text,
      state.kind === "CIR" ? state.referenceB64 ?? undefined : undefined,
    );
    state.rounds.push({
      userText: text,
      synthesis: payload.trace.descriptions?.comprehensive_synthesis ?? null,
      round: payload.round,
    });
    el("history").innerHTML = renderChatHistory(state.rounds);
    showResponse(payload);
    input.value = "";
  } catch (err) {
    if (err instanceof ApiError) {
      setBanner(renderErrorBanner({ code: err.code, message: err.message }));
    } else {
      setBanner(renderErrorBanner({ code: "NetworkError", message: String(err) }));
    }
  } finally {
    state.pending = false;
    refreshControls();
  }
}

function resetSession(kind: QueryKind): void {
  state.kind = kind;
  state.sessionId = null;
  state.rounds = [];
  el("history").innerHTML = renderChatHistory([]);
  el("results").innerHTML = "";
  el("trace").innerHTML = "";
  setBanner("");
  refreshControls();
}

function onReferenceSelected(file: File | null): void {
  if (!file) {
    state.referenceB64 = null;
    state.referenceDataUrl = null;
    el("ref-slot").innerHTML = renderReferencePreview(null);
    refreshControls();
    return;
  }
  const reader = new FileReader();
  reader.onload = () => {
    const dataUrl = reader.result as string;
    state.referenceDataUrl = dataUrl;
    state.referenceB64 = dataUrl.slice(dataUrl.indexOf(",") + 1);
    el("ref-slot").innerHTML = renderReferencePreview(dataUrl);
    refreshControls();
  };
  reader.readAsDataURL(file);
}

export function boot(): void {
  el<HTMLButtonElement>("submit-btn").addEventListener("click", () => void submitQuery());
  const input = el<HTMLInputElement>("feedback-input");
  input.addEventListener("input", refreshControls);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void submitQuery();
  });
  el<HTMLSelectElement>("mode-select").addEventListener("change", (event) => {
    resetSession((event.target as HTMLSelectElement).value as QueryKind);
  });
  el<HTMLInputElement>("ref-file").addEventListener("change", (event) => {
    const files = (event.target as HTMLInputElement).files;
    onReferenceSelected(files && files.length ? files[0] : null);
  });
  el<HTMLButtonElement>("new-session-btn").addEventListener("click", () => resetSession(state.kind));
  refreshControls();
}

if (typeof document !== "undefined" && document.getElementById("submit-btn")) {
  boot();
}
