/** Guarded actions: invoke on the monitor, render its answer, refresh audit.
 *
 * Nothing here is optimistic: the result pane changes only after the
 * monitor has answered, and a denial renders the structured refusal the
 * monitor sent - never anything reconstructed client-side.
 */

import type { ApiClient } from "./api";
import { renderAudit } from "./audit";
import type { InvokeRequest, InvokeResponse } from "./types";

export interface ActionPanes {
  result: HTMLElement;
  audit: HTMLElement;
}

export async function runAction(client: ApiClient, request: InvokeRequest,
                                panes: ActionPanes): Promise<InvokeResponse> {
  const response = await client.invoke(request);
  renderResult(panes.result, request, response);
  const audit = await client.getAudit();
  renderAudit(panes.audit, audit.records);
  return response;
}

export function renderResult(container: HTMLElement, request: InvokeRequest,
                             response: InvokeResponse): void {
  container.replaceChildren();
  container.dataset.outcome = response.outcome;
  if (response.outcome !== "allow") {
    const refusal = document.createElement("div");
    refusal.className = "refusal";
    const title = document.createElement("strong");
    title.textContent = `${request.function}: not permitted`;
    const detail = document.createElement("p");
    detail.textContent = String(
      response.result["detail"] ?? "the requested invocation is not permitted");
    const hint = document.createElement("p");
    hint.className = "refusal-hint";
    hint.textContent =
      "Check the atom's function panel for what your grants allow, " +
      "or ask the document's author for wider access.";
    refusal.append(title, detail, hint);
    container.appendChild(refusal);
    return;
  }
  switch (response.result["kind"]) {
    case "search":
      renderSearchResult(container, response);
      break;
    case "copy":
      renderCopyResult(container, response);
      break;
    case "print":
      renderPrintResult(container, response);
      break;
    case "email":
      renderEmailResult(container, response);
      break;
    default: {
      const pre = document.createElement("pre");
      pre.textContent = JSON.stringify(response.result, null, 2);
      container.appendChild(pre);
    }
  }
}

interface SearchHit {
  atom: string | null;
  line_number: number;
  line: string;
  before: string[];
  after: string[];
}

function renderSearchResult(container: HTMLElement, response: InvokeResponse): void {
  const hits = (response.result["hits"] ?? []) as SearchHit[];
  const found = Boolean(response.result["found"]);
  if (response.result["boolean_only"]) {
    const verdict = document.createElement("p");
    verdict.className = "search-quiet";
    verdict.textContent = found ? "match found" : "no match";
    container.appendChild(verdict);
    return;
  }
  if (hits.length === 0) {
    const empty = document.createElement("p");
    empty.textContent = "no matching lines";
    container.appendChild(empty);
    return;
  }
  const list = document.createElement("ol");
  list.className = "search-hits";
  for (const hit of hits) {
    const item = document.createElement("li");
    item.dataset.atom = hit.atom ?? "";
    for (const line of hit.before) {
      item.appendChild(contextLine(line));
    }
    const main = document.createElement("div");
    main.className = "hit-line";
    main.textContent = `${hit.atom ?? "<stdin>"}:${hit.line_number}: ${hit.line}`;
    item.appendChild(main);
    for (const line of hit.after) {
      item.appendChild(contextLine(line));
    }
    list.appendChild(item);
  }
  container.appendChild(list);
}

function contextLine(line: string): HTMLElement {
  const element = document.createElement("div");
  element.className = "context-line";
  element.textContent = line;
  return element;
}

function renderCopyResult(container: HTMLElement, response: InvokeResponse): void {
  const confirmation = document.createElement("div");
  confirmation.className = "copy-confirmation";
  const title = document.createElement("p");
  title.textContent = `copied into ${String(response.result["destination"])}`;
  confirmation.appendChild(title);
  const citation = response.result["citation"] as
    { document: string; atoms: string[] } | null;
  const inserted = (response.result["inserted_atoms"] ?? []) as string[];
  if (citation) {
    const note = document.createElement("p");
    note.className = "citation-notice";
    note.textContent =
      `quote ${inserted[1] ?? "?"} inserted with citation ${inserted[0] ?? "?"} ` +
      `of ${citation.document} (${citation.atoms.join(", ")}); `;
    const warning = document.createElement("em");
    warning.textContent = "removing the citation makes the quote unavailable";
    note.appendChild(warning);
    confirmation.appendChild(note);
  }
  container.appendChild(confirmation);
}

function renderPrintResult(container: HTMLElement, response: InvokeResponse): void {
  const text = String(response.result["text"] ?? "");
  const link = document.createElement("a");
  link.className = "print-download";
  link.textContent = `download print artifact (${String(response.result["pages"])} page(s))`;
  link.href = `data:text/plain;charset=utf-8,${encodeURIComponent(text)}`;
  link.setAttribute("download", "print-artifact.txt");
  container.appendChild(link);
  const preview = document.createElement("pre");
  preview.className = "print-preview";
  preview.textContent = text;
  container.appendChild(preview);
}

function renderEmailResult(container: HTMLElement, response: InvokeResponse): void {
  const note = document.createElement("p");
  note.className = "outbox-confirmation";
  const to = (response.result["to"] ?? []) as string[];
  const cc = (response.result["cc"] ?? []) as string[];
  note.textContent = `queued to ${to.join(", ")} - cc ${cc.join(", ")}`;
  container.appendChild(note);
}
