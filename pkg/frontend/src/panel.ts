/** The per-atom function panel: what the selected atom lets you run.
 *
 * Rows are the granting entries of the monitor's function-list projection;
 * a predicated grant shows its restriction pattern so the user can see the
 * bounds before invoking.  An atom granting nothing gets an explanation
 * instead of an empty table.
 */

import type { FunctionEntry, FunctionListPayload } from "./types";

export function grantingEntries(payload: FunctionListPayload): FunctionEntry[] {
  return payload.entries.filter((e) => e.entry !== "FALSE" && e.entry !== "N/A");
}

export function restrictionSummary(entry: string): string {
  if (entry === "TRUE") {
    return "unrestricted";
  }
  if (entry.startsWith("TRUE_RE:")) {
    return `restricted: ${entry.slice("TRUE_RE:".length)}`;
  }
  if (entry.startsWith("TRUE_PROG:")) {
    return `guarded by program: ${entry.slice("TRUE_PROG:".length)}`;
  }
  return entry;
}

export function renderFunctionPanel(container: HTMLElement,
                                    payload: FunctionListPayload): void {
  container.replaceChildren();
  container.dataset.object = payload.object;
  const heading = document.createElement("h3");
  heading.textContent = `Functions on ${payload.object}`;
  container.appendChild(heading);

  const granted = grantingEntries(payload);
  if (granted.length === 0) {
    const note = document.createElement("p");
    note.className = "panel-empty";
    note.textContent =
      "No functions are available to you on this atom. " +
      "Ask the document's author if you believe you need access.";
    container.appendChild(note);
    return;
  }
  const list = document.createElement("ul");
  list.className = "function-rows";
  for (const entry of granted) {
    const row = document.createElement("li");
    row.dataset.function = entry.function;
    const name = document.createElement("strong");
    name.textContent = entry.function;
    const detail = document.createElement("span");
    detail.textContent = ` — ${restrictionSummary(entry.entry)}`;
    row.append(name, detail);
    list.appendChild(row);
  }
  container.appendChild(list);
}
