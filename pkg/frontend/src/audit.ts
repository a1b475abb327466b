/** Audit pane: the monitor's records, newest last, as a plain table. */

import type { AuditRecord } from "./types";

export function renderAudit(container: HTMLElement, records: AuditRecord[]): void {
  container.replaceChildren();
  const table = document.createElement("table");
  table.className = "audit";
  const head = document.createElement("tr");
  for (const title of ["#", "subject", "function", "objects", "outcome"]) {
    const cell = document.createElement("th");
    cell.textContent = title;
    head.appendChild(cell);
  }
  table.appendChild(head);
  for (const record of records) {
    const row = document.createElement("tr");
    row.dataset.sequence = String(record.sequence);
    row.className = `outcome-${record.outcome}`;
    for (const value of [String(record.sequence), record.subject, record.function,
                         record.objects.join(",") || "-", record.outcome]) {
      const cell = document.createElement("td");
      cell.textContent = value;
      row.appendChild(cell);
    }
    table.appendChild(row);
  }
  container.appendChild(table);
}

export function auditRowCount(container: HTMLElement): number {
  return container.querySelectorAll("tr[data-sequence]").length;
}
