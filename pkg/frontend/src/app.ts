/** Workbench wiring: session, document list, view, panel, actions, audit.
 *
 * The view model is whatever the monitor last answered; the client holds no
 * policy of its own.  A 401 anywhere drops to the session banner.
 */

import { runAction } from "./actions";
import { ApiClient, SessionExpiredError } from "./api";
import { renderAudit } from "./audit";
import { renderFunctionPanel } from "./panel";
import { renderView } from "./render";

interface Panes {
  banner: HTMLElement;
  login: HTMLElement;
  documents: HTMLElement;
  view: HTMLElement;
  panel: HTMLElement;
  result: HTMLElement;
  audit: HTMLElement;
}

export function startWorkbench(root: Document = document): void {
  const panes: Panes = {
    banner: must(root, "#banner"),
    login: must(root, "#login"),
    documents: must(root, "#documents"),
    view: must(root, "#view"),
    panel: must(root, "#panel"),
    result: must(root, "#result"),
    audit: must(root, "#audit"),
  };
  const client = new ApiClient();
  let currentDocument = "";

  const guard = (work: () => Promise<void>) => () =>
    work().catch((error) => {
      if (error instanceof SessionExpiredError) {
        panes.banner.textContent = "session expired - sign in again";
        panes.banner.classList.add("visible");
      } else {
        panes.banner.textContent = String(error);
        panes.banner.classList.add("visible");
      }
    });

  const loginForm = must(root, "#login-form") as HTMLFormElement;
  loginForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const token = (must(root, "#token") as HTMLInputElement).value;
    guard(async () => {
      const info = await client.createSession(token);
      panes.banner.classList.remove("visible");
      panes.login.classList.add("hidden");
      must(root, "#whoami").textContent = `${info.subject} (${info.role})`;
      await refreshDocuments();
    })();
  });

  async function refreshDocuments(): Promise<void> {
    const { documents } = await client.getDocuments();
    panes.documents.replaceChildren();
    for (const doc of documents) {
      const button = root.createElement("button");
      button.textContent = `${doc.id} (${doc.atoms})`;
      button.dataset.doc = doc.id;
      button.addEventListener("click", guard(async () => {
        currentDocument = doc.id;
        renderView(panes.view, await client.getView(doc.id));
      }));
      panes.documents.appendChild(button);
    }
  }

  panes.view.addEventListener("click", (event) => {
    const segment = (event.target as HTMLElement).closest<HTMLElement>(".segment");
    if (!segment || !currentDocument) {
      return;
    }
    const atom = segment.dataset.atom ?? "";
    guard(async () => {
      renderFunctionPanel(panes.panel, await client.getAtomFunctions(currentDocument, atom));
    })();
  });

  const actionForm = must(root, "#action-form") as HTMLFormElement;
  actionForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const fn = (must(root, "#action-function") as HTMLInputElement).value;
    const args = (must(root, "#action-args") as HTMLInputElement).value;
    const optionsRaw = (must(root, "#action-options") as HTMLInputElement).value;
    guard(async () => {
      const options: Record<string, string | null> = {};
      for (const pair of optionsRaw.split(";").filter(Boolean)) {
        const eq = pair.indexOf("=");
        if (eq < 0) {
          options[pair] = null;
        } else {
          options[pair.slice(0, eq)] = pair.slice(eq + 1);
        }
      }
      await runAction(client, {
        function: fn,
        args: args.split(/\s+/).filter(Boolean),
        options,
      }, { result: panes.result, audit: panes.audit });
    })();
  });

  must(root, "#audit-refresh").addEventListener("click", guard(async () => {
    renderAudit(panes.audit, (await client.getAudit()).records);
  }));
}

function must(root: Document, selector: string): HTMLElement {
  const element = root.querySelector<HTMLElement>(selector);
  if (!element) {
    throw new Error(`missing element ${selector}`);
  }
  return element;
}

if (typeof window !== "undefined" && document.readyState !== "loading") {
  startWorkbench();
} else if (typeof window !== "undefined") {
  document.addEventListener("DOMContentLoaded", () => startWorkbench());
}
