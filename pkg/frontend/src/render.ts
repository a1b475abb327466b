/** Document rendering: exactly the segments the monitor sent, in order.
 *
 * Denied content never reaches the DOM because it never reaches the client:
 * redacted and blurred segments arrive with empty text, and this module
 * renders bars and tiles from the segment kind alone.  Text is inserted via
 * textContent, never markup.
 */

import type { ViewPayload, ViewSegment } from "./types";

export function renderView(container: HTMLElement, view: ViewPayload): void {
  container.replaceChildren();
  container.dataset.document = view.document;
  for (const segment of view.segments) {
    container.appendChild(renderSegment(segment));
  }
}

function renderSegment(segment: ViewSegment): HTMLElement {
  const element = document.createElement("div");
  element.className = `segment ${segment.kind}`;
  element.dataset.atom = segment.atom;
  element.dataset.kind = segment.kind;
  if (segment.kind === "content") {
    if (segment.atom_kind === "image-ref") {
      const image = document.createElement("img");
      image.src = segment.text;
      image.alt = `image atom ${segment.atom}`;
      element.appendChild(image);
    } else {
      const paragraph = document.createElement("p");
      paragraph.textContent = segment.text;
      element.appendChild(paragraph);
    }
  } else if (segment.kind === "blurred-image") {
    element.classList.add("blur-tile");
    element.setAttribute("role", "img");
    element.setAttribute("aria-label", "image withheld");
  } else {
    element.classList.add("black-bar");
    element.setAttribute("aria-label", "content withheld");
  }
  return element;
}

/** The rendered atom/kind sequence, for contract checks and selection logic. */
export function renderedSegmentList(container: HTMLElement): Array<{ atom: string; kind: string }> {
  return Array.from(container.querySelectorAll<HTMLElement>(".segment")).map((el) => ({
    atom: el.dataset.atom ?? "",
    kind: el.dataset.kind ?? "",
  }));
}
