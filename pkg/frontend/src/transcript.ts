/** Transcript rendering: one bubble per turn, in arrival order.
 *
 * Server text goes through textContent, never markup.  A pushed URL is
 * untrusted data and is rendered as a plain web link only; anything that
 * is not http or https is dropped.
 */

import { faceFor } from "./expression.js";

export interface ChatTurnView {
  author: "user" | "robot";
  text: string;
  cue: string[] | null;
  pushUrl: string | null;
}

export function safeHref(url: string): string | null {
  let parsed: URL;
  try {
    parsed = new URL(url);
  } catch {
    return null;
  }
  if (parsed.protocol !== "http:" && parsed.protocol !== "https:") return null;
  return parsed.href;
}

export function turnElement(doc: Document, turn: ChatTurnView): HTMLElement {
  const bubble = doc.createElement("div");
  bubble.className = `turn turn-${turn.author}`;

  const text = doc.createElement("p");
  text.className = "turn-text";
  text.textContent = turn.text;
  bubble.appendChild(text);

  if (turn.author === "robot" && turn.cue && turn.cue.length > 0) {
    const badge = doc.createElement("span");
    badge.className = `cue-badge cue-${faceFor(turn.cue)}`;
    badge.textContent = turn.cue.join(", ");
    bubble.appendChild(badge);
  }

  if (turn.author === "robot" && turn.pushUrl !== null) {
    const href = safeHref(turn.pushUrl);
    if (href !== null) {
      const link = doc.createElement("a");
      link.className = "turn-link";
      link.href = href;
      link.target = "_blank";
      link.rel = "noopener noreferrer";
      link.textContent = href;
      bubble.appendChild(link);
    }
  }
  return bubble;
}

export function appendTurn(list: HTMLElement, turn: ChatTurnView): HTMLElement {
  const element = turnElement(list.ownerDocument, turn);
  list.appendChild(element);
  return element;
}
