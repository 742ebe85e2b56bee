/** Alert subscription form handling.
 *
 * Subscribing resolves to a channel confirmation; the server derives the
 * subscriber id from channel and topics, so repeating a submission shows
 * the same id back.
 */

import type { PortalClient, Subscription } from "./api.js";
import { PortalError } from "./api.js";

export function parseTopics(raw: string): string[] {
  return raw
    .split(",")
    .map((topic) => topic.trim())
    .filter((topic) => topic.length > 0);
}

export function confirmationText(sub: Subscription): string {
  return `Subscribed to channel ${sub.channel} (id ${sub.id}).`;
}

export async function submitSubscription(
  client: PortalClient,
  role: string,
  topicsRaw: string,
  channel: string,
  confirm: HTMLElement,
): Promise<Subscription | null> {
  try {
    const sub = await client.subscribe(role, parseTopics(topicsRaw), channel);
    confirm.textContent = confirmationText(sub);
    confirm.classList.remove("error");
    return sub;
  } catch (err) {
    confirm.textContent =
      err instanceof PortalError ? err.message : "Subscription failed, try again.";
    confirm.classList.add("error");
    return null;
  }
}
