/** Latest-news feed with a staleness banner.
 *
 * A refresh that fails keeps the last fetched summaries on screen and
 * flags them stale instead of blanking the feed.
 */

import type { NewsSummary, PortalClient } from "./api.js";
import { safeHref } from "./transcript.js";

export interface FeedState {
  summaries: NewsSummary[];
  stale: boolean;
}

export const EMPTY_FEED: FeedState = { summaries: [], stale: false };

export async function refreshFeed(
  client: PortalClient,
  previous: FeedState,
  limit = 10,
): Promise<FeedState> {
  try {
    return { summaries: await client.news(limit), stale: false };
  } catch {
    return { summaries: previous.summaries, stale: true };
  }
}

export function renderFeed(container: HTMLElement, banner: HTMLElement, state: FeedState): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  if (state.summaries.length === 0) {
    const empty = doc.createElement("p");
    empty.className = "feed-empty";
    empty.textContent = "No news yet.";
    container.appendChild(empty);
  }
  for (const summary of state.summaries) {
    const item = doc.createElement("article");
    item.className = "feed-item";

    const title = doc.createElement("h3");
    const href = safeHref(summary.url);
    if (href !== null) {
      const link = doc.createElement("a");
      link.href = href;
      link.target = "_blank";
      link.rel = "noopener noreferrer";
      link.textContent = summary.title;
      title.appendChild(link);
    } else {
      title.textContent = summary.title;
    }
    item.appendChild(title);

    const date = doc.createElement("time");
    date.textContent = summary.date;
    item.appendChild(date);

    const excerpt = doc.createElement("p");
    excerpt.textContent = summary.excerpt;
    item.appendChild(excerpt);

    container.appendChild(item);
  }
  banner.hidden = !state.stale;
}
