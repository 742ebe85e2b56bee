/** Page wiring: chat box, expression indicator, pushed-URL panel,
 * news feed, and the subscription form.
 *
 * One chat request is in flight at a time; send stays disabled until the
 * reply lands or fails.  A failed send keeps the user's bubble and offers
 * a retry that does not duplicate it.
 */

import { PortalClient } from "./api.js";
import { FACE_GLYPHS, faceFor } from "./expression.js";
import { EMPTY_FEED, refreshFeed, renderFeed } from "./newsfeed.js";
import { rememberSession, storedSession } from "./session.js";
import { appendTurn, safeHref } from "./transcript.js";
import { submitSubscription } from "./subscribe.js";

interface Elements {
  transcript: HTMLElement;
  input: HTMLInputElement;
  send: HTMLButtonElement;
  face: HTMLElement;
  panel: HTMLElement;
  panelLink: HTMLAnchorElement;
  panelFrame: HTMLIFrameElement;
  feed: HTMLElement;
  feedStale: HTMLElement;
  subRole: HTMLSelectElement;
  subTopics: HTMLInputElement;
  subChannel: HTMLInputElement;
  subConfirm: HTMLElement;
}

function grab(doc: Document, id: string): HTMLElement {
  const element = doc.getElementById(id);
  if (element === null) throw new Error(`missing page element #${id}`);
  return element;
}

export class ChatApp {
  private inFlight = false;
  private feedState = EMPTY_FEED;
  private readonly el: Elements;

  constructor(
    private readonly doc: Document,
    private readonly client: PortalClient,
    private readonly storage: Storage,
  ) {
    this.el = {
      transcript: grab(doc, "transcript"),
      input: grab(doc, "chat-input") as HTMLInputElement,
      send: grab(doc, "chat-send") as HTMLButtonElement,
      face: grab(doc, "face"),
      panel: grab(doc, "panel"),
      panelLink: grab(doc, "panel-link") as HTMLAnchorElement,
      panelFrame: grab(doc, "panel-frame") as HTMLIFrameElement,
      feed: grab(doc, "feed"),
      feedStale: grab(doc, "feed-stale"),
      subRole: grab(doc, "sub-role") as HTMLSelectElement,
      subTopics: grab(doc, "sub-topics") as HTMLInputElement,
      subChannel: grab(doc, "sub-channel") as HTMLInputElement,
      subConfirm: grab(doc, "sub-confirm"),
    };
    this.showFace(null);
    this.el.input.addEventListener("input", () => this.syncSendState());
    this.syncSendState();

    grab(doc, "chat-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void this.send();
    });
    grab(doc, "subscribe-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void submitSubscription(
        this.client,
        this.el.subRole.value,
        this.el.subTopics.value,
        this.el.subChannel.value,
        this.el.subConfirm,
      );
    });
  }

  async start(): Promise<void> {
    this.feedState = await refreshFeed(this.client, this.feedState);
    renderFeed(this.el.feed, this.el.feedStale, this.feedState);
  }

  private syncSendState(): void {
    this.el.send.disabled = this.inFlight || this.el.input.value.trim() === "";
  }

  private showFace(cue: string[] | null): void {
    const face = faceFor(cue);
    this.el.face.textContent = FACE_GLYPHS[face];
    this.el.face.dataset["face"] = face;
  }

  private showPanel(pushUrl: string): void {
    const href = safeHref(pushUrl);
    if (href === null) return;
    this.el.panelLink.href = href;
    this.el.panelLink.textContent = href;
    this.el.panelFrame.src = href;
    this.el.panel.hidden = false;
  }

  async send(): Promise<void> {
    const text = this.el.input.value.trim();
    if (text === "" || this.inFlight) return;
    this.el.input.value = "";
    appendTurn(this.el.transcript, { author: "user", text, cue: null, pushUrl: null });
    await this.deliver(text);
  }

  /** Send text that already has its user bubble on screen. */
  private async deliver(text: string): Promise<void> {
    this.inFlight = true;
    this.syncSendState();
    try {
      const reply = await this.client.chat(text, storedSession(this.storage));
      rememberSession(this.storage, reply.session_id);
      appendTurn(this.el.transcript, {
        author: "robot",
        text: reply.text,
        cue: reply.cue,
        pushUrl: reply.push_url,
      });
      this.showFace(reply.cue);
      if (reply.push_url !== null) this.showPanel(reply.push_url);
    } catch {
      this.offerRetry(text);
    } finally {
      this.inFlight = false;
      this.syncSendState();
    }
  }

  private offerRetry(text: string): void {
    const notice = this.doc.createElement("div");
    notice.className = "turn turn-error";
    const message = this.doc.createElement("p");
    message.textContent = "The portal did not answer.";
    notice.appendChild(message);
    const retry = this.doc.createElement("button");
    retry.type = "button";
    retry.className = "retry";
    retry.textContent = "Retry";
    retry.addEventListener("click", () => {
      notice.remove();
      void this.deliver(text);
    });
    notice.appendChild(retry);
    this.el.transcript.appendChild(notice);
  }
}

export function boot(doc: Document, baseUrl: string, storage: Storage): ChatApp {
  const app = new ChatApp(doc, new PortalClient(baseUrl), storage);
  void app.start();
  return app;
}
