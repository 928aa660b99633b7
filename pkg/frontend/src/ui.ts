// DOM wiring for the chat page: bubbles, send control, retry affordance,
// debug panel. All conversation state lives in Transcript; this file only
// mirrors it into the document.

import { ChatHttpError, ChatTimeoutError, sendChat } from "./api.js";
import { formatDebug } from "./debug.js";
import { Transcript } from "./transcript.js";

export interface UiElements {
  messages: HTMLElement;
  input: HTMLInputElement | HTMLTextAreaElement;
  send: HTMLButtonElement;
  debugToggle: HTMLInputElement;
  debugPanel: HTMLElement;
}

export class ChatUi {
  private readonly transcript = new Transcript();
  private inFlight = false;

  constructor(
    private readonly el: UiElements,
    private readonly sessionId: string,
  ) {
    el.send.addEventListener("click", () => void this.submit());
    el.input.addEventListener("keydown", (ev) => {
      if ((ev as KeyboardEvent).key === "Enter" && !(ev as KeyboardEvent).shiftKey) {
        ev.preventDefault();
        void this.submit();
      }
    });
    el.input.addEventListener("input", () => this.syncControls());
    el.debugToggle.addEventListener("change", () => this.syncDebugPanel(null));
    this.syncControls();
  }

  get debugEnabled(): boolean {
    return this.el.debugToggle.checked;
  }

  private syncControls(): void {
    this.el.send.disabled = this.inFlight || this.el.input.value.trim() === "";
  }

  private bubble(who: string, text: string): HTMLElement {
    const div = document.createElement("div");
    div.className = `msg ${who}`;
    div.textContent = text;
    this.el.messages.appendChild(div);
    this.el.messages.scrollTop = this.el.messages.scrollHeight;
    return div;
  }

  private errorBubble(text: string, retryText: string | null): void {
    const div = this.bubble("error", text);
    if (retryText !== null) {
      const btn = document.createElement("button");
      btn.textContent = "retry";
      btn.className = "retry";
      btn.addEventListener("click", () => {
        div.remove();
        void this.deliver(retryText);
      });
      div.appendChild(document.createTextNode(" "));
      div.appendChild(btn);
    }
  }

  private syncDebugPanel(payload: unknown): void {
    if (!this.debugEnabled) {
      this.el.debugPanel.hidden = true;
      return;
    }
    this.el.debugPanel.hidden = false;
    if (payload !== null) {
      this.el.debugPanel.textContent = formatDebug(payload).join("\n");
    }
  }

  async submit(): Promise<void> {
    const text = this.el.input.value.trim();
    if (!text || this.inFlight) return;
    this.el.input.value = "";
    await this.deliver(text);
  }

  // one request in flight per session, always
  private async deliver(text: string): Promise<void> {
    this.inFlight = true;
    this.syncControls();
    this.transcript.append("user", text);
    this.bubble("user", text);
    try {
      const result = await sendChat(this.sessionId, text, this.debugEnabled);
      this.transcript.appendResponses(result.responses);
      for (const reply of result.responses) this.bubble("bot", reply);
      if (this.debugEnabled) this.syncDebugPanel(result.debug);
    } catch (err) {
      if (err instanceof ChatHttpError && err.status < 500) {
        this.transcript.append("error", err.message);
        this.errorBubble(err.message, null);
      } else {
        const reason = err instanceof ChatTimeoutError ? "timed out" : "unreachable";
        this.transcript.append("error", `server ${reason}`);
        this.el.input.value = text; // keep what the user typed
        this.errorBubble(`server ${reason}`, text);
      }
    } finally {
      this.inFlight = false;
      this.syncControls();
      this.el.input.focus();
    }
  }
}
