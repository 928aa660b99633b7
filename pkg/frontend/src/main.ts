import { checkHealth } from "./api.js";
import { getSessionId } from "./session.js";
import { ChatUi, UiElements } from "./ui.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
}

document.addEventListener("DOMContentLoaded", () => {
  const els: UiElements = {
    messages: byId("messages"),
    input: byId<HTMLTextAreaElement>("input"),
    send: byId<HTMLButtonElement>("send"),
    debugToggle: byId<HTMLInputElement>("debug-toggle"),
    debugPanel: byId("debug-panel"),
  };
  const sessionId = getSessionId(localStorage);
  byId("session-label").textContent = sessionId;
  new ChatUi(els, sessionId);

  const status = byId("status");
  void checkHealth().then((health) => {
    if (health) {
      status.classList.add("up");
      status.title = `model ${health.model_version ?? "?"}`;
    } else {
      status.title = "server unreachable";
    }
  });
});
