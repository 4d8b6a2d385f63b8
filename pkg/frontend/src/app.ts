/** Browser bootstrap: wires the controller to the DOM. */

import { ApiClient } from "./api.js";
import { ChatController, ChatView } from "./controller.js";

function mount(): void {
  const messages = document.getElementById("messages")!;
  const progress = document.getElementById("progress")!;
  const errors = document.getElementById("errors")!;
  const tracePane = document.getElementById("trace-pane")!;
  const form = document.getElementById("composer") as HTMLFormElement;
  const input = document.getElementById("utterance") as HTMLInputElement;
  const send = document.getElementById("send") as HTMLButtonElement;

  const controller = new ChatController(new ApiClient(""), (view: ChatView) => {
    messages.innerHTML = view.messagesHtml;
    progress.innerHTML = view.progressHtml;
    errors.innerHTML = view.errorHtml;
    input.disabled = view.inputDisabled;
    send.disabled = view.inputDisabled;
    if (!view.inputDisabled) input.focus();
    messages.scrollTop = messages.scrollHeight;
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value;
    input.value = "";
    void controller.send(text);
  });

  messages.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (!target.classList.contains("show-trace")) return;
    const index = Number(target.dataset.turn);
    void controller.traceHtml(index).then((html) => {
      tracePane.innerHTML = `<h2>Turn ${index} pipeline</h2>${html}`;
    });
  });

  input.focus();
}

document.addEventListener("DOMContentLoaded", mount);
