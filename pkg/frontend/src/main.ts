/**
 * Browser bootstrap: wire the store, renderer and connection to the DOM.
 * The page URL decides the endpoint: ?server=ws://host:port (defaults to
 * ws://<page-host>:8943) and ?operator=<id>.
 */

import { ConsoleConnection } from "./connection.js";
import { renderQueue } from "./render.js";
import { ConsoleStore } from "./store.js";

function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const url =
    params.get("server") ?? `ws://${window.location.hostname || "127.0.0.1"}:8943`;
  const operatorId = params.get("operator") ?? "console-operator";
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");

  const store = new ConsoleStore();
  const redraw = () => {
    root.innerHTML = renderQueue(store);
  };

  const connection = new ConsoleConnection(url, {
    onMessage: (msg) => {
      store.handleMessage(msg);
      redraw();
    },
    onSessionStart: () => {
      store.startSession();
      redraw();
    },
    onSessionEnd: () => {
      store.endSession();
      redraw();
    },
    onBadFrame: (reason) => {
      store.notices.push({ kind: "error", text: `bad frame: ${reason}` });
      redraw();
    },
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const eid = target.getAttribute("data-eid");
    const decision = target.getAttribute("data-decision");
    if (!eid || (decision !== "abort" && decision !== "proceed")) return;
    const message = store.submitDecision(eid, decision, operatorId);
    if (message && !connection.send(message)) {
      store.notices.push({ kind: "error", text: "not connected; decision dropped" });
    }
    redraw();
  });

  connection.connect();
  redraw();
}

bootstrap();
