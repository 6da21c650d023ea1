// Entry point: wire the app to a live service from URL parameters, e.g.
//   index.html?service=http://127.0.0.1:8571&session=ab12cd34ef56

import { ApiClient } from "./api.js";
import { AnnotationApp } from "./app.js";
import { BrowserStorage, OfflineCommitQueue } from "./queue.js";

function bootstrap(): void {
  const params = new URLSearchParams(window.location.search);
  const service = params.get("service") ?? "http://127.0.0.1:8571";
  const session = params.get("session");
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  if (!session) {
    root.innerHTML =
      `<div class="banner">missing ?session=… parameter — start the trainer with ` +
      `<code>kgtyperr annotate-serve</code> and open this page with its session id</div>`;
    return;
  }
  root.tabIndex = 0;
  const client = new ApiClient(service);
  const queue = new OfflineCommitQueue(new BrowserStorage(`kgtyperr-offline-${session}`));
  const app = new AnnotationApp(root, client, session, queue);
  app.start();
  root.focus();
}

bootstrap();
