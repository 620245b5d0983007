import { ConsoleApp } from "./console.js";

const DEFAULT_API = "http://127.0.0.1:8642";

function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? DEFAULT_API;
  const app = new ConsoleApp(root, base);
  const auditId = params.get("audit");
  if (auditId) {
    void app.open(auditId);
  } else {
    app.mount();
  }
}

document.addEventListener("DOMContentLoaded", boot);
