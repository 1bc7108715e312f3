import { ApiClient } from "./api.js";
import { defaultStore, DraftStore } from "./drafts.js";
import { SessionController } from "./session.js";
import { AppView } from "./view.js";

// Same-origin by default; ?api=http://host:port points the UI at a
// service running elsewhere (e.g. `amselect serve` on another port).
const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "");
const controller = new SessionController(api, new DraftStore(defaultStore()));

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");
void new AppView(root, api, controller).mount();
