import { SessionController } from "./controller.js";

window.addEventListener("load", () => {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app container");
  }
  const controller = new SessionController(root);
  void controller.start({});
});
