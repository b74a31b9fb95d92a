import { App } from "./app.js";

const app = new App(document.getElementById("app")!);
void app.start();
