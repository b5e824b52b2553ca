import { Api } from "./api.js";
import { ConsoleApp } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");
const app = ConsoleApp.browser(root, new Api(""));
void app.boot();
