import { CurationStore } from "./state";
import { mount } from "./ui";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8765";

const store = new CurationStore(base);
mount(document.getElementById("app")!, store);
void store.init();
