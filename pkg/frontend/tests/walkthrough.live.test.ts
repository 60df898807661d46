// End-to-end walkthrough against a live service: create a session from
// the scripted prompt, inspect the feedback, accept the offered items,
// iterate twice, and fetch the final render. Run with `npm run test:live`
// (spawns `intentloop serve` from the repository's Python package).

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { App } from "../src/app.js";

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForService(timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/api/presets`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  const store = mkdtempSync(join(tmpdir(), "intentloop-ui-"));
  server = spawn(
    "python3",
    ["-m", "intentloop.cli", "serve", "--port", String(PORT), "--store", store],
    { stdio: "ignore" },
  );
  await waitForService();
}, 30000);

afterAll(() => {
  server?.kill();
});

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 50));
}

describe("scripted walkthrough against the live service", () => {
  it("create, inspect, accept, iterate twice, view final render", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const api = new SessionApi(BASE);
    const app = new App(root, api);
    await app.showStart();

    // the preset picker is populated from the live config endpoint
    const presetSelect = root.querySelector("#preset-select") as HTMLSelectElement;
    const presets = Array.from(presetSelect.options).map((o) => o.value);
    expect(presets).toContain("scenario");

    // create: scripted prompt and seed; enrichment adds the relation
    (root.querySelector("#prompt-input") as HTMLInputElement).value = "a girl and a dog";
    presetSelect.value = "scenario";
    (root.querySelector("#seed-input") as HTMLInputElement).value = "34";
    (root.querySelector("#create-button") as HTMLButtonElement).click();
    for (let i = 0; i < 100 && !root.querySelector("#session-screen"); i += 1) {
      await flush();
    }
    expect(root.querySelector("#session-screen")).toBeTruthy();
    expect(root.textContent).toContain("a girl right_of a dog");

    // iteration 0: the girl is missing — one numeracy error item
    const firstItems = Array.from(
      root.querySelectorAll<HTMLInputElement>(".item-checkbox:not(:disabled)"),
    );
    expect(firstItems.map((i) => i.value)).toEqual(["numeracy:g0"]);
    expect(root.textContent).toContain("numeracy on girl");

    // accept and iterate: the dog comes back duplicated
    firstItems[0].checked = true;
    (root.querySelector("#iterate-button") as HTMLButtonElement).click();
    for (let i = 0; i < 100 && !root.textContent?.includes("numeracy on dog"); i += 1) {
      await flush();
    }
    const secondItems = Array.from(
      root.querySelectorAll<HTMLInputElement>(".item-checkbox:not(:disabled)"),
    );
    expect(secondItems.map((i) => i.value)).toEqual(["numeracy:g1"]);
    expect(root.textContent).toContain("expected 1, observed 2");

    // accept and iterate again: satisfied
    secondItems[0].checked = true;
    (root.querySelector("#iterate-button") as HTMLButtonElement).click();
    for (let i = 0; i < 100 && !root.querySelector("#session-complete"); i += 1) {
      await flush();
    }
    expect(root.querySelector("#status-badge")?.textContent).toBe("satisfied");
    expect(
      (root.querySelector("#iterate-button") as HTMLButtonElement).disabled,
    ).toBe(true);
    const chips = root.querySelectorAll("#history-strip .chip");
    expect(chips).toHaveLength(3);

    // the final render is a real SVG with exactly one girl and one dog
    const src = root.querySelector("#render-view")?.getAttribute("src") ?? "";
    const svg = await (await fetch(src)).text();
    expect(svg).toContain("<svg");
    expect(svg.match(/>girl</g)).toHaveLength(1);
    expect(svg.match(/>dog</g)).toHaveLength(1);

    // statelessness: a fresh app instance rebuilds the same screen
    const sessionHash = window.location.hash;
    document.body.innerHTML = '<div id="app"></div>';
    const freshRoot = document.getElementById("app")!;
    const fresh = new App(freshRoot, api);
    window.location.hash = sessionHash;
    await fresh.route();
    expect(freshRoot.querySelector("#status-badge")?.textContent).toBe("satisfied");
    expect(freshRoot.querySelectorAll("#history-strip .chip")).toHaveLength(3);
  }, 60000);
});
