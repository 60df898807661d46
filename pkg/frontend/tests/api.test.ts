import { describe, expect, it } from "vitest";

import { ApiError, SessionApi } from "../src/api.js";

interface Captured {
  url: string;
  init?: RequestInit;
}

function stubFetch(status: number, body: unknown, captured: Captured[] = []) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    captured.push({ url, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
}

describe("SessionApi", () => {
  it("posts prompt, preset, and seed on create", async () => {
    const captured: Captured[] = [];
    const api = new SessionApi("", stubFetch(201, { session_id: "abc" }, captured));
    await api.createSession("a dog", "refined", 7);
    expect(captured[0].url).toBe("/api/sessions");
    expect(captured[0].init?.method).toBe("POST");
    expect(JSON.parse(captured[0].init?.body as string)).toEqual({
      prompt: "a dog",
      preset: "refined",
      seed: 7,
    });
  });

  it("omits seed when not given", async () => {
    const captured: Captured[] = [];
    const api = new SessionApi("", stubFetch(201, {}, captured));
    await api.createSession("a dog", "zero");
    expect(JSON.parse(captured[0].init?.body as string)).toEqual({
      prompt: "a dog",
      preset: "zero",
    });
  });

  it("passes accepted item ids through verbatim", async () => {
    const captured: Captured[] = [];
    const api = new SessionApi("", stubFetch(200, {}, captured));
    const ids = ["numeracy:g0", "attribute:g1:d0:yellow"];
    await api.iterate("abc", { accepted_item_ids: ids });
    const body = JSON.parse(captured[0].init?.body as string);
    expect(body.accepted_item_ids).toEqual(ids);
    expect(captured[0].url).toBe("/api/sessions/abc/iterate");
  });

  it("surfaces server error bodies as ApiError", async () => {
    const api = new SessionApi(
      "",
      stubFetch(400, {
        code: "grammar_error",
        message: "unknown attribute 'purple' (token 1)",
        detail: { position: 1 },
      }),
    );
    const error = await api.createSession("a purple dog", "zero").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(400);
    expect(error.code).toBe("grammar_error");
    expect((error.detail as { position: number }).position).toBe(1);
  });

  it("builds render urls from base", () => {
    const api = new SessionApi("http://host:1");
    expect(api.renderUrl("abc", 2)).toBe(
      "http://host:1/api/sessions/abc/iterations/2/render.svg",
    );
  });

  it("unwraps the preset listing", async () => {
    const api = new SessionApi("", stubFetch(200, { presets: ["refined", "zero"] }));
    expect(await api.listPresets()).toEqual(["refined", "zero"]);
  });
});
