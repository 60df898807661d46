// Screen controller. Everything rendered here is rebuilt from GET
// responses, so a page reload always reconstructs the same view.

import { ApiError, FeedbackItem, IterateBody, SessionApi, SessionView } from "./api.js";

const PREDICATES = ["left_of", "right_of", "above", "below"];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function describeItem(item: FeedbackItem): string {
  const target =
    (item.target.category as string) ??
    (item.target.subject as string) ??
    JSON.stringify(item.target);
  return `${item.kind} on ${target}: expected ${item.expected}, observed ${item.observed}`;
}

export class App {
  constructor(
    private readonly root: HTMLElement,
    readonly api: SessionApi,
  ) {}

  start(): Promise<void> {
    window.addEventListener("hashchange", () => void this.route());
    return this.route();
  }

  async route(): Promise<void> {
    const hash = window.location.hash;
    const match = /^#\/session\/([0-9a-f]+)$/.exec(hash);
    if (match) {
      await this.showSession(match[1]);
    } else {
      await this.showStart();
    }
  }

  // -- start screen -----------------------------------------------------

  async showStart(): Promise<void> {
    let presets: string[] = [];
    try {
      presets = await this.api.listPresets();
    } catch {
      presets = ["refined"];
    }
    const promptInput = el("input", {
      id: "prompt-input",
      placeholder: "a girl and a dog",
      value: "",
    });
    const presetSelect = el(
      "select",
      { id: "preset-select" },
      presets.map((name) =>
        el("option", name === "refined" ? { value: name, selected: "" } : { value: name }, [name]),
      ),
    );
    const seedInput = el("input", { id: "seed-input", placeholder: "seed (optional)" });
    const error = el("p", { id: "start-error", class: "error", hidden: "" });
    const button = el("button", { id: "create-button" }, ["Generate"]);

    button.addEventListener("click", () => void this.createSession());
    promptInput.addEventListener("keydown", (event) => {
      if ((event as KeyboardEvent).key === "Enter") void this.createSession();
    });

    this.root.replaceChildren(
      el("section", { id: "start-screen" }, [
        el("h1", {}, ["intentloop"]),
        el("p", { class: "hint" }, [
          "Describe a scene; the loop renders it, checks the result, and refines.",
        ]),
        el("div", { class: "row" }, [promptInput, presetSelect, seedInput, button]),
        error,
      ]),
    );
  }

  private async createSession(): Promise<void> {
    const prompt = (document.getElementById("prompt-input") as HTMLInputElement).value;
    const preset = (document.getElementById("preset-select") as HTMLSelectElement).value;
    const seedRaw = (document.getElementById("seed-input") as HTMLInputElement).value;
    const seed = seedRaw.trim() === "" ? undefined : Number(seedRaw);
    const error = document.getElementById("start-error") as HTMLElement;
    try {
      const view = await this.api.createSession(prompt, preset, seed);
      window.location.hash = `#/session/${view.session_id}`;
      await this.route();
    } catch (exc) {
      error.hidden = false;
      if (exc instanceof ApiError) {
        const position = (exc.detail as { position?: number })?.position;
        error.textContent =
          position !== undefined ? `${exc.message} — check token ${position}` : exc.message;
      } else {
        error.textContent = String(exc);
      }
    }
  }

  // -- session screen ---------------------------------------------------

  async showSession(sessionId: string, selectedK?: number): Promise<void> {
    let view: SessionView;
    try {
      view = await this.api.getSession(sessionId);
    } catch (exc) {
      this.root.replaceChildren(
        el("section", {}, [
          el("p", { class: "error" }, [exc instanceof ApiError ? exc.message : String(exc)]),
          this.backLink(),
        ]),
      );
      return;
    }
    this.renderSession(view, selectedK ?? view.k);
  }

  private renderSession(view: SessionView, selectedK: number): void {
    const terminal = view.status !== "active";

    const image = el("img", {
      id: "render-view",
      src: this.api.renderUrl(view.session_id, selectedK),
      alt: `iteration ${selectedK}`,
    });

    const history = el(
      "nav",
      { id: "history-strip" },
      Array.from({ length: view.iterations }, (_, k) => {
        const button = el(
          "button",
          {
            class: k === selectedK ? "chip selected" : "chip",
            "data-k": String(k),
          },
          [`iteration ${k}`],
        );
        button.addEventListener("click", () => this.renderSession(view, k));
        return button;
      }),
    );

    const checklist = el(
      "ul",
      { id: "feedback-list" },
      view.report.items.map((item) => {
        const checkbox = el("input", {
          type: "checkbox",
          class: "item-checkbox",
          value: item.item_id,
        }) as HTMLInputElement;
        if (terminal || item.severity !== "error") checkbox.disabled = true;
        return el("li", { class: `item ${item.severity}` }, [
          el("label", {}, [checkbox, ` [${item.severity}] ${describeItem(item)}`]),
        ]);
      }),
    );
    const emptyNote = view.report.items.length
      ? null
      : el("p", { class: "hint" }, ["No feedback items — the scene matches the intent."]);

    const relationEdit = el("input", {
      id: "edit-relation",
      placeholder: "relation: girl right_of dog",
    });
    const attributeEdit = el("input", {
      id: "edit-attribute",
      placeholder: "attribute: dog brown",
    });

    const iterateButton = el("button", { id: "iterate-button" }, ["Apply & Iterate"]);
    if (terminal) iterateButton.setAttribute("disabled", "");
    iterateButton.addEventListener("click", () => void this.iterate(view.session_id));

    const statusBadge = el("span", { id: "status-badge", class: `status ${view.status}` }, [
      view.status,
    ]);
    const completeNote = terminal
      ? el("p", { id: "session-complete", class: "hint" }, [
          `Session complete (${view.status}) after iteration ${view.k}.`,
        ])
      : null;

    const section = el("section", { id: "session-screen" }, [
      el("header", {}, [
        el("h1", {}, ["intentloop"]),
        this.backLink(),
      ]),
      el("p", {}, [
        el("strong", {}, [view.canonical_prompt]),
        ` — preset ${view.preset}, seed ${view.seed}, iteration ${view.k}/${view.max_iterations} `,
        statusBadge,
      ]),
      el("div", { class: "columns" }, [
        el("div", { class: "viewer" }, [image, history]),
        el("div", { class: "panel" }, [
          el("h2", {}, ["Feedback"]),
          checklist,
          ...(emptyNote ? [emptyNote] : []),
          el("h2", {}, ["Prompt edits"]),
          relationEdit,
          attributeEdit,
          iterateButton,
          ...(completeNote ? [completeNote] : []),
        ]),
      ]),
    ]);
    this.root.replaceChildren(section);
  }

  private collectIterateBody(): IterateBody {
    const body: IterateBody = {};
    const checked = Array.from(
      this.root.querySelectorAll<HTMLInputElement>(".item-checkbox:checked"),
    ).map((box) => box.value);
    if (checked.length) body.accepted_item_ids = checked;

    const relationRaw = (document.getElementById("edit-relation") as HTMLInputElement).value
      .trim()
      .split(/\s+/)
      .filter(Boolean);
    const attributeRaw = (document.getElementById("edit-attribute") as HTMLInputElement).value
      .trim()
      .split(/\s+/)
      .filter(Boolean);
    const edit: NonNullable<IterateBody["prompt_edit"]> = {};
    if (relationRaw.length === 3 && PREDICATES.includes(relationRaw[1])) {
      edit.add_relations = [[relationRaw[0], relationRaw[1], relationRaw[2]]];
    }
    if (attributeRaw.length === 2) {
      edit.add_attributes = [[attributeRaw[0], attributeRaw[1]]];
    }
    if (edit.add_relations || edit.add_attributes) body.prompt_edit = edit;
    return body;
  }

  private async iterate(sessionId: string): Promise<void> {
    const body = this.collectIterateBody();
    try {
      const view = await this.api.iterate(sessionId, body);
      this.renderSession(view, view.k);
    } catch (exc) {
      if (exc instanceof ApiError && exc.status === 409) {
        await this.showSession(sessionId); // re-render the terminal state
        return;
      }
      const note = el("p", { class: "error" }, [
        exc instanceof ApiError ? exc.message : String(exc),
      ]);
      document.getElementById("session-screen")?.append(note);
    }
  }

  private backLink(): HTMLElement {
    const link = el("a", { href: "#/", id: "back-link" }, ["new session"]);
    link.addEventListener("click", () => {
      window.location.hash = "#/";
    });
    return link;
  }
}
