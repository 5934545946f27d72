/** DOM panels: rule palette, draft editor, suggestion cards, progress and
 * contribution views. Each panel owns one container element and re-renders
 * from the session state on every change notification. */

import { CompletionDto } from "./api.js";
import { DesignSession } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class PalettePanel {
  constructor(
    private root: HTMLElement,
    private session: DesignSession,
  ) {
    session.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    this.root.innerHTML = "";
    if (this.session.paletteStale) {
      this.root.appendChild(el("div", "warning", "offline: cached palette"));
    }
    for (const entry of this.session.palette) {
      const button = el("button", "rule-button", entry.rule.id);
      button.disabled = !entry.enabled;
      button.dataset.rule = entry.rule.id;
      button.title = entry.enabled
        ? `adds ${entry.rule.adds} (hosts: ${entry.hosts.join(", ")})`
        : "not legal for the current draft";
      button.addEventListener("click", () => {
        void this.session.addRule(entry.rule.id);
      });
      this.root.appendChild(button);
    }
  }

  enabledRuleIds(): string[] {
    return Array.from(this.root.querySelectorAll<HTMLButtonElement>("button.rule-button"))
      .filter((b) => !b.disabled)
      .map((b) => b.dataset.rule!);
  }
}

export class DraftPanel {
  constructor(
    private root: HTMLElement,
    private session: DesignSession,
  ) {
    session.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    this.root.innerHTML = "";
    const list = el("ol", "draft-list");
    this.session.draft.forEach((app, index) => {
      const item = el("li", "draft-item");
      const committed = index < this.session.serverApps.length;
      item.appendChild(
        el("span", committed ? "rule-name committed" : "rule-name", app.ruleId),
      );
      item.appendChild(el("span", "host", `@${app.hostOccurrence}`));
      const rule = this.session.grammar?.rules.find((r) => r.id === app.ruleId);
      rule?.params.forEach((spec, pi) => {
        const input = el("input", "param-input");
        input.type = "number";
        input.min = String(spec.min);
        input.max = String(spec.max);
        input.step = spec.kind === "integer" ? "1" : "0.5";
        input.value = String(app.paramValues[pi]);
        input.title = `${spec.name} (${spec.unit})`;
        input.addEventListener("change", () => {
          this.session.setParam(index, pi, Number(input.value));
        });
        item.appendChild(input);
      });
      const cut = el("button", "truncate", "×");
      cut.title = "remove this and everything after it";
      cut.addEventListener("click", () => this.session.truncateDraft(index));
      item.appendChild(cut);
      list.appendChild(item);
    });
    this.root.appendChild(list);
  }
}

export class CompletionsPanel {
  constructor(
    private root: HTMLElement,
    private session: DesignSession,
  ) {
    session.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    this.root.innerHTML = "";
    this.session.completions.forEach((completion, index) => {
      this.root.appendChild(this.card(completion, index));
    });
  }

  private card(completion: CompletionDto, index: number): HTMLElement {
    const card = el("div", "completion-card");
    card.dataset.rank = String(index + 1);
    card.appendChild(el("div", "score", completion.score.toFixed(3)));
    card.appendChild(
      el("div", "rules", completion.suffix.map((a) => a.ruleId).join(" + ") || "(finish as-is)"),
    );
    const accept = el("button", "accept", "accept");
    accept.addEventListener("click", () => {
      void this.session.acceptCompletion(completion);
    });
    card.appendChild(accept);
    return card;
  }
}

export class ProgressPanel {
  constructor(
    private root: HTMLElement,
    private session: DesignSession,
  ) {
    session.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    this.root.innerHTML = "";
    const progress = this.session.progress;
    if (!progress) return;
    const feed = el("ul", "event-feed");
    for (const event of progress.events.slice(-12)) {
      const cls = event.outcome === "accepted" ? "event accepted" : "event rejected";
      const text = `#${event.seq} ${event.designerId} ${event.kind} → ${event.outcome}` +
        (event.violation ? ` [${event.violation.constraintId}]` : "");
      feed.appendChild(el("li", cls, text));
    }
    this.root.appendChild(feed);
  }
}

export class ContributionPanel {
  constructor(
    private root: HTMLElement,
    private session: DesignSession,
  ) {
    session.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    this.root.innerHTML = "";
    const report = this.session.contributions[this.session.branch];
    if (!report) return;
    const list = el("ul", "shares");
    let total = 0;
    for (const [designer, share] of Object.entries(report.shares)) {
      total += share;
      list.appendChild(el("li", "share", `${designer}: ${(share * 100).toFixed(1)}%`));
    }
    this.root.appendChild(list);
    const totalNode = el("div", "share-total", `total: ${(total * 100).toFixed(1)}%`);
    totalNode.dataset.total = String(total);
    this.root.appendChild(totalNode);
  }

  totalShare(): number {
    const node = this.root.querySelector<HTMLElement>(".share-total");
    return node ? Number(node.dataset.total) : 0;
  }
}

export class MessageBar {
  constructor(
    private root: HTMLElement,
    private session: DesignSession,
  ) {
    session.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    this.root.innerHTML = "";
    for (const message of this.session.messages.slice(-3)) {
      this.root.appendChild(el("div", "message", message));
    }
  }
}
