/** Client-side session state for the designer console.
 *
 * The draft mirrors the server branch plus unsubmitted edits. The palette
 * is whatever the service's legal-rules endpoint said about the current
 * draft (cached when the service is unreachable), and submitting sends the
 * minimal delta: an append when the draft extends the server sequence, a
 * replace-from-index when it diverges. The server stays the source of
 * truth; every rejection is surfaced verbatim.
 */

import {
  ApiError,
  AssemblyDto,
  CompletionDto,
  ContributionDto,
  GrammarInfo,
  ProgressDto,
  RuleApplication,
  RuleInfo,
  SequenceDto,
  ServiceClient,
  TaskInfo,
} from "./api.js";

export type Listener = () => void;

export interface PaletteEntry {
  rule: RuleInfo;
  enabled: boolean;
  hosts: number[];
}

export function midpointParams(rule: RuleInfo): number[] {
  return rule.params.map((p) => {
    const mid = p.min + (p.max - p.min) / 2;
    return p.kind === "integer" ? Math.round(mid) : mid;
  });
}

/** Least-loaded admissible host, ties to the lowest index (mirrors the
 * server's host-repair policy). */
export function pickHost(hosts: number[], draft: RuleApplication[]): number {
  const load = new Map<number, number>();
  for (const app of draft) {
    load.set(app.hostOccurrence, (load.get(app.hostOccurrence) ?? 0) + 1);
  }
  let best = hosts[0];
  for (const h of hosts) {
    const a = load.get(h) ?? 0;
    const b = load.get(best) ?? 0;
    if (a < b || (a === b && h < best)) best = h;
  }
  return best;
}

export function validateParams(rule: RuleInfo, values: number[]): string | null {
  if (values.length !== rule.params.length) {
    return `rule ${rule.id} takes ${rule.params.length} params, got ${values.length}`;
  }
  for (let i = 0; i < values.length; i++) {
    const spec = rule.params[i];
    const v = values[i];
    if (v < spec.min || v > spec.max) {
      return `${spec.name}=${v} outside [${spec.min}, ${spec.max}]`;
    }
    if (spec.kind === "integer" && v !== Math.round(v)) {
      return `${spec.name} must be an integer`;
    }
  }
  return null;
}

export class DesignSession {
  grammar: GrammarInfo | null = null;
  task: TaskInfo | null = null;
  designer = "designer";
  branch = "main";

  /** server-confirmed applications for the branch */
  serverApps: RuleApplication[] = [];
  /** local draft: server state + unsubmitted edits */
  draft: RuleApplication[] = [];

  palette: PaletteEntry[] = [];
  paletteStale = false; // true when showing a cached palette (offline)
  completions: CompletionDto[] = [];
  assembly: AssemblyDto | null = null;
  progress: ProgressDto | null = null;
  contributions: Record<string, ContributionDto> = {};
  messages: string[] = [];
  offline = false;

  private listeners = new Set<Listener>();

  constructor(public client: ServiceClient) {}

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  notice(message: string): void {
    this.messages = [...this.messages.slice(-4), message];
    this.emit();
  }

  get shapeType(): string {
    return this.task?.shapeType ?? this.grammar?.shapeTypes[0] ?? "";
  }

  get draftSequence(): SequenceDto {
    return { shapeType: this.shapeType, applications: this.draft };
  }

  get dirty(): boolean {
    return JSON.stringify(this.draft) !== JSON.stringify(this.serverApps);
  }

  async openTask(taskId: string, designer: string): Promise<void> {
    this.designer = designer;
    this.task = await this.client.task(taskId);
    this.grammar = await this.client.grammar(this.task.grammarRef);
    await this.refreshProgress();
    this.draft = [...this.serverApps];
    await this.refreshPalette();
    this.emit();
  }

  async createTask(grammarRef: string, shapeType: string, designer: string): Promise<void> {
    this.designer = designer;
    this.task = await this.client.createTask({
      publisher: designer,
      grammarRef,
      shapeType,
      description: "console session",
    });
    this.grammar = await this.client.grammar(grammarRef);
    this.serverApps = [];
    this.draft = [];
    await this.refreshPalette();
    this.emit();
  }

  /** Palette = the service's legal-rules verdict on the current draft. */
  async refreshPalette(): Promise<void> {
    if (!this.grammar) return;
    try {
      const legal = await this.client.legalRules(this.grammar.ref, this.draftSequence);
      this.palette = this.grammar.rules.map((rule) => ({
        rule,
        enabled: rule.id in legal,
        hosts: legal[rule.id] ?? [],
      }));
      this.paletteStale = false;
      this.offline = false;
    } catch (err) {
      if (err instanceof ApiError && err.code === "grammar_violation") {
        this.notice(`draft invalid: ${err.message}`);
      } else {
        // unreachable service: keep the cached palette, flag it
        this.paletteStale = true;
        this.offline = true;
        this.notice("service unreachable; showing cached palette");
      }
    }
    this.emit();
  }

  /** Append a palette rule with given (or midpoint) params. */
  async addRule(ruleId: string, paramValues?: number[]): Promise<boolean> {
    const entry = this.palette.find((p) => p.rule.id === ruleId);
    if (!entry || !entry.enabled || entry.hosts.length === 0) {
      this.notice(`rule ${ruleId} is not legal here`);
      return false;
    }
    const values = paramValues ?? midpointParams(entry.rule);
    const bad = validateParams(entry.rule, values);
    if (bad) {
      this.notice(bad);
      return false;
    }
    this.draft = [
      ...this.draft,
      { ruleId, hostOccurrence: pickHost(entry.hosts, this.draft), paramValues: values },
    ];
    await this.refreshPalette();
    await this.refreshPreview();
    return true;
  }

  setParam(index: number, paramIndex: number, value: number): string | null {
    const app = this.draft[index];
    const rule = this.grammar?.rules.find((r) => r.id === app.ruleId);
    if (!rule) return "unknown rule";
    const next = [...app.paramValues];
    next[paramIndex] = value;
    const bad = validateParams(rule, next);
    if (bad) {
      this.notice(bad);
      return bad;
    }
    this.draft = this.draft.map((a, i) =>
      i === index ? { ...a, paramValues: next } : a,
    );
    this.emit();
    return null;
  }

  truncateDraft(index: number): void {
    this.draft = this.draft.slice(0, index);
    void this.refreshPalette();
    void this.refreshPreview();
  }

  /** Merge an accepted suggestion into the draft. */
  async acceptCompletion(completion: CompletionDto): Promise<void> {
    this.draft = [...this.draft, ...completion.suffix];
    this.completions = [];
    await this.refreshPalette();
    await this.refreshPreview();
  }

  async requestCompletions(k: number): Promise<void> {
    if (!this.task) return;
    try {
      const res = this.dirty
        ? await this.client.complete({
            grammarRef: this.grammar!.ref,
            prefix: this.draftSequence,
            k,
          })
        : await this.client.complete({ taskId: this.task.id, branch: this.branch, k });
      this.completions = res.completions;
      if (res.completions.length === 0) this.notice("no valid completion found");
    } catch (err) {
      if (err instanceof ApiError && err.code === "model_missing") {
        this.completions = [];
        this.notice("no completion model trained yet");
      } else {
        throw err;
      }
    }
    this.emit();
  }

  async refreshPreview(): Promise<void> {
    if (!this.grammar) return;
    try {
      this.assembly = await this.client.previewAssembly(this.grammar.ref, this.draftSequence);
    } catch (err) {
      // invalid draft: keep the last good render, surface the reason
      if (err instanceof ApiError && err.violation) {
        this.notice(`[${err.violation.constraintId}] ${err.violation.message}`);
      }
    }
    this.emit();
  }

  /** Submit the draft delta; on rejection the server message is shown and
   * the draft stays editable. */
  async submitDraft(): Promise<boolean> {
    if (!this.task) return false;
    const common = this.commonPrefixLength();
    try {
      if (common < this.serverApps.length) {
        await this.client.submit(this.task.id, {
          designer: this.designer,
          kind: "replace-from-index",
          branch: this.branch,
          index: common,
          applications: this.draft.slice(common),
        });
      } else if (this.draft.length > this.serverApps.length) {
        await this.client.submit(this.task.id, {
          designer: this.designer,
          kind: "append-rules",
          branch: this.branch,
          applications: this.draft.slice(this.serverApps.length),
        });
      }
      await this.refreshProgress();
      this.draft = [...this.serverApps];
      await this.refreshPalette();
      this.emit();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.violation) {
        this.notice(`[${err.violation.constraintId}] ${err.violation.message}`);
        return false;
      }
      throw err;
    }
  }

  private commonPrefixLength(): number {
    let i = 0;
    while (
      i < this.serverApps.length &&
      i < this.draft.length &&
      JSON.stringify(this.serverApps[i]) === JSON.stringify(this.draft[i])
    ) {
      i++;
    }
    return i;
  }

  async finalize(): Promise<boolean> {
    if (!this.task) return false;
    try {
      await this.client.finalize(this.task.id, this.designer, this.branch);
      await this.refreshProgress();
      await this.refreshContributions();
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.violation) {
        this.notice(`[${err.violation.constraintId}] ${err.violation.message}`);
        return false;
      }
      throw err;
    }
  }

  async refreshProgress(): Promise<void> {
    if (!this.task) return;
    this.progress = await this.client.progress(this.task.id);
    const branch = this.progress.branches[this.branch];
    this.serverApps = branch ? branch.applications : [];
    this.emit();
  }

  async refreshContributions(): Promise<void> {
    if (!this.task) return;
    const res = await this.client.contributions(this.task.id);
    this.contributions = res.contributions;
    this.emit();
  }
}
