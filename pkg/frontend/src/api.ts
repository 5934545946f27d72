/** Typed client for the shapeforge service routes. */

export interface ParamSpec {
  name: string;
  unit: string;
  min: number;
  max: number;
  kind: "continuous" | "integer";
}

export interface RuleInfo {
  id: string;
  adds: string;
  host: { unit: string; port: string };
  symmetry: number;
  params: ParamSpec[];
}

export interface GrammarInfo {
  ref: string;
  productKind: string;
  shapeTypes: string[];
  axiom: string;
  units: { name: string; primitive: string; sizeParams: ParamSpec[] }[];
  rules: RuleInfo[];
}

export interface RuleApplication {
  ruleId: string;
  hostOccurrence: number;
  paramValues: number[];
}

export interface SequenceDto {
  shapeType: string;
  applications: RuleApplication[];
  authorTags?: (string | null)[];
}

export interface TaskInfo {
  id: string;
  productKind: string;
  grammarRef: string;
  shapeType: string;
  description: string;
  createdBy: string;
  status: string;
}

export interface SubmissionEventDto {
  seq: number;
  taskId: string;
  designerId: string;
  kind: string;
  branch: string;
  outcome: "accepted" | "rejected";
  violation?: ViolationDto;
  resultBranch?: string;
}

export interface ViolationDto {
  constraintId: string;
  kind: string;
  message: string;
}

export interface ProgressDto {
  task: TaskInfo;
  events: SubmissionEventDto[];
  branches: Record<string, SequenceDto>;
  finalized: string[];
}

export interface CompletionDto {
  suffix: RuleApplication[];
  score: number;
  logLikelihood: number;
}

export interface OccurrenceDto {
  unit: string;
  frame: { rotation: number[][]; translation: number[] };
  sizeValues: number[];
  extent: number[];
  aabb: { min: number[]; max: number[] };
  volume: number;
}

export interface AssemblyDto {
  occurrences: OccurrenceDto[];
  totalMassProxy: number;
  violations: ViolationDto[];
}

export interface ContributionDto {
  taskId: string;
  solution: string;
  shares: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public violation?: ViolationDto,
  ) {
    super(message);
  }
}

async function parseError(res: Response): Promise<ApiError> {
  try {
    const body = await res.json();
    const err = body.error ?? {};
    return new ApiError(err.code ?? "internal", err.message ?? res.statusText, err.violation);
  } catch {
    return new ApiError("internal", `${res.status} ${res.statusText}`);
  }
}

export class ServiceClient {
  constructor(public baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!res.ok) throw await parseError(res);
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  grammar(ref: string): Promise<GrammarInfo> {
    return this.request("GET", `/grammar/${encodeURIComponent(ref)}`);
  }

  legalRules(grammarRef: string, sequence: SequenceDto): Promise<Record<string, number[]>> {
    return this.request<{ legal: Record<string, number[]> }>("POST", "/grammar/legal-rules", {
      grammarRef,
      sequence,
    }).then((r) => r.legal);
  }

  createTask(body: {
    publisher: string;
    grammarRef: string;
    shapeType: string;
    description: string;
  }): Promise<TaskInfo> {
    return this.request("POST", "/tasks", body);
  }

  task(id: string): Promise<TaskInfo> {
    return this.request("GET", `/tasks/${id}`);
  }

  submit(
    taskId: string,
    body: {
      designer: string;
      kind?: string;
      branch?: string;
      index?: number;
      applications: RuleApplication[];
    },
  ): Promise<{ event: SubmissionEventDto }> {
    return this.request("POST", `/tasks/${taskId}/submit`, body);
  }

  finalize(taskId: string, designer: string, branch = "main"): Promise<{ event: SubmissionEventDto }> {
    return this.request("POST", `/tasks/${taskId}/finalize`, { designer, branch });
  }

  progress(taskId: string): Promise<ProgressDto> {
    return this.request("GET", `/tasks/${taskId}/progress`);
  }

  contributions(taskId: string): Promise<{ contributions: Record<string, ContributionDto> }> {
    return this.request("GET", `/tasks/${taskId}/contributions`);
  }

  complete(body: {
    taskId?: string;
    branch?: string;
    grammarRef?: string;
    prefix?: SequenceDto;
    k: number;
    maxLen?: number;
  }): Promise<{ completions: CompletionDto[] }> {
    return this.request("POST", "/complete", body);
  }

  previewAssembly(grammarRef: string, sequence: SequenceDto): Promise<AssemblyDto> {
    return this.request("POST", "/assembly/preview", { grammarRef, sequence });
  }
}
