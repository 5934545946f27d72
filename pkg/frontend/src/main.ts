/** Console wiring: connect to the service, open or create a task, and
 * mount the panels. Configuration comes from query parameters:
 * ?service=http://127.0.0.1:8321&task=T0001&designer=ada */

import { ServiceClient } from "./api.js";
import {
  CompletionsPanel,
  ContributionPanel,
  DraftPanel,
  MessageBar,
  PalettePanel,
  ProgressPanel,
} from "./panels.js";
import { DesignSession } from "./state.js";
import { PreviewViewer } from "./viewer.js";

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("service") ?? "http://127.0.0.1:8321";
  const designer = params.get("designer") ?? "designer";
  const client = new ServiceClient(base);
  const session = new DesignSession(client);

  const taskId = params.get("task");
  if (taskId) {
    await session.openTask(taskId, designer);
  } else {
    const grammarRef = params.get("grammar") ?? "drone";
    const grammar = await client.grammar(grammarRef);
    const shapeType = params.get("shapeType") ?? grammar.shapeTypes[0];
    await session.createTask(grammarRef, shapeType, designer);
  }

  const get = (id: string) => document.getElementById(id)!;
  new PalettePanel(get("palette"), session);
  new DraftPanel(get("draft"), session);
  new CompletionsPanel(get("completions"), session);
  new ProgressPanel(get("progress"), session);
  new ContributionPanel(get("contributions"), session);
  new MessageBar(get("messages"), session);
  new PreviewViewer(get("preview") as HTMLCanvasElement, session);

  get("btn-complete").addEventListener("click", () => void session.requestCompletions(3));
  get("btn-submit").addEventListener("click", () => void session.submitDraft());
  get("btn-finalize").addEventListener("click", async () => {
    if (await session.finalize()) session.notice("solution finalized");
  });

  setInterval(() =>
    session.task && void session.refreshProgress(), 4000);

  void session.refreshPreview();
  document.title = `shapeforge – ${session.task?.id ?? "console"}`;
}

void boot();
