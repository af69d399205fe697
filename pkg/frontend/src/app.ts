/**
 * Browser wiring: task picker, image canvas with grid overlay, distance
 * ruler, and submission controls. All computation lives in grid.ts and
 * ruler.ts; this file only renders and forwards events.
 */

import { AnnotationClient, TaskDoc } from "./api.js";
import { GRID_PRESETS, GridSelection } from "./grid.js";
import { rulerDistanceMeters, Point } from "./ruler.js";

interface AppState {
  client: AnnotationClient | null;
  task: TaskDoc | null;
  selection: GridSelection;
  rulerPoints: Point[];
  mode: "grid" | "ruler";
}

const state: AppState = {
  client: null,
  task: null,
  selection: new GridSelection(20),
  rulerPoints: [],
  mode: "grid",
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function canvas(): HTMLCanvasElement {
  return el<HTMLCanvasElement>("image-canvas");
}

function setStatus(text: string): void {
  el<HTMLDivElement>("status").textContent = text;
}

function draw(): void {
  const c = canvas();
  const ctx = c.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, c.width, c.height);

  // Image placeholder: tasks reference imagery by id; deployments that
  // serve files can point the <img> source at them instead.
  ctx.fillStyle = "#dde8dd";
  ctx.fillRect(0, 0, c.width, c.height);
  ctx.fillStyle = "#667";
  ctx.font = "12px sans-serif";
  ctx.fillText(state.task ? state.task.image : "no task loaded", 8, 16);

  const n = state.selection.gridSize;
  const cell = c.width / n;
  ctx.strokeStyle = "rgba(40, 40, 40, 0.35)";
  for (let i = 0; i <= n; i++) {
    ctx.beginPath();
    ctx.moveTo(i * cell, 0);
    ctx.lineTo(i * cell, c.height);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(0, i * cell);
    ctx.lineTo(c.width, i * cell);
    ctx.stroke();
  }
  ctx.fillStyle = "rgba(220, 60, 40, 0.45)";
  for (const { row, col } of state.selection.cells()) {
    ctx.fillRect(col * cell, row * cell, cell, cell);
  }

  if (state.rulerPoints.length > 0) {
    ctx.strokeStyle = "#1040d0";
    ctx.fillStyle = "#1040d0";
    for (const p of state.rulerPoints) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3, 0, Math.PI * 2);
      ctx.fill();
    }
    if (state.rulerPoints.length === 2) {
      const [p1, p2] = state.rulerPoints;
      ctx.beginPath();
      ctx.moveTo(p1.x, p1.y);
      ctx.lineTo(p2.x, p2.y);
      ctx.stroke();
      const gsd = state.task ? state.task.gsd : 1.0;
      const meters = rulerDistanceMeters({ p1, p2, gsd });
      el<HTMLSpanElement>("ruler-readout").textContent = `${meters.toFixed(2)} m`;
    }
  }
  el<HTMLSpanElement>("grid-readout").textContent =
    `${state.selection.count} cells (${state.selection.percentage().toFixed(2)}%)`;
}

function onCanvasClick(event: MouseEvent): void {
  const c = canvas();
  const rect = c.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * c.width;
  const y = ((event.clientY - rect.top) / rect.height) * c.height;
  if (state.mode === "ruler") {
    if (state.rulerPoints.length >= 2) state.rulerPoints = [];
    state.rulerPoints.push({ x, y });
  } else {
    const n = state.selection.gridSize;
    const col = Math.min(n - 1, Math.floor((x / c.width) * n));
    const row = Math.min(n - 1, Math.floor((y / c.height) * n));
    state.selection.toggle(row, col);
  }
  draw();
}

function requireClient(): AnnotationClient {
  if (!state.client) {
    const annotator = el<HTMLInputElement>("annotator-id").value.trim();
    state.client = new AnnotationClient(serviceUrl(), annotator);
  }
  return state.client;
}

function serviceUrl(): string {
  return el<HTMLInputElement>("service-url").value.trim() || window.location.origin;
}

async function loadTasks(): Promise<void> {
  const tasks = await requireClient().fetchTasks();
  const select = el<HTMLSelectElement>("task-select");
  select.innerHTML = "";
  for (const task of tasks) {
    const option = document.createElement("option");
    option.value = task.id;
    option.textContent = `${task.id}: ${task.question}`;
    select.appendChild(option);
  }
  if (tasks.length) {
    state.task = tasks[0];
    el<HTMLDivElement>("question").textContent = tasks[0].question;
  }
  setStatus(`${tasks.length} tasks loaded`);
  draw();
}

async function selectTask(taskId: string): Promise<void> {
  state.task = await requireClient().fetchTask(taskId);
  el<HTMLDivElement>("question").textContent = state.task.question;
  state.rulerPoints = [];
  draw();
}

async function submit(): Promise<void> {
  if (!state.task) {
    setStatus("load a task first");
    return;
  }
  const client = requireClient();
  const mode = state.task.answer_mode;
  let reply;
  if (mode === "grid") {
    reply = await client.submitGrid(state.task.id, state.selection);
  } else if (mode === "count" || mode === "number") {
    const value = Number(el<HTMLInputElement>("numeric-answer").value);
    reply = await client.submitCount(state.task.id, value);
  } else {
    reply = await client.submitCategory(
      state.task.id,
      el<HTMLInputElement>("category-answer").value,
    );
  }
  setStatus(reply.replaced ? "stored (replaced your earlier answer)" : "stored");
}

function changeResolution(raw: string): void {
  const n = Number(raw);
  const ok = state.selection.resize(n, () =>
    window.confirm("Changing the grid resolution clears your selection. Continue?"),
  );
  if (!ok) {
    el<HTMLSelectElement>("grid-size").value = String(state.selection.gridSize);
  }
  draw();
}

export function start(): void {
  const sizeSelect = el<HTMLSelectElement>("grid-size");
  for (const preset of GRID_PRESETS) {
    const option = document.createElement("option");
    option.value = String(preset);
    option.textContent = `${preset} x ${preset}`;
    sizeSelect.appendChild(option);
  }
  sizeSelect.value = "20";

  canvas().addEventListener("click", onCanvasClick);
  el<HTMLButtonElement>("load-tasks").addEventListener("click", () => void loadTasks());
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submit());
  el<HTMLSelectElement>("task-select").addEventListener("change", (e) =>
    void selectTask((e.target as HTMLSelectElement).value),
  );
  sizeSelect.addEventListener("change", (e) =>
    changeResolution((e.target as HTMLSelectElement).value),
  );
  el<HTMLInputElement>("mode-ruler").addEventListener("change", () => {
    state.mode = el<HTMLInputElement>("mode-ruler").checked ? "ruler" : "grid";
  });
  draw();
}

if (typeof document !== "undefined" && document.getElementById("image-canvas")) {
  start();
}
