/**
 * Client for the annotation routes of the rasterqa service.
 *
 * Talks only to GET /tasks, GET /tasks/{id}, POST /annotations, and
 * GET /annotations. Submissions carry raw responses (cell sets, counts,
 * category labels, measured distances); the client validates grid bounds
 * before posting so bad resolutions never leave the browser, and the
 * server enforces the same bounds independently.
 */

import { GridSelection, validateGridSize } from "./grid.js";
import { RulerMeasurement, rulerDistanceMeters } from "./ruler.js";

export interface TaskDoc {
  id: string;
  question: string;
  image: string;
  gsd: number;
  answer_mode: "grid" | "count" | "category" | "number";
  grid: { min: number; max: number };
  ruler: boolean;
}

export interface AnnotationDoc {
  question_id: string;
  annotator_id: string;
  kind: "count" | "category" | "grid" | "distance";
  value?: number | string;
  cells?: [number, number][];
  grid_size?: number;
  distance_m?: number;
}

export interface SubmitReply {
  status: string;
  replaced: boolean;
}

export class ServiceError extends Error {
  constructor(
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    const detail = await resp.text();
    throw new ServiceError(`HTTP ${resp.status}: ${detail}`, resp.status);
  }
  return (await resp.json()) as T;
}

export class AnnotationClient {
  /**
   * The annotator identifies once per session; every submission carries
   * that id.
   */
  constructor(
    private baseUrl: string,
    public annotatorId: string,
  ) {
    if (!annotatorId) {
      throw new Error("an annotator id is required");
    }
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async fetchTasks(): Promise<TaskDoc[]> {
    const resp = await fetch(`${this.baseUrl}/tasks`);
    const doc = await asJson<{ tasks: TaskDoc[] }>(resp);
    return doc.tasks;
  }

  async fetchTask(taskId: string): Promise<TaskDoc> {
    return asJson<TaskDoc>(await fetch(`${this.baseUrl}/tasks/${taskId}`));
  }

  private async post(record: AnnotationDoc): Promise<SubmitReply> {
    const resp = await fetch(`${this.baseUrl}/annotations`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(record),
    });
    return asJson<SubmitReply>(resp);
  }

  /** Raw grid submission: the cell set, never a precomputed percentage. */
  async submitGrid(questionId: string, selection: GridSelection): Promise<SubmitReply> {
    validateGridSize(selection.gridSize);
    return this.post({
      question_id: questionId,
      annotator_id: this.annotatorId,
      kind: "grid",
      grid_size: selection.gridSize,
      cells: selection.cells().map((c) => [c.row, c.col]),
    });
  }

  async submitCount(questionId: string, value: number): Promise<SubmitReply> {
    if (!Number.isFinite(value) || value < 0) {
      throw new RangeError(`count must be a finite number >= 0, got ${value}`);
    }
    return this.post({
      question_id: questionId,
      annotator_id: this.annotatorId,
      kind: "count",
      value,
    });
  }

  async submitCategory(questionId: string, label: string): Promise<SubmitReply> {
    if (!label) {
      throw new RangeError("category label must be nonempty");
    }
    return this.post({
      question_id: questionId,
      annotator_id: this.annotatorId,
      kind: "category",
      value: label,
    });
  }

  /** Stores the raw measured distance in meters. */
  async submitDistance(questionId: string, m: RulerMeasurement): Promise<SubmitReply> {
    return this.post({
      question_id: questionId,
      annotator_id: this.annotatorId,
      kind: "distance",
      distance_m: rulerDistanceMeters(m),
    });
  }

  async fetchAnnotations(): Promise<AnnotationDoc[]> {
    const resp = await fetch(`${this.baseUrl}/annotations`);
    const doc = await asJson<{ records: AnnotationDoc[] }>(resp);
    return doc.records;
  }
}
