/**
 * Grid-cell selection model for percentage questions.
 *
 * Annotators overlay an n-by-n grid on the image and toggle the cells the
 * target class covers; the covered percentage is derived from the cell
 * count. The submission stays raw (the cell set, never a percentage), so
 * calibration can recompute statistics from first principles.
 */

export const GRID_MIN = 10;
export const GRID_MAX = 320;

/** Preset resolutions offered in the UI; free entry in range is also legal. */
export const GRID_PRESETS = [10, 20, 40, 80, 160, 320];

export interface Cell {
  row: number;
  col: number;
}

export function validateGridSize(n: number): void {
  if (!Number.isInteger(n) || n < GRID_MIN || n > GRID_MAX) {
    throw new RangeError(
      `grid resolution must be an integer in [${GRID_MIN}, ${GRID_MAX}], got ${n}`,
    );
  }
}

export class GridSelection {
  private selected = new Set<string>();
  private n: number;

  constructor(gridSize: number) {
    validateGridSize(gridSize);
    this.n = gridSize;
  }

  get gridSize(): number {
    return this.n;
  }

  private key(row: number, col: number): string {
    return `${row},${col}`;
  }

  private checkCell(row: number, col: number): void {
    if (row < 0 || row >= this.n || col < 0 || col >= this.n) {
      throw new RangeError(`cell (${row}, ${col}) outside ${this.n}x${this.n} grid`);
    }
  }

  toggle(row: number, col: number): boolean {
    this.checkCell(row, col);
    const k = this.key(row, col);
    if (this.selected.has(k)) {
      this.selected.delete(k);
      return false;
    }
    this.selected.add(k);
    return true;
  }

  isSelected(row: number, col: number): boolean {
    return this.selected.has(this.key(row, col));
  }

  clear(): void {
    this.selected.clear();
  }

  get count(): number {
    return this.selected.size;
  }

  cells(): Cell[] {
    return [...this.selected]
      .map((k) => k.split(",").map(Number))
      .sort((a, b) => a[0] - b[0] || a[1] - b[1])
      .map(([row, col]) => ({ row, col }));
  }

  /** Covered percentage: 100 * |cells| / n^2. */
  percentage(): number {
    return (100.0 * this.selected.size) / (this.n * this.n);
  }

  /**
   * Change the grid resolution. The image view is untouched, but the
   * selection no longer maps onto the new cells, so it is cleared -- after
   * the caller-provided confirm step agrees. Returns whether the resize
   * happened.
   */
  resize(gridSize: number, confirmClear: () => boolean): boolean {
    validateGridSize(gridSize);
    if (gridSize === this.n) {
      return true;
    }
    if (this.selected.size > 0 && !confirmClear()) {
      return false;
    }
    this.n = gridSize;
    this.selected.clear();
    return true;
  }
}

/** Formula helper used by tests and by the canvas renderer. */
export function gridPercentage(cellCount: number, gridSize: number): number {
  validateGridSize(gridSize);
  return (100.0 * cellCount) / (gridSize * gridSize);
}
