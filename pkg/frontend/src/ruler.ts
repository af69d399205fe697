/**
 * Distance ruler for proximity questions.
 *
 * Two endpoints in image pixel coordinates plus the image's
 * ground-sampling distance give a metric length: Euclidean pixel distance
 * times meters-per-pixel. Coincident endpoints are a valid zero-length
 * measurement.
 */

export interface Point {
  x: number;
  y: number;
}

export interface RulerMeasurement {
  p1: Point;
  p2: Point;
  gsd: number;
}

export function rulerDistanceMeters(m: RulerMeasurement): number {
  if (!(m.gsd > 0)) {
    throw new RangeError(`gsd must be > 0, got ${m.gsd}`);
  }
  const dx = m.p1.x - m.p2.x;
  const dy = m.p1.y - m.p2.y;
  return Math.hypot(dx, dy) * m.gsd;
}
