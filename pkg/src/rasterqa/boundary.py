"""Trace pixel-corner boundary rings of a connected pixel set.

The boundary of a pixel set is the set of unit edges between a foreground
pixel and background (or the image edge).  Edges are directed so that
foreground lies on the walker's right, which makes outer rings clockwise in
screen coordinates (positive shoelace sum with y pointing down) and holes
counterclockwise.

At "pinch" vertices, where the four surrounding pixels form a diagonal
foreground pair, two continuations exist.  The choice encodes connectivity:

* 8-connected regions turn left, so diagonally touching pixels stay on one
  outer ring and diagonally touching cavities become separate holes;
* 4-connected regions turn right, so background leaking through the pinch
  stays one region and the ring passes the vertex twice.

Filling the returned rings with the even-odd rule reproduces the pixel set
exactly, which is the property the test suite checks.
"""

from __future__ import annotations

import numpy as np

Vertex = tuple[int, int]


def _directed_edges(local: np.ndarray) -> dict[Vertex, list[Vertex]]:
    """Map each boundary-edge start vertex to its end vertices (1 or 2)."""
    h, w = local.shape
    up = np.zeros_like(local)
    up[1:] = local[:-1]
    down = np.zeros_like(local)
    down[:-1] = local[1:]
    left = np.zeros_like(local)
    left[:, 1:] = local[:, :-1]
    right = np.zeros_like(local)
    right[:, :-1] = local[:, 1:]

    edges: dict[Vertex, list[Vertex]] = {}

    def add(sx: int, sy: int, ex: int, ey: int) -> None:
        edges.setdefault((sx, sy), []).append((ex, ey))

    ys, xs = np.nonzero(local & ~up)  # exposed top: walk +x
    for y, x in zip(ys.tolist(), xs.tolist()):
        add(x, y, x + 1, y)
    ys, xs = np.nonzero(local & ~right)  # exposed right: walk +y
    for y, x in zip(ys.tolist(), xs.tolist()):
        add(x + 1, y, x + 1, y + 1)
    ys, xs = np.nonzero(local & ~down)  # exposed bottom: walk -x
    for y, x in zip(ys.tolist(), xs.tolist()):
        add(x + 1, y + 1, x, y + 1)
    ys, xs = np.nonzero(local & ~left)  # exposed left: walk -y
    for y, x in zip(ys.tolist(), xs.tolist()):
        add(x, y + 1, x, y)
    return edges


def _walk_rings(edges: dict[Vertex, list[Vertex]], connectivity: int) -> list[list[Vertex]]:
    """Link directed edges into closed rings using the connectivity turn rule."""
    # cross(d_in, d_out) > 0 is a right turn in screen coordinates (y down).
    want_right = connectivity == 4
    all_edges = sorted((s, e) for s, ends in edges.items() for e in ends)
    used: set[tuple[Vertex, Vertex]] = set()
    rings: list[list[Vertex]] = []

    for first in all_edges:
        if first in used:
            continue
        ring: list[Vertex] = []
        cur = first
        while True:
            used.add(cur)
            (sx, sy), (ex, ey) = cur
            ring.append((sx, sy))
            outs = edges[(ex, ey)]
            if len(outs) == 1:
                nxt = ((ex, ey), outs[0])
            else:
                # Pinch vertex: candidates are perpendicular to the incoming
                # direction, so the cross product is never zero.
                din = (ex - sx, ey - sy)
                picked = None
                for cand in outs:
                    dout = (cand[0] - ex, cand[1] - ey)
                    cross = din[0] * dout[1] - din[1] * dout[0]
                    if (cross > 0) == want_right:
                        picked = cand
                        break
                if picked is None:
                    raise ValueError(f"no turn candidate at pinch vertex {(ex, ey)}")
                nxt = ((ex, ey), picked)
            if nxt == first:
                break
            cur = nxt
        rings.append(ring)
    return rings


def _simplify(ring: list[Vertex]) -> list[Vertex]:
    """Drop vertices interior to straight segments (cyclic)."""
    n = len(ring)
    out = []
    for i in range(n):
        px, py = ring[i - 1]
        cx, cy = ring[i]
        nx, ny = ring[(i + 1) % n]
        if (cx - px, cy - py) != (nx - cx, ny - cy):
            out.append((cx, cy))
    return out


def _normalize(ring: list[Vertex]) -> list[Vertex]:
    """Rotate so the ring starts at its smallest vertex (orientation kept)."""
    m = min(ring)
    best = None
    for i, v in enumerate(ring):
        if v == m:
            cand = ring[i:] + ring[:i]
            if best is None or cand < best:
                best = cand
    return best


def _shoelace2(ring: list[Vertex]) -> int:
    """Twice the signed area; positive for outer rings in this construction."""
    s = 0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s


def trace_rings(
    mask: np.ndarray,
    bbox: tuple[int, int, int, int],
    connectivity: int = 8,
) -> tuple[list[Vertex], list[list[Vertex]]]:
    """Trace the outer ring and hole rings of a connected component.

    ``mask`` is the full-frame boolean mask of exactly one component; ``bbox``
    its tight (xmin, ymin, xmax, ymax) bounds.  Vertices are pixel-corner
    coordinates in the full frame; rings are open (first vertex not repeated).
    """
    xmin, ymin, xmax, ymax = bbox
    local = mask[ymin : ymax + 1, xmin : xmax + 1]
    edges = _directed_edges(local)
    rings = [_normalize(_simplify(r)) for r in _walk_rings(edges, connectivity)]

    outer = [r for r in rings if _shoelace2(r) > 0]
    holes = [r for r in rings if _shoelace2(r) < 0]
    if len(outer) != 1:
        raise ValueError(
            f"expected exactly one outer ring, got {len(outer)}; "
            "is the mask a single connected component?"
        )
    offset = lambda r: [(x + xmin, y + ymin) for x, y in r]
    return offset(outer[0]), [offset(h) for h in sorted(holes)]


def fill_rings(
    outer: list[Vertex],
    holes: list[list[Vertex]],
    height: int,
    width: int,
) -> np.ndarray:
    """Rasterize rings back to a mask with the even-odd rule.

    Pixel centers sit at half-integer coordinates while ring edges lie on
    integer ones, so crossing tests are exact.  Used by round-trip checks;
    kept in the library so callers can validate imported polygons too.
    """
    out = np.zeros((height, width), dtype=bool)
    rings = [outer] + list(holes)
    # Vertical edges only: horizontal edges never cross a y = k + 0.5 line.
    vert = []
    for ring in rings:
        n = len(ring)
        for i in range(n):
            x0, y0 = ring[i]
            x1, y1 = ring[(i + 1) % n]
            if x0 == x1:
                vert.append((x0, min(y0, y1), max(y0, y1)))
    for y in range(height):
        cy = y + 0.5
        xs = sorted(x for x, ylo, yhi in vert if ylo < cy < yhi)
        inside = False
        prev = 0
        for x in xs:
            if inside:
                out[y, prev:x] = True
            inside = not inside
            prev = x
    return out
