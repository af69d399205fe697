"""HTTP service exposing the segmentation backend and annotation endpoints.

Routes::

    POST /segment       {"image", "topics", "min_area_pixels"?, "gsd"?}
                        -> SegmentationResult JSON
    GET  /tasks         -> {"tasks": [...]}        (when a dataset is loaded)
    GET  /tasks/{id}    -> one task document
    POST /annotations   -> {"status": "stored", "replaced": bool}
    GET  /annotations   -> {"records": [...]}      (latest per question+annotator)

Responses are deterministic: the same store and request always produce the
same bytes, which the golden-file test pins down.  The annotation log is
append-only with last-write-wins reads, so resubmissions keep their history.

``ServiceClient`` is the matching HTTP consumer; it satisfies the
segmentation-backend protocol, so plans can execute against a remote store
exactly as they do in process.
"""

from __future__ import annotations

import json
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Sequence

from .calib import GRID_MAX, GRID_MIN, AnnotationRecord, AnnotationStore
from .errors import DomainError, StoreError
from .questions import QuestionRecord
from .raster import SegmentationResult, Shape
from .store import BackendStore, UnknownImageError, UnknownTopicError

# Entry widget per question type: grid selection, count box, category
# choice, or free number; the ruler flag offers the measuring tool.
_GRID_MODES = {"percentage", "size", "proximity_percentage"}
_COUNT_MODES = {
    "count", "connectivity", "building_proximity", "building_fire_risk", "building_flood_risk"
}
_CATEGORY_MODES = {
    "binary_comparison", "binary_threshold", "binary_presence", "binary_multiple",
    "binary_proximity", "fragmentation",
}


def answer_mode(qtype: str) -> str:
    if qtype in _GRID_MODES:
        return "grid"
    if qtype in _COUNT_MODES:
        return "count"
    if qtype in _CATEGORY_MODES:
        return "category"
    return "number"


def task_document(record: QuestionRecord) -> dict:
    return {
        "id": record.id,
        "question": record.question,
        "image": record.image,
        "gsd": record.gsd,
        "answer_mode": answer_mode(record.type),
        "grid": {"min": GRID_MIN, "max": GRID_MAX},
        "ruler": "within" in record.question,
    }


class ServiceState:
    """Shared state behind the handler: store, annotation log, task list."""

    def __init__(
        self,
        store: BackendStore,
        annotations: AnnotationStore,
        dataset: Optional[list[QuestionRecord]] = None,
    ):
        self.store = store
        self.annotations = annotations
        self.tasks = {r.id: task_document(r) for r in (dataset or [])}
        self.task_order = [r.id for r in (dataset or [])]
        self.write_lock = threading.Lock()


def _encode(payload: dict, status: int = 200) -> tuple[int, bytes]:
    return status, json.dumps(payload, separators=(",", ":")).encode()


class ApiHandler(BaseHTTPRequestHandler):
    state: ServiceState  # assigned by make_server

    # -- plumbing ---------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _reply(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        return json.loads(raw)

    # -- routes -------------------------------------------------------------

    def do_GET(self):
        if self.path == "/tasks":
            tasks = [self.state.tasks[tid] for tid in self.state.task_order]
            self._reply(*_encode({"tasks": tasks}))
        elif self.path.startswith("/tasks/"):
            task_id = self.path[len("/tasks/"):]
            task = self.state.tasks.get(task_id)
            if task is None:
                self._reply(*_encode({"error": "unknown task", "task": task_id}, 404))
            else:
                self._reply(*_encode(task))
        elif self.path == "/annotations":
            records = [r.to_dict() for r in self.state.annotations.current()]
            self._reply(*_encode({"records": records}))
        else:
            self._reply(*_encode({"error": "no such route", "path": self.path}, 404))

    def do_POST(self):
        try:
            body = self._read_json()
        except (json.JSONDecodeError, ValueError) as exc:
            self._reply(*_encode({"error": "bad request", "detail": str(exc)}, 400))
            return

        if self.path == "/segment":
            self._segment(body)
        elif self.path == "/annotations":
            self._annotate(body)
        else:
            self._reply(*_encode({"error": "no such route", "path": self.path}, 404))

    def _segment(self, body: dict) -> None:
        try:
            image = body["image"]
            topics = body["topics"]
            min_area = int(body.get("min_area_pixels", 0))
            gsd = body.get("gsd")
            result = self.state.store.segment(image, topics, min_area, gsd)
        except UnknownTopicError as exc:
            self._reply(*_encode({"error": "unknown topic", "topic": exc.topic}, 400))
        except UnknownImageError as exc:
            self._reply(*_encode({"error": "unknown image", "image": exc.image}, 404))
        except (KeyError, TypeError, ValueError) as exc:
            self._reply(*_encode({"error": "bad request", "detail": str(exc)}, 400))
        except StoreError as exc:
            self._reply(*_encode({"error": "store failure", "detail": str(exc)}, 500))
        else:
            self._reply(*_encode(result.to_dict()))

    def _annotate(self, body: dict) -> None:
        try:
            record = AnnotationRecord.from_dict(body)
        except (DomainError, KeyError, TypeError, ValueError) as exc:
            self._reply(*_encode({"error": "invalid annotation", "detail": str(exc)}, 400))
            return
        with self.state.write_lock:
            replaced = self.state.annotations.append(record)
        self._reply(*_encode({"status": "stored", "replaced": replaced}))


def make_server(
    store: BackendStore,
    annotations: AnnotationStore,
    dataset: Optional[list[QuestionRecord]] = None,
    host: str = "127.0.0.1",
    port: int = 0,
) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free one."""
    state = ServiceState(store, annotations, dataset)
    handler = type("BoundApiHandler", (ApiHandler,), {"state": state})
    return ThreadingHTTPServer((host, port), handler)


def serve_forever(server: ThreadingHTTPServer) -> None:
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


# ---------------------------------------------------------------------------
# Client
# ---------------------------------------------------------------------------

class ServiceError(StoreError):
    """The service rejected a request or could not be reached."""


class ServiceClient:
    """HTTP consumer of the service; usable as a segmentation backend."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _request(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        url = f"{self.base_url}{path}"
        data = json.dumps(payload).encode() if payload is not None else None
        req = urllib.request.Request(
            url, data=data, method=method, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode(errors="replace")
            raise ServiceError(f"{method} {path} -> HTTP {exc.code}: {detail}") from exc
        except urllib.error.URLError as exc:
            raise ServiceError(f"{method} {path} failed: {exc.reason}") from exc

    def segment(
        self,
        image: str,
        topics: Sequence[str],
        min_area_pixels: int,
        gsd: float,
    ) -> SegmentationResult:
        payload = {
            "image": image,
            "topics": list(topics),
            "min_area_pixels": min_area_pixels,
            "gsd": gsd,
        }
        doc = self._request("POST", "/segment", payload)
        h, w = doc["image_height"], doc["image_width"]
        shapes = [Shape.from_dict(d, h, w) for d in doc["shapes"]]
        return SegmentationResult(
            shapes=shapes,
            image_width=w,
            image_height=h,
            total_pixels=doc["total_pixels"],
            gsd=gsd,
        )

    def fetch_tasks(self) -> list[dict]:
        return self._request("GET", "/tasks")["tasks"]

    def fetch_task(self, task_id: str) -> dict:
        return self._request("GET", f"/tasks/{task_id}")

    def submit_annotation(self, record: AnnotationRecord) -> dict:
        return self._request("POST", "/annotations", record.to_dict())

    def fetch_annotations(self) -> list[AnnotationRecord]:
        docs = self._request("GET", "/annotations")["records"]
        return [AnnotationRecord.from_dict(d) for d in docs]
