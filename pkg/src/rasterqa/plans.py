"""Spatial query plans: a small, sandbox-safe language over the mask API.

A plan is an ordered list of steps wired together by named bindings, ending
in the step whose binding is the answer.  The language is deliberately
closed: no loops, no arithmetic expressions, no I/O.  Executing a plan can
touch the outside world only through the segmentation backend handle it is
given, which makes generated plans safe to run and results reproducible.

Plan documents are plain text::

    answer: number
    step segment
      topics: agric, roof
      bind: seg
    step filter_area
      src: seg
      class: roof
      min_ha: 0.01
      bind: large_roofs
    step within_distance
      targets: large_roofs
      references: seg
      distance_m: 200
      bind: clipped
    step aggregate
      src: clipped
      kind: count
      bind: n

Serialization is canonical (fixed key order, fixed number formatting), so
parse -> serialize -> parse round-trips byte-stably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .distance import calculate_shape_distances, find_shapes_within_distance
from .errors import ExecutionError, PlanParseError
from .raster import SegmentationResult, filter_by_area

AGGREGATE_KINDS = (
    "count",
    "sum_area_ha",
    "percent_of_image",
    "largest_percent",
    "average_ha",
    "power_mw",
)
COMPARE_OPS = ("gt", "lt", "ge", "le")

# Binding value categories used for type checking.
SHAPES, NUMBER, CATEGORY = "shapes", "number", "category"


# ---------------------------------------------------------------------------
# Step schema registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArgSpec:
    name: str
    type: str  # one of: topics, name, str, float, int, enum:<values>
    required: bool
    doc: str


@dataclass(frozen=True)
class StepSpec:
    kind: str
    args: tuple[ArgSpec, ...]
    result: str  # binding category produced
    doc: str


STEP_SPECS: dict[str, StepSpec] = {
    spec.kind: spec
    for spec in [
        StepSpec(
            "segment",
            (
                ArgSpec("topics", "topics", True, "classes to segment, comma separated"),
                ArgSpec("min_area_pixels", "int", False, "drop components below this pixel area"),
            ),
            SHAPES,
            "segment the image and bind all shapes of the listed topics",
        ),
        StepSpec(
            "filter_area",
            (
                ArgSpec("src", "name", True, "shapes binding to filter"),
                ArgSpec("class", "str", False, "keep only this class"),
                ArgSpec("min_ha", "float", False, "keep shapes strictly larger than this"),
                ArgSpec("max_ha", "float", False, "keep shapes up to and including this"),
            ),
            SHAPES,
            "filter shapes by class and/or area in hectares (min is strict)",
        ),
        StepSpec(
            "within_distance",
            (
                ArgSpec("targets", "name", True, "shapes to clip"),
                ArgSpec("references", "name", True, "shapes defining the buffer"),
                ArgSpec("distance_m", "float", True, "buffer distance in meters"),
            ),
            SHAPES,
            "clip targets to the parts within the distance of any reference",
        ),
        StepSpec(
            "min_distance",
            (
                ArgSpec("targets", "name", True, "shapes to annotate"),
                ArgSpec("references", "name", True, "shapes measured against"),
            ),
            SHAPES,
            "annotate each target with its minimum distance in meters",
        ),
        StepSpec(
            "aggregate",
            (
                ArgSpec("src", "name", True, "shapes binding to reduce"),
                ArgSpec("kind", f"enum:{'|'.join(AGGREGATE_KINDS)}", True, "reduction"),
                ArgSpec("w_per_m2", "float", False, "surface power density, power_mw only"),
            ),
            NUMBER,
            "reduce shapes to a number (count, areas, percentages, power)",
        ),
        StepSpec(
            "compare",
            (
                ArgSpec("lhs", "name", True, "left number binding"),
                ArgSpec("rhs", "name", True, "right number binding"),
                ArgSpec("op", f"enum:{'|'.join(COMPARE_OPS)}", True, "comparison"),
                ArgSpec("yes_label", "str", True, "label when the comparison holds"),
                ArgSpec("no_label", "str", True, "label otherwise"),
            ),
            CATEGORY,
            "compare two numbers and produce a categorical label",
        ),
        StepSpec(
            "classify",
            (
                ArgSpec("src", "name", True, "number binding to threshold"),
                ArgSpec("threshold", "float", True, "strict threshold"),
                ArgSpec("above_label", "str", True, "label when value > threshold"),
                ArgSpec("below_label", "str", True, "label otherwise"),
            ),
            CATEGORY,
            "threshold a number into a categorical label (strictly greater)",
        ),
    ]
}


@dataclass(frozen=True)
class Step:
    kind: str
    args: dict
    bind: str


@dataclass(frozen=True)
class Plan:
    answer_kind: str  # number | category
    steps: list[Step]


@dataclass(frozen=True)
class Answer:
    value: float | int | str
    trace: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    step_index: int = -1


class SegmentationBackend(Protocol):
    """The only capability a running plan may use."""

    def segment(
        self, image: str, topics: Sequence[str], min_area_pixels: int, gsd: float
    ) -> SegmentationResult: ...


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------

def _parse_value(raw: str, spec: ArgSpec, line_no: int):
    raw = raw.strip()
    if spec.type == "topics":
        items = [t.strip() for t in raw.split(",") if t.strip()]
        if not items:
            raise PlanParseError("bad-value", f"{spec.name} needs at least one entry", line_no)
        return items
    if spec.type == "float":
        try:
            v = float(raw)
        except ValueError:
            raise PlanParseError("bad-value", f"{spec.name} expects a number, got {raw!r}", line_no)
        if not math.isfinite(v):
            raise PlanParseError("bad-value", f"{spec.name} must be finite", line_no)
        return v
    if spec.type == "int":
        try:
            return int(raw)
        except ValueError:
            raise PlanParseError("bad-value", f"{spec.name} expects an integer, got {raw!r}", line_no)
    if spec.type.startswith("enum:"):
        allowed = spec.type[5:].split("|")
        if raw not in allowed:
            raise PlanParseError(
                "bad-value", f"{spec.name} must be one of {allowed}, got {raw!r}", line_no
            )
        return raw
    return raw  # str and name


def parse_plan(text: str) -> Plan:
    """Parse a plan document; errors carry a code and 1-based line number."""
    answer_kind: Optional[str] = None
    steps: list[Step] = []
    current_kind: Optional[str] = None
    current_args: dict = {}
    current_line = 0

    def close_step(line_no: int):
        nonlocal current_kind, current_args
        if current_kind is None:
            return
        spec = STEP_SPECS[current_kind]
        for arg in spec.args:
            if arg.required and arg.name not in current_args:
                raise PlanParseError(
                    "missing-arg", f"step {current_kind} needs {arg.name}", current_line
                )
        if "bind" not in current_args:
            raise PlanParseError("missing-arg", f"step {current_kind} needs bind", current_line)
        bind = current_args.pop("bind")
        steps.append(Step(current_kind, current_args, bind))
        current_kind, current_args = None, {}

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.rstrip()
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        indented = line.startswith((" ", "\t"))
        if not indented:
            close_step(line_no)
            if stripped.startswith("answer:"):
                value = stripped.split(":", 1)[1].strip()
                if value not in ("number", "category"):
                    raise PlanParseError(
                        "bad-value", f"answer must be number or category, got {value!r}", line_no
                    )
                answer_kind = value
            elif stripped.startswith("step"):
                kind = stripped[4:].strip()
                if kind not in STEP_SPECS:
                    raise PlanParseError("unknown-step", f"unknown step kind {kind!r}", line_no)
                current_kind, current_args, current_line = kind, {}, line_no
            else:
                raise PlanParseError("bad-line", f"unrecognized line {stripped!r}", line_no)
        else:
            if current_kind is None:
                raise PlanParseError("bad-line", "indented line outside a step", line_no)
            if ":" not in stripped:
                raise PlanParseError("bad-line", f"expected key: value, got {stripped!r}", line_no)
            key, raw_value = (part.strip() for part in stripped.split(":", 1))
            spec = STEP_SPECS[current_kind]
            if key == "bind":
                value = raw_value
            else:
                arg = next((a for a in spec.args if a.name == key), None)
                if arg is None:
                    raise PlanParseError(
                        "unknown-arg", f"step {current_kind} has no argument {key!r}", line_no
                    )
                value = _parse_value(raw_value, arg, line_no)
            if key in current_args:
                raise PlanParseError("duplicate-arg", f"{key} given twice", line_no)
            current_args[key] = value

    close_step(len(text.splitlines()))
    if answer_kind is None:
        raise PlanParseError("missing-answer", "document has no answer: line", 0)
    if not steps:
        raise PlanParseError("no-steps", "document has no steps", 0)
    return Plan(answer_kind, steps)


def format_number(v: float) -> str:
    """Canonical number text: integral values print without a decimal point."""
    if float(v) == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def serialize_plan(plan: Plan) -> str:
    """Canonical text form; stable under parse -> serialize round trips."""
    lines = [f"answer: {plan.answer_kind}"]
    for step in plan.steps:
        lines.append(f"step {step.kind}")
        for arg in STEP_SPECS[step.kind].args:
            if arg.name not in step.args:
                continue
            v = step.args[arg.name]
            if arg.type == "topics":
                text = ", ".join(v)
            elif arg.type == "float":
                text = format_number(v)
            else:
                text = str(v)
            lines.append(f"  {arg.name}: {text}")
        lines.append(f"  bind: {step.bind}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_plan(plan: Plan, available_topics: Sequence[str]) -> list[ValidationIssue]:
    """Static checks; returns issues as values, never raises."""
    issues: list[ValidationIssue] = []
    if not plan.steps:
        return [ValidationIssue("no-steps", "plan has no steps")]
    bound: dict[str, str] = {}
    topics = set(available_topics)

    for i, step in enumerate(plan.steps):
        spec = STEP_SPECS.get(step.kind)
        if spec is None:
            issues.append(ValidationIssue("unknown-step", f"unknown step {step.kind!r}", i))
            continue
        if step.bind in bound:
            issues.append(
                ValidationIssue("duplicate-bind", f"{step.bind!r} bound more than once", i)
            )

        def need(name: str, category: str):
            ref = step.args.get(name)
            if ref not in bound:
                issues.append(
                    ValidationIssue("unbound-reference", f"{name}={ref!r} is not bound yet", i)
                )
            elif bound[ref] != category:
                issues.append(
                    ValidationIssue(
                        "type-mismatch",
                        f"{name}={ref!r} is {bound[ref]}, expected {category}",
                        i,
                    )
                )

        if step.kind == "segment":
            unknown = [t for t in step.args["topics"] if t not in topics]
            if unknown:
                issues.append(
                    ValidationIssue("unknown-topic", f"unknown topics {unknown}", i)
                )
            if step.args.get("min_area_pixels", 0) < 0:
                issues.append(ValidationIssue("bad-value", "min_area_pixels must be >= 0", i))
        elif step.kind == "filter_area":
            need("src", SHAPES)
            lo, hi = step.args.get("min_ha"), step.args.get("max_ha")
            if lo is not None and hi is not None and lo > hi:
                issues.append(ValidationIssue("bad-value", "min_ha exceeds max_ha", i))
        elif step.kind in ("within_distance", "min_distance"):
            need("targets", SHAPES)
            need("references", SHAPES)
            if step.kind == "within_distance" and step.args["distance_m"] < 0:
                issues.append(ValidationIssue("bad-value", "distance_m must be >= 0", i))
        elif step.kind == "aggregate":
            need("src", SHAPES)
            if step.args["kind"] == "power_mw" and "w_per_m2" not in step.args:
                issues.append(
                    ValidationIssue("missing-arg", "power_mw aggregation needs w_per_m2", i)
                )
        elif step.kind == "compare":
            need("lhs", NUMBER)
            need("rhs", NUMBER)
        elif step.kind == "classify":
            need("src", NUMBER)

        bound[step.bind] = spec.result

    terminal = plan.steps[-1]
    terminal_cat = STEP_SPECS[terminal.kind].result if terminal.kind in STEP_SPECS else None
    if terminal_cat == SHAPES:
        issues.append(
            ValidationIssue(
                "answer-kind", "terminal step must produce a number or category, not shapes"
            )
        )
    elif terminal_cat is not None and terminal_cat != plan.answer_kind:
        issues.append(
            ValidationIssue(
                "answer-kind",
                f"plan declares answer {plan.answer_kind} but ends in a {terminal_cat} step",
            )
        )
    return issues


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------

def _filter_descriptor(step: Step) -> str:
    parts = []
    if "class" in step.args:
        parts.append(f"class {step.args['class']}")
    lo, hi = step.args.get("min_ha"), step.args.get("max_ha")
    if lo is not None and hi is not None:
        parts.append(f"{format_number(lo)} < ha <= {format_number(hi)}")
    elif lo is not None:
        parts.append(f"> {format_number(lo)} ha")
    elif hi is not None:
        parts.append(f"<= {format_number(hi)} ha")
    return ", ".join(parts) if parts else "all"


def execute_plan(
    plan: Plan,
    image: str,
    gsd: float,
    backend: SegmentationBackend,
    available_topics: Optional[Sequence[str]] = None,
) -> Answer:
    """Run a validated plan against one image through the given backend.

    Evaluation is deterministic and single threaded; the trace records the
    initial per-topic shape counts and the cardinality of every filter and
    clip, mirroring the printout a generated analysis script would produce.
    """
    if available_topics is not None:
        issues = validate_plan(plan, available_topics)
        if issues:
            raise ExecutionError("invalid-plan", "; ".join(i.message for i in issues))

    env: dict[str, object] = {}
    trace: list[str] = []
    total_pixels: Optional[int] = None

    for step in plan.steps:
        if step.kind == "segment":
            topics = step.args["topics"]
            min_area = step.args.get("min_area_pixels", 0)
            try:
                result = backend.segment(image, topics, min_area, gsd)
            except Exception as exc:  # backend faults surface as execution errors
                raise ExecutionError("backend-failure", str(exc)) from exc
            if total_pixels is None:
                total_pixels = result.total_pixels
            elif total_pixels != result.total_pixels:
                raise ExecutionError(
                    "inconsistent-image", "segments disagree on image size"
                )
            for topic in topics:
                n = sum(1 for s in result.shapes if s.class_type == topic)
                trace.append(f"Initial {topic} shapes: {n}")
            env[step.bind] = list(result.shapes)

        elif step.kind == "filter_area":
            shapes = env[step.args["src"]]
            if "class" in step.args:
                shapes = [s for s in shapes if s.class_type == step.args["class"]]
            shapes = filter_by_area(shapes, step.args.get("min_ha"), step.args.get("max_ha"))
            trace.append(
                f"Filtered {step.args['src']} ({_filter_descriptor(step)}): {len(shapes)}"
            )
            env[step.bind] = shapes

        elif step.kind == "within_distance":
            targets = env[step.args["targets"]]
            references = env[step.args["references"]]
            clipped = find_shapes_within_distance(
                targets, references, step.args["distance_m"], gsd
            )
            trace.append(
                f"Clipped {step.args['targets']} within {float(step.args['distance_m'])} m "
                f"of {step.args['references']}: {len(clipped)}"
            )
            env[step.bind] = clipped

        elif step.kind == "min_distance":
            targets = env[step.args["targets"]]
            references = env[step.args["references"]]
            annotated = calculate_shape_distances(targets, references, gsd)
            trace.append(
                f"Measured distances from {step.args['targets']} "
                f"to {step.args['references']}: {len(annotated)}"
            )
            env[step.bind] = annotated

        elif step.kind == "aggregate":
            shapes = env[step.args["src"]]
            kind = step.args["kind"]
            if kind == "count":
                value: float | int = len(shapes)
            elif kind == "sum_area_ha":
                value = sum(s.area_hectares for s in shapes)
            elif kind == "percent_of_image":
                if not total_pixels:
                    raise ExecutionError("no-image-context", "no segment step ran first")
                value = 100.0 * sum(s.area_pixels for s in shapes) / total_pixels
            elif kind == "largest_percent":
                if not total_pixels:
                    raise ExecutionError("no-image-context", "no segment step ran first")
                largest = max((s.area_pixels for s in shapes), default=0)
                value = 100.0 * largest / total_pixels
            elif kind == "average_ha":
                if not shapes:
                    raise ExecutionError(
                        "empty-average", "average over zero shapes is undefined"
                    )
                value = sum(s.area_hectares for s in shapes) / len(shapes)
            elif kind == "power_mw":
                w = step.args["w_per_m2"]
                value = sum(s.area_pixels for s in shapes) * gsd * gsd * w / 1e6
            else:  # pragma: no cover - schema forbids
                raise ExecutionError("bad-aggregate", f"unknown aggregation {kind!r}")
            trace.append(f"Aggregate {kind} over {step.args['src']}: {value}")
            env[step.bind] = value

        elif step.kind == "compare":
            lhs, rhs = env[step.args["lhs"]], env[step.args["rhs"]]
            op = step.args["op"]
            holds = {
                "gt": lhs > rhs,
                "lt": lhs < rhs,
                "ge": lhs >= rhs,
                "le": lhs <= rhs,
            }[op]
            value = step.args["yes_label"] if holds else step.args["no_label"]
            trace.append(f"Compare {step.args['lhs']} {op} {step.args['rhs']}: {value}")
            env[step.bind] = value

        elif step.kind == "classify":
            number = env[step.args["src"]]
            above = number > step.args["threshold"]
            value = step.args["above_label"] if above else step.args["below_label"]
            trace.append(
                f"Classify {step.args['src']} > {format_number(step.args['threshold'])}: {value}"
            )
            env[step.bind] = value

        else:  # pragma: no cover - parser forbids
            raise ExecutionError("unknown-step", f"cannot execute {step.kind!r}")

    return Answer(value=env[plan.steps[-1].bind], trace=trace)
