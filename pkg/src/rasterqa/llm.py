"""Bridge to a chat-completion service that writes query plans.

The bridge renders a deterministic developer prompt (rules, step docs
generated from the plan-language schema, topics with one-line glosses,
answer format, question), requests a completion over HTTP or from a canned
mock table, and extracts a plan from the raw response.  A response that does
not contain a parsable plan becomes an UnparseableGenerationError carrying
the raw text; callers score it as incorrect rather than crashing the run.
"""

from __future__ import annotations

import json
import logging
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .errors import CompletionError, MockLookupError, PlanParseError, UnparseableGenerationError
from .plans import STEP_SPECS, Plan, parse_plan

logger = logging.getLogger("rasterqa.llm")

API_KEY_ENV = "RASTERQA_API_KEY"

DEFAULT_RULES = """\
You are a plan generator for geospatial image analysis.

CRITICAL RULES:
- Output ONLY a plan document in the exact format shown below
- NO explanatory text before or after the plan
- NO markdown code fences
- The plan must end with the step whose bind holds the final answer"""

# One-line glosses for the built-in topic set, mirroring how the topic list
# is presented to the generator.
TOPIC_GLOSSES = {
    "urban": "paved/built areas",
    "forest": "trees",
    "agric": "cultivated fields",
    "grass": "rangeland",
    "barren": "bare earth",
    "water": "water bodies",
    "solar": "solar panels",
    "roof": "building roofs",
    "vegetation": "agriculture, rangeland and forest combined",
}


@dataclass(frozen=True)
class PromptSpec:
    """Everything needed to render one developer prompt."""

    question: str
    gsd: float
    topics: list[str]
    answer_format: str = "Bind the final numeric answer in the last step."
    rules_text: str = DEFAULT_RULES
    glosses: Mapping[str, str] = field(default_factory=lambda: TOPIC_GLOSSES)

    def __post_init__(self):
        if not self.topics:
            raise ValueError("prompt needs at least one topic")
        if not self.question:
            raise ValueError("prompt needs a question")


@dataclass(frozen=True)
class CompletionConfig:
    """Where and how to request completions; mock and endpoint are exclusive."""

    endpoint: Optional[str] = None
    model: str = "default"
    temperature: float = 0.0
    max_tokens: int = 2000
    timeout: float = 60.0
    retries: int = 3
    mock: Optional[Mapping[str, str]] = None
    api_key_env: str = API_KEY_ENV


def render_step_docs() -> str:
    """Plan-language documentation generated from the step schema."""
    lines = ["Plan language (one document, steps run top to bottom):", "", "answer: number | category"]
    for spec in STEP_SPECS.values():
        lines.append(f"step {spec.kind}  # {spec.doc}")
        for arg in spec.args:
            req = "required" if arg.required else "optional"
            lines.append(f"  {arg.name}: <{arg.type}>  # {req}; {arg.doc}")
        lines.append("  bind: <name>  # required; name for this step's result")
    return "\n".join(lines)


def build_prompt(spec: PromptSpec) -> str:
    """Render the developer prompt; byte-identical for identical specs."""
    question = spec.question
    if "(GSD:" not in question:
        question = f"{question} (GSD: {spec.gsd}m)"
    topic_list = ", ".join(
        f"{t} ({spec.glosses[t]})" if t in spec.glosses else t for t in spec.topics
    )
    sections = [
        spec.rules_text,
        render_step_docs(),
        f"Available segmentation topics:\n{topic_list}",
        f"Answer format: {spec.answer_format}",
        f"Question: {question}",
        "Generate ONLY the plan document to answer this question.",
    ]
    return "\n\n".join(sections) + "\n"


def request_completion(
    prompt: str, cfg: CompletionConfig, key: Optional[str] = None
) -> str:
    """Return raw model text for the prompt.

    In mock mode the canned table is looked up by ``key`` (typically the
    question id).  Live mode POSTs a chat-completions request and retries
    transient transport failures with a bounded backoff.
    """
    if cfg.mock is not None and cfg.endpoint is not None:
        raise CompletionError("mock table and endpoint are mutually exclusive")
    if cfg.mock is not None:
        if key is None or key not in cfg.mock:
            raise MockLookupError(f"no canned response for key {key!r}")
        return cfg.mock[key]
    if cfg.endpoint is None:
        raise CompletionError("no endpoint configured and no mock table given")

    body = json.dumps(
        {
            "model": cfg.model,
            "messages": [
                {"role": "system", "content": "You generate spatial analysis plans."},
                {"role": "user", "content": prompt},
            ],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
    ).encode()
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(cfg.api_key_env)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    delay = 0.2
    last_error: Exception | None = None
    for attempt in range(cfg.retries):
        try:
            req = urllib.request.Request(cfg.endpoint, data=body, headers=headers)
            with urllib.request.urlopen(req, timeout=cfg.timeout) as resp:
                payload = json.loads(resp.read().decode())
            return payload["choices"][0]["message"]["content"]
        except urllib.error.HTTPError as exc:
            if exc.code < 500:
                raise CompletionError(f"endpoint rejected request: HTTP {exc.code}") from exc
            last_error = exc
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, KeyError) as exc:
            last_error = exc
        if attempt < cfg.retries - 1:
            time.sleep(delay)
            delay = min(delay * 2, 2.0)
    raise CompletionError(f"completion failed after {cfg.retries} attempts: {last_error}")


def _strip_fences(text: str) -> str:
    """Return the content of the first fenced block, or the text unchanged."""
    if "```" not in text:
        return text
    parts = text.split("```")
    if len(parts) < 3:
        return text.replace("```", "")
    block = parts[1]
    first_newline = block.find("\n")
    if first_newline != -1 and " " not in block[:first_newline].strip():
        block = block[first_newline + 1 :]  # drop a language tag line
    return block


def extract_plan(response: str) -> Plan:
    """Pull a plan out of raw model text, tolerating fences and trailing prose.

    The plan region starts at the first ``answer:`` or ``step`` line and ends
    at the first line that cannot belong to a plan document; anything after
    is logged and ignored.  Parse failures raise UnparseableGenerationError
    with the raw text attached for logging.
    """
    text = _strip_fences(response)
    lines = text.splitlines()
    start = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith("answer:") or stripped.startswith("step "):
            start = i
            break
    if start is None:
        raise UnparseableGenerationError("no plan found in response", response)

    region: list[str] = []
    for line in lines[start:]:
        stripped = line.strip()
        ok = (
            not stripped
            or stripped.startswith("#")
            or stripped.startswith("answer:")
            or (not line.startswith((" ", "\t")) and stripped.startswith("step"))
            or (line.startswith((" ", "\t")) and ":" in stripped)
        )
        if not ok:
            logger.debug("ignoring trailing commentary from generation: %r", stripped)
            break
        region.append(line)

    try:
        return parse_plan("\n".join(region))
    except PlanParseError as exc:
        raise UnparseableGenerationError(str(exc), response) from exc
