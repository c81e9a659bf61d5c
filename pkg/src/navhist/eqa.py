"""Question-answer context construction for navigation trajectories.

Builds an instruction-centric prompt from the final frames of a trajectory,
sends it to a text-generation service and parses the three-part answer
(scene, plan, reasoning). Frames are referenced by timestep index only.

The service is reached over HTTP when ``EQA_ENDPOINT`` is set; otherwise a
deterministic in-process mock answers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .core import Trajectory

log = logging.getLogger(__name__)

ROLE_PREAMBLE = (
    "Assuming you are a robot navigating an indoor house, answer from a first-person view. "
    "Describe what you see, plan a path to the target, and explain where the target is "
    "likely to be based on common sense."
)

SECTION_HEADERS = {
    "scene_description": "Scene:",
    "path_planning": "Plan:",
    "commonsense": "Reasoning:",
}

DEFAULT_RETRY_LIMIT = 3


class ResponseParseError(ValueError):
    pass


class TransientServiceError(RuntimeError):
    """Failure worth retrying (timeouts, connection resets, 5xx)."""


class GenerationError(RuntimeError):
    """Service still failing after the retry budget is spent."""


@dataclass(frozen=True)
class Exemplar:
    question: str
    scene: str
    plan: str
    reasoning: str

    def render(self) -> str:
        return (
            f"Question: {self.question}\n"
            f"{SECTION_HEADERS['scene_description']} {self.scene}\n"
            f"{SECTION_HEADERS['path_planning']} {self.plan}\n"
            f"{SECTION_HEADERS['commonsense']} {self.reasoning}"
        )

    def to_json(self) -> dict:
        return {"question": self.question, "scene": self.scene, "plan": self.plan, "reasoning": self.reasoning}


# Placeholder worked examples; swap via build_prompt(exemplars=...).
DEFAULT_EXEMPLARS: tuple[Exemplar, Exemplar] = (
    Exemplar(
        question="[placeholder] go to a laptop in the bedroom",
        scene="I am in a hallway. A doorway on my left opens into a bedroom with a bed and a desk.",
        plan="Turn left, pass through the doorway, keep clear of the bed frame and approach the desk.",
        reasoning="Laptops are usually placed on desks or beds, so the desk is the first place to check.",
    ),
    Exemplar(
        question="[placeholder] find a vase in the living room",
        scene="I am in a kitchen. Through an open archway ahead I can see a sofa and a coffee table.",
        plan="Walk straight through the archway, go around the coffee table and scan the shelves.",
        reasoning="Vases are decorative and tend to sit on coffee tables, shelves or windowsills.",
    ),
)


@dataclass(frozen=True)
class EqaPrompt:
    role_preamble: str
    exemplars: tuple[Exemplar, ...]
    instruction: str
    frame_refs: tuple[int, ...]

    def render(self) -> str:
        parts = [self.role_preamble, ""]
        for k, ex in enumerate(self.exemplars, start=1):
            parts += [f"Example {k}:", ex.render(), ""]
        parts += [
            f"Frames: {', '.join(str(t) for t in self.frame_refs)}",
            f"Question: {self.instruction}",
            "Answer with the three sections "
            + ", ".join(SECTION_HEADERS.values())
            + " each on its own line.",
        ]
        return "\n".join(parts)

    def to_request(self, meta: Mapping[str, str] | None = None) -> dict:
        return {
            "role_preamble": self.role_preamble,
            "exemplars": [ex.to_json() for ex in self.exemplars],
            "instruction": self.instruction,
            "frame_refs": list(self.frame_refs),
            "meta": dict(meta or {}),
        }


@dataclass(frozen=True)
class StructuredResponse:
    scene_description: str
    path_planning: str
    commonsense: str

    def __post_init__(self) -> None:
        for name in SECTION_HEADERS:
            if not getattr(self, name).strip():
                raise ResponseParseError(f"empty section: {name}")


def select_context(traj: Trajectory, w: int) -> list[int]:
    """Timesteps of the last ``min(len(traj), w)`` frames, oldest first."""
    if not len(traj):
        raise ValueError("trajectory is empty")
    if w < 1:
        raise ValueError("w must be >= 1")
    return [o.t for o in traj.observations[-w:]]


def build_prompt(
    instruction: str,
    frames: Sequence[int],
    exemplars: Sequence[Exemplar] = DEFAULT_EXEMPLARS,
    role_preamble: str = ROLE_PREAMBLE,
) -> EqaPrompt:
    if not instruction or not instruction.strip():
        raise ValueError("instruction must be non-empty")
    if len(exemplars) != 2:
        raise ValueError(f"exactly 2 exemplars are required, got {len(exemplars)}")
    refs = tuple(int(t) for t in frames)
    if not refs:
        raise ValueError("at least one frame reference is required")
    if any(b != a + 1 for a, b in zip(refs, refs[1:])):
        raise ValueError("frame references must be contiguous and increasing")
    return EqaPrompt(role_preamble, tuple(exemplars), instruction, refs)


_HEADER_RE = re.compile(
    r"^\s*(?:\*\*)?(" + "|".join(re.escape(h[:-1]) for h in SECTION_HEADERS.values()) + r"):(?:\*\*)?",
    re.MULTILINE,
)


def parse_response(raw: str) -> StructuredResponse:
    """Split ``raw`` on the Scene/Plan/Reasoning headers, in any order."""
    by_header = {h[:-1]: name for name, h in SECTION_HEADERS.items()}
    matches = list(_HEADER_RE.finditer(raw))
    sections: dict[str, str] = {}
    for m, nxt in zip(matches, matches[1:] + [None]):
        name = by_header[m.group(1)]
        if name in sections:
            raise ResponseParseError(f"duplicate section: {name}")
        end = nxt.start() if nxt is not None else len(raw)
        sections[name] = raw[m.end() : end].strip()
    for name in SECTION_HEADERS:
        if name not in sections:
            raise ResponseParseError(f"missing section: {name}")
    return StructuredResponse(**sections)


# ---------------------------------------------------------------------------
# generation service


class GenerationClient(Protocol):
    def complete(self, request: dict) -> str:
        """Send one wire request and return the response ``text`` field."""


@dataclass
class MockClient:
    """Deterministic stand-in for the generation service.

    ``n_sections`` below 3 drops trailing sections; ``fail_times`` makes the
    first N calls raise :class:`TransientServiceError`.
    """

    n_sections: int = 3
    fail_times: int = 0
    calls: int = field(default=0, init=False)
    requests: list[dict] = field(default_factory=list, init=False)

    _SCENES = (
        "I see a corridor with two open doors and a rug on the floor.",
        "I am standing near a table; a sofa is to my right and a window ahead.",
        "There is a bed against the wall and a wardrobe beside the door.",
    )
    _PLANS = (
        "Move forward along the corridor, avoiding the rug edge, then turn into the second door.",
        "Go around the table on the left side and head toward the window.",
        "Step past the wardrobe and follow the wall to the far corner.",
    )

    def complete(self, request: dict) -> str:
        self.calls += 1
        self.requests.append(request)
        if self.calls <= self.fail_times:
            raise TransientServiceError(f"mock transient failure {self.calls}")
        instruction = request["instruction"]
        h = int(hashlib.sha256(instruction.encode("utf-8")).hexdigest(), 16)
        frames = request.get("frame_refs") or [0]
        body = [
            f"Scene: {self._SCENES[h % 3]} (frames {frames[0]}-{frames[-1]})",
            f"Plan: {self._PLANS[(h >> 8) % 3]}",
            f"Reasoning: For the request '{instruction}', the target is most likely where such "
            "objects are usually kept in a home.",
        ]
        return "\n".join(body[: self.n_sections])


class HttpClient:
    """POSTs the wire request as JSON and expects ``{"text": ...}`` back."""

    def __init__(self, endpoint: str, timeout: float = 60.0, transport: httpx.BaseTransport | None = None):
        self.endpoint = endpoint
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, request: dict) -> str:
        try:
            resp = self._client.post(self.endpoint, json=request)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransientServiceError(str(exc)) from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise TransientServiceError(f"service returned HTTP {resp.status_code}")
        resp.raise_for_status()
        try:
            return str(resp.json()["text"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ResponseParseError(f"response body lacks a 'text' field: {exc}") from exc

    def close(self) -> None:
        self._client.close()


def client_from_env(env: Mapping[str, str] | None = None) -> GenerationClient:
    env = os.environ if env is None else env
    endpoint = env.get("EQA_ENDPOINT")
    if endpoint:
        return HttpClient(endpoint)
    return MockClient()


def retry_limit_from_env(env: Mapping[str, str] | None = None) -> int:
    env = os.environ if env is None else env
    return int(env.get("EQA_RETRY_LIMIT", DEFAULT_RETRY_LIMIT))


def generate(
    prompt: EqaPrompt,
    client: GenerationClient,
    retry_limit: int = DEFAULT_RETRY_LIMIT,
    backoff_s: float = 0.5,
    meta: Mapping[str, str] | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> StructuredResponse:
    """Request a structured answer, retrying transient failures.

    ``retry_limit`` counts retries after the first attempt; the wait before
    retry ``k`` is ``backoff_s * 2**(k-1)``. Parse errors are not retried.
    """
    request = prompt.to_request(meta)
    attempt = 0
    while True:
        try:
            text = client.complete(request)
            break
        except TransientServiceError as exc:
            attempt += 1
            if attempt > retry_limit:
                raise GenerationError(f"generation failed after {attempt} attempts: {exc}") from exc
            delay = backoff_s * 2 ** (attempt - 1)
            log.warning("transient generation failure (%s); retry %d in %.2fs", exc, attempt, delay)
            sleep(delay)
    return parse_response(text)


def eqa_pair(prompt: EqaPrompt, response: StructuredResponse) -> dict:
    return {
        "instruction": prompt.instruction,
        "frame_refs": list(prompt.frame_refs),
        "scene": response.scene_description,
        "plan": response.path_planning,
        "reasoning": response.commonsense,
    }


def eqa_pair_line(pair: Mapping) -> str:
    return json.dumps(pair, ensure_ascii=False)
