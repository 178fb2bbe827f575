"""Prompt construction under a token budget, plus the analyzer contract.

The live-model client is pluggable; the shipped rule-based analyzer computes
the same stage artifacts deterministically and emits them in the same wire
format a live model must produce, which makes the whole pipeline testable
with zero model dependencies. Parse failures are data, not exceptions: a bad
response must degrade one chunk, never kill an hours-long job.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import httpx

from .errors import ConfigError, OversizeError
from .pipeline import (
    ChunkAnalysis, ChunkPayload, FinalReport, SynthesisReport,
    reduce_chunk, reduce_final, reduce_synthesis,
)


class Stage(str, Enum):
    MICRO = "micro"
    SYNTHESIS = "synthesis"
    FINAL = "final"


@dataclass(frozen=True)
class TokenBudget:
    context_limit: int = 131072
    output_reserve: int = 8192

    def __post_init__(self):
        if not 0 < self.output_reserve < self.context_limit:
            raise ConfigError(
                "output_reserve must lie strictly between 0 and context_limit"
            )

    @property
    def usable(self) -> int:
        return self.context_limit - self.output_reserve


# The base context profile keeps a smaller generation reserve; reserving the
# full 8,192 would leave zero usable input tokens.
PROFILES: dict[str, TokenBudget] = {
    "extended-131k": TokenBudget(context_limit=131072, output_reserve=8192),
    "base-8k": TokenBudget(context_limit=8192, output_reserve=1024),
}


def estimate_tokens(text: str) -> int:
    """ceil(bytes / 4): a model-free heuristic, monotone in input length."""
    return math.ceil(len(text.encode("utf-8")) / 4)


@dataclass(frozen=True)
class AnalyzerRequest:
    stage: Stage
    prompt_text: str
    payload_ref: str
    token_estimate: int
    downsampled: bool = False
    decimation: int = 1


@dataclass(frozen=True)
class AnalyzerResponse:
    raw_text: str
    parsed: ChunkAnalysis | SynthesisReport | FinalReport | None
    parse_ok: bool
    diagnostic: str = ""


# Payload wrappers for the aggregate stages.


@dataclass(frozen=True)
class SynthesisPayload:
    group_index: int
    analyses: tuple[ChunkAnalysis, ...]

    def to_json_dict(self) -> dict:
        return {
            "group_index": self.group_index,
            "analyses": [a.to_json_dict() for a in self.analyses],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "SynthesisPayload":
        return SynthesisPayload(
            group_index=doc["group_index"],
            analyses=tuple(ChunkAnalysis.from_json_dict(a)
                           for a in doc["analyses"]),
        )


@dataclass(frozen=True)
class FinalPayload:
    session_id: str
    syntheses: tuple[SynthesisReport, ...]
    dead_zones: dict

    def to_json_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "syntheses": [s.to_json_dict() for s in self.syntheses],
            "dead_zones": dict(self.dead_zones),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "FinalPayload":
        return FinalPayload(
            session_id=doc["session_id"],
            syntheses=tuple(SynthesisReport.from_json_dict(s)
                            for s in doc["syntheses"]),
            dead_zones=dict(doc.get("dead_zones", {})),
        )


_PAYLOAD_MARKER = "\n---\n"

_PREAMBLES = {
    Stage.MICRO: (
        "You are an observational classroom analyst. Below is one 60-second "
        "window of per-student skeleton keypoints, gaze targets, and derived "
        "posture/attention annotations. Respond with exactly one JSON object "
        "of the form {\"chunk_index\": int, \"frame_range\": [first, last], "
        "\"tracks\": [{\"track_id\": int, \"dominant_posture\": str, "
        "\"transitions\": [{\"frame\": int, \"t_ms\": int, \"from\": str, "
        "\"to\": str}], \"attention\": {region: fraction}, \"engagement\": "
        "float in [0,1], \"citations\": [frame indices]}]}. Cite only frame "
        "indices that appear in the window."
    ),
    Stage.SYNTHESIS: (
        "You are aggregating five consecutive 60-second classroom analyses "
        "into one 5-minute summary. Respond with exactly one JSON object of "
        "the form {\"group_index\": int, \"chunk_indices\": [ints], "
        "\"tracks\": [{\"track_id\": int, \"mean_engagement\": float, "
        "\"trend\": \"rising\"|\"falling\"|\"steady\", \"dominant_posture\": "
        "str}], \"transitions\": [{\"t_ms\": int, \"track_id\": int, "
        "\"from\": str, \"to\": str}], \"attention\": {region: fraction}, "
        "\"low_engagement\": [{\"t_start_ms\": int, \"t_end_ms\": int, "
        "\"engagement\": float}]}."
    ),
    Stage.FINAL: (
        "You are writing the whole-session classroom summary from the "
        "5-minute syntheses below. Respond with exactly one JSON object of "
        "the form {\"session_id\": str, \"tracks\": [{\"track_id\": int, "
        "\"narrative\": str, \"mean_engagement\": float, "
        "\"dominant_posture\": str, \"trend\": str}], \"attention\": "
        "{region: fraction}, \"flagged_periods\": [{\"t_start_ms\": int, "
        "\"t_end_ms\": int, \"reason\": str}], \"dead_zones\": object, "
        "\"covered_groups\": [ints], \"n_chunks\": int}."
    ),
}


def _serialize_payload(payload) -> str:
    return json.dumps(payload.to_json_dict(), sort_keys=True,
                      separators=(",", ":"))


def _assemble(stage: Stage, payload_json: str) -> str:
    return _PREAMBLES[stage] + _PAYLOAD_MARKER + payload_json


def build_prompt(stage: Stage, payload, budget: TokenBudget) -> AnalyzerRequest:
    """Build a stage request guaranteed to fit the budget.

    Oversize micro payloads are evenly decimated (keep every k-th frame,
    smallest k that fits) with the window's first and last frames always
    retained; a payload that cannot fit even at minimum frames raises
    OversizeError naming the stage.
    """
    if stage is Stage.MICRO:
        ref = f"chunk-{payload.chunk_index}"
    elif stage is Stage.SYNTHESIS:
        ref = f"group-{payload.group_index}"
    else:
        ref = "final"

    prompt = _assemble(stage, _serialize_payload(payload))
    estimate = estimate_tokens(prompt)
    if estimate <= budget.usable:
        return AnalyzerRequest(stage=stage, prompt_text=prompt, payload_ref=ref,
                               token_estimate=estimate)

    if stage is not Stage.MICRO:
        raise OversizeError(
            f"{stage.value} payload needs {estimate} tokens, budget allows "
            f"{budget.usable}"
        )

    n = payload.n_frames()
    floor_k = max(1, n - 1)
    k = 2
    while True:
        k = min(k, floor_k)
        decimated = payload.decimate(k)
        prompt = _assemble(stage, _serialize_payload(decimated))
        estimate = estimate_tokens(prompt)
        if estimate <= budget.usable:
            return AnalyzerRequest(stage=stage, prompt_text=prompt,
                                   payload_ref=ref, token_estimate=estimate,
                                   downsampled=True, decimation=k)
        if k >= floor_k:
            raise OversizeError(
                f"{stage.value} payload for {ref} needs {estimate} tokens even "
                f"at minimum frames; budget allows {budget.usable}"
            )
        # Jump proportionally to the overshoot, always making progress.
        k = max(k + 1, math.ceil(k * estimate / budget.usable))


def _extract_json(raw_text: str):
    """First decodable JSON object in the text; prose around it is ignored."""
    decoder = json.JSONDecoder()
    start = raw_text.find("{")
    while start != -1:
        try:
            doc, _ = decoder.raw_decode(raw_text, start)
            return doc
        except json.JSONDecodeError:
            start = raw_text.find("{", start + 1)
    return None


def parse_response(stage: Stage, raw_text: str,
                   valid_frames: set[int] | None = None) -> AnalyzerResponse:
    """Parse and validate a model response; all failures are in-band."""
    doc = _extract_json(raw_text)
    if doc is None:
        return AnalyzerResponse(raw_text, None, False, "no JSON object found")
    try:
        if stage is Stage.MICRO:
            parsed = ChunkAnalysis.from_json_dict(doc)
            errors = parsed.citation_errors(valid_frames)
            if errors:
                return AnalyzerResponse(
                    raw_text, None, False, "citation out of range: " + errors[0]
                )
        elif stage is Stage.SYNTHESIS:
            parsed = SynthesisReport.from_json_dict(doc)
        else:
            parsed = FinalReport.from_json_dict(doc)
    except (ValueError, KeyError, TypeError) as e:
        return AnalyzerResponse(raw_text, None, False, f"schema violation: {e}")
    return AnalyzerResponse(raw_text, parsed, True)


class AnalyzerClient(Protocol):
    """Pluggable analyzer endpoint: one request in, raw response text out.

    The engine imposes one in-flight request at a time per job; distinct
    jobs never overlap calls (orchestrator-enforced).
    """

    def analyze(self, request: AnalyzerRequest) -> str: ...


class RuleBasedAnalyzer:
    """Deterministic stand-in for a live reasoning model.

    Recovers the payload embedded in the prompt (exactly what a live model
    would see) and computes the stage reduction, emitting the wire format.
    """

    def analyze(self, request: AnalyzerRequest) -> str:
        _, _, payload_json = request.prompt_text.partition(_PAYLOAD_MARKER)
        doc = json.loads(payload_json)
        if request.stage is Stage.MICRO:
            artifact = reduce_chunk(ChunkPayload.from_json_dict(doc))
        elif request.stage is Stage.SYNTHESIS:
            payload = SynthesisPayload.from_json_dict(doc)
            artifact = reduce_synthesis(payload.group_index,
                                        list(payload.analyses))
        else:
            payload = FinalPayload.from_json_dict(doc)
            artifact = reduce_final(payload.session_id, list(payload.syntheses),
                                    payload.dead_zones)
        return json.dumps(artifact.to_json_dict(), sort_keys=True,
                          separators=(",", ":"))


class HttpAnalyzerClient:
    """HTTP adapter for a live analyzer endpoint."""

    def __init__(self, base_url: str, timeout_s: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s

    def analyze(self, request: AnalyzerRequest) -> str:
        resp = httpx.post(
            f"{self.base_url}/analyze",
            json={"stage": request.stage.value, "prompt": request.prompt_text},
            timeout=self.timeout_s,
        )
        resp.raise_for_status()
        return resp.text


def rule_based_analyzer(request: AnalyzerRequest) -> AnalyzerResponse:
    """Run the deterministic analyzer; always yields parse_ok=True."""
    return parse_response(request.stage, RuleBasedAnalyzer().analyze(request))


def run_analyzer(client: AnalyzerClient, request: AnalyzerRequest,
                 valid_frames: set[int] | None = None,
                 max_retries: int = 2) -> AnalyzerResponse:
    """Call the client, retrying on parse failure before degrading."""
    response = None
    for _ in range(max_retries + 1):
        raw = client.analyze(request)
        response = parse_response(request.stage, raw, valid_frames)
        if response.parse_ok:
            return response
    return response
