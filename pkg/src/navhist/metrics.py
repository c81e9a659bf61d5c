"""Navigation metrics and the composite training objective, evaluated as plain numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import Episode


def _require(episodes: Sequence[Episode]) -> None:
    if not episodes:
        raise ValueError("at least one episode is required")


def success_rate(episodes: Sequence[Episode]) -> float:
    _require(episodes)
    return sum(1 for ep in episodes if ep.success) / len(episodes)


def sel_term(ep: Episode) -> float:
    """Per-episode S * w / max(w, e)."""
    if ep.shortest_len <= 0 or ep.episode_len <= 0:
        raise ValueError(
            f"episode lengths must be positive (w={ep.shortest_len}, e={ep.episode_len})"
        )
    if not ep.success:
        return 0.0
    return ep.shortest_len / max(ep.shortest_len, ep.episode_len)


def sel(episodes: Sequence[Episode]) -> float:
    """Episode-length weighted success."""
    _require(episodes)
    return math.fsum(sel_term(ep) for ep in episodes) / len(episodes)


def pct_rooms(episodes: Sequence[Episode]) -> float:
    """Mean over episodes of the percentage of rooms visited."""
    _require(episodes)
    return math.fsum(100.0 * len(ep.rooms_visited) / ep.total_rooms for ep in episodes) / len(
        episodes
    )


def action_loss(per_step_ce: Sequence[float]) -> float:
    return math.fsum(per_step_ce)


def answer_loss(token_logprobs: Sequence[float]) -> float:
    for lp in token_logprobs:
        if lp > 0:
            raise ValueError(f"log-probability must be <= 0, got {lp}")
    return -math.fsum(token_logprobs) + 0.0


@dataclass(frozen=True)
class ObjectiveInputs:
    action_losses: Sequence[float] = ()
    answer_token_logprobs: Sequence[float] = ()
    occ_loss: float = 0.0
    lambda_occ: float = 0.0

    def __post_init__(self) -> None:
        vals = [*self.action_losses, *self.answer_token_logprobs, self.occ_loss, self.lambda_occ]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("objective inputs must be finite")
        if self.occ_loss < 0 or self.lambda_occ < 0:
            raise ValueError("occ_loss and lambda_occ must be non-negative")


def composite_objective(inp: ObjectiveInputs) -> float:
    return (
        action_loss(inp.action_losses)
        + answer_loss(inp.answer_token_logprobs)
        + inp.lambda_occ * inp.occ_loss
    )


def summarize(episodes: Sequence[Episode]) -> dict:
    return {
        "n": len(episodes),
        "sr": success_rate(episodes),
        "sel": sel(episodes),
        "pct_rooms": pct_rooms(episodes),
    }
