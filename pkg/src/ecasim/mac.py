"""Contention state machines: binary exponential backoff and deterministic-backoff variants.

Protocols:
  dcf             random backoff, stage reset after success
  eca             deterministic backoff after success, otherwise dcf-like
  eca_hyst        eca + hysteresis (stage kept after success) + fair-share
                  aggregation + stickiness
  eca_hyst_sr     eca_hyst + schedule reset (conservative bitmap evaluation)
  eca_hyst_sr_aggr  schedule reset evaluated every cycle, halving only
  eca_hyst_sr_red   conservative schedule reset with the contention window
                    ceiling reduced to 256

All operations mutate and return the passed state; one state instance belongs
to one node.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

PROTOCOL_NAMES = (
    "dcf",
    "eca",
    "eca_hyst",
    "eca_hyst_sr",
    "eca_hyst_sr_aggr",
    "eca_hyst_sr_red",
)


@dataclass(frozen=True)
class MacParams:
    cw_min: int = 16
    cw_max: int = 1024
    retry_limit: int = 7
    slot_us: int = 9
    difs_us: int = 34
    sifs_us: int = 16
    default_stickiness: int = 1

    def __post_init__(self):
        if self.cw_min < 2 or self.cw_min & (self.cw_min - 1):
            raise ValueError("cw_min must be a power of two >= 2")
        if self.cw_max < self.cw_min or self.cw_max & (self.cw_max - 1):
            raise ValueError("cw_max must be a power of two >= cw_min")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be at least 1")
        if self.slot_us <= 0 or self.difs_us <= 0 or self.sifs_us <= 0:
            raise ValueError("slot, DIFS and SIFS durations must be positive")
        if self.default_stickiness < 0:
            raise ValueError("default_stickiness must be non-negative")

    @property
    def max_stage(self) -> int:
        return (self.cw_max // self.cw_min).bit_length() - 1


@dataclass(frozen=True)
class Protocol:
    kind: str  # dcf | eca | eca_hyst | eca_hyst_sr
    sr_aggressive: bool = False
    reduced_cw_max: int | None = None

    def __post_init__(self):
        if self.kind not in ("dcf", "eca", "eca_hyst", "eca_hyst_sr"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")

    @classmethod
    def from_name(cls, name: str) -> "Protocol":
        key = name.strip().lower()
        if key == "dcf":
            return cls("dcf")
        if key == "eca":
            return cls("eca")
        if key == "eca_hyst":
            return cls("eca_hyst")
        if key == "eca_hyst_sr":
            return cls("eca_hyst_sr")
        if key in ("eca_hyst_sr_aggr", "eca_hyst_sr_aggressive"):
            return cls("eca_hyst_sr", sr_aggressive=True)
        if key in ("eca_hyst_sr_red", "eca_hyst_sr_reduced"):
            return cls("eca_hyst_sr", reduced_cw_max=256)
        raise ValueError(f"unknown protocol {name!r} (expected one of {', '.join(PROTOCOL_NAMES)})")

    @property
    def name(self) -> str:
        if self.kind != "eca_hyst_sr":
            return self.kind
        if self.sr_aggressive:
            return "eca_hyst_sr_aggr"
        if self.reduced_cw_max is not None:
            return "eca_hyst_sr_red"
        return "eca_hyst_sr"

    @property
    def deterministic_after_success(self) -> bool:
        return self.kind != "dcf"

    @property
    def hysteresis(self) -> bool:
        return self.kind in ("eca_hyst", "eca_hyst_sr")

    @property
    def has_sr(self) -> bool:
        return self.kind == "eca_hyst_sr"

    @property
    def fair_share(self) -> bool:
        # Fair share compensates hysteresis-grown stages; plain dcf/eca send
        # one frame per attempt.
        return self.hysteresis

    def effective_params(self, params: MacParams) -> MacParams:
        if self.reduced_cw_max is None or params.cw_max <= self.reduced_cw_max:
            return params
        return MacParams(
            cw_min=params.cw_min,
            cw_max=self.reduced_cw_max,
            retry_limit=params.retry_limit,
            slot_us=params.slot_us,
            difs_us=params.difs_us,
            sifs_us=params.sifs_us,
            default_stickiness=params.default_stickiness,
        )


@dataclass
class SrState:
    """Schedule-reset bookkeeping: busy bitmap over slot offsets since own last transmission."""

    bitmap: bytearray
    gamma_target: int
    tx_since_eval: int = 0
    next_offset: int = 0
    just_changed: bool = False
    previous_bd: int | None = None


@dataclass
class BackoffState:
    stage: int = 0
    counter: int = 0
    retries: int = 0
    stickiness_left: int = 0
    deterministic: bool = False
    sr: SrState | None = None


def contention_window(stage: int, params: MacParams) -> int:
    """CW at the given backoff stage, capped at cw_max."""
    if stage < 0 or stage > params.max_stage:
        raise ValueError(f"stage {stage} outside [0, {params.max_stage}]")
    return min(params.cw_min << stage, params.cw_max)


def deterministic_backoff(stage: int, params: MacParams) -> int:
    """Post-success backoff value: half the stage's window, minus one."""
    cw = contention_window(stage, params)
    return (cw + 1) // 2 - 1 if cw % 2 else cw // 2 - 1


def gamma(backoff: int, params: MacParams) -> int:
    """Transmissions between schedule-reset evaluations for a deterministic backoff."""
    half = params.cw_max // 2
    if half % (backoff + 1):
        raise ValueError(f"backoff {backoff} does not divide cw_max/2 = {half}")
    return half // (backoff + 1)


def fair_share_count(stage: int) -> int:
    """Payloads aggregated into one attempt at the given stage."""
    if stage < 0:
        raise ValueError("stage must be non-negative")
    return 1 << stage


def _stage_for_backoff(backoff: int, params: MacParams) -> int:
    stage = ((backoff + 1) * 2 // params.cw_min).bit_length() - 1
    if stage < 0 or stage > params.max_stage or deterministic_backoff(stage, params) != backoff:
        raise ValueError(f"{backoff} is not a deterministic backoff for these parameters")
    return stage


def _sr_window_reset(sr: SrState, backoff: int, protocol: Protocol, params: MacParams):
    sr.bitmap = bytearray(backoff + 1)
    sr.tx_since_eval = 0
    sr.next_offset = 0
    sr.gamma_target = 1 if protocol.sr_aggressive else gamma(backoff, params)


def new_sr_state(stage: int, protocol: Protocol, params: MacParams) -> SrState:
    bd = deterministic_backoff(stage, params)
    sr = SrState(bitmap=bytearray(bd + 1), gamma_target=1)
    _sr_window_reset(sr, bd, protocol, params)
    return sr


def initial_state(protocol: Protocol, params: MacParams, rng: random.Random) -> BackoffState:
    """Fresh node state: stage 0, random draw, schedule not yet deterministic."""
    return BackoffState(
        stage=0,
        counter=rng.randrange(contention_window(0, params)),
        sr=new_sr_state(0, protocol, params) if protocol.has_sr else None,
    )


def after_success(
    state: BackoffState, protocol: Protocol, params: MacParams, rng: random.Random
) -> BackoffState:
    """Acknowledged transmission: re-arm for the next frame."""
    state.retries = 0
    if protocol.kind == "dcf":
        state.stage = 0
        state.counter = rng.randrange(contention_window(0, params))
        state.deterministic = False
        return state
    if not protocol.hysteresis:
        state.stage = 0
    state.counter = deterministic_backoff(state.stage, params)
    state.deterministic = True
    if protocol.hysteresis:
        state.stickiness_left = max(state.stickiness_left, params.default_stickiness)
    if state.sr is not None:
        state.sr.tx_since_eval += 1
        state.sr.just_changed = False
        state.sr.previous_bd = None
        state.sr.next_offset = 0
    return state


def after_failure(
    state: BackoffState, protocol: Protocol, params: MacParams, rng: random.Random
) -> tuple[BackoffState, bool]:
    """Unacknowledged transmission.  Returns (state, frame_dropped)."""
    sr = state.sr
    if sr is not None and sr.just_changed:
        # A collision immediately after a schedule reduction reverses it.
        state.stage = _stage_for_backoff(sr.previous_bd, params)
        sr.just_changed = False
        sr.previous_bd = None

    state.retries += 1
    if state.retries > params.retry_limit:
        state.retries = 0
        if protocol.kind == "dcf":
            state.stage = 0
        state.counter = rng.randrange(contention_window(state.stage, params))
        state.deterministic = False
        if sr is not None:
            _sr_window_reset(sr, deterministic_backoff(state.stage, params), protocol, params)
        return state, True

    if protocol.hysteresis and state.stickiness_left > 0:
        state.stickiness_left -= 1
        state.counter = deterministic_backoff(state.stage, params)
        state.deterministic = True
    else:
        state.stage = min(state.stage + 1, params.max_stage)
        state.counter = rng.randrange(contention_window(state.stage, params))
        state.deterministic = False
    if sr is not None:
        _sr_window_reset(sr, deterministic_backoff(state.stage, params), protocol, params)
    return state, False


def sr_record_slot(sr: SrState, slot_index: int, busy: bool) -> SrState:
    """Mark one observed slot; a slot ever seen busy in the window stays busy."""
    if slot_index < 0 or slot_index >= len(sr.bitmap):
        raise ValueError(f"slot index {slot_index} outside bitmap of length {len(sr.bitmap)}")
    if busy:
        sr.bitmap[slot_index] = 1
    return sr


def on_idle_slot(state: BackoffState) -> BackoffState:
    """One idle slot observed: decrement and record."""
    if state.counter == 0:
        raise ValueError("idle-slot decrement at counter 0; the node must transmit instead")
    state.counter -= 1
    sr = state.sr
    if sr is not None:
        if sr.next_offset < len(sr.bitmap):
            sr_record_slot(sr, sr.next_offset, False)
        sr.next_offset += 1
    return state


def on_busy_freeze(state: BackoffState) -> BackoffState:
    """One busy period observed: counter frozen, slot position marked busy."""
    sr = state.sr
    if sr is not None:
        if sr.next_offset < len(sr.bitmap):
            sr_record_slot(sr, sr.next_offset, True)
        sr.next_offset += 1
    return state


def sr_due(state: BackoffState) -> bool:
    return state.sr is not None and state.sr.tx_since_eval >= state.sr.gamma_target


def schedule_candidates(stage: int, protocol: Protocol, params: MacParams) -> list[int]:
    """Reduced deterministic backoffs to test, smallest first."""
    if protocol.sr_aggressive:
        # Halving only: the next stage down, when one exists.
        return [deterministic_backoff(stage - 1, params)] if stage >= 1 else []
    return [deterministic_backoff(s, params) for s in range(stage)]


def _sub_schedule_free(bitmap, candidate: int) -> bool:
    # The reduced schedule would transmit at offsets j*(candidate+1)-1 for
    # integer j >= 1; all such recorded offsets must have stayed idle.
    for idx in range(candidate, len(bitmap), candidate + 1):
        if bitmap[idx]:
            return False
    return True


def sr_evaluate(state: BackoffState, protocol: Protocol, params: MacParams) -> BackoffState:
    """End of an observation window: adopt the smallest free sub-schedule, if any."""
    sr = state.sr
    if sr is None:
        raise ValueError("sr_evaluate on a state without schedule-reset bookkeeping")
    if sr.tx_since_eval < sr.gamma_target:
        raise ValueError("evaluation triggered before the observation window completed")
    current_bd = deterministic_backoff(state.stage, params)
    for candidate in schedule_candidates(state.stage, protocol, params):
        if _sub_schedule_free(sr.bitmap, candidate):
            state.stage = _stage_for_backoff(candidate, params)
            state.counter = candidate
            sr.just_changed = True
            sr.previous_bd = current_bd
            state.stickiness_left += 1
            _sr_window_reset(sr, candidate, protocol, params)
            return state
    _sr_window_reset(sr, current_bd, protocol, params)
    return state
