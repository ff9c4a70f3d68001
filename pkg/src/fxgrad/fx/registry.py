"""Live effect-instance registry.

Instances built through ``fx.factory.create_effect`` are tracked here so the
trainer and the CLI can report how many effects are alive (3M under SPSA,
(2P + 1)M under finite differences) and how much audio each effect id has
processed. Counters are process-wide and guarded by one lock.
"""
from __future__ import annotations

import copy
import threading
import weakref
from typing import Any, Dict, Optional

_lock = threading.Lock()
_live: "weakref.WeakSet[Any]" = weakref.WeakSet()
_usage: Dict[str, Any] = {
    "created": 0,
    "effects": {},  # effect_id -> {created, process_calls, samples}
}


def _ensure_effect(effect_id: str) -> Dict[str, int]:
    return _usage["effects"].setdefault(effect_id, {"created": 0, "process_calls": 0, "samples": 0})


def track(fx: Any) -> Any:
    with _lock:
        _live.add(fx)
        _usage["created"] += 1
        _ensure_effect(fx.effect_id)["created"] += 1
    return fx


def record_process(fx: Any, n_samples: int) -> None:
    # untracked instances (chain members, ad-hoc test effects) are not counted
    with _lock:
        if fx not in _live:
            return
        e = _ensure_effect(fx.effect_id)
        e["process_calls"] += 1
        e["samples"] += int(n_samples)


def live_count(effect_id: Optional[str] = None) -> int:
    with _lock:
        if effect_id is None:
            return len(_live)
        return sum(1 for fx in _live if fx.effect_id == effect_id)


def snapshot(reset: bool = False) -> Dict[str, Any]:
    with _lock:
        data = copy.deepcopy(_usage)
        data["live"] = len(_live)
        if reset:
            _usage["created"] = 0
            _usage["effects"] = {}
        return data
