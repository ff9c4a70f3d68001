"""
Run state and heartbeat reporting for training jobs.

A ``ProgressReporter`` owns one ``RunView``; the trainer calls ``update`` at
phase changes and every few steps. Each heartbeat is logged and handed to an
optional hook (the CLI uses none; tests capture snapshots).
"""
from __future__ import annotations

import logging
import threading
import time
import uuid
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Callable, Dict, Optional

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


# ---- States & phases ---------------------------------------------------------
class RunState(str, Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    SUCCEEDED = "SUCCEEDED"
    FAILED = "FAILED"
    STOPPED_EARLY = "STOPPED_EARLY"


class Phase(str, Enum):
    scheduling = "scheduling"
    training = "training"
    validating = "validating"
    finalizing = "finalizing"


# ---- Views -------------------------------------------------------------------
class RunProgress(BaseModel):
    phase: Phase
    pct: int = Field(ge=0, le=100)
    epoch: int = 0


class RunMetrics(BaseModel):
    steps: int = 0
    aborted_steps: int = 0
    frames: int = 0
    swaps: int = 0
    elapsed_ms: int = 0


class RunView(BaseModel):
    run_id: str
    status: RunState
    progress: RunProgress
    started_at: datetime
    updated_at: datetime
    metrics: RunMetrics = Field(default_factory=RunMetrics)
    best_val: Optional[float] = None
    error: Optional[Dict[str, Any]] = None
    # last log line, for display
    log: Optional[str] = None


Hook = Callable[[RunView], None]


class ProgressReporter:
    def __init__(self, run_id: Optional[str] = None, hook: Optional[Hook] = None):
        now = datetime.now(timezone.utc)
        self._lock = threading.Lock()
        self._t0 = time.perf_counter()
        self._hook = hook
        self.view = RunView(
            run_id=run_id or uuid.uuid4().hex[:12],
            status=RunState.QUEUED,
            progress=RunProgress(phase=Phase.scheduling, pct=0),
            started_at=now,
            updated_at=now,
        )

    def _emit(self) -> None:
        snap = self.view.model_copy(deep=True)
        if self._hook is not None:
            self._hook(snap)

    def start(self) -> None:
        with self._lock:
            self._t0 = time.perf_counter()
            self.view.status = RunState.RUNNING
            self.view.updated_at = datetime.now(timezone.utc)
        logger.info("run %s started", self.view.run_id)
        self._emit()

    def update(
        self,
        phase: Phase,
        pct: int,
        epoch: Optional[int] = None,
        metrics_delta: Optional[Dict[str, int]] = None,
        message: Optional[str] = None,
        best_val: Optional[float] = None,
    ) -> None:
        with self._lock:
            v = self.view
            v.progress = RunProgress(
                phase=phase, pct=max(0, min(100, int(pct))), epoch=v.progress.epoch if epoch is None else epoch
            )
            m = v.metrics
            for k, d in (metrics_delta or {}).items():
                setattr(m, k, getattr(m, k) + int(d))
            m.elapsed_ms = int((time.perf_counter() - self._t0) * 1000)
            if best_val is not None:
                v.best_val = best_val
            if message:
                v.log = message
            v.updated_at = datetime.now(timezone.utc)
        logger.info(
            "[%s] epoch %d %s %d%% | steps=%d aborted=%d swaps=%d%s",
            v.run_id, v.progress.epoch, phase.value, v.progress.pct, m.steps, m.aborted_steps, m.swaps,
            f" | {message}" if message else "",
        )
        self._emit()

    def count(self, metrics_delta: Dict[str, int]) -> None:
        """Bump counters without a heartbeat."""
        with self._lock:
            for k, d in metrics_delta.items():
                setattr(self.view.metrics, k, getattr(self.view.metrics, k) + int(d))

    def finish(self, state: RunState, error: Optional[BaseException] = None) -> None:
        with self._lock:
            self.view.status = state
            self.view.progress = RunProgress(phase=Phase.finalizing, pct=100, epoch=self.view.progress.epoch)
            if error is not None:
                self.view.error = {"type": type(error).__name__, "message": str(error)}
            self.view.metrics.elapsed_ms = int((time.perf_counter() - self._t0) * 1000)
            self.view.updated_at = datetime.now(timezone.utc)
        level = logging.ERROR if state == RunState.FAILED else logging.INFO
        logger.log(level, "run %s finished: %s", self.view.run_id, state.value)
        self._emit()
