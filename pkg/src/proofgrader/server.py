"""HTTP grading service.

Serves problem statements, assigns students to treatment groups, grades
submissions through a ProblemGrader, applies the group's feedback strategy,
and records every attempt in an append-only log. The log write happens
before the response is sent, so an acknowledged attempt is always durable;
a crash between append and response can duplicate a record but never lose
one (duplicates are detectable by body_hash within an attempt stream).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from pathlib import Path
from typing import Callable, Mapping, Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import mathtext
from .corpus import Problem, RubricVector
from .embeddings import (
    DimensionMismatchError,
    EmbedBatchError,
    Embedder,
    RemoteEmbedError,
)
from .feedback import (
    FeedbackCatalog,
    Strategy,
    default_catalog,
    reveal_seed,
    select_feedback,
)
from .grader import ProblemGrader, grade_proof
from .rng import PortableRng
from .studystats import GROUPS

MAX_BODY_BYTES = 64 * 1024

_ZERO_RUBRIC = RubricVector(bits=(0,) * 7)


def assign_group(student_id: str) -> str:
    """Deterministic group for a student without a roster entry.

    The first eight bytes of sha256(student_id) taken mod 3 index into the
    fixed group order, which spreads any student population uniformly.
    """
    digest = hashlib.sha256(student_id.encode("utf-8")).digest()
    return GROUPS[int.from_bytes(digest[:8], "big") % len(GROUPS)]


def body_fingerprint(body_markdown: str) -> str:
    """Hex sha256 of the normalized body; stable across resubmissions."""
    normalized = mathtext.normalize(body_markdown)
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


def count_body_chars(body_markdown: str) -> int:
    return sum(1 for c in body_markdown if not c.isspace())


class AttemptLog:
    """Append-only line-delimited log with a single serialized appender.

    Each append is flushed and fsynced before returning, which is what lets
    the service acknowledge attempts only after they are durable.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._fh = self.path.open("a", encoding="utf-8")

    def append(self, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, separators=(",", ":"))
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            self._fh.close()


class ServerState:
    """Shared state behind the endpoints.

    Graders, problems, and the feedback catalog are immutable; sessions,
    attempt counters, and per-student history are guarded by one lock, the
    same serialization that assigns attempt indices and appends to the log.
    Restarting over an existing log file restores counters and history by
    replay.
    """

    def __init__(
        self,
        *,
        problems: tuple[Problem, ...],
        graders: Mapping[str, ProblemGrader],
        embedder: Optional[Embedder],
        log_path,
        catalog: Optional[FeedbackCatalog] = None,
        roster: Optional[Mapping[str, str]] = None,
        max_attempts: Optional[int] = None,
        clock: Callable[[], float] = time.time,
    ):
        self.problems = tuple(problems)
        self.problem_ids = {p.problem_id for p in self.problems}
        self.graders = dict(graders)
        self.embedder = embedder
        self.catalog = catalog if catalog is not None else default_catalog(
            [p.problem_id for p in self.problems]
        )
        for pid in self.problem_ids:
            self.catalog.for_problem(pid)
        self.roster = dict(roster) if roster else {}
        for sid, group in self.roster.items():
            if group not in GROUPS:
                raise ValueError(f"roster assigns {sid!r} to unknown group {group!r}")
        self.max_attempts = max_attempts
        self.clock = clock

        self.lock = threading.Lock()
        self.sessions: dict[str, str] = {}
        self.history: dict[str, list[dict]] = {}
        self.counts: dict[tuple[str, str], int] = {}
        self._last_ts = 0.0
        self._replay(Path(log_path))
        self.log = AttemptLog(log_path)

    def _replay(self, path: Path) -> None:
        if not path.exists():
            return
        with path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}: line {line_no}: invalid JSON: {exc}")
                sid = rec["student_id"]
                pid = rec["problem_id"]
                seen = self.sessions.setdefault(sid, rec["group"])
                if seen != rec["group"]:
                    raise ValueError(
                        f"{path}: line {line_no}: student {sid!r} changes group"
                    )
                key = (sid, pid)
                self.counts[key] = max(self.counts.get(key, 0), int(rec["attempt_index"]))
                self.history.setdefault(sid, []).append(rec)
                self._last_ts = max(self._last_ts, float(rec["ts"]))

    def next_timestamp(self) -> float:
        """Monotone non-decreasing timestamps, even if the clock steps back."""
        ts = max(float(self.clock()), self._last_ts)
        self._last_ts = ts
        return ts


class SessionRequest(BaseModel):
    student_id: str
    roster_group: Optional[str] = None


class AttemptRequest(BaseModel):
    student_id: str
    body_markdown: str


def _feedback_payload(bundle) -> dict:
    payload: dict = {"strategy": bundle.mode.value}
    if bundle.mode is Strategy.SELF_EVAL:
        payload["checklist"] = list(bundle.checklist)
    else:
        payload["general_message"] = bundle.general_message
        payload["revealed"] = [
            {"rubric_id": rid, "failure_sentence": sentence}
            for rid, sentence in bundle.revealed
        ]
    return payload


def build_app(state: ServerState, webui_dir=None) -> FastAPI:
    app = FastAPI(title="proof grading service")

    @app.get("/api/problems")
    def list_problems():
        return [
            {"problem_id": p.problem_id, "statement_markdown": p.statement_markdown}
            for p in state.problems
        ]

    @app.post("/api/sessions")
    def create_session(req: SessionRequest):
        if not req.student_id.strip():
            raise HTTPException(status_code=400, detail="student_id must be non-empty")
        if req.roster_group is not None and req.roster_group not in GROUPS:
            raise HTTPException(
                status_code=400,
                detail=f"unknown group {req.roster_group!r}; expected one of {list(GROUPS)}",
            )
        sid = req.student_id
        requested = (
            req.roster_group
            if req.roster_group is not None
            else state.roster.get(sid, assign_group(sid))
        )
        with state.lock:
            existing = state.sessions.get(sid)
            if existing is None:
                state.sessions[sid] = requested
                group = requested
            elif req.roster_group is not None and existing != req.roster_group:
                raise HTTPException(
                    status_code=409,
                    detail=(
                        f"student {sid!r} already assigned to {existing!r}; "
                        f"refusing re-assignment to {req.roster_group!r}"
                    ),
                )
            else:
                group = existing
            created = state.next_timestamp()
        return {"student_id": sid, "group": group, "created": created}

    @app.post("/api/problems/{problem_id}/attempts")
    def submit_attempt(problem_id: str, req: AttemptRequest, response: Response):
        if problem_id not in state.problem_ids:
            raise HTTPException(status_code=404, detail=f"unknown problem {problem_id!r}")
        group = state.sessions.get(req.student_id)
        if group is None:
            raise HTTPException(
                status_code=404,
                detail=f"no session for student {req.student_id!r}; create one first",
            )
        if len(req.body_markdown.encode("utf-8")) > MAX_BODY_BYTES:
            raise HTTPException(
                status_code=413,
                detail=f"body exceeds {MAX_BODY_BYTES} bytes",
            )
        strategy = Strategy(group)
        key = (req.student_id, problem_id)
        if state.max_attempts is not None:
            with state.lock:
                if state.counts.get(key, 0) >= state.max_attempts:
                    raise HTTPException(
                        status_code=429,
                        detail=f"attempt limit {state.max_attempts} reached",
                    )

        grader = state.graders.get(problem_id)
        if grader is None and strategy is not Strategy.SELF_EVAL:
            raise HTTPException(
                status_code=409,
                detail=f"no grader loaded for problem {problem_id!r}",
            )

        body_hash = body_fingerprint(req.body_markdown)
        started = time.perf_counter()
        rubric = None
        score = None
        if grader is not None:
            try:
                result = grade_proof(grader, req.body_markdown, state.embedder)
            except (RemoteEmbedError, EmbedBatchError, OSError) as exc:
                response.headers["Retry-After"] = "1"
                raise HTTPException(
                    status_code=503,
                    detail=f"embedding provider unavailable: {exc}",
                    headers={"Retry-After": "1"},
                )
            except DimensionMismatchError as exc:
                raise HTTPException(status_code=500, detail=str(exc))
            rubric = result.rubric
            score = 100.0 * rubric.num_correct / len(rubric.bits)
        latency_ms = (time.perf_counter() - started) * 1000.0

        if rubric is not None:
            rng = PortableRng(reveal_seed(req.student_id, problem_id, body_hash))
            bundle = select_feedback(
                rubric, strategy, state.catalog.for_problem(problem_id), rng
            )
        else:
            bundle = select_feedback(
                # All-zero placeholder: SelfEval bundles never expose rubric
                # state, so the checklist is the same for any vector.
                _ZERO_RUBRIC,
                Strategy.SELF_EVAL,
                state.catalog.for_problem(problem_id),
            )

        with state.lock:
            index = state.counts.get(key, 0) + 1
            if state.max_attempts is not None and index > state.max_attempts:
                raise HTTPException(
                    status_code=429,
                    detail=f"attempt limit {state.max_attempts} reached",
                )
            record = {
                "ts": state.next_timestamp(),
                "student_id": req.student_id,
                "group": group,
                "problem_id": problem_id,
                "attempt_index": index,
                "score_percent": score,
                "rubric": list(rubric.bits) if rubric is not None else None,
                "body_hash": body_hash,
                "revealed_rubric": bundle.revealed[0][0] if bundle.revealed else None,
                "latency_ms": latency_ms,
                "body_chars": count_body_chars(req.body_markdown),
            }
            state.log.append(record)
            state.counts[key] = index
            state.history.setdefault(req.student_id, []).append(record)

        payload: dict = {
            "attempt_index": index,
            "problem_id": problem_id,
            "feedback": _feedback_payload(bundle),
        }
        if strategy is not Strategy.SELF_EVAL and rubric is not None:
            payload["rubric"] = list(rubric.bits)
            payload["score_percent"] = score
            if rubric is not None and result.empty_body:
                payload["empty_body"] = True
        return payload

    @app.get("/api/students/{student_id}/attempts")
    def attempt_history(student_id: str):
        group = state.sessions.get(student_id)
        if group is None:
            raise HTTPException(
                status_code=404, detail=f"unknown student {student_id!r}"
            )
        hide_scores = Strategy(group) is Strategy.SELF_EVAL
        attempts = []
        with state.lock:
            records = list(state.history.get(student_id, ()))
        for rec in records:
            item = {
                "problem_id": rec["problem_id"],
                "attempt_index": rec["attempt_index"],
                "ts": rec["ts"],
                "body_hash": rec["body_hash"],
            }
            if not hide_scores:
                item["score_percent"] = rec["score_percent"]
                item["rubric"] = rec["rubric"]
                item["revealed_rubric"] = rec["revealed_rubric"]
            attempts.append(item)
        return {"student_id": student_id, "group": group, "attempts": attempts}

    if webui_dir is not None:
        app.mount("/", StaticFiles(directory=str(webui_dir), html=True), name="webui")

    return app
