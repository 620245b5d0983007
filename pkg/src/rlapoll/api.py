"""HTTP/JSON service for live audits.

One computation core: every number the service returns comes from the same
engine and planner the CLI uses.  Per-audit mutations are serialized
through a per-audit lock; reads take a snapshot under the same lock.
Round posts carry the client's view of how many rounds exist
(expected_rounds); a stale view gets 409 instead of a double-applied
round.

Endpoints:
  POST /contests                     register a contest, returns its id
  POST /audits                       create an audit (contest_id, rule, ...)
  GET  /audits/{id}                  full status with per-round detail
  POST /audits/{id}/rounds           enter a round's observed tallies
  GET  /audits/{id}/next-round?target=0.9   planner recommendation
  GET  /audits/{id}/whatif?n=...     hypothetical stop probability at size n
  POST /audits/{id}/escalate         proceed to full hand count
"""

from __future__ import annotations

import json
import math
import re
import threading
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .contest import ContestRecord, DataError
from .engine import (
    AuditState,
    RoundObservation,
    RoundSchedule,
    ScheduleViolation,
    StateError,
    escalate,
    execute_round,
    risk_report,
)
from .planner import next_round_size, stop_prob_at
from .rules import AuditConfig, Rule, kmin_for_round
from .prob import convolve_round
from .sessions import SCHEMA_VERSION, SessionDocument, save_session

__all__ = ["AuditService", "make_server", "serve"]


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass
class _AuditSlot:
    doc: SessionDocument
    contest_id: str
    lock: threading.Lock = field(default_factory=threading.Lock)


class AuditService:
    """In-memory audit registry with optional on-disk session persistence."""

    def __init__(self, state_dir: str | Path | None = None):
        self._contests: dict[str, ContestRecord] = {}
        self._audits: dict[str, _AuditSlot] = {}
        self._registry_lock = threading.Lock()
        self._state_dir = Path(state_dir) if state_dir else None
        if self._state_dir:
            self._state_dir.mkdir(parents=True, exist_ok=True)

    # -- contests ----------------------------------------------------------

    def create_contest(self, payload: dict) -> dict:
        try:
            if "winner" in payload:
                contest = ContestRecord.from_dict(payload)
            else:
                contest = ContestRecord.from_tallies(
                    payload["name"], payload["tallies"], payload["total_ballots"]
                )
        except (DataError, KeyError, TypeError, ValueError) as exc:
            raise ApiError(422, f"bad contest: {exc}") from exc
        contest_id = uuid.uuid4().hex[:12]
        with self._registry_lock:
            self._contests[contest_id] = contest
        return {"contest_id": contest_id, "contest": contest.to_dict()}

    # -- audits ------------------------------------------------------------

    def create_audit(self, payload: dict) -> dict:
        try:
            contest = self._contests[payload["contest_id"]]
        except KeyError as exc:
            raise ApiError(404, "unknown contest_id") from exc
        try:
            cfg = AuditConfig(
                alpha=float(payload.get("alpha", 0.1)),
                p=contest.p,
                rule=Rule(payload["rule"]),
                delta=float(payload.get("delta", 1.0)),
            )
            schedule = RoundSchedule(tuple(int(x) for x in payload["schedule"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(422, f"bad audit spec: {exc}") from exc
        audit_id = uuid.uuid4().hex[:12]
        state = AuditState(config=cfg, schedule=schedule)
        doc = SessionDocument(audit_id=audit_id, contest=contest, config=cfg, state=state)
        doc.log_action("create", f"rule={cfg.rule.value}")
        with self._registry_lock:
            self._audits[audit_id] = _AuditSlot(doc=doc, contest_id=payload["contest_id"])
        self._persist(audit_id)
        return {"audit_id": audit_id, **self._status_unlocked(audit_id)}

    def _slot(self, audit_id: str) -> _AuditSlot:
        try:
            return self._audits[audit_id]
        except KeyError as exc:
            raise ApiError(404, "unknown audit id") from exc

    def _persist(self, audit_id: str) -> None:
        if not self._state_dir:
            return
        slot = self._audits[audit_id]
        save_session(slot.doc, self._state_dir / f"{audit_id}.json")

    def _status_unlocked(self, audit_id: str) -> dict:
        slot = self._audits[audit_id]
        st = slot.doc.state
        rep = risk_report(st)
        return {
            "schema_version": SCHEMA_VERSION,
            "audit_id": audit_id,
            "contest_id": slot.contest_id,
            "contest": slot.doc.contest.to_dict(),
            "config": {
                "alpha": st.config.alpha,
                "delta": st.config.delta,
                "p": st.config.p,
                "rule": st.config.rule.value,
            },
            "schedule": {
                "sizes": list(st.schedule.sizes),
                "version": st.schedule.version,
                "amended_from": list(st.schedule.amended_from) if st.schedule.amended_from else None,
            },
            "status": st.status.value,
            "rounds_executed": st.rounds_executed,
            "relevant_drawn": st.relevant_drawn,
            "rounds": [
                {
                    "round": i + 1,
                    "n": sum(o.relevant for o, _ in st.rounds[: i + 1]),
                    "draws": obs.draws,
                    "winner_relevant": obs.winner_relevant,
                    "loser_relevant": obs.loser_relevant,
                    "irrelevant": obs.irrelevant,
                    "k_cumulative": sum(o.winner_relevant for o, _ in st.rounds[: i + 1]),
                    "kmin": ev.kmin,
                    "ratio": _json_num(ev.ratio_at_k),
                    "p_value_analog": _json_num(ev.p_value_analog),
                    "decision": ev.decision.value,
                    "stop_prob": rep.rows[i]["stop_prob"],
                    "risk": rep.rows[i]["risk"],
                }
                for i, (obs, ev) in enumerate(st.rounds)
            ],
            "cum_risk": st.cum_risk,
            "cum_stop": st.cum_stop,
            "risk_budget": {
                "alpha": st.config.alpha,
                "spent": st.cum_risk,
                "fraction_spent": st.cum_risk / st.config.alpha,
            },
            "content_hash": slot.doc.content_hash(),
        }

    def get_audit(self, audit_id: str) -> dict:
        slot = self._slot(audit_id)
        with slot.lock:
            return self._status_unlocked(audit_id)

    def post_round(self, audit_id: str, payload: dict) -> dict:
        slot = self._slot(audit_id)
        with slot.lock:
            st = slot.doc.state
            expected = payload.get("expected_rounds")
            if expected is not None and int(expected) != st.rounds_executed:
                raise ApiError(
                    409,
                    f"version conflict: audit has {st.rounds_executed} round(s), "
                    f"client expected {expected}; refresh and retry",
                )
            try:
                obs = RoundObservation(
                    draws=int(payload["draws"]),
                    winner_relevant=int(payload.get("winner", payload.get("winner_relevant"))),
                    loser_relevant=int(payload.get("loser", payload.get("loser_relevant"))),
                    irrelevant=int(payload.get("irrelevant", 0)),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(422, f"bad observation: {exc}") from exc
            try:
                _, ev = execute_round(st, obs, allow_amend=bool(payload.get("amend", False)))
            except ScheduleViolation as exc:
                raise ApiError(
                    409,
                    f"{exc} (to accept the actual draw count, re-post with \"amend\": true)",
                ) from exc
            except StateError as exc:
                raise ApiError(409, str(exc)) from exc
            except ValueError as exc:
                raise ApiError(422, str(exc)) from exc
            slot.doc.log_action("round", f"draws={obs.draws} winner={obs.winner_relevant}")
            self._persist(audit_id)
            return {
                "schema_version": SCHEMA_VERSION,
                "audit_id": audit_id,
                "evaluation": {
                    "kmin": ev.kmin,
                    "ratio_at_k": _json_num(ev.ratio_at_k),
                    "sigma_at_k": _json_num(ev.sigma_at_k),
                    "decision": ev.decision.value,
                    "p_value_analog": _json_num(ev.p_value_analog),
                },
                "status": st.status.value,
                "rounds_executed": st.rounds_executed,
                "cum_risk": st.cum_risk,
                "cum_stop": st.cum_stop,
                "schedule_version": st.schedule.version,
            }

    def next_round(self, audit_id: str, target: float) -> dict:
        slot = self._slot(audit_id)
        with slot.lock:
            st = slot.doc.state
            try:
                res = next_round_size(target, st, st.config, contest=slot.doc.contest)
            except ValueError as exc:
                raise ApiError(422, str(exc)) from exc
            return {
                "schema_version": SCHEMA_VERSION,
                "audit_id": audit_id,
                "target": target,
                "relevant_round_size": res.relevant_round_size,
                "scaled_draws": res.scaled_draws,
                "expected_distinct": res.expected_distinct,
                "achieved_stop_prob": res.achieved_stop_prob,
                "method": res.method.value,
            }

    def whatif(self, audit_id: str, n: int) -> dict:
        slot = self._slot(audit_id)
        with slot.lock:
            st = slot.doc.state
            try:
                prob = stop_prob_at(n, st, st.config)
            except ValueError as exc:
                raise ApiError(422, str(exc)) from exc
            if st.rounds_executed == 0:
                h0 = convolve_round(st.h0, n)
                ha = convolve_round(st.ha, n)
                surviving = 1.0
            else:
                d = n - st.relevant_drawn
                h0 = convolve_round(st.h0, d)
                ha = convolve_round(st.ha, d)
                surviving = st.ha.total_mass()
            kmin = kmin_for_round(h0, ha, st.config)
            return {
                "schema_version": SCHEMA_VERSION,
                "audit_id": audit_id,
                "n": n,
                "kmin": kmin,
                "stop_prob": prob,
                "conditional_stop_prob": prob / surviving,
            }

    def escalate_audit(self, audit_id: str) -> dict:
        slot = self._slot(audit_id)
        with slot.lock:
            try:
                escalate(slot.doc.state)
            except StateError as exc:
                raise ApiError(409, str(exc)) from exc
            slot.doc.log_action("escalate", "operator escalated")
            self._persist(audit_id)
            return {
                "schema_version": SCHEMA_VERSION,
                "audit_id": audit_id,
                "status": slot.doc.state.status.value,
            }


def _json_num(x: float) -> float | str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


_ROUTES = [
    ("POST", re.compile(r"^/contests$"), lambda s, m, body, q: s.create_contest(body)),
    ("POST", re.compile(r"^/audits$"), lambda s, m, body, q: s.create_audit(body)),
    ("GET", re.compile(r"^/audits/(?P<id>[0-9a-f]+)$"), lambda s, m, body, q: s.get_audit(m["id"])),
    (
        "POST",
        re.compile(r"^/audits/(?P<id>[0-9a-f]+)/rounds$"),
        lambda s, m, body, q: s.post_round(m["id"], body),
    ),
    (
        "GET",
        re.compile(r"^/audits/(?P<id>[0-9a-f]+)/next-round$"),
        lambda s, m, body, q: s.next_round(m["id"], float(q.get("target", ["0.9"])[0])),
    ),
    (
        "GET",
        re.compile(r"^/audits/(?P<id>[0-9a-f]+)/whatif$"),
        lambda s, m, body, q: s.whatif(m["id"], int(q.get("n", ["0"])[0])),
    ),
    (
        "POST",
        re.compile(r"^/audits/(?P<id>[0-9a-f]+)/escalate$"),
        lambda s, m, body, q: s.escalate_audit(m["id"]),
    ),
]


class _Handler(BaseHTTPRequestHandler):
    service: AuditService  # set by make_server

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: dict) -> None:
        blob = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(blob)

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        query = parse_qs(parsed.query)
        body = {}
        length = int(self.headers.get("Content-Length") or 0)
        if length:
            try:
                body = json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                self._send(422, {"error": "request body is not valid JSON"})
                return
        for verb, pattern, handler in _ROUTES:
            if verb != method:
                continue
            match = pattern.match(parsed.path)
            if match:
                try:
                    result = handler(self.service, match.groupdict(), body, query)
                except ApiError as exc:
                    self._send(exc.status, {"error": exc.message, "schema_version": SCHEMA_VERSION})
                except (TypeError, ValueError) as exc:
                    self._send(422, {"error": str(exc), "schema_version": SCHEMA_VERSION})
                else:
                    self._send(200, result)
                return
        self._send(404, {"error": f"no route for {method} {parsed.path}", "schema_version": SCHEMA_VERSION})

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()


def make_server(host: str = "127.0.0.1", port: int = 0, state_dir=None) -> ThreadingHTTPServer:
    service = AuditService(state_dir=state_dir)
    handler = type("BoundHandler", (_Handler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve(host: str = "127.0.0.1", port: int = 8642, state_dir=None) -> None:
    server = make_server(host, port, state_dir)
    print(f"rlapoll service on http://{host}:{server.server_address[1]}/ (Ctrl-C to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
