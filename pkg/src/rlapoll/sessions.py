"""Audit session persistence with replay verification.

A session document records everything an auditor did: the contest, the
configured rule, the frozen schedule and any amendments, every round's
observation and evaluation, the cumulative accounting, and a log of
operator actions.  Stored conclusions are never trusted: loading a
document replays the observations through a fresh engine and refuses the
file if any recomputed number or the content hash disagrees.

Probabilities are serialized as decimals with 12 significant digits; the
engine is deterministic, so replaying produces the identical document and
hash, byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .contest import ContestRecord
from .engine import (
    AuditError,
    AuditState,
    RoundObservation,
    RoundSchedule,
    execute_round,
)
from .rules import AuditConfig, Rule, StoppingEvaluation

__all__ = ["SCHEMA_VERSION", "TamperError", "SessionDocument", "save_session", "load_session"]

SCHEMA_VERSION = 1


class TamperError(Exception):
    """Stored session disagrees with its own replay or hash."""


def fmt_prob(x: float) -> str:
    """Decimal with 12 significant digits; stable across platforms."""
    if x != x:
        return "nan"
    if x == float("inf"):
        return "inf"
    return format(x, ".12g")


def _config_dict(cfg: AuditConfig) -> dict:
    return {
        "alpha": fmt_prob(cfg.alpha),
        "p": fmt_prob(cfg.p),
        "delta": fmt_prob(cfg.delta),
        "rule": cfg.rule.value,
    }


def _config_from(d: dict) -> AuditConfig:
    return AuditConfig(
        alpha=float(d["alpha"]),
        p=float(d["p"]),
        delta=float(d["delta"]),
        rule=Rule(d["rule"]),
        allow_small_delta=True,
    )


def _eval_dict(ev: StoppingEvaluation) -> dict:
    return {
        "kmin": ev.kmin,
        "ratio_at_k": fmt_prob(ev.ratio_at_k),
        "sigma_at_k": fmt_prob(ev.sigma_at_k),
        "decision": ev.decision.value,
        "p_value_analog": fmt_prob(ev.p_value_analog),
    }


@dataclass
class SessionDocument:
    """Serializable record of one audit session."""

    audit_id: str
    contest: ContestRecord
    config: AuditConfig
    state: AuditState
    audit_log: list[dict] = field(default_factory=list)

    def log_action(self, action: str, detail: str = "") -> None:
        self.audit_log.append({"ts": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), "action": action, "detail": detail})

    def decision_payload(self) -> dict:
        """Every field the hash must cover: anything that affects a decision."""
        st = self.state
        return {
            "schema_version": SCHEMA_VERSION,
            "audit_id": self.audit_id,
            "contest": self.contest.to_dict(),
            "config": _config_dict(self.config),
            "schedule": {
                "sizes": list(st.schedule.sizes),
                "version": st.schedule.version,
                "amended_from": list(st.schedule.amended_from) if st.schedule.amended_from else None,
            },
            "rounds": [
                {
                    "observation": {
                        "draws": obs.draws,
                        "winner_relevant": obs.winner_relevant,
                        "loser_relevant": obs.loser_relevant,
                        "irrelevant": obs.irrelevant,
                    },
                    "evaluation": _eval_dict(ev),
                }
                for obs, ev in st.rounds
            ],
            "cumulative": {
                "stop": fmt_prob(st.cum_stop),
                "risk": fmt_prob(st.cum_risk),
                "relevant_drawn": st.relevant_drawn,
            },
            "status": st.status.value,
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.decision_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_dict(self) -> dict:
        doc = self.decision_payload()
        doc["audit_log"] = list(self.audit_log)
        doc["content_hash"] = self.content_hash()
        return doc


def _replay(doc: dict) -> tuple[ContestRecord, AuditConfig, AuditState]:
    contest = ContestRecord.from_dict(doc["contest"])
    cfg = _config_from(doc["config"])
    original = doc["schedule"].get("amended_from") or doc["schedule"]["sizes"]
    state = AuditState(config=cfg, schedule=RoundSchedule(tuple(original)))
    try:
        for row in doc["rounds"]:
            o = row["observation"]
            obs = RoundObservation(
                draws=o["draws"],
                winner_relevant=o["winner_relevant"],
                loser_relevant=o["loser_relevant"],
                irrelevant=o["irrelevant"],
            )
            execute_round(state, obs, allow_amend=True)
    except (AuditError, ValueError, KeyError) as exc:
        # A stored round sequence no legitimate engine run could produce.
        raise TamperError(f"stored rounds do not replay: {exc}") from exc
    return contest, cfg, state


def save_session(doc: SessionDocument, path: str | Path) -> str:
    """Write the session atomically; returns the content hash."""
    payload = doc.to_dict()
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return payload["content_hash"]


def load_session(path: str | Path) -> SessionDocument:
    """Load and verify a session; raises TamperError on any disagreement."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise TamperError(f"unsupported schema_version {doc.get('schema_version')}")
    contest, cfg, state = _replay(doc)
    rebuilt = SessionDocument(
        audit_id=doc["audit_id"],
        contest=contest,
        config=cfg,
        state=state,
        audit_log=list(doc.get("audit_log", [])),
    )
    recomputed = rebuilt.decision_payload()
    stored = {k: v for k, v in doc.items() if k not in ("audit_log", "content_hash")}
    if recomputed != stored:
        for key in recomputed:
            if recomputed[key] != stored.get(key):
                raise TamperError(f"replay disagrees with stored session at '{key}'")
        raise TamperError("replay disagrees with stored session")
    if rebuilt.content_hash() != doc.get("content_hash"):
        raise TamperError("content hash mismatch")
    return rebuilt
