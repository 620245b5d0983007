"""Command-line interface.

Subcommands mirror the library surface: threshold and ratio queries,
round-size planning, percentile tables, simulation, session-based audit
workflow, and the HTTP service.  Exit codes: 0 success, 2 usage error,
3 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import uuid

from .contest import ContestRecord, DataError, ingest_2016_dataset
from .engine import (
    AuditError,
    AuditState,
    RoundObservation,
    RoundSchedule,
    ScheduleViolation,
    escalate,
    execute_round,
    risk_report,
)
from .planner import bravo_table, first_round_table, next_round_size
from .prob import Hypothesis, TallyPmf, convolve_round, truncate_above
from .rules import AuditConfig, Rule, bravo_kmin, kmin_for_round, sigma, tail_ratio
from .sessions import SessionDocument, TamperError, fmt_prob, load_session, save_session
from .simulate import SimSpec, TrueOutcome, simulate_batch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(Exception):
    pass


def _add_common_stats(p, need_rule=True):
    if need_rule:
        p.add_argument("--rule", choices=[r.value for r in Rule], required=True)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=1.0)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--p", type=float, help="announced winner fraction of relevant ballots")
    group.add_argument("--margin", type=float, help="relevant margin; p = (1 + margin) / 2")
    p.add_argument("--contest", help="contest JSON file (supplies p and scaling)")


def _resolve_contest_p(args) -> tuple[float, ContestRecord | None]:
    contest = None
    if args.contest:
        contest = ContestRecord.from_json_file(args.contest)
    if args.p is not None:
        p = args.p
    elif args.margin is not None:
        p = (1.0 + args.margin) / 2.0
    elif contest is not None:
        p = contest.p
    else:
        raise UsageError("one of --p, --margin or --contest is required")
    return p, contest


def _config(args, p) -> AuditConfig:
    return AuditConfig(alpha=args.alpha, p=p, rule=Rule(args.rule), delta=args.delta)


def _emit(args, payload: dict | list, text: str) -> None:
    fmt = getattr(args, "format", "text")
    if fmt == "json":
        out = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        rows = payload if isinstance(payload, list) else [payload]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
        out = buf.getvalue()
    else:
        out = text if text.endswith("\n") else text + "\n"
    dest = getattr(args, "out", None)
    if dest:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _parse_rounds(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"bad --rounds list: {exc}") from exc
    if not sizes:
        raise UsageError("--rounds needs at least one size")
    return sizes


def _pmf_pair_at(schedule: tuple[int, ...], cfg: AuditConfig):
    """Propagate the paired pmfs through the schedule's earlier thresholds."""
    h0 = TallyPmf.fresh(Hypothesis.null())
    ha = TallyPmf.fresh(Hypothesis.alt(cfg.p))
    prev = 0
    kmins = []
    for n in schedule:
        h0 = convolve_round(h0, n - prev)
        ha = convolve_round(ha, n - prev)
        prev = n
        kmin = kmin_for_round(h0, ha, cfg)
        kmins.append(kmin)
        if n != schedule[-1]:
            h0, _ = truncate_above(h0, kmin)
            ha, _ = truncate_above(ha, kmin)
    return h0, ha, kmins


def cmd_kmin(args) -> int:
    p, _ = _resolve_contest_p(args)
    cfg = _config(args, p)
    if cfg.rule.uses_tails:
        if not args.rounds:
            raise UsageError("tail-based rules need --rounds n1,n2,...")
        schedule = _parse_rounds(args.rounds)
        _, _, kmins = _pmf_pair_at(schedule, cfg)
        payload = [{"n": n, "kmin": k} for n, k in zip(schedule, kmins)]
        _emit(args, payload, "\n".join(str(k) for k in kmins))
    else:
        if args.n is None:
            raise UsageError("per-draw rules need --n")
        k = bravo_kmin(args.n, cfg.p, cfg.alpha)
        payload = {"n": args.n, "kmin": k}
        _emit(args, payload, str(k))
    return EXIT_OK


def cmd_ratio(args) -> int:
    p, _ = _resolve_contest_p(args)
    cfg = _config(args, p)
    schedule = _parse_rounds(args.rounds) if args.rounds else (args.n,)
    if schedule == (None,):
        raise UsageError("need --n or --rounds")
    h0, ha, kmins = _pmf_pair_at(schedule, cfg)
    n = schedule[-1]
    sig = sigma(args.k, cfg.p, n)
    tau = tail_ratio(h0, ha, min(args.k, h0.support_max + 1))
    payload = {
        "n": n,
        "k": args.k,
        "sigma": sig,
        "tail_ratio": tau,
        "kmin": kmins[-1],
        "p_value_analog": min(1.0, 1.0 / tau) if math.isfinite(tau) and tau > 0 else 0.0,
    }
    text = f"sigma={fmt_prob(sig)} tail_ratio={fmt_prob(tau)} kmin={kmins[-1]}"
    _emit(args, payload, text)
    return EXIT_OK


def cmd_round_size(args) -> int:
    p, contest = _resolve_contest_p(args)
    cfg = _config(args, p)
    res = next_round_size(args.target, None, cfg, contest=contest)
    payload = {
        "rule": cfg.rule.value,
        "target": args.target,
        "relevant_round_size": res.relevant_round_size,
        "scaled_draws": res.scaled_draws,
        "expected_distinct": res.expected_distinct,
        "achieved_stop_prob": res.achieved_stop_prob,
        "method": res.method.value,
    }
    _emit(args, payload, str(res.scaled_draws if contest else res.relevant_round_size))
    return EXIT_OK


def cmd_table(args) -> int:
    if args.table != "bravo-percentiles":
        raise UsageError(f"unknown table {args.table!r}")
    margins = [float(x) for x in args.margins.split(",") if x.strip()]
    rows = bravo_table(margins, alpha=args.alpha)
    text = "\n".join(
        " ".join(f"{key}={row[key]}" for key in row) for row in rows
    )
    _emit(args, rows, text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not args.contest:
        raise UsageError("simulate needs --contest")
    contest = ContestRecord.from_json_file(args.contest)
    cfg = _config(args, contest.p)
    sizes = _parse_rounds(args.rounds)
    spec = SimSpec(
        contest=contest,
        cfg=cfg,
        schedule=RoundSchedule(sizes),
        trials=args.trials,
        seed=args.seed,
        hypothesis=TrueOutcome.TIE if args.tie else TrueOutcome.AS_ANNOUNCED,
    )
    res = simulate_batch(spec)
    payload = {
        "contest": contest.name,
        "rule": cfg.rule.value,
        "hypothesis": spec.hypothesis.value,
        "trials": res.trials,
        "stop_rate": res.stop_rate,
        "per_round_rates": list(res.per_round_rates),
        "mean_relevant_draws": res.mean_relevant_draws,
        "seed": args.seed,
    }
    _emit(args, payload, f"stop_rate={res.stop_rate:.4f} trials={res.trials}")
    return EXIT_OK


def _load_doc(path: str) -> SessionDocument:
    try:
        return load_session(path)
    except FileNotFoundError as exc:
        raise DataError(f"no session at {path}") from exc


def cmd_audit(args) -> int:
    if args.audit_cmd == "new":
        contest = ContestRecord.from_json_file(args.contest)
        cfg = AuditConfig(alpha=args.alpha, p=contest.p, rule=Rule(args.rule), delta=args.delta)
        state = AuditState(config=cfg, schedule=RoundSchedule(_parse_rounds(args.rounds)))
        doc = SessionDocument(
            audit_id=args.id or uuid.uuid4().hex[:12], contest=contest, config=cfg, state=state
        )
        doc.log_action("new", f"rule={cfg.rule.value} alpha={cfg.alpha} rounds={state.schedule.sizes}")
        digest = save_session(doc, args.session)
        _emit(args, {"audit_id": doc.audit_id, "hash": digest}, doc.audit_id)
        return EXIT_OK

    doc = _load_doc(args.session)
    if args.audit_cmd == "round":
        obs = RoundObservation(
            draws=args.draws,
            winner_relevant=args.winner,
            loser_relevant=args.loser,
            irrelevant=args.irrelevant,
        )
        _, ev = execute_round(doc.state, obs, allow_amend=args.amend)
        doc.log_action("round", f"draws={obs.draws} winner={obs.winner_relevant} kmin={ev.kmin}")
        save_session(doc, args.session)
        payload = {
            "kmin": ev.kmin,
            "decision": ev.decision.value,
            "ratio": ev.ratio_at_k,
            "p_value_analog": ev.p_value_analog,
            "status": doc.state.status.value,
        }
        _emit(args, payload, f"decision={ev.decision.value} kmin={ev.kmin} status={doc.state.status.value}")
        return EXIT_OK
    if args.audit_cmd == "status":
        st = doc.state
        payload = {
            "audit_id": doc.audit_id,
            "status": st.status.value,
            "rounds_executed": st.rounds_executed,
            "relevant_drawn": st.relevant_drawn,
            "cum_risk": st.cum_risk,
            "cum_stop": st.cum_stop,
            "schedule": list(st.schedule.sizes),
            "schedule_version": st.schedule.version,
        }
        _emit(args, payload, f"{doc.audit_id}: {st.status.value} after {st.rounds_executed} round(s)")
        return EXIT_OK
    if args.audit_cmd == "report":
        rep = risk_report(doc.state)
        rows = [dict(r) for r in rep.rows]
        text_lines = [
            f"round {r['round']}: n={r['n']} kmin={r['kmin']} "
            f"S={fmt_prob(r['stop_prob'])} R={fmt_prob(r['risk'])}"
            for r in rows
        ] + [f"cumulative: S={fmt_prob(rep.cum_stop)} R={fmt_prob(rep.cum_risk)} (alpha={rep.alpha})"]
        _emit(args, {"rounds": rows, "cum_stop": rep.cum_stop, "cum_risk": rep.cum_risk}, "\n".join(text_lines))
        return EXIT_OK
    if args.audit_cmd == "escalate":
        escalate(doc.state)
        doc.log_action("escalate", "operator escalated to full hand count")
        save_session(doc, args.session)
        _emit(args, {"status": doc.state.status.value}, doc.state.status.value)
        return EXIT_OK
    raise UsageError(f"unknown audit subcommand {args.audit_cmd!r}")


def cmd_ingest(args) -> int:
    records = ingest_2016_dataset(args.file)
    rows = [
        {
            "state": r.name,
            "margin": round(r.margin, 4),
            "p": r.p,
            "scale": r.scale,
            "total_ballots": r.total_ballots,
        }
        for r in records
    ]
    _emit(args, rows, "\n".join(f"{r['state']} margin={r['margin']}" for r in rows))
    return EXIT_OK


def cmd_first_round_table(args) -> int:
    records = ingest_2016_dataset(args.file)
    rows = first_round_table(
        records,
        alpha=args.alpha,
        target=args.target,
        delta=args.delta,
        sb_margin_floor=args.sb_margin_floor,
    )
    text = "\n".join(
        f"{r['state']} margin={r['margin']} eor={r.get('eor_bravo_draws')} "
        f"athena={r.get('athena_draws')} sb={r.get('sb_bravo_draws')}"
        for r in rows
    )
    _emit(args, rows, text)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .api import serve

    serve(host=args.host, port=args.port, state_dir=args.state_dir)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="rlapoll", description=__doc__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("kmin", help="stopping threshold for a round")
    _add_common_stats(p)
    p.add_argument("--n", type=int, help="round size (per-draw rules)")
    p.add_argument("--rounds", help="cumulative round sizes n1,n2,... (tail rules)")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kmin)

    p = sub.add_parser("ratio", help="sigma and tail ratio at an observed count")
    _add_common_stats(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--rounds")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("round-size", help="first round size for a target stopping probability")
    _add_common_stats(p)
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_round_size)

    p = sub.add_parser("table", help="reference tables")
    p.add_argument("table", choices=["bravo-percentiles"])
    p.add_argument("--margins", required=True, help="comma-separated margins")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("simulate", help="Monte Carlo audit simulation")
    _add_common_stats(p)
    p.add_argument("--rounds", required=True, help="cumulative total-draw sizes")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tie", action="store_true", help="simulate the tied election")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("audit", help="session-based audit workflow")
    asub = p.add_subparsers(dest="audit_cmd", required=True)
    a_new = asub.add_parser("new")
    a_new.add_argument("--contest", required=True)
    a_new.add_argument("--rule", choices=[r.value for r in Rule], required=True)
    a_new.add_argument("--alpha", type=float, default=0.1)
    a_new.add_argument("--delta", type=float, default=1.0)
    a_new.add_argument("--rounds", required=True)
    a_new.add_argument("--session", required=True)
    a_new.add_argument("--id")
    a_new.add_argument("--format", choices=["text", "json"], default="text")
    a_round = asub.add_parser("round")
    a_round.add_argument("--session", required=True)
    a_round.add_argument("--draws", type=int, required=True)
    a_round.add_argument("--winner", type=int, required=True)
    a_round.add_argument("--loser", type=int, required=True)
    a_round.add_argument("--irrelevant", type=int, default=0)
    a_round.add_argument("--amend", action="store_true")
    a_round.add_argument("--format", choices=["text", "json"], default="text")
    a_status = asub.add_parser("status")
    a_status.add_argument("--session", required=True)
    a_status.add_argument("--format", choices=["text", "json"], default="text")
    a_report = asub.add_parser("report")
    a_report.add_argument("--session", required=True)
    a_report.add_argument("--format", choices=["text", "json"], default="text")
    a_esc = asub.add_parser("escalate")
    a_esc.add_argument("--session", required=True)
    a_esc.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("ingest", help="parse a statewide results CSV")
    p.add_argument("file")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("first-round-table", help="per-state first-round sizes")
    p.add_argument("file")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--sb-margin-floor", type=float, default=0.01)
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_first_round_table)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8642)
    p.add_argument("--state-dir", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def cli_dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TamperError, ScheduleViolation, AuditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
