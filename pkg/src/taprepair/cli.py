"""Command line: ``taprepair check|repair|bench``.

Exit status: 0 when everything holds (or was fixed), 1 when violations
remain, 2 on input errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field

from .automaton import DEFAULT_STATE_CAP, Model, auto_tick
from .checker import Verdict, check, classify_pattern, render_counterexample
from .env import ChannelConfigError, load_channel_table
from .properties import (Property, PropertyError, load_catalog, load_priority_tables,
                         parse_properties, prioritize, property_constants)
from .repair import ITER_LIMIT, ROUND_LIMIT, RepairConfig, in_scope, repair, _model_attrs
from .rules import Document, DslError, format_document, parse_document
from .scenario import Scenario, parse_scenario

log = logging.getLogger("taprepair")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    rules_path: str | None
    scenario_path: str | None = None
    selection: list[str] = field(default_factory=list)
    channels_path: str | None = None
    tick_sec: int | None = None
    seed: int = 0
    iter_limit: int = ITER_LIMIT
    round_limit: int = ROUND_LIMIT
    state_cap: int = DEFAULT_STATE_CAP
    output_path: str | None = None
    fmt: str = "text"

    def __post_init__(self):
        if self.iter_limit <= 0 or self.round_limit <= 0 or self.state_cap <= 0:
            raise InputError("limits must be positive")
        if self.tick_sec is not None and self.tick_sec <= 0:
            raise InputError("tick must be positive")


def _read(path: str, what: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror}") from None


def load_inputs(cfg: RunConfig):
    if not cfg.rules_path:
        raise InputError("--rules is required")
    try:
        doc = parse_document(_read(cfg.rules_path, "rules"))
    except DslError as exc:
        raise InputError(f"{cfg.rules_path}:{exc.line}:{exc.col}: {exc}") from None
    try:
        sc = parse_scenario(_read(cfg.scenario_path, "scenario"), doc.decls) \
            if cfg.scenario_path else Scenario()
    except DslError as exc:
        raise InputError(f"{cfg.scenario_path}:{exc.line}: {exc}") from None
    try:
        table = load_channel_table(_read(cfg.channels_path, "channel table")
                                   if cfg.channels_path else None)
    except ChannelConfigError as exc:
        raise InputError(f"{cfg.channels_path}: {exc}") from None
    catalog = load_catalog()
    props = select_properties(cfg.selection, catalog, doc)
    if not props:
        raise InputError("no property selected (or none matches the declared attributes)")
    props = prioritize(props, load_priority_tables(), seed=cfg.seed)
    return doc, sc, table, catalog, props


def select_properties(selection: list[str], catalog: list[Property], doc: Document
                      ) -> list[Property]:
    usable = [p for p in catalog if all(a in doc.decls for a in p.attributes())]
    if not selection:
        return usable
    out: list[Property] = []
    for item in selection:
        if os.path.exists(item):
            try:
                out += parse_properties(_read(item, "property file"), doc.decls)
            except PropertyError as exc:
                raise InputError(f"{item}: {exc}") from None
            continue
        hits = [p for p in catalog if p.id == item or item in p.groups]
        if not hits:
            raise InputError(f"unknown property or group {item!r}")
        for p in hits:
            if not all(a in doc.decls for a in p.attributes()):
                if p.id == item:
                    raise InputError(f"{item} uses undeclared attributes")
                continue
            if p not in out:
                out.append(p)
    return out


def _tick(cfg, doc, sc, table, prop, catalog):
    if cfg.tick_sec or sc.tick_sec:
        return cfg.tick_sec or sc.tick_sec
    attrs = _model_attrs(prop, in_scope(prop, catalog, doc.decls))
    return auto_tick(doc.rules, table, attrs, [prop.within_sec] if prop.within_sec else [])


def cmd_check(cfg: RunConfig) -> dict:
    doc, sc, table, catalog, props = load_inputs(cfg)
    entries = []
    for p in props:
        t0 = time.perf_counter()
        tick = _tick(cfg, doc, sc, table, p, catalog)
        attrs = _model_attrs(p, in_scope(p, catalog, doc.decls))
        m = Model(doc.decls, doc.rules, attrs, sc, table, tick,
                  extra_values=property_constants(p, sc.placeholders))
        res = check(m, p, cfg.state_cap)
        entry = {"property": p.id, "verdict": res.verdict.value,
                 "states": res.states_explored, "seconds": round(time.perf_counter() - t0, 4)}
        if res.counterexample is not None:
            entry["patterns"] = sorted({v.tag for v in classify_pattern(res.counterexample, m, p)})
            entry["counterexample"] = render_counterexample(res.counterexample, m)
        entries.append(entry)
    return _summarize(entries, [])


def cmd_repair(cfg: RunConfig) -> tuple[dict, Document]:
    doc, sc, table, catalog, props = load_inputs(cfg)
    rcfg = RepairConfig(iter_limit=cfg.iter_limit, round_limit=cfg.round_limit,
                        state_cap=cfg.state_cap, seed=cfg.seed)
    rules = list(doc.rules)
    entries, patches = [], []
    for p in props:
        t0 = time.perf_counter()
        tick = cfg.tick_sec or sc.tick_sec
        rep = repair(rules, doc.decls, p, sc, table, tick, catalog, rcfg)
        entry = {"property": p.id, "seconds": None}
        if rep is None:
            entry["verdict"] = Verdict.PASS.value
        elif not rep.cex:
            entry["verdict"] = Verdict.INCONCLUSIVE.value
        else:
            entry["verdict"] = Verdict.VIOLATION.value
            entry.update(rep.to_dict())
            entry["repair"] = "fixed" if rep.fixed else "unfixable"
            if rep.fixed:
                rules = rep.rules
                patches.append({"property": p.id, "edits": [str(e) for e in rep.edits]})
        entry["seconds"] = round(time.perf_counter() - t0, 4)
        entries.append(entry)
    patched = doc.with_rules(rules)
    return _summarize(entries, patches), patched


def _summarize(entries, patches) -> dict:
    fixed = sum(1 for e in entries if e.get("repair") == "fixed")
    unfixable = sum(1 for e in entries if e.get("repair") == "unfixable"
                    or (e["verdict"] != Verdict.PASS.value and "repair" not in e))
    safe = sum(1 for e in entries if e["verdict"] == Verdict.PASS.value)
    return {"properties": entries,
            "summary": {"fixed": fixed, "unfixable": unfixable, "safe": safe,
                        "patches": len(patches)},
            "patches": patches}


def cmd_bench(cfg: RunConfig | None = None) -> dict:
    from .bench import run_fixture, FIXTURES

    rcfg = RepairConfig() if cfg is None else RepairConfig(
        iter_limit=cfg.iter_limit, round_limit=cfg.round_limit, state_cap=cfg.state_cap,
        seed=cfg.seed)
    cases = []
    for f in FIXTURES:
        r = run_fixture(f, rcfg)
        rep = r.report
        cases.append({
            "case": f.name, "property": f.prop, "repaired": r.repaired,
            "patterns": sorted({p.tag for p in rep.patterns}) if rep else [],
            "edits": [str(e) for e in rep.edits] if rep else [],
            "iterations": rep.iterations if rep else 0,
            "rounds": rep.rounds if rep else 0,
            "seconds": round(r.seconds, 4),
        })
    return {"cases": cases, "summary": {"repaired": sum(c["repaired"] for c in cases),
                                        "total": len(cases)}}


# ------------------------------------------------------------ rendering


def render_text(report: dict) -> str:
    lines = []
    if "cases" in report:
        for c in report["cases"]:
            ok = "repaired" if c["repaired"] else "FAILED"
            lines.append(f"{c['case']:8} {c['property']:5} {ok:9} "
                         f"patterns={','.join(c['patterns']) or '-'} rounds={c['rounds']} "
                         f"iterations={c['iterations']} {c['seconds']:.3f}s")
            lines += [f"    {e}" for e in c["edits"]]
        s = report["summary"]
        lines.append(f"{s['repaired']}/{s['total']} cases repaired")
        return "\n".join(lines) + "\n"
    for e in report["properties"]:
        head = f"{e['property']}: {e['verdict']}"
        if e.get("repair"):
            head += f" ({e['repair']})"
        pats = e.get("patterns") or e.get("vulnPatterns")
        if pats:
            head += " patterns=" + ",".join(pats)
        lines.append(head)
        for line in e.get("counterexample") or e.get("cexTrace") or []:
            lines.append("    " + line)
        for ed in e.get("edits", []):
            lines.append("  + " + ed)
    s = report["summary"]
    lines.append(f"fixed={s['fixed']} unfixable={s['unfixable']} safe={s['safe']} "
                 f"patches={s['patches']}")
    return "\n".join(lines) + "\n"


def render_json(report: dict) -> str:
    """Line-delimited records: one per property or case, then the summary."""
    recs = report.get("properties") or report.get("cases") or []
    out = [json.dumps(r, sort_keys=True) for r in recs]
    out.append(json.dumps({"summary": report["summary"]}, sort_keys=True))
    return "\n".join(out) + "\n"


def exit_code(report: dict) -> int:
    if "cases" in report:
        s = report["summary"]
        return 0 if s["repaired"] == s["total"] else 1
    return 0 if report["summary"]["unfixable"] == 0 else 1


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="taprepair", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in ("check", "repair", "bench"):
        p = sub.add_parser(name)
        p.add_argument("--rules")
        p.add_argument("--scenario")
        p.add_argument("--props", action="append", default=[],
                       help="property ids, group tags or a property file; comma separated")
        p.add_argument("--channels")
        p.add_argument("--tick", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--iter-limit", type=int, default=ITER_LIMIT)
        p.add_argument("--round-limit", type=int, default=ROUND_LIMIT)
        p.add_argument("--state-cap", type=int, default=DEFAULT_STATE_CAP)
        p.add_argument("--out")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    selection = [x.strip() for item in args.props for x in item.split(",") if x.strip()]
    try:
        cfg = RunConfig(args.rules, args.scenario, selection, args.channels, args.tick,
                        args.seed, args.iter_limit, args.round_limit, args.state_cap,
                        args.out, args.format)
        patched = None
        if args.cmd == "check":
            report = cmd_check(cfg)
        elif args.cmd == "repair":
            report, patched = cmd_repair(cfg)
        else:
            report = cmd_bench(cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = render_json(report) if cfg.fmt == "json" else render_text(report)
    sys.stdout.write(text)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
        if patched is not None:
            root, _ = os.path.splitext(cfg.output_path)
            with open(root + ".tap", "w", encoding="utf-8") as fh:
                fh.write(format_document(patched))
    elif patched is not None and report["patches"]:
        sys.stdout.write("# patched rules\n" + format_document(patched, with_decls=False))
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
