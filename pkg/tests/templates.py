"""Exhaustive comparison of the nine surface templates with their normal forms.

Traces are words over the 2**k valuations of k boolean variables.  The
surface reading is plain finite-trace LTL written from the template wording:
"always" forms use a weak next at the end of the trace, "never" forms read
``not F(... and X e)`` with a strong next, which is the same thing.  The
normal-form side goes through the library (``normalize``, ``pre_holds`` and
``formula_holds``) letter by letter, so a wrong mapping shows up as a
mismatch.
"""
from __future__ import annotations

import itertools

import numpy as np

from taprepair.properties import (Atom, Shape, Template, formula_holds, normalize,
                                  pre_holds)
from taprepair.rules import parse_document

T = Template
NVARS = 3
DOC = parse_document("".join(f"ATTR b{i}.switch {{on, off}}\n" for i in range(NVARS)))
IDS = sorted(DOC.decls, key=lambda a: a.entity)
LETTERS = [{IDS[i]: ("on" if (x >> i) & 1 else "off") for i in range(NVARS)}
           for x in range(2 ** NVARS)]


def atom(i: int, positive: bool = True, event: bool = False) -> Atom:
    return Atom(IDS[i], "=", "on" if positive else "off", event=event)


def bindings():
    """(template, kwargs, surface description) for at most three atoms."""
    out = []
    for pol in (True, False):
        out.append((T.ONE_EVENT_NEVER, dict(event=atom(0, pol, True)), ("e", 0, pol, ())))
        out.append((T.ONE_STATE_ALWAYS, dict(state=atom(0, pol)), ("s", 0, pol, ())))
        out.append((T.ONE_STATE_NEVER, dict(state=atom(0, pol)), ("s", 0, pol, ())))
        for n in range(0, 3):
            conds = tuple(atom(i + 1) for i in range(n))
            for tmpl in (T.EVENT_STATE_ALWAYS, T.EVENT_STATE_NEVER):
                out.append((tmpl, dict(event=atom(0, pol, True), states=conds),
                            ("e", 0, pol, tuple(range(1, n + 1)))))
            for tmpl in (T.STATE_STATE_ALWAYS, T.STATE_STATE_NEVER):
                out.append((tmpl, dict(state=atom(0, pol), states=conds),
                            ("s", 0, pol, tuple(range(1, n + 1)))))
    for n in range(1, 4):
        for pol in (True, False):
            parts = tuple(atom(i, pol if i == n - 1 else True) for i in range(n))
            for tmpl in (T.MULTI_STATE_ALWAYS, T.MULTI_STATE_NEVER):
                out.append((tmpl, dict(states=parts), ("m", n - 1, pol, tuple(range(n - 1)))))
    return out


def _bits(traces, i):
    return ((traces >> i) & 1).astype(bool)


def surface(tmpl, desc, traces):
    """Direct reading of the template on every trace (rows)."""
    _, target, pol, conds = desc
    x = _bits(traces, target)
    if not pol:
        x = ~x
    c = np.ones_like(x)
    for i in conds:
        c &= _bits(traces, i)
    nxt = x[:, 1:]
    if tmpl is T.ONE_EVENT_NEVER:
        return ~nxt.any(axis=1)
    if tmpl is T.EVENT_STATE_ALWAYS:
        return (~c[:, :-1] | nxt).all(axis=1)
    if tmpl is T.EVENT_STATE_NEVER:
        return ~(c[:, :-1] & nxt).any(axis=1)
    if tmpl is T.ONE_STATE_ALWAYS:
        return x.all(axis=1)
    if tmpl is T.ONE_STATE_NEVER:
        return ~x.any(axis=1)
    if tmpl is T.MULTI_STATE_ALWAYS:
        return (c & x).all(axis=1)
    if tmpl is T.MULTI_STATE_NEVER:
        return ~(c & x).any(axis=1)
    if tmpl is T.STATE_STATE_ALWAYS:
        return (~c | x).all(axis=1)
    if tmpl is T.STATE_STATE_NEVER:
        return ~(c & x).any(axis=1)
    raise AssertionError(tmpl)


def letter_tables(p):
    """Per-letter truth of the normal form's pre and post, via the library."""
    pre = np.array([pre_holds(p, [LETTERS[x]], 0, DOC.decls) for x in range(len(LETTERS))])
    post = np.array([formula_holds(p.post, LETTERS[x], DOC.decls) for x in range(len(LETTERS))])
    return pre, post


def normal_form(p, traces):
    pre, post = letter_tables(p)
    pr, po = pre[traces], post[traces]
    if p.shape is Shape.STATE:
        return (~pr | po).all(axis=1)
    return (~pr[:, :-1] | po[:, 1:]).all(axis=1)


def all_traces(length):
    return np.array(list(itertools.product(range(len(LETTERS)), repeat=length)), dtype=np.int64)


def compare(max_len: int = 6):
    """Return (checked trace evaluations, list of mismatches)."""
    checked, bad = 0, []
    per_len = {n: all_traces(n) for n in range(1, max_len + 1)}
    for tmpl, kw, desc in bindings():
        p = normalize(tmpl, "T", decls=DOC.decls, **kw)
        for n, traces in per_len.items():
            a = surface(tmpl, desc, traces)
            b = normal_form(p, traces)
            checked += len(traces)
            if not np.array_equal(a, b):
                k = int(np.argmax(a != b))
                bad.append((tmpl.name, desc, traces[k].tolist()))
    return checked, bad


def cross_check_evaluator(max_len: int = 4):
    """``evaluate_trace`` against the letter-table reading on short traces."""
    from taprepair.properties import evaluate_trace

    bad = []
    for tmpl, kw, desc in bindings():
        p = normalize(tmpl, "T", decls=DOC.decls, **kw)
        assert not any(a.event for a in p.pre)
        for n in range(1, max_len + 1):
            traces = all_traces(n)
            want = normal_form(p, traces)
            for row, w in zip(traces, want):
                got = evaluate_trace(p, [LETTERS[x] for x in row], DOC.decls)
                if got != bool(w):
                    bad.append((tmpl.name, desc, row.tolist()))
    return bad
