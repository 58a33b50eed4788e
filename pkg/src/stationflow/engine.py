"""Small-step reduction over whole configurations.

The frontend and the in-graph load sites share one expression stepper; the
load flavor simply refuses to emit, which is the operational face of the
phase split.  Station rules, stream routing, and the optimizer hook each
produce explicit redex descriptions so schedulers can pick among them.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace

from . import tlo
from .state import (
    Configuration, Station, StoreEntry, Unit, append_station_tail, append_top,
    config_digest, finalize, fresh_key_name, is_dry, is_terminal, is_value,
    merge_results, singleton, station_is_load_free, target,
)
from .terms import (
    AddOp, App, Arith, Claim, Concat, Emit, Expr, Fix, FoldOp, If0, Int, KL,
    Key, Label, Lam, Len, MapOp, Node, Operation, Proj, Subtract, Var,
    arith_eval, kl_subtract, op_args, rebuild_op, substitute,
)


### one-step search inside an expression

@dataclass(frozen=True)
class ExprRedex:
    rule: str
    rebuild: object  # Expr -> Expr, fills the evaluation hole
    node: Expr       # the redex itself


@dataclass(frozen=True)
class Blocked:
    label: int


@dataclass(frozen=True)
class Stuck:
    reason: str


def find_expr_redex(e: Expr):
    """Locate the unique evaluation-context redex, or report why there is
    none: None for a value, Blocked for an unready claim, Stuck otherwise."""
    return _find(e, lambda x: x)


def _find(e: Expr, rebuild):
    if is_value(e):
        return None
    match e:
        case Var(name):
            return Stuck(f"free name {name!r}")
        case App(fn, arg):
            if not is_value(fn):
                return _find(fn, lambda x: rebuild(App(x, arg)))
            if not is_value(arg):
                return _find(arg, lambda x: rebuild(App(fn, x)))
            if isinstance(fn, Lam):
                return ExprRedex("Beta", rebuild, e)
            return Stuck("application of a non-function")
        case Fix(fn):
            if not is_value(fn):
                return _find(fn, lambda x: rebuild(Fix(x)))
            if isinstance(fn, Lam) and isinstance(fn.body, Lam):
                return ExprRedex("Fix", rebuild, e)
            return Stuck("fix needs a function that returns a function")
        case Proj(i, arg):
            if not is_value(arg):
                return _find(arg, lambda x: rebuild(Proj(i, x)))
            if isinstance(arg, Node):
                return ExprRedex("Node", rebuild, e)
            return Stuck("projection from a non-node")
        case KL(items):
            for j, item in enumerate(items):
                if not is_value(item):
                    def put(x, j=j):
                        return rebuild(KL(items[:j] + (x,) + items[j + 1:]))
                    return _find(item, put)
            return Stuck("malformed key list")  # values inside are not keys
        case Node(k, p, a):
            if not is_value(k):
                return _find(k, lambda x: rebuild(Node(x, p, a)))
            if not is_value(p):
                return _find(p, lambda x: rebuild(Node(k, x, a)))
            if not is_value(a):
                return _find(a, lambda x: rebuild(Node(k, p, x)))
            return Stuck("malformed node")
        case Concat(l, r):
            if not is_value(l):
                return _find(l, lambda x: rebuild(Concat(x, r)))
            if not is_value(r):
                return _find(r, lambda x: rebuild(Concat(l, x)))
            if isinstance(l, KL) and isinstance(r, KL):
                return ExprRedex("KSA", rebuild, e)
            return Stuck("concatenation of non-key-lists")
        case Subtract(l, r):
            if not is_value(l):
                return _find(l, lambda x: rebuild(Subtract(x, r)))
            if not is_value(r):
                return _find(r, lambda x: rebuild(Subtract(l, x)))
            if isinstance(l, KL) and isinstance(r, KL):
                return ExprRedex("KSS", rebuild, e)
            return Stuck("subtraction of non-key-lists")
        case Arith(op, l, r):
            if not is_value(l):
                return _find(l, lambda x: rebuild(Arith(op, x, r)))
            if not is_value(r):
                return _find(r, lambda x: rebuild(Arith(op, l, x)))
            if isinstance(l, Int) and isinstance(r, Int):
                return ExprRedex("Arith", rebuild, e)
            return Stuck("arithmetic on non-integers")
        case If0(s, t, f):
            if not is_value(s):
                return _find(s, lambda x: rebuild(If0(x, t, f)))
            if isinstance(s, Int):
                return ExprRedex("If0", rebuild, e)
            return Stuck("conditional on a non-integer")
        case Len(arg):
            if not is_value(arg):
                return _find(arg, lambda x: rebuild(Len(x)))
            if isinstance(arg, KL):
                return ExprRedex("Len", rebuild, e)
            return Stuck("len of a non-key-list")
        case Claim(arg):
            if not is_value(arg):
                return _find(arg, lambda x: rebuild(Claim(x)))
            if isinstance(arg, Label):
                return ExprRedex("Claim", rebuild, e)
            return Stuck("claim of a non-future")
        case Emit(op):
            args = op_args(op)
            for j, a in enumerate(args):
                if not is_value(a):
                    def put(x, j=j):
                        new = args[:j] + (x,) + args[j + 1:]
                        return rebuild(Emit(rebuild_op(op, new), loc=e.loc))
                    return _find(a, put)
            return ExprRedex("Emit", rebuild, e)
    return Stuck(f"no step for {type(e).__name__}")


def _contract_pure(found: ExprRedex, store) -> Expr | Blocked:
    """Contract every rule except Emit; Claim reads the store or blocks."""
    e = found.node
    match e:
        case App(Lam(param, _, body), arg):
            return found.rebuild(substitute(body, arg, param))
        case Fix(Lam(fname, _, inner)):
            return found.rebuild(substitute(inner, e, fname))
        case Proj(i, Node(k, p, a)):
            return found.rebuild((k, p, a)[i - 1])
        case Concat(KL(l), KL(r)):
            return found.rebuild(KL(l + r))
        case Subtract(KL(l), KL(r)):
            return found.rebuild(KL(kl_subtract(l, r)))
        case Arith(op, Int(a), Int(b)):
            return found.rebuild(Int(arith_eval(op, a, b)))
        case If0(Int(v), t, f):
            return found.rebuild(t if v == 0 else f)
        case Len(KL(items)):
            return found.rebuild(Int(len(items)))
        case Claim(Label(i)):
            entry = store.get(i)
            if entry is None:
                return Blocked(i)
            return found.rebuild(entry.value)
    raise AssertionError(f"unexpected redex {e!r}")


### redex descriptions over configurations

@dataclass(frozen=True)
class Redex:
    rule: str
    site: str
    station: int | None = None
    unit: int | None = None
    rewrite: object = None  # tlo.Candidate for Opt redexes

    def describe(self) -> str:
        return f"{self.rule}@{self.site}"


def _station_key(station: Station) -> str | None:
    n = station.node
    if isinstance(n, Node) and isinstance(n.key, Key):
        return n.key.name
    return None


def _unit_targets(unit: Unit) -> tuple[str, ...] | None:
    out: list[str] = []
    for _, op in unit.entries:
        t = target(op)
        if t is None:
            return None
        out.extend(t)
    return tuple(out)


def _head_singleton(station: Station):
    if station.streamlet and len(station.streamlet[0].entries) == 1:
        return station.streamlet[0].entries[0]
    return None


def frontend_redex(config: Configuration) -> Redex | Blocked | Stuck | None:
    found = _find(config.frontend, lambda x: x)
    if found is None:
        return None
    if isinstance(found, Stuck):
        return found
    if found.rule == "Claim":
        label = found.node.arg.index
        if config.store_get(label) is None:
            return Blocked(label)
    return Redex(found.rule, "frontend")


def tograph_redex(config: Configuration) -> Redex | None:
    if not config.top:
        return None
    head = config.top[0]
    if len(head.entries) != 1:
        return None  # routing is defined one emitted operation at a time
    _, op = head.entries[0]
    if isinstance(op, AddOp):
        return Redex("Add", "top")
    if not config.backend:
        return Redex("Empty", "top")
    return Redex("First", "top")


def station_task_redexes(config: Configuration, i: int) -> list[Redex]:
    station = config.backend[i]
    if not station.streamlet:
        return []
    out: list[Redex] = []
    key = _station_key(station)
    head = station.streamlet[0]
    single = _head_singleton(station)
    last = i == len(config.backend) - 1

    if single is not None:
        label, op = single
        tgt = target(op)
        if isinstance(op, MapOp) and tgt is not None and key is not None \
                and key in tgt and is_value(station.node):
            out.append(Redex("Map", f"station:{i}", station=i))
        if isinstance(op, FoldOp) and tgt is not None and key is not None \
                and key in tgt and is_value(station.node):
            out.append(Redex("Fold", f"station:{i}", station=i))
        if tgt is not None and len(tgt) == 0 and _finalizable(op):
            out.append(Redex("Complete", f"station:{i}", station=i))
        if last and tgt is not None and key is not None and key not in tgt \
                and _finalizable(op):
            out.append(Redex("Last", f"station:{i}", station=i))

    if not last and key is not None:
        union = _unit_targets(head)
        if union is not None and key not in union:
            out.append(Redex("Prop", f"station:{i}", station=i))
    return out


def _finalizable(op: Operation) -> bool:
    if isinstance(op, FoldOp):
        return is_value(op.base)
    return isinstance(op, MapOp)


def _loadable(expr: Expr, config: Configuration) -> bool:
    # a load site steps only when its next contraction is possible now;
    # a claim on an unfilled label waits, an emit can never happen here
    found = _find(expr, lambda x: x)
    if not isinstance(found, ExprRedex) or found.rule == "Emit":
        return False
    if found.rule == "Claim":
        return config.store_get(found.node.arg.index) is not None
    return True


def station_load_redexes(config: Configuration, i: int) -> list[Redex]:
    station = config.backend[i]
    out: list[Redex] = []
    if not is_value(station.node) and _loadable(station.node, config):
        out.append(Redex("Load", f"station:{i}/node", station=i))
    for j, unit in enumerate(station.streamlet):
        if len(unit.entries) == 1:
            _, op = unit.entries[0]
            if isinstance(op, FoldOp) and not is_value(op.base) \
                    and _loadable(op.base, config):
                out.append(Redex("Load", f"station:{i}/unit:{j}", station=i, unit=j))
    return out


def enumerate_redexes(config: Configuration, tlo_on: bool = False,
                      tlo_rules: tuple[str, ...] | None = None,
                      assume_set_adjacency: bool = False) -> list[Redex]:
    """All rule instances applicable right now, in a stable order."""
    out: list[Redex] = []
    fr = frontend_redex(config)
    if isinstance(fr, Redex):
        out.append(fr)
    tg = tograph_redex(config)
    if tg is not None:
        out.append(tg)
    for i in range(len(config.backend)):
        out.extend(station_task_redexes(config, i))
        out.extend(station_load_redexes(config, i))
    if tlo_on:
        for cand in tlo.candidates(config, rules=tlo_rules,
                                   assume_set_adjacency=assume_set_adjacency):
            out.append(Redex("Opt", f"station:{cand.station}:{cand.rule}",
                             station=cand.station, rewrite=cand))
    return out


### rule application

def apply_frontend(config: Configuration) -> tuple[Configuration, str, list[int]]:
    found = _find(config.frontend, lambda x: x)
    assert isinstance(found, ExprRedex), f"no frontend redex: {found}"
    if found.rule == "Emit":
        label = config.next_label
        op = found.node.op
        new_expr = found.rebuild(Label(label))
        config = replace(config, frontend=new_expr, next_label=label + 1)
        return append_top(config, singleton(label, op)), "Emit", [label]
    store = config.store_dict()
    result = _contract_pure(found, store)
    assert not isinstance(result, Blocked), "frontend claim applied while blocked"
    labels = [found.node.arg.index] if found.rule == "Claim" else []
    return replace(config, frontend=result), found.rule, labels


def apply_tograph(config: Configuration) -> tuple[Configuration, str, list[int]]:
    head = config.top[0]
    rest = config.top[1:]
    (label, op) = head.entries[0]
    if isinstance(op, AddOp):
        assert isinstance(op.arg, Int)
        kname = fresh_key_name(config.next_key)
        new_station = Station(Node(Key(kname), op.arg, KL(())))
        config = replace(config, top=rest,
                         backend=(new_station,) + config.backend,
                         next_key=config.next_key + 1)
        return (merge_results(config, {label: StoreEntry(Key(kname), ())}),
                "Add", [label])
    if not config.backend:
        config = replace(config, top=rest)
        l, entry = finalize(label, op)
        return merge_results(config, {l: entry}), "Empty", [label]
    config = replace(config, top=rest)
    return append_station_tail(config, head), "First", [label]


def _set_station(config: Configuration, i: int, station: Station) -> Configuration:
    backend = config.backend[:i] + (station,) + config.backend[i + 1:]
    return replace(config, backend=backend)


def apply_map(config: Configuration, i: int) -> tuple[Configuration, str, list[int]]:
    station = config.backend[i]
    (label, op) = station.streamlet[0].entries[0]
    assert isinstance(op, MapOp)
    n = station.node
    key = n.key
    applied = App(op.fn, n)
    new_node = Node(key, Proj(2, applied), Proj(3, applied))
    new_ks = KL(kl_subtract(op.ks.items, (key,)))
    new_unit = singleton(label, MapOp(op.fn, new_ks))
    station = Station(new_node, (new_unit,) + station.streamlet[1:])
    return _set_station(config, i, station), "Map", [label]


def apply_fold(config: Configuration, i: int) -> tuple[Configuration, str, list[int]]:
    station = config.backend[i]
    (label, op) = station.streamlet[0].entries[0]
    assert isinstance(op, FoldOp)
    n = station.node
    key = n.key
    new_base = App(App(op.fn, n), op.base)
    new_ks = KL(kl_subtract(op.ks.items, (key,)))
    new_unit = singleton(label, FoldOp(op.fn, new_base, new_ks))
    station = Station(n, (new_unit,) + station.streamlet[1:])
    return _set_station(config, i, station), "Fold", [label]


def apply_prop(config: Configuration, i: int) -> tuple[Configuration, str, list[int]]:
    station = config.backend[i]
    unit = station.streamlet[0]
    station = replace(station, streamlet=station.streamlet[1:])
    config = _set_station(config, i, station)
    nxt = config.backend[i + 1]
    nxt = replace(nxt, streamlet=nxt.streamlet + (unit,))
    return _set_station(config, i + 1, nxt), "Prop", list(unit.labels())


def apply_complete_or_last(config: Configuration, i: int,
                           rule: str) -> tuple[Configuration, str, list[int]]:
    station = config.backend[i]
    (label, op) = station.streamlet[0].entries[0]
    station = replace(station, streamlet=station.streamlet[1:])
    config = _set_station(config, i, station)
    l, entry = finalize(label, op)
    return merge_results(config, {l: entry}), rule, [label]


def apply_load(config: Configuration, i: int,
               unit: int | None) -> tuple[Configuration, str, list[int]]:
    station = config.backend[i]
    store = config.store_dict()
    if unit is None:
        found = _find(station.node, lambda x: x)
        assert isinstance(found, ExprRedex), f"node load stuck: {found}"
        if found.rule == "Emit":
            raise RuntimeError("operation emission attempted during a load")
        result = _contract_pure(found, store)
        if isinstance(result, Blocked):
            raise RuntimeError(f"load blocked on label {result.label}")
        station = replace(station, node=result)
        return _set_station(config, i, station), "Load", []
    (label, op) = station.streamlet[unit].entries[0]
    assert isinstance(op, FoldOp)
    found = _find(op.base, lambda x: x)
    assert isinstance(found, ExprRedex), f"base load stuck: {found}"
    if found.rule == "Emit":
        raise RuntimeError("operation emission attempted during a load")
    result = _contract_pure(found, store)
    if isinstance(result, Blocked):
        raise RuntimeError(f"load blocked on label {result.label}")
    new_unit = singleton(label, FoldOp(op.fn, result, op.ks))
    streamlet = station.streamlet[:unit] + (new_unit,) + station.streamlet[unit + 1:]
    station = replace(station, streamlet=streamlet)
    return _set_station(config, i, station), "Load", [label]


def apply_redex(config: Configuration, r: Redex) -> tuple[Configuration, str, list[int]]:
    if r.site == "frontend":
        return apply_frontend(config)
    if r.site == "top":
        return apply_tograph(config)
    if r.rule == "Map":
        return apply_map(config, r.station)
    if r.rule == "Fold":
        return apply_fold(config, r.station)
    if r.rule == "Prop":
        return apply_prop(config, r.station)
    if r.rule in ("Complete", "Last"):
        return apply_complete_or_last(config, r.station, r.rule)
    if r.rule == "Load":
        return apply_load(config, r.station, r.unit)
    if r.rule == "Opt":
        cfg, labels = tlo.apply_rewrite(config, r.rewrite)
        return cfg, "Opt", labels
    raise ValueError(f"cannot apply {r}")


### eager enumeration

_EAGER_TASK_ORDER = ("Complete", "Map", "Fold", "Last", "Prop")


def eager_enumerate(config: Configuration) -> list[Redex]:
    """The at-most-one redex the sequential discipline allows: routing beats
    everything, then the single wet station works (loads before tasks),
    then the frontend resumes on a dry backend."""
    tg = tograph_redex(config)
    if tg is not None:
        return [tg]

    wet = [i for i, s in enumerate(config.backend)
           if not (is_value(s.node) and not s.streamlet)]
    if len(wet) > 1:
        return []
    if len(wet) == 1:
        i = wet[0]
        station = config.backend[i]
        if not is_value(station.node):
            if _loadable(station.node, config):
                return [Redex("Load", f"station:{i}/node", station=i)]
            return []
        if not station_is_load_free(station):
            loads = station_load_redexes(config, i)
            if loads and len(station.streamlet) == 1 and loads[0].unit == 0:
                return [loads[0]]
            return []
        tasks = {r.rule: r for r in station_task_redexes(config, i)}
        for rule in _EAGER_TASK_ORDER:
            if rule in tasks:
                return [tasks[rule]]
        return []

    fr = frontend_redex(config)
    if isinstance(fr, Redex):
        return [fr]
    return []


### the driver

@dataclass(frozen=True)
class StepRecord:
    step: int
    rule: str
    site: str
    labels: tuple[int, ...]
    digest: str

    def to_json(self) -> str:
        return json.dumps({"step": self.step, "rule": self.rule,
                           "site": self.site, "labels": list(self.labels),
                           "digest": self.digest}, sort_keys=True)


@dataclass
class RunResult:
    config: Configuration
    status: str  # terminal, blocked, stuck, fuel
    steps: int
    trace: list[StepRecord] = field(default_factory=list)
    detail: str = ""


def _is_inverse_opt(prev, cand) -> bool:
    # forbid undoing the rewrite just applied at the same spot
    if prev is None or cand is None:
        return False
    pair = {prev.rule, cand.rule}
    return (pair == {"batch", "unbatch"} and prev.station == cand.station
            and prev.labels == cand.labels)


def run(config: Configuration, scheduler: str = "eager", seed: int = 0,
        fuel: int = 1_000_000, trace: bool = False, tlo_rules=None,
        assume_set_adjacency: bool = False) -> RunResult:
    """Drive a configuration to a terminal state under one scheduling policy.

    eager: the deterministic baseline, one redex at a time.
    det: first structural redex, unbatching only when nothing else applies;
    total on states the eager policy cannot reach.
    random: uniform choice among structural redexes, rewriting off.
    tlo-random: random plus optimizer steps at weight 0.2.
    """
    rng = random.Random(seed)
    records: list[StepRecord] = []
    last_opt = None
    for step in range(fuel):
        if is_terminal(config):
            return RunResult(config, "terminal", step, records)
        if scheduler == "eager":
            redexes = eager_enumerate(config)
            if len(redexes) > 1:
                return RunResult(config, "stuck", step, records,
                                 f"eager enumeration returned {len(redexes)} redexes")
        elif scheduler == "det":
            # first structural redex; batched head units admit no task rule,
            # so unbatching must stay reachable or completion is partial
            redexes = enumerate_redexes(config, tlo_on=True)
        elif scheduler == "random":
            redexes = enumerate_redexes(config, tlo_on=False)
        elif scheduler == "tlo-random":
            redexes = enumerate_redexes(config, tlo_on=True, tlo_rules=tlo_rules,
                                        assume_set_adjacency=assume_set_adjacency)
        else:
            raise ValueError(f"unknown scheduler {scheduler!r}")

        if not redexes:
            fr = frontend_redex(config)
            if isinstance(fr, Blocked):
                return RunResult(config, "blocked", step, records,
                                 f"frontend waits on label {fr.label}")
            if isinstance(fr, Stuck):
                return RunResult(config, "stuck", step, records, fr.reason)
            return RunResult(config, "stuck", step, records, "no applicable rule")

        if scheduler == "tlo-random":
            opts_all = [r for r in redexes if r.rule == "Opt"]
            opts = [r for r in opts_all
                    if not _is_inverse_opt(last_opt, r.rewrite)]
            plain = [r for r in redexes if r.rule != "Opt"]
            if opts and (not plain or rng.random() < 0.2):
                choice = opts[rng.randrange(len(opts))]
            elif plain:
                choice = plain[rng.randrange(len(plain))]
            else:
                # the guard may not wedge the run; undo if that is all there is
                choice = opts_all[rng.randrange(len(opts_all))]
        elif scheduler == "random":
            choice = redexes[rng.randrange(len(redexes))]
        elif scheduler == "det":
            plain = [r for r in redexes if r.rule != "Opt"]
            if plain:
                choice = plain[0]
            else:
                # unbatch only: strictly increases the unit count, so the
                # fallback cannot cycle the way batch or the reorders can
                unb = [r for r in redexes if r.rewrite.rule == "unbatch"]
                choice = unb[0] if unb else redexes[0]
        else:  # eager
            choice = redexes[0]

        config, rule, labels = apply_redex(config, choice)
        last_opt = choice.rewrite if choice.rule == "Opt" else None
        if trace:
            records.append(StepRecord(step, rule, choice.site, tuple(labels),
                                      config_digest(config)))
    return RunResult(config, "fuel", fuel, records, "fuel exhausted")


def write_trace(path, records: list[StepRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
