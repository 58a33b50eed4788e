"""Stream rewriting inside station streamlets.

Every rewrite acts on a contiguous window of one streamlet and may settle
some labels directly into the store.  Candidates are discovered in a fixed
order so seeded schedulers replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

from .state import (
    Configuration, Station, StoreEntry, Unit, merge_results, singleton, target,
)
from .terms import (
    NODE, App, Claim, Concat, Expr, FoldOp, If0, Int, KL, Key, Label, Lam,
    Len, MapOp, Node, Operation, Proj, Subtract, Var, alpha_equiv, compose,
    eta_contract, kl_subtract, normalize, term_equiv, transform, _fresh_name,
    free_vars,
)

RULE_NAMES = ("batch", "unbatch", "reorderd", "reorderrr", "reorderrw",
              "fusem", "fusemid", "reuse")


@dataclass(frozen=True)
class Candidate:
    rule: str
    station: int
    start: int          # window offset in the streamlet
    length: int         # window width in units
    replacement: tuple[Unit, ...]
    results: tuple[tuple[int, StoreEntry], ...]
    labels: tuple[int, ...]
    split: int = 0      # unbatch only


def _single(unit: Unit):
    if len(unit.entries) == 1:
        return unit.entries[0]
    return None


def _op_target_kl(op: Operation) -> tuple[Key, ...] | None:
    match op:
        case MapOp(_, KL(items)) | FoldOp(_, _, KL(items)):
            if all(isinstance(i, Key) for i in items):
                return items
    return None


def candidates(config: Configuration, rules: tuple[str, ...] | None = None,
               assume_set_adjacency: bool = False) -> list[Candidate]:
    enabled = RULE_NAMES if rules is None else tuple(rules)
    out: list[Candidate] = []
    for si, station in enumerate(config.backend):
        sl = station.streamlet
        for j, unit in enumerate(sl):
            if "unbatch" in enabled and len(unit.entries) >= 2:
                for split in range(1, len(unit.entries)):
                    left = Unit(unit.entries[:split])
                    right = Unit(unit.entries[split:])
                    out.append(Candidate("unbatch", si, j, 1, (left, right), (),
                                         unit.labels(), split))
            if j + 1 >= len(sl):
                continue
            nxt = sl[j + 1]
            labels2 = unit.labels() + nxt.labels()
            if "batch" in enabled:
                out.append(Candidate("batch", si, j, 2,
                                     (Unit(unit.entries + nxt.entries),), (),
                                     labels2))
            a, b = _single(unit), _single(nxt)
            if a is None or b is None:
                continue
            (l1, o1), (l2, o2) = a, b
            t1, t2 = target(o1), target(o2)
            if "reorderd" in enabled and t1 is not None and t2 is not None \
                    and not (set(t1) & set(t2)):
                out.append(Candidate("reorderd", si, j, 2, (nxt, unit), (), (l1, l2)))
            if "reorderrr" in enabled and isinstance(o1, FoldOp) and isinstance(o2, FoldOp):
                out.append(Candidate("reorderrr", si, j, 2, (nxt, unit), (), (l1, l2)))
            if "reorderrw" in enabled and isinstance(o1, MapOp) and isinstance(o2, FoldOp):
                ks1 = _op_target_kl(o1)
                if ks1 is not None:
                    comp = dcomp(o2.fn, ks1, o1.fn)
                    new_fold = singleton(l2, FoldOp(comp, o2.base, o2.ks))
                    out.append(Candidate("reorderrw", si, j, 2, (new_fold, unit),
                                         (), (l1, l2)))
            if ({"fusem", "fusemid"} & set(enabled)) and isinstance(o1, MapOp) \
                    and isinstance(o2, MapOp) and o1.ks == o2.ks:
                verdict = prove_identity(compose(o2.fn, o1.fn),
                                         assume_set_adjacency=assume_set_adjacency)
                if "fusem" in enabled and verdict == "refuted":
                    fused = singleton(l1, MapOp(compose(o2.fn, o1.fn), o1.ks))
                    out.append(Candidate("fusem", si, j, 2, (fused,),
                                         ((l2, StoreEntry(Int(0), ())),), (l1, l2)))
                if "fusemid" in enabled and verdict == "proved":
                    out.append(Candidate("fusemid", si, j, 2, (),
                                         ((l1, StoreEntry(Int(0), ())),
                                          (l2, StoreEntry(Int(0), ()))), (l1, l2)))
            if "reuse" in enabled and isinstance(o1, FoldOp) and isinstance(o2, FoldOp):
                ks1 = _op_target_kl(o1)
                ks2 = _op_target_kl(o2)
                if (ks1 is not None and ks2 is not None
                        and alpha_equiv(o1.fn, o2.fn)
                        and alpha_equiv(o1.base, o2.base)
                        and {k.name for k in ks1} <= {k.name for k in ks2}
                        and prove_commutative(o1.fn) == "proved"):
                    shrunk = KL(kl_subtract(ks2, ks1))
                    second = singleton(l2, FoldOp(o2.fn, Claim(Label(l1)), shrunk))
                    out.append(Candidate("reuse", si, j, 2, (unit, second), (),
                                         (l1, l2)))
    return out


def apply_rewrite(config: Configuration,
                  cand: Candidate) -> tuple[Configuration, list[int]]:
    station = config.backend[cand.station]
    sl = station.streamlet
    new_sl = sl[:cand.start] + cand.replacement + sl[cand.start + cand.length:]
    station = Station(station.node, new_sl)
    backend = (config.backend[:cand.station] + (station,)
               + config.backend[cand.station + 1:])
    config = replace(config, backend=backend)
    return merge_results(config, dict(cand.results)), list(cand.labels)


### the compensation combinator

def dcomp(outer: Expr, keys: tuple[Key, ...], inner: Expr) -> Expr:
    """Fold function that first applies `inner` to nodes whose key lies in
    `keys`, then runs `outer`; key membership compiles to nested zero tests
    on key-list subtraction."""
    avoid = free_vars(outer) | free_vars(inner)
    x = _fresh_name("x", avoid) if "x" in avoid else "x"
    y = _fresh_name("y", avoid | {x}) if "y" in avoid or x == "y" else "y"
    vx = Var(x)
    chain: Expr = vx
    for k in reversed(keys):
        test = Len(Subtract(KL((Proj(1, vx),)), KL((k,))))
        chain = If0(test, App(inner, vx), chain)
    body = App(App(outer, chain), Var(y))
    return Lam(x, NODE, Lam(y, NODE, body))


### oracles

_PROBES = (
    Node(Key("@p0"), Int(17), KL((Key("@p1"),))),
    Node(Key("@p1"), Int(0), KL(())),
    Node(Key("@p2"), Int(-3), KL((Key("@p0"), Key("@p1")))),
)

_IDENTITY = Lam("x", NODE, Var("x"))


def _collapse_rebuild(e: Expr) -> Expr:
    # a node rebuilt from its own projections is that node
    def fix(x: Expr) -> Expr:
        match x:
            case Node(Proj(1, a), Proj(2, b), Proj(3, c)) if a == b == c:
                return a
        return x

    return transform(e, fix)


def _drop_set_adjacency(e: Expr) -> Expr:
    # (ks ++ [k..]) \ [k..] collapses when adjacency is read as a set
    def fix(x: Expr) -> Expr:
        match x:
            case Subtract(Concat(a, KL(ks)), KL(ks2)) if ks == ks2:
                return a
        return x

    return transform(e, fix)


def _simplify(e: Expr, assume_set_adjacency: bool) -> Expr:
    for _ in range(8):
        nxt = _collapse_rebuild(eta_contract(e))
        if assume_set_adjacency:
            nxt = _drop_set_adjacency(nxt)
        if nxt == e:
            return e
        e = nxt
    return e


@lru_cache(maxsize=4096)
def _prove_identity_cached(fn: Expr, assume_set_adjacency: bool) -> str:
    norm, done = normalize(fn)
    cand = _simplify(norm if done else fn, assume_set_adjacency)
    verdict = term_equiv(cand, _IDENTITY)
    if verdict == "equal":
        return "proved"
    for probe in _PROBES:
        out, ok = normalize(App(fn, probe))
        if ok and out != probe:
            return "refuted"
    return "unknown"


def prove_identity(fn: Expr, assume_set_adjacency: bool = False) -> str:
    """proved / refuted / unknown for `fn` being the node identity."""
    return _prove_identity_cached(fn, assume_set_adjacency)


@lru_cache(maxsize=4096)
def _prove_commutative_cached(fn: Expr) -> str:
    if not (isinstance(fn, Lam) and fn.commutative):
        return "unknown"
    # visit-order invariance is the interchange law f x (f y z) = f y (f x z);
    # the literal swap f x y = f y x is too strong, a payload fold threads the
    # base node through its accumulator and always differs on the key slot
    for a in _PROBES:
        for b in _PROBES:
            for z in _PROBES:
                lhs, ok1 = normalize(App(App(fn, a), App(App(fn, b), z)))
                rhs, ok2 = normalize(App(App(fn, b), App(App(fn, a), z)))
                if ok1 and ok2 and lhs != rhs:
                    return "refuted"
    return "proved"


def prove_commutative(fn: Expr) -> str:
    """The annotation carries the claim; probing can only take it away."""
    return _prove_commutative_cached(fn)
