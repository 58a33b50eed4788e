"""Term language: expressions, values, operations, substitution, normalization."""

from __future__ import annotations

from dataclasses import dataclass, field


### types

@dataclass(frozen=True)
class TInt:
    def __str__(self) -> str:
        return "int"


@dataclass(frozen=True)
class TKey:
    def __str__(self) -> str:
        return "key"


@dataclass(frozen=True)
class TKl:
    def __str__(self) -> str:
        return "kl"


@dataclass(frozen=True)
class TNode:
    def __str__(self) -> str:
        return "node"


@dataclass(frozen=True)
class TFuture:
    inner: "Type"

    def __str__(self) -> str:
        return f"future[{self.inner}]"


@dataclass(frozen=True)
class TFun:
    param: "Type"
    eff: bool  # latent emittability of the body
    result: "Type"

    def __str__(self) -> str:
        arrow = "->!" if self.eff else "->"
        return f"({self.param} {arrow} {self.result})"


Type = TInt | TKey | TKl | TNode | TFuture | TFun

INT = TInt()
KEY = TKey()
KL_T = TKl()
NODE = TNode()

Loc = tuple[int, int]


def _loc_field():
    return field(default=None, compare=False, repr=False)


### expressions

@dataclass(frozen=True)
class Var:
    name: str
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Int:
    value: int
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Key:
    # either a programmer literal or a generated "@k<i>" name
    name: str
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Label:
    # future handle; allocated by a monotone counter at emission
    index: int
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Lam:
    param: str
    # None only on lambdas produced by let/sequence desugaring
    ptype: Type | None
    body: "Expr"
    # surface `commutative` annotation, threaded onto fold functions
    commutative: bool = False
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class App:
    fn: "Expr"
    arg: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Fix:
    fn: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class KL:
    items: tuple["Expr", ...]
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Node:
    key: "Expr"
    payload: "Expr"
    adj: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Proj:
    index: int  # 1, 2, or 3
    arg: "Expr"
    loc: Loc | None = _loc_field()

    def __post_init__(self) -> None:
        if self.index not in (1, 2, 3):
            raise ValueError(f"projection index {self.index}")


@dataclass(frozen=True)
class Concat:
    left: "Expr"
    right: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Subtract:
    left: "Expr"
    right: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Arith:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class If0:
    # zero-test conditional on an int scrutinee
    scrut: "Expr"
    then: "Expr"
    els: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Len:
    arg: "Expr"
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class AddOp:
    arg: "Expr"


@dataclass(frozen=True)
class MapOp:
    fn: "Expr"
    ks: "Expr"


@dataclass(frozen=True)
class FoldOp:
    fn: "Expr"
    base: "Expr"
    ks: "Expr"


Operation = AddOp | MapOp | FoldOp


@dataclass(frozen=True)
class Emit:
    op: Operation
    loc: Loc | None = _loc_field()


@dataclass(frozen=True)
class Claim:
    arg: "Expr"
    loc: Loc | None = _loc_field()


Expr = (
    Var | Int | Key | Label | Lam | App | Fix | KL | Node | Proj
    | Concat | Subtract | Arith | If0 | Len | Emit | Claim
)

# key reserved for the unnamed hole in desugared fold bases
HOLE_KEY = Key("_")


### value predicates

def is_value(e: Expr) -> bool:
    match e:
        case Int() | Key() | Label() | Lam():
            return True
        case KL(items):
            return all(isinstance(i, Key) for i in items)
        case Node(k, p, a):
            return isinstance(k, Key) and isinstance(p, Int) and isinstance(a, KL) and is_value(a)
        case _:
            return False


def is_emittable(op: Operation) -> bool:
    """An operation ready to leave the frontend: all arguments values, targets key lists."""
    match op:
        case AddOp(arg):
            return isinstance(arg, Int)
        case MapOp(fn, ks):
            return isinstance(fn, Lam) and isinstance(ks, KL) and is_value(ks)
        case FoldOp(fn, base, ks):
            return isinstance(fn, Lam) and is_value(base) and isinstance(ks, KL) and is_value(ks)
    return False


def op_args(op: Operation) -> tuple[Expr, ...]:
    match op:
        case AddOp(arg):
            return (arg,)
        case MapOp(fn, ks):
            return (fn, ks)
        case FoldOp(fn, base, ks):
            return (fn, base, ks)
    raise TypeError(op)


def rebuild_op(op: Operation, args: tuple[Expr, ...]) -> Operation:
    match op:
        case AddOp():
            return AddOp(*args)
        case MapOp():
            return MapOp(*args)
        case FoldOp():
            return FoldOp(*args)
    raise TypeError(op)


### free variables and substitution

def free_vars(e: Expr) -> frozenset[str]:
    match e:
        case Var(name):
            return frozenset((name,))
        case Int() | Key() | Label():
            return frozenset()
        case Lam(param, _, body):
            return free_vars(body) - {param}
        case App(fn, arg):
            return free_vars(fn) | free_vars(arg)
        case Fix(fn):
            return free_vars(fn)
        case KL(items):
            out: frozenset[str] = frozenset()
            for i in items:
                out |= free_vars(i)
            return out
        case Node(k, p, a):
            return free_vars(k) | free_vars(p) | free_vars(a)
        case Proj(_, arg):
            return free_vars(arg)
        case Concat(l, r) | Subtract(l, r):
            return free_vars(l) | free_vars(r)
        case Arith(_, l, r):
            return free_vars(l) | free_vars(r)
        case If0(s, t, f):
            return free_vars(s) | free_vars(t) | free_vars(f)
        case Len(arg):
            return free_vars(arg)
        case Emit(op):
            out = frozenset()
            for a in op_args(op):
                out |= free_vars(a)
            return out
        case Claim(arg):
            return free_vars(arg)
    raise TypeError(e)


def _fresh_name(base: str, avoid: frozenset[str]) -> str:
    # deterministic: smallest unused index, no global counter
    i = 0
    while f"{base}${i}" in avoid:
        i += 1
    return f"{base}${i}"


def substitute(e: Expr, v: Expr, x: str) -> Expr:
    """Capture-avoiding substitution of x by v in e."""
    match e:
        case Var(name):
            return v if name == x else e
        case Int() | Key() | Label():
            return e
        case Lam(param, ptype, body, comm):
            if param == x:
                return e
            if param in free_vars(v) and x in free_vars(body):
                renamed = _fresh_name(param, free_vars(body) | free_vars(v))
                body = substitute(body, Var(renamed), param)
                param = renamed
            return Lam(param, ptype, substitute(body, v, x), comm)
        case App(fn, arg):
            return App(substitute(fn, v, x), substitute(arg, v, x))
        case Fix(fn):
            return Fix(substitute(fn, v, x))
        case KL(items):
            return KL(tuple(substitute(i, v, x) for i in items))
        case Node(k, p, a):
            return Node(substitute(k, v, x), substitute(p, v, x), substitute(a, v, x))
        case Proj(i, arg):
            return Proj(i, substitute(arg, v, x))
        case Concat(l, r):
            return Concat(substitute(l, v, x), substitute(r, v, x))
        case Subtract(l, r):
            return Subtract(substitute(l, v, x), substitute(r, v, x))
        case Arith(op, l, r):
            return Arith(op, substitute(l, v, x), substitute(r, v, x))
        case If0(s, t, f):
            return If0(substitute(s, v, x), substitute(t, v, x), substitute(f, v, x))
        case Len(arg):
            return Len(substitute(arg, v, x))
        case Emit(op):
            return Emit(rebuild_op(op, tuple(substitute(a, v, x) for a in op_args(op))))
        case Claim(arg):
            return Claim(substitute(arg, v, x))
    raise TypeError(e)


def transform(e: Expr, fn) -> Expr:
    """Bottom-up rewrite: fn is applied to every node after its children."""
    match e:
        case Var() | Int() | Key() | Label():
            out = e
        case Lam(p, t, b, c):
            out = Lam(p, t, transform(b, fn), c)
        case App(f, a):
            out = App(transform(f, fn), transform(a, fn))
        case Fix(f):
            out = Fix(transform(f, fn))
        case KL(items):
            out = KL(tuple(transform(i, fn) for i in items))
        case Node(k, p, a):
            out = Node(transform(k, fn), transform(p, fn), transform(a, fn))
        case Proj(i, a):
            out = Proj(i, transform(a, fn))
        case Concat(l, r):
            out = Concat(transform(l, fn), transform(r, fn))
        case Subtract(l, r):
            out = Subtract(transform(l, fn), transform(r, fn))
        case Arith(o, l, r):
            out = Arith(o, transform(l, fn), transform(r, fn))
        case If0(s, t, f2):
            out = If0(transform(s, fn), transform(t, fn), transform(f2, fn))
        case Len(a):
            out = Len(transform(a, fn))
        case Emit(op):
            out = Emit(rebuild_op(op, tuple(transform(a, fn) for a in op_args(op))))
        case Claim(a):
            out = Claim(transform(a, fn))
        case _:
            raise TypeError(e)
    return fn(out)


### key list helpers

def kl_subtract(ks: tuple[Key, ...], ks2: tuple[Key, ...]) -> tuple[Key, ...]:
    """Remove every occurrence of every element of ks2, preserving survivor order."""
    drop = {k.name for k in ks2}
    return tuple(k for k in ks if k.name not in drop)


def kl_value(names) -> KL:
    return KL(tuple(Key(n) for n in names))


### alpha equivalence

def alpha_equiv(a: Expr, b: Expr) -> bool:
    return _alpha(a, b, {}, {})


def _alpha(a: Expr, b: Expr, la: dict[str, int], lb: dict[str, int]) -> bool:
    if type(a) is not type(b):
        return False
    match a, b:
        case Var(n1), Var(n2):
            if (n1 in la) != (n2 in lb):
                return False
            return la[n1] == lb[n2] if n1 in la else n1 == n2
        case (Int(v1), Int(v2)):
            return v1 == v2
        case (Key(n1), Key(n2)):
            return n1 == n2
        case (Label(i1), Label(i2)):
            return i1 == i2
        case Lam(p1, t1, b1, c1), Lam(p2, t2, b2, c2):
            if t1 != t2 or c1 != c2:
                return False
            depth = len(la)
            return _alpha(b1, b2, {**la, p1: depth}, {**lb, p2: depth})
        case App(f1, a1), App(f2, a2):
            return _alpha(f1, f2, la, lb) and _alpha(a1, a2, la, lb)
        case Fix(f1), Fix(f2):
            return _alpha(f1, f2, la, lb)
        case KL(i1), KL(i2):
            return len(i1) == len(i2) and all(_alpha(x, y, la, lb) for x, y in zip(i1, i2))
        case Node(k1, p1, j1), Node(k2, p2, j2):
            return _alpha(k1, k2, la, lb) and _alpha(p1, p2, la, lb) and _alpha(j1, j2, la, lb)
        case Proj(i1, a1), Proj(i2, a2):
            return i1 == i2 and _alpha(a1, a2, la, lb)
        case (Concat(l1, r1), Concat(l2, r2)) | (Subtract(l1, r1), Subtract(l2, r2)):
            return _alpha(l1, l2, la, lb) and _alpha(r1, r2, la, lb)
        case Arith(o1, l1, r1), Arith(o2, l2, r2):
            return o1 == o2 and _alpha(l1, l2, la, lb) and _alpha(r1, r2, la, lb)
        case If0(s1, t1, f1), If0(s2, t2, f2):
            return _alpha(s1, s2, la, lb) and _alpha(t1, t2, la, lb) and _alpha(f1, f2, la, lb)
        case Len(a1), Len(a2):
            return _alpha(a1, a2, la, lb)
        case Emit(o1), Emit(o2):
            if type(o1) is not type(o2):
                return False
            x1, x2 = op_args(o1), op_args(o2)
            return len(x1) == len(x2) and all(_alpha(p, q, la, lb) for p, q in zip(x1, x2))
        case Claim(a1), Claim(a2):
            return _alpha(a1, a2, la, lb)
    raise TypeError(a)


### bounded normalization

class _Fuel:
    __slots__ = ("left",)

    def __init__(self, n: int) -> None:
        self.left = n

    def spend(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def normalize(e: Expr, fuel: int = 10_000) -> tuple[Expr, bool]:
    """Reduce pure redexes (beta, projection, list ops, arithmetic, if0, len, fix)
    to normal form, going under binders. Returns (term, completed); completed is
    False when fuel ran out. Emit, Claim, and Label redexes are left in place."""
    f = _Fuel(fuel)
    out = _norm(e, f)
    return out, f.left > 0


def _norm(e: Expr, f: _Fuel) -> Expr:
    while True:
        if not f.spend():
            return e
        match e:
            case Var() | Int() | Key() | Label():
                return e
            case Lam(p, t, b, c):
                return Lam(p, t, _norm(b, f), c)
            case Fix(inner):
                inner = _norm(inner, f)
                # cbv unrolling, restricted to the double-lambda shape
                if isinstance(inner, Lam) and isinstance(inner.body, Lam):
                    e = substitute(inner.body, Fix(inner), inner.param)
                    continue
                return Fix(inner)
            case App(fn, arg):
                fn = _norm(fn, f)
                arg = _norm(arg, f)
                if isinstance(fn, Lam):
                    e = substitute(fn.body, arg, fn.param)
                    continue
                return App(fn, arg)
            case KL(items):
                return KL(tuple(_norm(i, f) for i in items))
            case Node(k, p, a):
                return Node(_norm(k, f), _norm(p, f), _norm(a, f))
            case Proj(i, arg):
                arg = _norm(arg, f)
                if isinstance(arg, Node):
                    e = (arg.key, arg.payload, arg.adj)[i - 1]
                    continue
                return Proj(i, arg)
            case Concat(l, r):
                l, r = _norm(l, f), _norm(r, f)
                if isinstance(l, KL) and isinstance(r, KL):
                    return KL(l.items + r.items)
                return Concat(l, r)
            case Subtract(l, r):
                l, r = _norm(l, f), _norm(r, f)
                if (isinstance(l, KL) and isinstance(r, KL)
                        and is_value(l) and is_value(r)):
                    return KL(kl_subtract(l.items, r.items))
                return Subtract(l, r)
            case Arith(op, l, r):
                l, r = _norm(l, f), _norm(r, f)
                if isinstance(l, Int) and isinstance(r, Int):
                    return Int(arith_eval(op, l.value, r.value))
                return Arith(op, l, r)
            case If0(s, t, els):
                s = _norm(s, f)
                if isinstance(s, Int):
                    e = t if s.value == 0 else els
                    continue
                # branches stay unevaluated under an open scrutinee
                return If0(s, t, els)
            case Len(arg):
                arg = _norm(arg, f)
                if isinstance(arg, KL) and is_value(arg):
                    return Int(len(arg.items))
                return Len(arg)
            case Emit(op):
                return Emit(rebuild_op(op, tuple(_norm(a, f) for a in op_args(op))))
            case Claim(arg):
                return Claim(_norm(arg, f))
        raise TypeError(e)


def arith_eval(op: str, a: int, b: int) -> int:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        # truncation toward zero; division by zero yields zero rather than a crash
        if b == 0:
            return 0
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    raise ValueError(f"arithmetic op {op!r}")


def term_equiv(a: Expr, b: Expr, fuel: int = 10_000) -> str:
    """'equal' when both sides normalize within fuel to alpha-equivalent forms,
    'unknown' when fuel runs out, 'distinct' otherwise."""
    na, oka = normalize(a, fuel)
    nb, okb = normalize(b, fuel)
    if not (oka and okb):
        return "unknown"
    return "equal" if alpha_equiv(na, nb) else "distinct"


def eta_contract(e: Expr) -> Expr:
    """One outer eta step: λx. f x becomes f when x is not free in f."""
    match e:
        case Lam(p, _, App(fn, Var(arg)), _) if arg == p and p not in free_vars(fn):
            return fn
        case _:
            return e


def compose(f: Expr, g: Expr) -> Lam:
    """Function composition λz. f (g z) with a fresh z drawn from the reserved namespace."""
    avoid = free_vars(f) | free_vars(g)
    i = 0
    while f"$z{i}" in avoid:
        i += 1
    z = f"$z{i}"
    ptype = g.ptype if isinstance(g, Lam) and g.ptype is not None else NODE
    return Lam(z, ptype, App(f, App(g, Var(z))), False)
