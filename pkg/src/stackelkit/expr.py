"""Expression DAG used by the NUMERIC scalar-field backend.

Nodes are immutable and shared freely between trees; differentiation and
compilation are memoized per node, so repeated brackets stay linear in the
size of the DAG rather than exponential in its depth.
"""

from __future__ import annotations

import math

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class Node:
    __slots__ = ("_vars", "_dcache", "_fn")

    def __init__(self):
        self._vars = None
        self._dcache = {}
        self._fn = None

    def children(self) -> tuple:
        return ()

    def variables(self) -> frozenset:
        if self._vars is None:
            out = set()
            for c in self.children():
                out |= c.variables()
            self._vars = frozenset(out)
        return self._vars

    def diff(self, i: int) -> "Node":
        if i not in self.variables():
            return ZERO
        d = self._dcache.get(i)
        if d is None:
            d = self._diff(i)
            self._dcache[i] = d
        return d

    def _diff(self, i: int) -> "Node":
        raise NotImplementedError

    def compiled(self):
        if self._fn is None:
            self._fn = compile_nodes([self], single=True)
        return self._fn

    def __call__(self, point):
        return self.compiled()(point)

    def is_const(self, value=None) -> bool:
        return False

    def __repr__(self):
        return f"<{type(self).__name__} {to_text(self)}>"


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = float(value)
        self._vars = frozenset()

    def _diff(self, i):
        return ZERO

    def is_const(self, value=None):
        return value is None or self.value == value


class Var(Node):
    __slots__ = ("index",)

    def __init__(self, index: int):
        super().__init__()
        self.index = index
        self._vars = frozenset((index,))

    def _diff(self, i):
        return ONE if i == self.index else ZERO


class Add(Node):
    __slots__ = ("args",)

    def __init__(self, args):
        super().__init__()
        self.args = tuple(args)

    def children(self):
        return self.args

    def _diff(self, i):
        return add(*(a.diff(i) for a in self.args))


class Mul(Node):
    __slots__ = ("args",)

    def __init__(self, args):
        super().__init__()
        self.args = tuple(args)

    def children(self):
        return self.args

    def _diff(self, i):
        terms = []
        for k, a in enumerate(self.args):
            da = a.diff(i)
            if da.is_const(0.0):
                continue
            terms.append(mul(*self.args[:k], da, *self.args[k + 1:]))
        return add(*terms)


class Div(Node):
    __slots__ = ("num", "den")

    def __init__(self, num, den):
        super().__init__()
        self.num = num
        self.den = den

    def children(self):
        return (self.num, self.den)

    def _diff(self, i):
        dn, dd = self.num.diff(i), self.den.diff(i)
        first = div(dn, self.den)
        if dd.is_const(0.0):
            return first
        return sub(first, div(mul(self.num, dd), power(self.den, 2)))


class Pow(Node):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent: int):
        super().__init__()
        self.base = base
        self.exponent = int(exponent)

    def children(self):
        return (self.base,)

    def _diff(self, i):
        k = self.exponent
        return mul(Const(k), power(self.base, k - 1), self.base.diff(i))


class Func(Node):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg):
        super().__init__()
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _diff(self, i):
        da = self.arg.diff(i)
        if self.name == "sin":
            outer = func("cos", self.arg)
        elif self.name == "cos":
            outer = neg(func("sin", self.arg))
        elif self.name == "exp":
            outer = self
        else:
            outer = div(Const(0.5), self)
        return mul(outer, da)


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value) -> Node:
    value = float(value)
    if value == 0.0:
        return ZERO
    if value == 1.0:
        return ONE
    return Const(value)


def var(index: int) -> Node:
    return Var(index)


def add(*args) -> Node:
    flat = []
    c = 0.0
    for a in args:
        if isinstance(a, Add):
            parts = a.args
        else:
            parts = (a,)
        for p in parts:
            if isinstance(p, Const):
                c += p.value
            else:
                flat.append(p)
    if c != 0.0:
        flat.append(Const(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*args) -> Node:
    flat = []
    c = 1.0
    for a in args:
        parts = a.args if isinstance(a, Mul) else (a,)
        for p in parts:
            if isinstance(p, Const):
                c *= p.value
            else:
                flat.append(p)
    if c == 0.0:
        return ZERO
    if c != 1.0:
        flat.insert(0, Const(c))
    if not flat:
        return ONE if c == 1.0 else Const(c)
    if len(flat) == 1:
        return flat[0]
    return Mul(flat)


def neg(a) -> Node:
    return mul(Const(-1.0), a)


def sub(a, b) -> Node:
    return add(a, neg(b))


def div(a, b) -> Node:
    if isinstance(b, Const):
        if b.value == 0.0:
            return Div(a, b)  # left in place so evaluation reports the pole
        return mul(a, const(1.0 / b.value)) if b.value != 1.0 else a
    if a.is_const(0.0):
        return ZERO
    return Div(a, b)


def power(a, k: int) -> Node:
    k = int(k)
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Const):
        try:
            return const(a.value ** k)
        except ZeroDivisionError:
            return Pow(a, k)
    if isinstance(a, Pow):
        return Pow(a.base, a.exponent * k)
    return Pow(a, k)


def func(name: str, a) -> Node:
    if isinstance(a, Const):
        try:
            return const(getattr(math, name)(a.value))
        except ValueError:
            pass
    return Func(name, a)


_NAMESPACE = {"_sin": math.sin, "_cos": math.cos, "_exp": math.exp, "_sqrt": math.sqrt}


def compile_nodes(nodes, single=False):
    """Compile a list of nodes into one Python function of a point sequence.

    Shared subexpressions are emitted once (straight-line SSA code).
    Division by zero surfaces as ``ZeroDivisionError``; math domain errors as
    ``ValueError``.
    """
    names = {}
    lines = []

    def emit(node):
        key = id(node)
        if key in names:
            return names[key]
        if isinstance(node, Const):
            names[key] = repr(node.value)
            return names[key]
        if isinstance(node, Var):
            names[key] = f"x[{node.index}]"
            return names[key]
        if isinstance(node, Add):
            rhs = " + ".join(emit(a) for a in node.args)
        elif isinstance(node, Mul):
            rhs = " * ".join(emit(a) for a in node.args)
        elif isinstance(node, Div):
            rhs = f"{emit(node.num)} / {emit(node.den)}"
        elif isinstance(node, Pow):
            rhs = f"{emit(node.base)} ** {node.exponent}"
        elif isinstance(node, Func):
            rhs = f"_{node.name}({emit(node.arg)})"
        else:  # pragma: no cover
            raise TypeError(node)
        name = f"t{len(lines)}"
        lines.append(f"    {name} = {rhs}")
        names[key] = name
        return name

    # iterative post-order so that deep DAGs don't hit the recursion limit
    for root in nodes:
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if id(node) in names:
                continue
            if done or not node.children():
                emit(node)
            else:
                stack.append((node, True))
                stack.extend((c, False) for c in node.children() if id(c) not in names)
    outs = [names[id(n)] for n in nodes]
    if single:
        ret = f"    return {outs[0]}"
    else:
        ret = f"    return ({', '.join(outs)}{',' if len(outs) == 1 else ''})"
    src = "def _f(x):\n" + "\n".join(lines + [ret]) + "\n"
    ns = dict(_NAMESPACE)
    exec(compile(src, "<stackelkit.expr>", "exec"), ns)
    return ns["_f"]


# precedence: 0 sum, 1 product, 2 power/atom
def to_text(node, names=None) -> str:
    names = names or {}

    def vname(i):
        return names[i] if i in names else f"x{i + 1}"

    def fmt_const(v):
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)

    def go(n, prec):
        if isinstance(n, Const):
            s = fmt_const(n.value)
            return f"({s})" if n.value < 0 and prec > 0 else s
        if isinstance(n, Var):
            return vname(n.index)
        if isinstance(n, Add):
            parts = [go(n.args[0], 0)]
            for a in n.args[1:]:
                if isinstance(a, Mul) and isinstance(a.args[0], Const) and a.args[0].value < 0:
                    rest = mul(const(-a.args[0].value), *a.args[1:])
                    parts.append(f" - {go(rest, 1)}")
                elif isinstance(a, Const) and a.value < 0:
                    parts.append(f" - {fmt_const(-a.value)}")
                else:
                    parts.append(f" + {go(a, 0)}")
            s = "".join(parts)
            return f"({s})" if prec > 0 else s
        if isinstance(n, Mul):
            if isinstance(n.args[0], Const) and n.args[0].value == -1.0:
                s = "-" + go(mul(*n.args[1:]), 1)
                return f"({s})" if prec > 0 else s
            s = "*".join(go(a, 1) for a in n.args)
            return f"({s})" if prec > 1 else s
        if isinstance(n, Div):
            s = f"{go(n.num, 1)}/{go(n.den, 2)}"
            return f"({s})" if prec > 1 else s
        if isinstance(n, Pow):
            k = n.exponent
            if k < 0:
                s = f"1/{go(n.base, 2)}^{-k}"
                return f"({s})" if prec > 0 else s
            return f"{go(n.base, 2)}^{k}"
        if isinstance(n, Func):
            return f"{n.name}({go(n.arg, 0)})"
        raise TypeError(n)  # pragma: no cover

    return go(node, 0)
