"""Exact-coefficient multivariate polynomials and polynomial systems.

Polynomials are stored as dense exponent maps ``{(a_1, ..., a_n): coeff}``
with :class:`fractions.Fraction` coefficients.  Numerical work goes through
:class:`CompiledSystem`, which evaluates a whole system and its Jacobian at
a batch of complex points.
"""

from __future__ import annotations

import math
import re
import threading
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NotHomogeneousError, ParseError

Exponent = tuple[int, ...]


class Polynomial:
    """A polynomial in ``num_vars`` variables with rational coefficients."""

    __slots__ = ("num_vars", "terms", "degree")

    def __init__(self, num_vars: int, terms: Mapping[Exponent, Fraction] | None = None):
        if num_vars < 1:
            raise ValueError("num_vars must be positive")
        clean: dict[Exponent, Fraction] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != num_vars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent {exps} for {num_vars} variables")
            coeff = Fraction(coeff)
            if coeff != 0:
                clean[exps] = clean.get(exps, Fraction(0)) + coeff
                if clean[exps] == 0:
                    del clean[exps]
        self.num_vars = num_vars
        self.terms = clean
        self.degree = max((sum(e) for e in clean), default=0)

    # construction helpers
    @classmethod
    def constant(cls, value, num_vars: int) -> "Polynomial":
        return cls(num_vars, {(0,) * num_vars: Fraction(value)})

    @classmethod
    def variable(cls, index: int, num_vars: int) -> "Polynomial":
        exps = [0] * num_vars
        exps[index] = 1
        return cls(num_vars, {tuple(exps): Fraction(1)})

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.num_vars != self.num_vars:
                raise ValueError("polynomials live in different rings")
            return other
        if isinstance(other, (int, Fraction)):
            return Polynomial.constant(other, self.num_vars)
        if isinstance(other, float):
            return Polynomial.constant(Fraction(other), self.num_vars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Polynomial(self.num_vars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.num_vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms: dict[Exponent, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return Polynomial(self.num_vars, terms)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            if other.degree != 0 or not other.terms:
                raise ZeroDivisionError("can only divide by a nonzero constant")
            other = other.constant_term()
        other = Fraction(other)
        return Polynomial(self.num_vars, {e: c / other for e, c in self.terms.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(1, self.num_vars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.num_vars == other.num_vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.num_vars, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({format_polynomial(self)!r})"

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.num_vars, Fraction(0))

    def is_zero(self) -> bool:
        return not self.terms

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def degree_in(self, indices: Iterable[int]) -> int:
        """Total degree counting only the variables in ``indices``."""
        idx = list(indices)
        return max((sum(e[i] for i in idx) for e in self.terms), default=0)

    def diff(self, j: int) -> "Polynomial":
        terms = {}
        for e, c in self.terms.items():
            if e[j]:
                ne = list(e)
                ne[j] -= 1
                terms[tuple(ne)] = c * e[j]
        return Polynomial(self.num_vars, terms)

    def embed(self, num_vars: int, positions: Sequence[int]) -> "Polynomial":
        """Re-index into a ring with ``num_vars`` variables; variable ``i`` goes to ``positions[i]``."""
        terms = {}
        for e, c in self.terms.items():
            ne = [0] * num_vars
            for i, a in enumerate(e):
                ne[positions[i]] += a
            terms[tuple(ne)] = c
        return Polynomial(num_vars, terms)

    def permute(self, perm: Sequence[int]) -> "Polynomial":
        """Rename variable ``i`` to ``perm[i]``."""
        return self.embed(self.num_vars, perm)

    def substitute(self, values: Mapping[int, Fraction]) -> "Polynomial":
        """Replace the given variables by constants (the ring size is kept)."""
        terms: dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            ne = list(e)
            for j, v in values.items():
                if ne[j]:
                    c = c * Fraction(v) ** ne[j]
                    ne[j] = 0
            key = tuple(ne)
            terms[key] = terms.get(key, Fraction(0)) + c
        return Polynomial(self.num_vars, terms)

    def homogenize(self, extra_index: int = 0) -> "Polynomial":
        """Homogenize with a fresh variable inserted at ``extra_index``."""
        d = self.degree
        terms = {}
        for e, c in self.terms.items():
            ne = list(e)
            ne.insert(extra_index, d - sum(e))
            terms[tuple(ne)] = c
        return Polynomial(self.num_vars + 1, terms)

    def evaluate(self, x) -> complex:
        """Evaluate at a single point (complex arithmetic)."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.num_vars,):
            raise ValueError(f"expected a point with {self.num_vars} coordinates, got shape {x.shape}")
        return complex(CompiledSystem([self]).values(x[None, :])[0, 0])


def multinomial(exps: Exponent) -> int:
    d = sum(exps)
    out = math.factorial(d)
    for a in exps:
        out //= math.factorial(a)
    return out


def weil_norm(h: Polynomial) -> float:
    """Weil norm of a homogeneous polynomial with real coefficients."""
    if not h.is_homogeneous():
        raise NotHomogeneousError("Weil norm needs a homogeneous polynomial")
    sq = sum((c * c / multinomial(e) for e, c in h.terms.items()), Fraction(0))
    return math.sqrt(sq)


def system_norm(polys: Iterable[Polynomial]) -> float:
    """``sqrt(sum ||f_i||_w^2)`` over a sequence of homogeneous polynomials."""
    return math.sqrt(sum(weil_norm(p) ** 2 for p in polys))


# ---------------------------------------------------------------------------
# printing and parsing

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def _format_coeff(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"({c.numerator}/{c.denominator})"


def graded_lex_key(exps: Exponent):
    return (sum(exps), exps)


def format_polynomial(p: Polynomial, names: Sequence[str] | None = None) -> str:
    """Canonical text: graded-lex order (highest first), explicit ``*`` and ``^``."""
    names = names or [f"x{i + 1}" for i in range(p.num_vars)]
    if not p.terms:
        return "0"
    pieces = []
    for exps in sorted(p.terms, key=graded_lex_key, reverse=True):
        c = p.terms[exps]
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        factors = []
        for name, a in zip(names, exps):
            if a == 1:
                factors.append(name)
            elif a > 1:
                factors.append(f"{name}^{a}")
        if not factors:
            body = _format_coeff(mag)
        elif mag == 1:
            body = "*".join(factors)
        else:
            body = "*".join([_format_coeff(mag)] + factors)
        pieces.append((sign, body))
    first_sign, first_body = pieces[0]
    out = ("-" if first_sign == "-" else "") + first_body
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class _Parser:
    """Recursive-descent parser for one expression (one line / statement)."""

    def __init__(self, text: str, line: int, col0: int):
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos + 1)
            kind = m.lastgroup
            if kind != "ws":
                self.tokens.append((kind, m.group(), col0 + pos + 1))
            pos = m.end()
        self.line = line
        self.end_col = col0 + len(text) + 1
        self.i = 0
        self.names: list[str] = []

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", self.end_col)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.line, tok[2])

    # the AST is nested tuples, turned into polynomials once variables are known
    def parse(self):
        if not self.tokens:
            self.error("empty expression")
        node = self.expr()
        if self.peek()[0] != "eof":
            self.error(f"unexpected token {self.peek()[1]!r} (implicit multiplication is not allowed)")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            tok = self.take()
            rhs = self.unary()
            node = (tok[1], node, rhs, tok)
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            inner = self.unary()
            return inner if op == "+" else ("neg", inner)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "num" or not tok[1].isdigit():
                self.error("exponent must be a nonnegative integer literal", tok)
            return ("^", base, int(tok[1]))
        return base

    def atom(self):
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return ("num", Fraction(text))
        if kind == "name":
            if text not in self.names:
                self.names.append(text)
            return ("var", text, tok)
        if kind == "op" and text == "(":
            node = self.expr()
            close = self.take()
            if close[1] != ")":
                self.error("expected ')'", close)
            return node
        self.error(f"unexpected token {text!r}" if kind != "eof" else "unexpected end of expression", tok)


def _build(node, index: Mapping[str, int], n: int, line: int) -> Polynomial:
    tag = node[0]
    if tag == "num":
        return Polynomial.constant(node[1], n)
    if tag == "var":
        return Polynomial.variable(index[node[1]], n)
    if tag == "neg":
        return -_build(node[1], index, n, line)
    if tag == "^":
        return _build(node[1], index, n, line) ** node[2]
    lhs = _build(node[1], index, n, line)
    rhs = _build(node[2], index, n, line)
    if tag == "+":
        return lhs + rhs
    if tag == "-":
        return lhs - rhs
    if tag == "*":
        return lhs * rhs
    if tag == "/":
        if rhs.degree != 0 or rhs.is_zero():
            raise ParseError("division only by a nonzero constant", line, node[3][2])
        return lhs / rhs
    raise AssertionError(tag)


def _statements(text: str):
    """Yield (line, start column, source) for each ';'/newline separated statement."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        col = 0
        for chunk in body.split(";"):
            if chunk.strip():
                yield lineno, col, chunk
            col += len(chunk) + 1


def parse_system(text: str, var_order: Sequence[str] | None = None) -> "PolySystem":
    """Parse newline/semicolon separated polynomial expressions.

    Variables are ordered lexicographically unless ``var_order`` is given.
    Decimal literals become exact rationals.
    """
    parsed = []
    names: list[str] = []
    for line, col, src in _statements(text):
        p = _Parser(src, line, col)
        node = p.parse()
        parsed.append((node, line))
        for name in p.names:
            if name not in names:
                names.append(name)
            if var_order is not None and name not in var_order:
                tok = _find_var(node, name)
                raise ParseError(f"unknown variable {name!r}", line, tok[2])
    if not parsed:
        raise ParseError("empty input: no polynomial expressions", 1, 1)
    order = list(var_order) if var_order is not None else sorted(names)
    if not order:
        raise ParseError("system has no variables", 1, 1)
    if len(set(order)) != len(order):
        raise ValueError("duplicate variable names in var_order")
    index = {name: i for i, name in enumerate(order)}
    polys = [_build(node, index, len(order), line) for node, line in parsed]
    return PolySystem(polys, order)


def _find_var(node, name):
    if node[0] == "var":
        return node[2] if node[1] == name else None
    for child in node[1:]:
        if isinstance(child, tuple) and child and isinstance(child[0], str):
            hit = _find_var(child, name)
            if hit:
                return hit
    return None


# ---------------------------------------------------------------------------
# systems


class PolySystem:
    """An ordered sequence of polynomials sharing one variable ring.

    Immutable after construction.  The symbolic Jacobian and the compiled
    numerical evaluator are built lazily, once, under a lock.
    """

    def __init__(self, polys: Sequence[Polynomial], var_names: Sequence[str] | None = None):
        polys = tuple(polys)
        if not polys:
            raise ValueError("a system needs at least one polynomial")
        n = polys[0].num_vars
        if any(p.num_vars != n for p in polys):
            raise ValueError("all polynomials must share num_vars")
        names = tuple(var_names) if var_names is not None else tuple(f"x{i + 1}" for i in range(n))
        if len(names) != n:
            raise ValueError("var_names length does not match num_vars")
        self.polys = polys
        self.var_names = names
        self._lock = threading.Lock()
        self._jac: tuple[tuple[Polynomial, ...], ...] | None = None
        self._compiled: CompiledSystem | None = None

    def __getstate__(self):
        return {"polys": self.polys, "var_names": self.var_names}

    def __setstate__(self, state):
        self.__init__(state["polys"], state["var_names"])

    @property
    def num_vars(self) -> int:
        return self.polys[0].num_vars

    @property
    def codim(self) -> int:
        return len(self.polys)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(p.degree for p in self.polys)

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __eq__(self, other):
        if not isinstance(other, PolySystem):
            return NotImplemented
        return self.polys == other.polys and self.var_names == other.var_names

    def __hash__(self):
        return hash((self.polys, self.var_names))

    def __repr__(self):
        return f"PolySystem({self.to_text()!r})"

    def to_text(self) -> str:
        return "\n".join(format_polynomial(p, self.var_names) for p in self.polys) + "\n"

    def symbolic_jacobian(self) -> tuple[tuple[Polynomial, ...], ...]:
        if self._jac is None:
            with self._lock:
                if self._jac is None:
                    self._jac = tuple(
                        tuple(p.diff(j) for j in range(self.num_vars)) for p in self.polys
                    )
        return self._jac

    @property
    def compiled(self) -> "CompiledSystem":
        if self._compiled is None:
            with self._lock:
                if self._compiled is None:
                    self._compiled = CompiledSystem(self.polys)
        return self._compiled

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex)
        if x.ndim != 1 or x.shape[0] != self.num_vars:
            raise ValueError(
                f"dimension mismatch: system has {self.num_vars} variables, point has shape {x.shape}"
            )
        return x

    def evaluate(self, x) -> np.ndarray:
        x = self._check_point(x)
        return self.compiled.values(x[None, :])[0]

    def jacobian(self, x) -> np.ndarray:
        x = self._check_point(x)
        self.symbolic_jacobian()
        return self.compiled.evaluate(x[None, :])[1][0]


def evaluate(system: PolySystem, x) -> np.ndarray:
    return system.evaluate(x)


def jacobian(system: PolySystem, x) -> np.ndarray:
    return system.jacobian(x)


def homogenize_system(system: PolySystem, name: str = "h") -> PolySystem:
    """Homogenize every polynomial with one fresh leading variable."""
    if name in system.var_names:
        raise ValueError(f"variable name {name!r} already in use")
    polys = [p.homogenize(0) for p in system.polys]
    return PolySystem(polys, (name,) + system.var_names)


class CompiledSystem:
    """Batched numerical evaluator for a list of polynomials and their gradients.

    All monomials of the polynomials and of their first partials are collected
    into one basis; values and Jacobians are then two matrix products against
    the monomial matrix of the batch.
    """

    def __init__(self, polys: Sequence[Polynomial]):
        polys = list(polys)
        n = polys[0].num_vars
        c = len(polys)
        monos: dict[Exponent, int] = {}

        def slot(e):
            if e not in monos:
                monos[e] = len(monos)
            return monos[e]

        entries_f = []
        entries_j = []
        for i, p in enumerate(polys):
            for e, coeff in sorted(p.terms.items()):
                entries_f.append((slot(e), i, float(coeff)))
                for j in range(n):
                    if e[j]:
                        de = list(e)
                        de[j] -= 1
                        entries_j.append((slot(tuple(de)), i * n + j, float(coeff * e[j])))
        if not monos:
            slot((0,) * n)
        self.num_vars = n
        self.num_polys = c
        self.exponents = np.array(list(monos), dtype=np.int64).reshape(len(monos), n)
        self.coef_f = np.zeros((len(monos), c), dtype=complex)
        self.coef_j = np.zeros((len(monos), c * n), dtype=complex)
        for u, i, v in entries_f:
            self.coef_f[u, i] += v
        for u, k, v in entries_j:
            self.coef_j[u, k] += v
        self.max_exp = self.exponents.max(axis=0) if len(monos) else np.zeros(n, dtype=np.int64)

    def monomials(self, X: np.ndarray) -> np.ndarray:
        N = X.shape[0]
        M = np.ones((N, self.exponents.shape[0]), dtype=complex)
        for j in range(self.num_vars):
            top = int(self.max_exp[j])
            if top == 0:
                continue
            pw = np.empty((N, top + 1), dtype=complex)
            pw[:, 0] = 1.0
            for k in range(1, top + 1):
                pw[:, k] = pw[:, k - 1] * X[:, j]
            M *= pw[:, self.exponents[:, j]]
        return M

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.monomials(np.asarray(X, dtype=complex)) @ self.coef_f

    def evaluate(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(F, J)`` with shapes ``(N, c)`` and ``(N, c, n)``."""
        M = self.monomials(np.asarray(X, dtype=complex))
        F = M @ self.coef_f
        J = (M @ self.coef_j).reshape(M.shape[0], self.num_polys, self.num_vars)
        return F, J
