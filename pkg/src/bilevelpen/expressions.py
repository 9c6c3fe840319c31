"""Tiny arithmetic expression language for problem objectives.

Expressions are written over ``y[i]`` (leader variables) and ``x[j]``
(follower variables) with ``+ - * / ^`` and parentheses, e.g. ::

    (1 + 4*y[0]*(1 - y[0])) * (1 + x[0] + x[1])

The parser produces a small AST that supports numeric evaluation
(vectorized over batches of x), symbolic differentiation with respect
to the x variables, and a conservative polynomial-degree analysis used
to classify fields as linear or quadratic in x.
"""

# AST nodes are tuples: ("const", v), ("y", i), ("x", j),
# ("add", a, b), ("sub", a, b), ("mul", a, b), ("div", a, b),
# ("neg", a), ("pow", a, k) with k a nonnegative integer.


class ExpressionError(ValueError):
    """Raised for syntax errors or unsupported constructs."""


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "+-*/^()[]":
            tokens.append(ch)
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] in ".eE" or
                             (text[j] in "+-" and text[j - 1] in "eE")):
                j += 1
            try:
                tokens.append(("num", float(text[i:j])))
            except ValueError:
                raise ExpressionError(f"bad number literal {text[i:j]!r}")
            i = j
        elif ch in "xy":
            tokens.append(("var", ch))
            i += 1
        else:
            raise ExpressionError(f"unexpected character {ch!r} at position {i}")
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionError("unexpected end of expression")
        self.pos += 1
        return tok

    def expect(self, tok):
        got = self.next()
        if got != tok:
            raise ExpressionError(f"expected {tok!r}, got {got!r}")

    def parse_expr(self):
        node = self.parse_term()
        while self.peek() in ("+", "-"):
            op = self.next()
            rhs = self.parse_term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek() in ("*", "/"):
            op = self.next()
            rhs = self.parse_unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def parse_unary(self):
        if self.peek() == "-":
            self.next()
            return ("neg", self.parse_unary())
        if self.peek() == "+":
            self.next()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.peek() == "^":
            self.next()
            exponent = self.parse_unary()
            k = _const_value(exponent)
            if k is None or k != int(k) or k < 0:
                raise ExpressionError("exponent must be a nonnegative integer constant")
            return ("pow", base, int(k))
        return base

    def parse_atom(self):
        tok = self.next()
        if isinstance(tok, tuple) and tok[0] == "num":
            return ("const", tok[1])
        if isinstance(tok, tuple) and tok[0] == "var":
            name = tok[1]
            self.expect("[")
            idx = self.next()
            if not (isinstance(idx, tuple) and idx[0] == "num" and idx[1] == int(idx[1])):
                raise ExpressionError(f"{name}[...] index must be an integer")
            self.expect("]")
            return (name, int(idx[1]))
        if tok == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {tok!r}")


def _const_value(node):
    if node[0] == "const":
        return node[1]
    if node[0] == "neg":
        v = _const_value(node[1])
        return None if v is None else -v
    return None


def parse(text):
    """Parse an expression string into an AST."""
    parser = _Parser(_tokenize(text))
    node = parser.parse_expr()
    if parser.peek() is not None:
        raise ExpressionError(f"trailing input at token {parser.peek()!r}")
    return node


def check_indices(node, dim_y, dim_x):
    """Verify every y[i]/x[j] index is within the declared arities."""
    kind = node[0]
    if kind == "y":
        if not 0 <= node[1] < dim_y:
            raise ExpressionError(f"y[{node[1]}] out of range for dim_y={dim_y}")
    elif kind == "x":
        if not 0 <= node[1] < dim_x:
            raise ExpressionError(f"x[{node[1]}] out of range for dim_x={dim_x}")
    elif kind in ("add", "sub", "mul", "div"):
        check_indices(node[1], dim_y, dim_x)
        check_indices(node[2], dim_y, dim_x)
    elif kind == "neg":
        check_indices(node[1], dim_y, dim_x)
    elif kind == "pow":
        check_indices(node[1], dim_y, dim_x)


def compile_evaluator(node):
    """Compile the AST to a closure ``fn(y, x) -> value``.

    ``x`` may be a single point of shape (n,) or a batch of shape (N, n);
    the result broadcasts accordingly.
    """
    kind = node[0]
    if kind == "const":
        v = node[1]
        return lambda y, x: v
    if kind == "y":
        i = node[1]
        return lambda y, x: y[i]
    if kind == "x":
        j = node[1]
        return lambda y, x: x[..., j]
    if kind == "add":
        fa, fb = compile_evaluator(node[1]), compile_evaluator(node[2])
        return lambda y, x: fa(y, x) + fb(y, x)
    if kind == "sub":
        fa, fb = compile_evaluator(node[1]), compile_evaluator(node[2])
        return lambda y, x: fa(y, x) - fb(y, x)
    if kind == "mul":
        fa, fb = compile_evaluator(node[1]), compile_evaluator(node[2])
        return lambda y, x: fa(y, x) * fb(y, x)
    if kind == "div":
        fa, fb = compile_evaluator(node[1]), compile_evaluator(node[2])
        return lambda y, x: fa(y, x) / fb(y, x)
    if kind == "neg":
        fa = compile_evaluator(node[1])
        return lambda y, x: -fa(y, x)
    if kind == "pow":
        fa, k = compile_evaluator(node[1]), node[2]
        return lambda y, x: fa(y, x) ** k
    raise ExpressionError(f"unknown node {kind!r}")


# -- symbolic differentiation -------------------------------------------

_ZERO = ("const", 0.0)
_ONE = ("const", 1.0)


def _add(a, b):
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    if a[0] == "const" and b[0] == "const":
        return ("const", a[1] + b[1])
    return ("add", a, b)


def _sub(a, b):
    if b == _ZERO:
        return a
    if a[0] == "const" and b[0] == "const":
        return ("const", a[1] - b[1])
    return ("sub", a, b)


def _mul(a, b):
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    if a[0] == "const" and b[0] == "const":
        return ("const", a[1] * b[1])
    return ("mul", a, b)


def diff_x(node, j):
    """Symbolic partial derivative with respect to x[j]."""
    kind = node[0]
    if kind in ("const", "y"):
        return _ZERO
    if kind == "x":
        return _ONE if node[1] == j else _ZERO
    if kind == "add":
        return _add(diff_x(node[1], j), diff_x(node[2], j))
    if kind == "sub":
        return _sub(diff_x(node[1], j), diff_x(node[2], j))
    if kind == "mul":
        a, b = node[1], node[2]
        return _add(_mul(diff_x(a, j), b), _mul(a, diff_x(b, j)))
    if kind == "div":
        a, b = node[1], node[2]
        num = _sub(_mul(diff_x(a, j), b), _mul(a, diff_x(b, j)))
        return ("div", num, ("pow", b, 2))
    if kind == "neg":
        return ("neg", diff_x(node[1], j))
    if kind == "pow":
        a, k = node[1], node[2]
        if k == 0:
            return _ZERO
        return _mul(_mul(("const", float(k)), ("pow", a, k - 1)), diff_x(a, j))
    raise ExpressionError(f"unknown node {kind!r}")


def degree_in_x(node):
    """Total polynomial degree in the x variables, or None if not polynomial."""
    kind = node[0]
    if kind in ("const", "y"):
        return 0
    if kind == "x":
        return 1
    if kind in ("add", "sub"):
        da, db = degree_in_x(node[1]), degree_in_x(node[2])
        return None if da is None or db is None else max(da, db)
    if kind == "mul":
        da, db = degree_in_x(node[1]), degree_in_x(node[2])
        return None if da is None or db is None else da + db
    if kind == "div":
        da, db = degree_in_x(node[1]), degree_in_x(node[2])
        if db == 0 and da is not None:
            return da
        return None
    if kind == "neg":
        return degree_in_x(node[1])
    if kind == "pow":
        da = degree_in_x(node[1])
        return None if da is None else da * node[2]
    raise ExpressionError(f"unknown node {kind!r}")
