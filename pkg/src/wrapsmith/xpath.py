"""A self-contained XPath 1.0 subset evaluator over :mod:`wrapsmith.dom` trees.

Covers the dialect that wrapper rules actually use: absolute and relative
location paths, the ``//`` abbreviation, the child / descendant / parent /
ancestor / self / sibling / attribute axes, ``text()`` and ``node()`` tests,
and predicates built from comparisons, positions, boolean connectives and
the ``contains`` / ``starts-with`` / ``not`` / ``position`` / ``last`` /
``count`` / ``string`` functions. String-manipulation functions such as
``substring()`` and ``normalize-space()`` are deliberately rejected.

Node-sets keep document order and are duplicate-free. Comparisons follow
XPath 1.0 semantics: a node-set compares existentially against the other
operand via node string-values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Union

from .dom import CommentNode, DocumentTree, ElementNode, Node, TextNode


class XPathSyntaxError(ValueError):
    """The expression is not valid (or not supported) XPath."""


class DocumentNode:
    """Virtual node above the root element; target of ``/`` and root ``..``."""

    __slots__ = ("root",)

    def __init__(self, root: ElementNode) -> None:
        self.root = root

    @property
    def children(self) -> tuple[Node, ...]:
        return (self.root,)

    def __repr__(self) -> str:
        return "<DocumentNode>"


@dataclass(frozen=True)
class AttributeValue:
    """An attribute selected by the ``@`` axis."""

    owner: ElementNode
    name: str
    value: str


XNode = Union[ElementNode, TextNode, DocumentNode, AttributeValue]


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NameTest:
    name: str


@dataclass(frozen=True)
class AnyTest:
    pass


@dataclass(frozen=True)
class TextTest:
    pass


@dataclass(frozen=True)
class NodeTestAny:
    pass


NodeTest = Union[NameTest, AnyTest, TextTest, NodeTestAny]


@dataclass(frozen=True)
class Step:
    axis: str
    test: NodeTest
    predicates: tuple["Expr", ...] = ()


@dataclass(frozen=True)
class Path:
    absolute: bool
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class UnionExpr:
    paths: tuple[Path, ...]


@dataclass(frozen=True)
class Literal:
    value: str


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class BinOp:
    op: str  # '=', '!=', '<', '<=', '>', '>=', 'and', 'or'
    left: "Expr"
    right: "Expr"


Expr = Union[Path, UnionExpr, Literal, Number, FuncCall, BinOp]


FUNCTIONS = {
    "contains": 2,
    "starts-with": 2,
    "not": 1,
    "position": 0,
    "last": 0,
    "count": 1,
    "string": -1,  # 0 or 1 args
    "true": 0,
    "false": 0,
}

# Known XPath functions outside the supported dialect: rejected explicitly
# so callers get invalid_xpath rather than a silent empty selection.
REJECTED_FUNCTIONS = {
    "substring", "substring-before", "substring-after", "normalize-space",
    "translate", "concat", "id", "name", "local-name", "namespace-uri",
    "sum", "floor", "ceiling", "round", "number", "boolean", "lang",
    "string-length",
}

_AXES = {
    "child", "descendant", "descendant-or-self", "parent", "ancestor",
    "ancestor-or-self", "self", "following-sibling", "preceding-sibling",
    "attribute",
}

_REVERSE_AXES = {"parent", "ancestor", "ancestor-or-self", "preceding-sibling"}


# --------------------------------------------------------------------------
# Tokenizer
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<num>\d+(?:\.\d+)?)
      | (?P<str>'[^']*'|"[^"]*")
      | (?P<dotdot>\.\.)
      | (?P<dslash>//)
      | (?P<axis>[a-zA-Z_][\w-]*\s*::)
      | (?P<name>[a-zA-Z_][\w.-]*)
      | (?P<op>!=|<=|>=|[/\[\]@()|=<>,.*])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            if text[pos:].strip() == "":
                break
            raise XPathSyntaxError(f"unexpected character at {pos}: {text[pos:]!r}")
        pos = match.end()
        kind = match.lastgroup
        value = match.group(kind)
        if kind == "axis":
            value = value[:-2].strip()
        elif kind == "str":
            value = value[1:-1]
        tokens.append((kind, value))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Optional[tuple[str, str]]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise XPathSyntaxError(f"unexpected end of expression: {self.text!r}")
        self.pos += 1
        return tok

    def accept(self, kind: str, value: Optional[str] = None) -> Optional[tuple[str, str]]:
        tok = self.peek()
        if tok and tok[0] == kind and (value is None or tok[1] == value):
            self.pos += 1
            return tok
        return None

    def expect(self, kind: str, value: Optional[str] = None) -> tuple[str, str]:
        tok = self.accept(kind, value)
        if tok is None:
            raise XPathSyntaxError(
                f"expected {value or kind} at token {self.pos} in {self.text!r}"
            )
        return tok

    # -- entry point -------------------------------------------------------
    def parse(self) -> UnionExpr:
        paths = [self.parse_path()]
        while self.accept("op", "|"):
            paths.append(self.parse_path())
        if self.peek() is not None:
            raise XPathSyntaxError(f"trailing tokens in {self.text!r}")
        return UnionExpr(tuple(paths))

    # -- location paths ------------------------------------------------------
    def parse_path(self) -> Path:
        steps: list[Step] = []
        absolute = False
        if self.accept("dslash"):
            absolute = True
            steps.append(Step("descendant-or-self", NodeTestAny()))
            steps.append(self.parse_step())
        elif self.accept("op", "/"):
            absolute = True
            if self._at_step_start():
                steps.append(self.parse_step())
            else:
                return Path(True, ())  # bare '/' selects the document
        else:
            steps.append(self.parse_step())
        while True:
            if self.accept("dslash"):
                steps.append(Step("descendant-or-self", NodeTestAny()))
                steps.append(self.parse_step())
            elif self.accept("op", "/"):
                steps.append(self.parse_step())
            else:
                break
        return Path(absolute, tuple(steps))

    def _at_step_start(self) -> bool:
        tok = self.peek()
        if tok is None:
            return False
        kind, value = tok
        if kind in ("name", "axis", "dotdot"):
            return True
        if kind == "op" and value in ("@", ".", "*"):
            return True
        return False

    def parse_step(self) -> Step:
        if self.accept("dotdot"):
            return Step("parent", NodeTestAny())
        if self.accept("op", "."):
            return Step("self", NodeTestAny())
        axis = "child"
        if self.accept("op", "@"):
            axis = "attribute"
        else:
            tok = self.peek()
            if tok and tok[0] == "axis":
                axis = self.next()[1]
                if axis not in _AXES:
                    raise XPathSyntaxError(f"unsupported axis {axis!r}")
        test = self.parse_node_test()
        predicates: list[Expr] = []
        while self.accept("op", "["):
            predicates.append(self.parse_or())
            self.expect("op", "]")
        return Step(axis, test, tuple(predicates))

    def parse_node_test(self) -> NodeTest:
        if self.accept("op", "*"):
            return AnyTest()
        tok = self.expect("name")
        name = tok[1]
        if self.accept("op", "("):
            self.expect("op", ")")
            if name == "text":
                return TextTest()
            if name == "node":
                return NodeTestAny()
            raise XPathSyntaxError(f"unsupported node test {name}()")
        return NameTest(name)

    # -- predicate expressions ----------------------------------------------
    def parse_or(self) -> Expr:
        # After a complete operand, a bare 'and'/'or' name is the operator
        # (matching the standard grammar's OperatorName rule).
        left = self.parse_and()
        while True:
            tok = self.peek()
            if tok and tok[0] == "name" and tok[1] == "or":
                self.next()
                left = BinOp("or", left, self.parse_and())
            else:
                return left

    def parse_and(self) -> Expr:
        left = self.parse_comparison()
        while True:
            tok = self.peek()
            if tok and tok[0] == "name" and tok[1] == "and":
                self.next()
                left = BinOp("and", left, self.parse_comparison())
            else:
                return left

    def parse_comparison(self) -> Expr:
        left = self.parse_primary()
        tok = self.peek()
        if tok and tok[0] == "op" and tok[1] in ("=", "!=", "<", "<=", ">", ">="):
            op = self.next()[1]
            right = self.parse_primary()
            return BinOp(op, left, right)
        return left

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise XPathSyntaxError(f"unexpected end of predicate in {self.text!r}")
        kind, value = tok
        if kind == "str":
            self.next()
            return Literal(value)
        if kind == "num":
            self.next()
            return Number(float(value))
        if kind == "op" and value == "(":
            self.next()
            inner = self.parse_or()
            self.expect("op", ")")
            return inner
        if kind == "name":
            nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
            if nxt and nxt[0] == "op" and nxt[1] == "(" and value not in ("text", "node"):
                return self.parse_function()
        # Anything else starting a step is a relative (or absolute) path.
        if kind in ("name", "axis", "dotdot", "dslash") or (
            kind == "op" and value in ("@", ".", "*", "/")
        ):
            return self.parse_path()
        raise XPathSyntaxError(f"unexpected token {value!r} in {self.text!r}")

    def parse_function(self) -> Expr:
        name = self.next()[1]
        if name in REJECTED_FUNCTIONS:
            raise XPathSyntaxError(f"function {name}() is outside the supported dialect")
        if name not in FUNCTIONS:
            raise XPathSyntaxError(f"unknown function {name}()")
        self.expect("op", "(")
        args: list[Expr] = []
        if not self.accept("op", ")"):
            args.append(self.parse_or())
            while self.accept("op", ","):
                args.append(self.parse_or())
            self.expect("op", ")")
        arity = FUNCTIONS[name]
        if arity >= 0 and len(args) != arity:
            raise XPathSyntaxError(f"{name}() takes {arity} argument(s), got {len(args)}")
        if arity == -1 and len(args) > 1:
            raise XPathSyntaxError(f"{name}() takes at most one argument")
        return FuncCall(name, tuple(args))


@lru_cache(maxsize=1024)
def parse_xpath(expression: str) -> UnionExpr:
    """Parse an expression to its AST; raises :class:`XPathSyntaxError`."""
    if not expression or not expression.strip():
        raise XPathSyntaxError("empty expression")
    return _Parser(expression).parse()


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _order_key(node: XNode) -> tuple:
    if isinstance(node, DocumentNode):
        return (-1, 0, "")
    if isinstance(node, AttributeValue):
        return (node.owner.order, 1, node.name)
    return (node.order, 0, "")


def string_value(node: XNode) -> str:
    if isinstance(node, TextNode):
        return node.text
    if isinstance(node, AttributeValue):
        return node.value
    if isinstance(node, DocumentNode):
        return node.root.text_content()
    return node.text_content()


def _to_string(value) -> str:
    if isinstance(value, list):
        return string_value(value[0]) if value else ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value == int(value):
            return str(int(value))
        return repr(value)
    return value


def _to_bool(value) -> bool:
    if isinstance(value, list):
        return bool(value)
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return value != 0
    return bool(value)


def _to_number(value) -> float:
    try:
        return float(_to_string(value) if isinstance(value, (list, bool)) else value)
    except (TypeError, ValueError):
        return float("nan")


class _Context:
    __slots__ = ("node", "position", "size", "document")

    def __init__(self, node: XNode, position: int, size: int, document: DocumentNode) -> None:
        self.node = node
        self.position = position
        self.size = size
        self.document = document


def _parent_of(node: XNode, document: DocumentNode) -> Optional[XNode]:
    if isinstance(node, DocumentNode):
        return None
    if isinstance(node, AttributeValue):
        return node.owner
    if node.parent is None:
        return document if node is document.root else None
    return node.parent


def _children_of(node: XNode) -> tuple[Node, ...]:
    if isinstance(node, DocumentNode):
        return node.children
    if isinstance(node, ElementNode):
        return node.children
    return ()


def _descendants(node: XNode) -> Iterator[Node]:
    stack = list(reversed(_children_of(node)))
    while stack:
        item = stack.pop()
        yield item
        if isinstance(item, ElementNode):
            stack.extend(reversed(item.children))


def _axis_candidates(node: XNode, axis: str, document: DocumentNode) -> list[XNode]:
    if axis == "child":
        return list(_children_of(node))
    if axis == "descendant":
        return list(_descendants(node))
    if axis == "descendant-or-self":
        return [node, *(_descendants(node))]
    if axis == "self":
        return [node]
    if axis == "parent":
        parent = _parent_of(node, document)
        return [parent] if parent is not None else []
    if axis in ("ancestor", "ancestor-or-self"):
        out: list[XNode] = [node] if axis == "ancestor-or-self" else []
        cur = _parent_of(node, document)
        while cur is not None:
            out.append(cur)
            cur = _parent_of(cur, document)
        return out  # nearest first: reverse axis order
    if axis in ("following-sibling", "preceding-sibling"):
        parent = _parent_of(node, document)
        if parent is None or isinstance(node, AttributeValue):
            return []
        siblings = list(_children_of(parent))
        try:
            idx = siblings.index(node)
        except ValueError:
            return []
        if axis == "following-sibling":
            return list(siblings[idx + 1:])
        return list(reversed(siblings[:idx]))  # nearest first
    if axis == "attribute":
        if isinstance(node, ElementNode):
            return [AttributeValue(node, k, v) for k, v in node.attrs]
        return []
    raise XPathSyntaxError(f"unsupported axis {axis!r}")


def _test_matches(test: NodeTest, node: XNode, axis: str) -> bool:
    if isinstance(node, CommentNode):
        return False
    if axis == "attribute":
        if not isinstance(node, AttributeValue):
            return False
        if isinstance(test, NameTest):
            return node.name == test.name.lower()
        return isinstance(test, (AnyTest, NodeTestAny))
    if isinstance(test, NameTest):
        return isinstance(node, ElementNode) and node.tag == test.name.lower()
    if isinstance(test, AnyTest):
        return isinstance(node, ElementNode)
    if isinstance(test, TextTest):
        return isinstance(node, TextNode)
    return not isinstance(node, AttributeValue)  # node(): any tree node


def _evaluate_step(
    nodes: list[XNode], step: Step, document: DocumentNode
) -> list[XNode]:
    gathered: list[XNode] = []
    seen: set[int] = set()
    for node in nodes:
        candidates = [
            c for c in _axis_candidates(node, step.axis, document)
            if _test_matches(step.test, c, step.axis)
        ]
        for predicate in step.predicates:
            size = len(candidates)
            kept = []
            for position, candidate in enumerate(candidates, start=1):
                ctx = _Context(candidate, position, size, document)
                if _predicate_holds(predicate, ctx):
                    kept.append(candidate)
            candidates = kept
        for candidate in candidates:
            key = id(candidate) if not isinstance(candidate, AttributeValue) else (
                id(candidate.owner), candidate.name
            )
            if key not in seen:
                seen.add(key)
                gathered.append(candidate)
    gathered.sort(key=_order_key)
    return gathered


def _predicate_holds(expr: Expr, ctx: _Context) -> bool:
    value = _evaluate_expr(expr, ctx)
    if isinstance(value, float):
        return ctx.position == value
    return _to_bool(value)


def _evaluate_expr(expr: Expr, ctx: _Context):
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Number):
        return expr.value
    if isinstance(expr, (Path, UnionExpr)):
        return _evaluate_paths(expr, ctx)
    if isinstance(expr, FuncCall):
        return _evaluate_function(expr, ctx)
    if isinstance(expr, BinOp):
        if expr.op == "and":
            return _to_bool(_evaluate_expr(expr.left, ctx)) and _to_bool(
                _evaluate_expr(expr.right, ctx)
            )
        if expr.op == "or":
            return _to_bool(_evaluate_expr(expr.left, ctx)) or _to_bool(
                _evaluate_expr(expr.right, ctx)
            )
        return _compare(expr.op, _evaluate_expr(expr.left, ctx), _evaluate_expr(expr.right, ctx))
    raise XPathSyntaxError(f"cannot evaluate expression {expr!r}")


def _compare(op: str, left, right) -> bool:
    if isinstance(left, list) or isinstance(right, list):
        if isinstance(left, list) and isinstance(right, list):
            lvals = [string_value(n) for n in left]
            rvals = [string_value(n) for n in right]
            pairs = ((a, b) for a in lvals for b in rvals)
        elif isinstance(left, list):
            pairs = ((string_value(n), right) for n in left)
        else:
            pairs = ((left, string_value(n)) for n in right)
        return any(_compare_scalars(op, a, b) for a, b in pairs)
    return _compare_scalars(op, left, right)


def _compare_scalars(op: str, left, right) -> bool:
    if op in ("=", "!="):
        if isinstance(left, bool) or isinstance(right, bool):
            result = _to_bool(left) == _to_bool(right)
        elif isinstance(left, float) or isinstance(right, float):
            result = _to_number(left) == _to_number(right)
        else:
            result = _to_string(left) == _to_string(right)
        return result if op == "=" else not result
    a, b = _to_number(left), _to_number(right)
    if a != a or b != b:  # NaN never compares
        return False
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]


def _evaluate_function(expr: FuncCall, ctx: _Context):
    name, args = expr.name, expr.args
    if name == "contains":
        needle = _to_string(_evaluate_expr(args[1], ctx))
        return needle in _to_string(_evaluate_expr(args[0], ctx))
    if name == "starts-with":
        return _to_string(_evaluate_expr(args[0], ctx)).startswith(
            _to_string(_evaluate_expr(args[1], ctx))
        )
    if name == "not":
        return not _to_bool(_evaluate_expr(args[0], ctx))
    if name == "position":
        return float(ctx.position)
    if name == "last":
        return float(ctx.size)
    if name == "count":
        value = _evaluate_expr(args[0], ctx)
        if not isinstance(value, list):
            raise XPathSyntaxError("count() requires a node-set argument")
        return float(len(value))
    if name == "string":
        if not args:
            return string_value(ctx.node)
        return _to_string(_evaluate_expr(args[0], ctx))
    if name == "true":
        return True
    if name == "false":
        return False
    raise XPathSyntaxError(f"unknown function {name}()")


def _evaluate_paths(expr: Union[Path, UnionExpr], ctx: _Context) -> list[XNode]:
    paths = expr.paths if isinstance(expr, UnionExpr) else (expr,)
    merged: list[XNode] = []
    seen: set = set()
    for path in paths:
        start: XNode = ctx.document if path.absolute else ctx.node
        nodes: list[XNode] = [start]
        for step in path.steps:
            nodes = _evaluate_step(nodes, step, ctx.document)
            if not nodes:
                break
        for node in nodes:
            key = id(node) if not isinstance(node, AttributeValue) else (
                id(node.owner), node.name
            )
            if key not in seen:
                seen.add(key)
                merged.append(node)
    merged.sort(key=_order_key)
    return merged


def evaluate(tree: DocumentTree, expression: str) -> list[XNode]:
    """Evaluate ``expression`` against ``tree`` from the document node.

    Returns the selected nodes in document order without duplicates.
    Raises :class:`XPathSyntaxError` for expressions outside the dialect.
    """
    ast = parse_xpath(expression)
    document = DocumentNode(tree.root)
    ctx = _Context(document, 1, 1, document)
    return _evaluate_paths(ast, ctx)


def iter_predicates(expression: str) -> Iterator[Expr]:
    """Yield every predicate expression in the parsed location paths."""
    ast = parse_xpath(expression)

    def walk_expr(expr: Expr) -> Iterator[Expr]:
        if isinstance(expr, (Path, UnionExpr)):
            paths = expr.paths if isinstance(expr, UnionExpr) else (expr,)
            for path in paths:
                for step in path.steps:
                    for predicate in step.predicates:
                        yield predicate
                        yield from walk_expr(predicate)
        elif isinstance(expr, BinOp):
            yield from walk_expr(expr.left)
            yield from walk_expr(expr.right)
        elif isinstance(expr, FuncCall):
            for arg in expr.args:
                yield from walk_expr(arg)

    yield from walk_expr(ast)
