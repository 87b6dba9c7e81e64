"""Immutable HTML document trees: tolerant parsing, cleanup, size metrics.

Pages arrive as messy real-world HTML, so parsing is forgiving: unclosed
tags, stray end tags and character references are all absorbed. The result
is an immutable tree that downstream stages can share freely across
threads. Cleanup strips ``script``/``style`` subtrees, comments, and every
attribute except ``class``. Size metrics (token count, tree height) are
taken over a canonical serialization in which each tag is padded into its
own whitespace-delimited token, which keeps both measures monotone under
pruning.
"""

from __future__ import annotations

import html as _htmllib
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Iterator, Optional, Union


class DomError(Exception):
    """Base class for document tree failures."""


class EmptyInput(DomError):
    """Parse input was blank."""


class ParseFailure(DomError):
    """Parse input contained no recoverable element content."""


#: Tags that never take a closing tag in HTML.
VOID_TAGS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
})

#: Subtrees removed wholesale during preprocessing.
STRIP_TAGS = frozenset({"script", "style"})

#: The single attribute preserved by preprocessing.
KEEP_ATTR = "class"


class TextNode:
    """A run of character data inside an element."""

    __slots__ = ("text", "parent", "order")

    def __init__(self, text: str) -> None:
        self.text = text
        self.parent: Optional["ElementNode"] = None
        self.order = -1

    def __repr__(self) -> str:
        return f"TextNode({self.text!r})"


class CommentNode:
    """An HTML comment; survives parsing, dropped by preprocessing."""

    __slots__ = ("text", "parent", "order")

    def __init__(self, text: str) -> None:
        self.text = text
        self.parent: Optional["ElementNode"] = None
        self.order = -1

    def __repr__(self) -> str:
        return f"CommentNode({self.text!r})"


class ElementNode:
    """An element with ordered children and an attribute list.

    Nodes are frozen once their :class:`DocumentTree` is built; pruning or
    preprocessing always produces fresh nodes.
    """

    __slots__ = ("tag", "attrs", "children", "parent", "order")

    def __init__(
        self,
        tag: str,
        attrs: tuple[tuple[str, str], ...] = (),
        children: tuple["Node", ...] = (),
    ) -> None:
        self.tag = tag
        self.attrs = tuple(attrs)
        self.children = tuple(children)
        self.parent: Optional["ElementNode"] = None
        self.order = -1

    def get(self, name: str) -> Optional[str]:
        for key, value in self.attrs:
            if key == name:
                return value
        return None

    @property
    def class_attr(self) -> Optional[str]:
        return self.get(KEEP_ATTR)

    @property
    def element_children(self) -> tuple["ElementNode", ...]:
        return tuple(c for c in self.children if isinstance(c, ElementNode))

    def text_content(self) -> str:
        """Concatenated character data of the whole subtree, in order."""
        parts: list[str] = []
        for node in self.iter_nodes():
            if isinstance(node, TextNode):
                parts.append(node.text)
        return "".join(parts)

    def iter_nodes(self) -> Iterator["Node"]:
        """Pre-order walk over this node and all descendants."""
        stack: list[Node] = [self]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, ElementNode):
                stack.extend(reversed(node.children))

    def iter_elements(self) -> Iterator["ElementNode"]:
        for node in self.iter_nodes():
            if isinstance(node, ElementNode):
                yield node

    def depth(self) -> int:
        """Number of ancestor elements above this node."""
        d = 0
        node = self.parent
        while node is not None:
            d += 1
            node = node.parent
        return d

    def __repr__(self) -> str:
        cls = f" class={self.class_attr!r}" if self.class_attr else ""
        return f"<ElementNode {self.tag}{cls} children={len(self.children)}>"


Node = Union[ElementNode, TextNode, CommentNode]


@dataclass(frozen=True)
class TreeMetrics:
    """Size of a tree: whitespace tokens of its canonical serialization and
    element-only height (root alone counts as height 1)."""

    token_count: int
    height: int


class DocumentTree:
    """A parsed page: one root element plus an opaque source identifier."""

    __slots__ = ("root", "source_id")

    def __init__(self, root: ElementNode, source_id: str) -> None:
        self.root = root
        self.source_id = source_id

    @classmethod
    def from_root(cls, root: ElementNode, source_id: str) -> "DocumentTree":
        _freeze(root)
        return cls(root, source_id)

    def to_html(self) -> str:
        parts: list[str] = []
        _serialize(self.root, parts)
        return "".join(parts)

    def text_content(self) -> str:
        return self.root.text_content()

    def iter_nodes(self) -> Iterator[Node]:
        return self.root.iter_nodes()

    def iter_elements(self) -> Iterator[ElementNode]:
        return self.root.iter_elements()

    def subtree(self, element: ElementNode) -> "DocumentTree":
        """Fresh tree rooted at a copy of ``element``; never aliases nodes."""
        return DocumentTree.from_root(_copy_node(element), self.source_id)

    def structurally_equal(self, other: "DocumentTree") -> bool:
        return _nodes_equal(self.root, other.root)

    def __repr__(self) -> str:
        return f"<DocumentTree {self.source_id!r} root={self.root.tag!r}>"


def _freeze(root: ElementNode) -> None:
    order = 0
    stack: list[Node] = [root]
    root.parent = None
    while stack:
        node = stack.pop()
        node.order = order
        order += 1
        if isinstance(node, ElementNode):
            for child in node.children:
                child.parent = node
            stack.extend(reversed(node.children))


def _copy_node(node: Node) -> Node:
    if isinstance(node, TextNode):
        return TextNode(node.text)
    if isinstance(node, CommentNode):
        return CommentNode(node.text)
    return ElementNode(node.tag, node.attrs, tuple(_copy_node(c) for c in node.children))


def _nodes_equal(a: Node, b: Node) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, (TextNode, CommentNode)):
        return a.text == b.text  # type: ignore[union-attr]
    assert isinstance(a, ElementNode) and isinstance(b, ElementNode)
    if a.tag != b.tag or a.attrs != b.attrs or len(a.children) != len(b.children):
        return False
    return all(_nodes_equal(x, y) for x, y in zip(a.children, b.children))


def _escape_text(text: str) -> str:
    return _htmllib.escape(text, quote=False)


def _escape_attr(value: str) -> str:
    return _htmllib.escape(value, quote=True)


def _open_tag(el: ElementNode) -> str:
    attrs = "".join(f' {k}="{_escape_attr(v)}"' for k, v in el.attrs)
    return f"<{el.tag}{attrs}>"


def _serialize(node: Node, parts: list[str]) -> None:
    if isinstance(node, TextNode):
        parts.append(_escape_text(node.text))
        return
    if isinstance(node, CommentNode):
        parts.append(f"<!--{node.text}-->")
        return
    parts.append(_open_tag(node))
    for child in node.children:
        _serialize(child, parts)
    if node.children or node.tag not in VOID_TAGS:
        parts.append(f"</{node.tag}>")


def _canonical_parts(node: Node, parts: list[str]) -> None:
    # Same shape as _serialize but each tag stays its own part, so token
    # counting can treat tags as whitespace-separated units.
    if isinstance(node, TextNode):
        parts.append(_escape_text(node.text))
        return
    if isinstance(node, CommentNode):
        parts.append(f"<!--{node.text}-->")
        return
    parts.append(_open_tag(node))
    for child in node.children:
        _canonical_parts(child, parts)
    if node.children or node.tag not in VOID_TAGS:
        parts.append(f"</{node.tag}>")


def canonical_serialization(tree: DocumentTree) -> str:
    """Serialization with every tag padded into its own token."""
    parts: list[str] = []
    _canonical_parts(tree.root, parts)
    return " ".join(parts)


def _height(el: ElementNode) -> int:
    best = 0
    for child in el.element_children:
        best = max(best, _height(child))
    return best + 1


def measure(tree: DocumentTree) -> TreeMetrics:
    """Token count over the canonical serialization plus element height."""
    parts: list[str] = []
    _canonical_parts(tree.root, parts)
    tokens = sum(len(part.split()) for part in parts)
    return TreeMetrics(token_count=tokens, height=_height(tree.root))


def normalize_escapes(value: str) -> str:
    """Resolve character references to literal characters.

    Applied to annotation values so they compare equal to page text, which
    the parser already unescapes.
    """
    return _htmllib.unescape(value)


class _TreeBuilder(HTMLParser):
    """Tolerant tree builder: auto-closes at EOF, absorbs stray end tags,
    closes mis-nested elements up to the nearest matching open tag."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        # Sentinel frame collects finished top-level nodes.
        self._stack: list[list] = [["", (), []]]

    def handle_starttag(self, tag: str, attrs) -> None:
        tag = tag.lower()
        pairs = tuple((k.lower(), v if v is not None else "") for k, v in attrs)
        if tag in VOID_TAGS:
            self._stack[-1][2].append(ElementNode(tag, pairs))
        else:
            self._stack.append([tag, pairs, []])

    def handle_startendtag(self, tag: str, attrs) -> None:
        tag = tag.lower()
        pairs = tuple((k.lower(), v if v is not None else "") for k, v in attrs)
        self._stack[-1][2].append(ElementNode(tag, pairs))

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        if tag in VOID_TAGS:
            return
        for i in range(len(self._stack) - 1, 0, -1):
            if self._stack[i][0] == tag:
                while len(self._stack) > i:
                    self._close_top()
                return
        # No matching open tag: stray end tag, ignore.

    def handle_data(self, data: str) -> None:
        if data:
            self._stack[-1][2].append(TextNode(data))

    def handle_comment(self, data: str) -> None:
        self._stack[-1][2].append(CommentNode(data))

    def handle_decl(self, decl: str) -> None:
        pass  # doctype carries no extraction semantics

    def unknown_decl(self, data: str) -> None:
        pass

    def handle_pi(self, data: str) -> None:
        pass

    def _close_top(self) -> None:
        tag, attrs, children = self._stack.pop()
        self._stack[-1][2].append(ElementNode(tag, attrs, tuple(children)))

    def finish(self) -> list[Node]:
        while len(self._stack) > 1:
            self._close_top()
        return list(self._stack[0][2])


def parse_html(raw: str, source_id: str = "") -> DocumentTree:
    """Parse possibly-malformed HTML into a :class:`DocumentTree`.

    Raises :class:`EmptyInput` for blank input and :class:`ParseFailure`
    when no element content can be recovered at all. A document with a
    single top-level element is rooted there; fragments with several
    top-level nodes are wrapped in a synthetic ``html`` element.
    """
    if not raw or not raw.strip():
        raise EmptyInput("blank HTML input")
    builder = _TreeBuilder()
    builder.feed(raw)
    builder.close()
    top = builder.finish()
    elements = [n for n in top if isinstance(n, ElementNode)]
    if not elements:
        raise ParseFailure("no element content found")
    loose_text = any(
        isinstance(n, TextNode) and n.text.strip() for n in top
    )
    if len(elements) == 1 and not loose_text:
        root = elements[0]
    else:
        root = ElementNode("html", (), tuple(top))
    return DocumentTree.from_root(root, source_id)


def preprocess(tree: DocumentTree) -> DocumentTree:
    """Drop script/style subtrees and comments, keep only ``class`` attrs.

    Idempotent, never grows the tree; text is untouched (the parser has
    already resolved character references).
    """

    def rebuild(el: ElementNode) -> ElementNode:
        kept: list[Node] = []
        for child in el.children:
            if isinstance(child, CommentNode):
                continue
            if isinstance(child, TextNode):
                kept.append(TextNode(child.text))
                continue
            if child.tag in STRIP_TAGS:
                continue
            kept.append(rebuild(child))
        attrs = tuple((k, v) for k, v in el.attrs if k == KEEP_ATTR)
        return ElementNode(el.tag, attrs, tuple(kept))

    if tree.root.tag in STRIP_TAGS:
        return DocumentTree.from_root(ElementNode("html"), tree.source_id)
    return DocumentTree.from_root(rebuild(tree.root), tree.source_id)
