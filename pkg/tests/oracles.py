"""Independent references used by the tests.

The XPath oracle mirrors a document tree into ``xml.etree.ElementTree``
(wrapped in a synthetic super-root so leading ``//`` behaves like the
document node) and answers the same queries through ``findall``, a code
path entirely separate from the package's evaluator. The fuzz generators
stay inside the subset both engines define identically: well-formed
markup, one leading ``//``, class/child predicates.
"""

from __future__ import annotations

import random
import xml.etree.ElementTree as ET

from wrapsmith.dom import DocumentTree, ElementNode, TextNode

TAGS = ["div", "span", "p", "b", "ul", "li", "a"]
CLASSES = ["a", "b", "c", "item", "x y"]
WORDS = ["alpha", "beta", "gamma", "delta", "42", "x1", "v-2"]


def mirror_etree(
    tree: DocumentTree,
) -> tuple[ET.Element, dict[int, ET.Element], dict[int, int]]:
    """ElementTree copy of the tree under a synthetic ``doc`` root.

    Returns the super-root, a map from package node ids to mirrored
    elements, and a document-order index for the mirrored elements
    (ElementTree node-sets come back grouped by parent, so the reference
    side gets normalized to document order before comparison).
    """
    lookup: dict[int, ET.Element] = {}
    et_order: dict[int, int] = {}

    def build(el: ElementNode) -> ET.Element:
        node = ET.Element(el.tag, dict(el.attrs))
        lookup[id(el)] = node
        et_order[id(node)] = el.order
        last: ET.Element | None = None
        for child in el.children:
            if isinstance(child, TextNode):
                if last is None:
                    node.text = (node.text or "") + child.text
                else:
                    last.tail = (last.tail or "") + child.text
            elif isinstance(child, ElementNode):
                last = build(child)
                node.append(last)
        return node

    doc = ET.Element("doc")
    doc.append(build(tree.root))
    return doc, lookup, et_order


def et_findall(
    doc: ET.Element, xpath: str, et_order: dict[int, int]
) -> list[ET.Element]:
    """Evaluate a leading-``//`` xpath with ElementTree as the reference,
    deduplicated and in document order."""
    assert xpath.startswith("//")
    found = doc.findall("." + xpath)
    unique: dict[int, ET.Element] = {}
    for element in found:
        unique.setdefault(id(element), element)
    return sorted(unique.values(), key=lambda e: et_order[id(e)])


def random_page_html(rng: random.Random, max_depth: int = 4) -> str:
    def element(depth: int) -> str:
        tag = rng.choice(TAGS)
        attr = f' class="{rng.choice(CLASSES)}"' if rng.random() < 0.6 else ""
        width = rng.randint(0, 3) if depth < max_depth else 0
        parts: list[str] = []
        if rng.random() < 0.6:
            parts.append(rng.choice(WORDS))
        for _ in range(width):
            parts.append(element(depth + 1))
            if rng.random() < 0.4:
                parts.append(rng.choice(WORDS))
        return f"<{tag}{attr}>{''.join(parts)}</{tag}>"

    body = "".join(element(2) for _ in range(rng.randint(1, 3)))
    return f"<html><body>{body}</body></html>"


def random_simple_xpath(rng: random.Random) -> str:
    def segment() -> str:
        tag = rng.choice(TAGS)
        roll = rng.random()
        if roll < 0.30:
            return tag
        if roll < 0.45:
            return "*"
        if roll < 0.70:
            return f"{tag}[@class='{rng.choice(CLASSES)}']"
        if roll < 0.85:
            return f"{tag}[@class]"
        return f"{tag}[{rng.choice(TAGS)}]"

    return "//" + "/".join(segment() for _ in range(rng.randint(1, 3)))


def positional_xpath(element: ElementNode) -> str:
    """Absolute xpath that uniquely selects ``element`` via positions."""
    steps: list[str] = []
    node = element
    while node.parent is not None:
        same_tag = [c for c in node.parent.element_children if c.tag == node.tag]
        steps.append(f"{node.tag}[{same_tag.index(node) + 1}]")
        node = node.parent
    steps.append(node.tag)
    return "/" + "/".join(reversed(steps))
