"""Run XPath action sequences against document trees.

An action sequence is an ordered list of XPath expressions: every step but
the last prunes the tree down to the first matched element, and the final
step extracts text values from whatever remains. Extracted values are
normalized (whitespace collapsed, empties dropped) so that downstream
comparisons tolerate markup padding.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from . import xpath as xp
from .dom import DocumentTree, ElementNode


class ExecutionError(Exception):
    """Base class for sequence execution failures."""


class InvalidXPathError(ExecutionError):
    """Expression failed to parse or is outside the supported dialect."""


class NoMatchError(ExecutionError):
    """Selection was empty."""


class NotAnElementError(ExecutionError):
    """First match is a text or attribute node, so it cannot root a subtree."""


class ExtractionStatus(str, Enum):
    OK = "ok"
    NO_MATCH = "no_match"
    INVALID_XPATH = "invalid_xpath"


@dataclass(frozen=True)
class ExtractionResult:
    """Values pulled out of a page plus how the attempt ended.

    ``failed_step`` is the index of the offending step when a sequence run
    fails; single-expression evaluations leave it unset.
    """

    values: tuple[str, ...]
    status: ExtractionStatus
    failed_step: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.status is ExtractionStatus.OK

    def to_record(self) -> dict:
        record: dict = {"values": list(self.values), "status": self.status.value}
        if self.failed_step is not None:
            record["failed_step"] = self.failed_step
        return record

    @classmethod
    def from_record(cls, record: dict) -> "ExtractionResult":
        return cls(
            values=tuple(record["values"]),
            status=ExtractionStatus(record["status"]),
            failed_step=record.get("failed_step"),
        )


@dataclass(frozen=True)
class Provenance:
    seed_page: str
    strategy: str


@dataclass(frozen=True)
class ActionSequence:
    """Ordered XPath steps; prefix prunes, final step extracts.

    The empty sequence is reserved for "attribute absent": executing it
    extracts nothing, on purpose.
    """

    steps: tuple[str, ...]
    provenance: Provenance

    @property
    def pruning_steps(self) -> tuple[str, ...]:
        return self.steps[:-1]

    @property
    def extraction_step(self) -> Optional[str]:
        return self.steps[-1] if self.steps else None

    def __len__(self) -> int:
        return len(self.steps)

    def to_record(self) -> dict:
        return {
            "steps": list(self.steps),
            "provenance": {
                "seed_page": self.provenance.seed_page,
                "strategy": self.provenance.strategy,
            },
        }

    @classmethod
    def from_record(cls, record: dict) -> "ActionSequence":
        prov = record["provenance"]
        return cls(
            steps=tuple(record["steps"]),
            provenance=Provenance(prov["seed_page"], prov["strategy"]),
        )


def normalize_value(value: str) -> str:
    """Collapse whitespace runs and strip the ends."""
    return " ".join(value.split())


def normalize_values(values: Iterable[str]) -> tuple[str, ...]:
    """Normalize each value and drop the ones that come out empty."""
    out = []
    for value in values:
        norm = normalize_value(value)
        if norm:
            out.append(norm)
    return tuple(out)


def eval_text(tree: DocumentTree, expression: str) -> ExtractionResult:
    """Extract normalized text for every node the expression selects."""
    try:
        matches = xp.evaluate(tree, expression)
    except xp.XPathSyntaxError:
        return ExtractionResult((), ExtractionStatus.INVALID_XPATH)
    if not matches:
        return ExtractionResult((), ExtractionStatus.NO_MATCH)
    values = normalize_values(xp.string_value(node) for node in matches)
    return ExtractionResult(values, ExtractionStatus.OK)


@dataclass(frozen=True)
class PruneOutcome:
    tree: DocumentTree
    node: ElementNode
    root_reached: bool


def prune(tree: DocumentTree, expression: str) -> PruneOutcome:
    """Select the first matched element and return its subtree.

    Matching the document node (the target of ``/..`` applied at the root)
    is a no-op that returns the tree unchanged with ``root_reached`` set,
    so that step-back loops have a floor.
    """
    try:
        matches = xp.evaluate(tree, expression)
    except xp.XPathSyntaxError as exc:
        raise InvalidXPathError(str(exc)) from exc
    if not matches:
        raise NoMatchError(expression)
    first = matches[0]
    if isinstance(first, xp.DocumentNode):
        return PruneOutcome(tree, tree.root, root_reached=True)
    if not isinstance(first, ElementNode):
        raise NotAnElementError(expression)
    return PruneOutcome(
        tree.subtree(first), first, root_reached=first is tree.root
    )


def eval_node(tree: DocumentTree, expression: str) -> DocumentTree:
    """Subtree rooted at the first matched element, as a fresh tree."""
    return prune(tree, expression).tree


def run_sequence(page: DocumentTree, sequence: ActionSequence) -> ExtractionResult:
    """Fold the pruning steps over the page, then extract with the last step."""
    if not sequence.steps:
        raise ValueError("cannot run an empty action sequence")
    tree = page
    for index, step in enumerate(sequence.pruning_steps):
        try:
            tree = eval_node(tree, step)
        except InvalidXPathError:
            return ExtractionResult((), ExtractionStatus.INVALID_XPATH, failed_step=index)
        except (NoMatchError, NotAnElementError):
            return ExtractionResult((), ExtractionStatus.NO_MATCH, failed_step=index)
    result = eval_text(tree, sequence.steps[-1])
    if not result.ok:
        return ExtractionResult((), result.status, failed_step=len(sequence.steps) - 1)
    return result


def extract(page: DocumentTree, sequence: ActionSequence) -> ExtractionResult:
    """Like :func:`run_sequence` but the empty sequence predicts absence."""
    if not sequence.steps:
        return ExtractionResult((), ExtractionStatus.OK)
    return run_sequence(page, sequence)


# --------------------------------------------------------------------------
# Predicate classification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FragilityConfig:
    """A text literal is fragile when it looks page-specific: a long digit
    run (phone numbers, ids) or an unusually long string."""

    min_digit_run: int = 4
    max_literal_len: int = 20

    def is_fragile(self, literal: str) -> bool:
        if len(literal) > self.max_literal_len:
            return True
        return bool(re.search(r"\d{%d,}" % self.min_digit_run, literal))


DEFAULT_FRAGILITY = FragilityConfig()


@dataclass(frozen=True)
class FragileLiteral:
    kind: str  # 'contains' or 'equal'
    literal: str


@dataclass(frozen=True)
class PredicateReport:
    contains_count: int
    equal_count: int
    fragile_literals: tuple[FragileLiteral, ...]

    @property
    def fragile(self) -> bool:
        return bool(self.fragile_literals)

    def merged(self, other: "PredicateReport") -> "PredicateReport":
        return PredicateReport(
            self.contains_count + other.contains_count,
            self.equal_count + other.equal_count,
            self.fragile_literals + other.fragile_literals,
        )


def _is_attribute_operand(expr) -> bool:
    if isinstance(expr, xp.Path):
        return any(step.axis == "attribute" for step in expr.steps)
    if isinstance(expr, xp.UnionExpr):
        return any(_is_attribute_operand(p) for p in expr.paths)
    return False


def classify_predicates(
    expression: str, fragility: FragilityConfig = DEFAULT_FRAGILITY
) -> PredicateReport:
    """Count ``contains`` and ``=`` predicates and flag fragile text literals.

    Literals compared against attribute values (``@class`` and friends) are
    never flagged: attributes are the stable handle on template pages, while
    literals matched against text content travel badly between pages.
    """
    try:
        predicates = list(xp.iter_predicates(expression))
    except xp.XPathSyntaxError as exc:
        raise InvalidXPathError(str(exc)) from exc

    contains_count = 0
    equal_count = 0
    fragile: list[FragileLiteral] = []
    seen: set[int] = set()

    def visit(expr) -> None:
        if id(expr) in seen:
            return
        seen.add(id(expr))
        nonlocal contains_count, equal_count
        if isinstance(expr, xp.FuncCall):
            if expr.name == "contains":
                contains_count += 1
                target, literal = expr.args
                if isinstance(literal, xp.Literal) and not _is_attribute_operand(target):
                    if fragility.is_fragile(literal.value):
                        fragile.append(FragileLiteral("contains", literal.value))
            for arg in expr.args:
                visit(arg)
        elif isinstance(expr, xp.BinOp):
            if expr.op == "=":
                equal_count += 1
                for literal, other in (
                    (expr.left, expr.right),
                    (expr.right, expr.left),
                ):
                    if isinstance(literal, xp.Literal) and not _is_attribute_operand(other):
                        if fragility.is_fragile(literal.value):
                            fragile.append(FragileLiteral("equal", literal.value))
                        break
            visit(expr.left)
            visit(expr.right)

    for predicate in predicates:
        visit(predicate)
    return PredicateReport(contains_count, equal_count, tuple(fragile))


def classify_sequence(
    sequence: ActionSequence, fragility: FragilityConfig = DEFAULT_FRAGILITY
) -> PredicateReport:
    """Merged predicate report over every step of a sequence."""
    report = PredicateReport(0, 0, ())
    for step in sequence.steps:
        try:
            report = report.merged(classify_predicates(step, fragility))
        except InvalidXPathError:
            continue
    return report
