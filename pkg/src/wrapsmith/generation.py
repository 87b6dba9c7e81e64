"""Strategies that turn one seed page plus an instruction into a rule.

Three strategies share a signature and a trace format:

* ``progressive`` - the top-down/step-back loop. Each iteration asks the
  model for a value and an XPath on the current (possibly pruned) tree and
  checks the XPath's own extraction against the claimed value. On mismatch
  it climbs from the proposed node by appending ``/..`` until the subtree
  demonstrably contains the value, records the climb as a pruning step, and
  continues on the smaller tree.
* ``cot`` - one shot: the first answer's XPath becomes the whole rule.
* ``reflexion`` - retries with an accumulated history of failed attempts,
  but never prunes: every attempt sees the full page.

A blank XPath from the model is the reserved "attribute absent" answer and
yields the empty sequence. Exhausting the iteration budget yields no
sequence and a failure reason; the full trace is kept either way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from . import executor
from .dom import DocumentTree, TreeMetrics, measure
from .executor import (
    ActionSequence,
    ExtractionResult,
    InvalidXPathError,
    NoMatchError,
    NotAnElementError,
    Provenance,
    eval_text,
    prune,
)
from .gateway import JudgeMode, JudgeResult, LlmExchange, LlmGateway, MalformedOutput
from .gateway import judge_consistent, judge_contains


class Strategy(str, Enum):
    PROGRESSIVE = "progressive"
    COT = "cot"
    REFLEXION = "reflexion"


@dataclass
class StrategyConfig:
    strategy: Strategy = Strategy.PROGRESSIVE
    d_max: int = 5
    judge_mode: JudgeMode = JudgeMode.DETERMINISTIC
    strict_equality: bool = False

    def __post_init__(self) -> None:
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")


@dataclass(frozen=True)
class StepRecord:
    """One iteration of a strategy: what the model proposed, what the parser
    saw, and what the loop decided (accept / stepback(n) / retry / give_up)."""

    iteration: int
    metrics_before: TreeMetrics
    exchanges: tuple[LlmExchange, ...]
    proposed_value: tuple[str, ...]
    proposed_xpath: str
    parser_result: Optional[ExtractionResult]
    decision: str

    def to_record(self) -> dict:
        return {
            "iteration": self.iteration,
            "metrics_before": {
                "token_count": self.metrics_before.token_count,
                "height": self.metrics_before.height,
            },
            "exchanges": [e.to_record() for e in self.exchanges],
            "proposed_value": list(self.proposed_value),
            "proposed_xpath": self.proposed_xpath,
            "parser_result": self.parser_result.to_record() if self.parser_result else None,
            "decision": self.decision,
        }

    @classmethod
    def from_record(cls, record: dict) -> "StepRecord":
        metrics = record["metrics_before"]
        return cls(
            iteration=record["iteration"],
            metrics_before=TreeMetrics(metrics["token_count"], metrics["height"]),
            exchanges=tuple(LlmExchange.from_record(e) for e in record["exchanges"]),
            proposed_value=tuple(record["proposed_value"]),
            proposed_xpath=record["proposed_xpath"],
            parser_result=(
                ExtractionResult.from_record(record["parser_result"])
                if record["parser_result"]
                else None
            ),
            decision=record["decision"],
        )


@dataclass
class GenerationTrace:
    page_id: str
    instruction: str
    strategy: str
    steps: tuple[StepRecord, ...] = ()
    sequence: Optional[ActionSequence] = None
    failure_reason: Optional[str] = None
    final_values: tuple[str, ...] = ()
    html_path: str = ""

    @property
    def succeeded(self) -> bool:
        return self.sequence is not None

    def to_record(self) -> dict:
        return {
            "page_id": self.page_id,
            "instruction": self.instruction,
            "strategy": self.strategy,
            "steps": [s.to_record() for s in self.steps],
            "sequence": self.sequence.to_record() if self.sequence else None,
            "failure_reason": self.failure_reason,
            "final_values": list(self.final_values),
            "html_path": self.html_path,
        }

    @classmethod
    def from_record(cls, record: dict) -> "GenerationTrace":
        return cls(
            page_id=record["page_id"],
            instruction=record["instruction"],
            strategy=record["strategy"],
            steps=tuple(StepRecord.from_record(s) for s in record["steps"]),
            sequence=(
                ActionSequence.from_record(record["sequence"])
                if record["sequence"]
                else None
            ),
            failure_reason=record["failure_reason"],
            final_values=tuple(record["final_values"]),
            html_path=record.get("html_path", ""),
        )


def _value_list(raw) -> tuple[str, ...]:
    """Model answers carry the value as a string or a list; accept both."""
    if raw is None:
        return ()
    if isinstance(raw, (list, tuple)):
        return executor.normalize_values(str(v) for v in raw)
    return executor.normalize_values([str(raw)])


def _judge(
    result: ExtractionResult,
    value: tuple[str, ...],
    cfg: StrategyConfig,
    gateway: LlmGateway,
) -> JudgeResult:
    if not result.ok:
        return JudgeResult(False)
    return judge_consistent(
        result.values,
        value,
        mode=cfg.judge_mode,
        gateway=gateway if cfg.judge_mode is JudgeMode.LLM else None,
        strict=cfg.strict_equality,
    )


def generate(
    page: DocumentTree,
    instruction: str,
    gateway: LlmGateway,
    cfg: StrategyConfig,
) -> tuple[Optional[ActionSequence], GenerationTrace]:
    """Dispatch to the configured strategy."""
    if cfg.strategy is Strategy.PROGRESSIVE:
        return generate_progressive(page, instruction, gateway, cfg)
    if cfg.strategy is Strategy.COT:
        return generate_cot(page, instruction, gateway, cfg)
    return generate_reflexion(page, instruction, gateway, cfg)


def generate_progressive(
    page: DocumentTree,
    instruction: str,
    gateway: LlmGateway,
    cfg: StrategyConfig,
) -> tuple[Optional[ActionSequence], GenerationTrace]:
    trace = GenerationTrace(page.source_id, instruction, Strategy.PROGRESSIVE.value)
    provenance = Provenance(page.source_id, Strategy.PROGRESSIVE.value)
    steps: list[StepRecord] = []
    pruning: list[str] = []
    tree = page

    for iteration in range(cfg.d_max):
        metrics = measure(tree)
        try:
            exchange = gateway.complete("crawler", [instruction, tree.to_html()])
        except MalformedOutput as exc:
            trace.steps = tuple(steps)
            trace.failure_reason = f"malformed model output: {exc}"
            return None, trace
        exchanges = [exchange]
        value = _value_list(exchange.parsed.get("value") if exchange.parsed else None)
        proposed = (exchange.parsed_str("xpath") or "").strip()

        if not proposed:
            # Reserved answer: the attribute is absent from this page.
            steps.append(StepRecord(
                iteration, metrics, tuple(exchanges), value, proposed,
                None, "accept",
            ))
            trace.steps = tuple(steps)
            trace.sequence = ActionSequence((), provenance)
            trace.final_values = ()
            return trace.sequence, trace

        result = eval_text(tree, proposed)
        verdict = _judge(result, value, cfg, gateway)
        if verdict.exchange is not None:
            exchanges.append(verdict.exchange)
        if verdict.verdict:
            steps.append(StepRecord(
                iteration, metrics, tuple(exchanges), value, proposed,
                result, "accept",
            ))
            trace.steps = tuple(steps)
            trace.sequence = ActionSequence((*pruning, proposed), provenance)
            trace.final_values = result.values
            return trace.sequence, trace

        # Step-back: climb from the proposed node until the subtree contains
        # the value, then record the climb as a pruning step.
        decision, pruned, climb_exchanges = _step_back(
            tree, proposed, value, instruction, cfg, gateway
        )
        exchanges.extend(climb_exchanges)
        steps.append(StepRecord(
            iteration, metrics, tuple(exchanges), value, proposed,
            result, decision[0],
        ))
        if decision[1] is not None:
            pruning.append(decision[1])
            tree = pruned

    trace.steps = tuple(steps)
    trace.failure_reason = f"no consistent xpath within d_max={cfg.d_max} iterations"
    return None, trace


def _step_back(
    tree: DocumentTree,
    proposed: str,
    value: tuple[str, ...],
    instruction: str,
    cfg: StrategyConfig,
    gateway: LlmGateway,
) -> tuple[tuple[str, Optional[str]], DocumentTree, list[LlmExchange]]:
    """Append ``/..`` to the proposed xpath until containment or the root.

    Returns ``((decision, appended_step_or_None), new_tree, judge_exchanges)``.
    ``appended_step`` is set only when a strictly smaller subtree passed the
    containment check; reaching the root yields ``retry`` (value present
    somewhere, xpath unanchorable) or ``give_up`` (value absent entirely).
    """
    exchanges: list[LlmExchange] = []
    climb_cap = measure(tree).height + 2
    base = proposed
    climbs = 0
    while True:
        base += "/.."
        climbs += 1
        root_reached = False
        outcome = None
        try:
            outcome = prune(tree, base)
            root_reached = outcome.root_reached
        except InvalidXPathError:
            root_reached = True  # unanchorable expression: straight to root
        except (NoMatchError, NotAnElementError):
            if climbs > climb_cap:
                root_reached = True  # nothing anchored after maximal climb
            else:
                continue
        candidate = tree if outcome is None or root_reached else outcome.tree
        contains = judge_contains(
            candidate, value, instruction,
            mode=cfg.judge_mode,
            gateway=gateway if cfg.judge_mode is JudgeMode.LLM else None,
        )
        if contains.exchange is not None:
            exchanges.append(contains.exchange)
        if root_reached or candidate is tree:
            if contains.verdict:
                # The page holds the value but this xpath cannot be anchored
                # to a smaller subtree; retry top-down on the same tree.
                return ("retry", None), tree, exchanges
            return ("give_up", None), tree, exchanges
        if contains.verdict:
            return (f"stepback({climbs})", base), candidate, exchanges
        # Keep climbing; the loop shrinks the remaining depth every pass.


def generate_cot(
    page: DocumentTree,
    instruction: str,
    gateway: LlmGateway,
    cfg: StrategyConfig,
) -> tuple[Optional[ActionSequence], GenerationTrace]:
    trace = GenerationTrace(page.source_id, instruction, Strategy.COT.value)
    provenance = Provenance(page.source_id, Strategy.COT.value)
    metrics = measure(page)
    try:
        exchange = gateway.complete("crawler", [instruction, page.to_html()])
    except MalformedOutput as exc:
        trace.failure_reason = f"malformed model output: {exc}"
        return None, trace
    value = _value_list(exchange.parsed.get("value") if exchange.parsed else None)
    proposed = (exchange.parsed_str("xpath") or "").strip()
    if not proposed:
        trace.steps = (StepRecord(0, metrics, (exchange,), value, proposed, None, "accept"),)
        trace.sequence = ActionSequence((), provenance)
        return trace.sequence, trace
    result = eval_text(page, proposed)
    trace.steps = (StepRecord(0, metrics, (exchange,), value, proposed, result, "accept"),)
    trace.sequence = ActionSequence((proposed,), provenance)
    trace.final_values = result.values
    return trace.sequence, trace


def format_history(history: list[tuple[str, str, tuple[str, ...]]]) -> str:
    """Render prior attempts as numbered thought/xpath/result blocks."""
    blocks = []
    for index, (thought, xpath, values) in enumerate(history, start=1):
        result = json.dumps(list(values), ensure_ascii=False)
        blocks.append(f"{index}. thought: {thought}\n   xpath: {xpath}\n   result: {result}")
    return "\n".join(blocks)


def generate_reflexion(
    page: DocumentTree,
    instruction: str,
    gateway: LlmGateway,
    cfg: StrategyConfig,
) -> tuple[Optional[ActionSequence], GenerationTrace]:
    trace = GenerationTrace(page.source_id, instruction, Strategy.REFLEXION.value)
    provenance = Provenance(page.source_id, Strategy.REFLEXION.value)
    steps: list[StepRecord] = []
    history: list[tuple[str, str, tuple[str, ...]]] = []
    page_html = page.to_html()
    metrics = measure(page)

    for attempt in range(cfg.d_max):
        template = "crawler" if attempt == 0 else "reflexion"
        slots = (
            [instruction, page_html]
            if attempt == 0
            else [instruction, format_history(history), page_html]
        )
        try:
            exchange = gateway.complete(template, slots)
        except MalformedOutput as exc:
            trace.steps = tuple(steps)
            trace.failure_reason = f"malformed model output: {exc}"
            return None, trace
        exchanges = [exchange]
        value = _value_list(exchange.parsed.get("value") if exchange.parsed else None)
        proposed = (exchange.parsed_str("xpath") or "").strip()
        thought = exchange.parsed_str("thought")

        if (
            attempt > 0
            and cfg.judge_mode is JudgeMode.LLM
            and exchange.parsed_str("consistent").strip().lower().startswith("yes")
            and history
        ):
            # The model judged the previous attempt consistent: keep it.
            previous_xpath = history[-1][1]
            result = eval_text(page, previous_xpath)
            steps.append(StepRecord(
                attempt, metrics, tuple(exchanges), value, previous_xpath,
                result, "accept",
            ))
            trace.steps = tuple(steps)
            trace.sequence = ActionSequence((previous_xpath,), provenance)
            trace.final_values = result.values
            return trace.sequence, trace

        if not proposed:
            steps.append(StepRecord(
                attempt, metrics, tuple(exchanges), value, proposed, None, "accept",
            ))
            trace.steps = tuple(steps)
            trace.sequence = ActionSequence((), provenance)
            return trace.sequence, trace

        result = eval_text(page, proposed)
        verdict = _judge(result, value, cfg, gateway)
        if verdict.exchange is not None:
            exchanges.append(verdict.exchange)
        if verdict.verdict:
            steps.append(StepRecord(
                attempt, metrics, tuple(exchanges), value, proposed, result, "accept",
            ))
            trace.steps = tuple(steps)
            trace.sequence = ActionSequence((proposed,), provenance)
            trace.final_values = result.values
            return trace.sequence, trace

        steps.append(StepRecord(
            attempt, metrics, tuple(exchanges), value, proposed, result, "retry",
        ))
        history.append((thought, proposed, result.values))

    trace.steps = tuple(steps)
    trace.failure_reason = f"no consistent xpath within d_max={cfg.d_max} attempts"
    return None, trace
