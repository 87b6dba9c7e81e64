"""The five prompt templates the pipeline sends to a language model.

Templates use positional slots ``{0}``, ``{1}``, ``{2}``. Substitution is a
plain placeholder replacement, never ``str.format``, because the bodies
contain literal JSON braces. Every template instructs the model to answer
with a JSON object; the gateway is responsible for digging that object out
of a noisy response.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class ArityMismatch(ValueError):
    """Number of provided slot values does not match the template."""


CRAWLER_TEMPLATE = """\
Please read the following HTML code, and then return an Xpath that can recognize the element in the HTML matching the instruction below.
Instruction: {0}
Here are some hints:
1. Do not output the xpath with exact value or element appears in the HTML.
2. Do not output the xpath that indicate multi node with different value. It would be appreciate to use more @class to identify different node that may share the same xpath expression.
3. If the HTML code doesn't contain the suitable information match the instruction, keep the xpath attrs blank.
4. Avoid using some string function such as 'substring()' and 'normalize-space()' to normalize the text in the node.
Please output in the following Json format:

{
    "thought": "", # a brief thought of how to confirm the value and generate the xpath
    "value": "", # the value extracted from the HTML that match the instruction
    "xpath": "", # the xpath to extract the value
}
Here's the HTML code:
```
{1}
```"""

REFLEXION_TEMPLATE = """\
Here's the HTML extraction task:
Task description: Please read the following HTML code, and then return an Xpath that can recognize the element in the HTML matching the instruction below.
Instruction: {0}
We will offer some history about the thought and the extraction result. Please reflect on the history trajectory and adjust the xpath rule for better and more exact extraction. Here's some hints:
1. Judge whether the results in the history is consistent with the expected value. Please pay attention for the following case:
    1) Whether the extraction result contains some elements that is irrelevent
    2) Whether the crawler return a empty result
    3) The raw values containing redundant separators is considered as consistent because we will postprocess it.
2. Re-thinking the expected value and how to find it depend on xpath code
3. Generate a new or keep the origin xpath depend on the judgement and thinking following the hints:
    1. Do not output the xpath with exact value or element appears in the HTML.
    2. Do not output the xpath that indicate multi node with different value. It would be appreciate to use more @class and [num] to identify different node that may share the same xpath expression.
    3. If the HTML code doesn't contain the suitable information match the instruction, keep the xpath attrs blank.

Please output in the following json format:
{
    "thought": "", # thought of why the xpaths in history are not work and how to adjust the xpath
    "consistent": "", # whether the extracted result is consistent with the expected value, return yes/no directly
    "value": "", # the value extracted from the HTML that match the task description
    "xpath": "", # a new xpath that is different from the xpath in the following history if not consistent
}

And here's the history about the thought, xpath and result extracted by crawler.
{1}

Here's the HTML code:
```
{2}
```"""

SYNTHESIS_TEMPLATE = """\
You're a perfect discriminator which is good at HTML understanding as well. Following the instruction, there are some action sequence written from several HTML and the corresponding result extracted from several HTML. Please choose one that can be best potentially adapted to the same extraction task on other webpage in the same websites. Here are the instruction of the task:
Instructions: {0}
The action sequences and the corresponding extracted results with different sequence on different webpage are as follow:
{1}

Please output the best action sequence in the following Json format:
{
    "thought": "" # brief thinking about which to choose
    "number": "" # the best action sequence choosen from the candidates, starts from 0. If there is none, output 0.
}"""

JUDGEMENT_TEMPLATE = """\
Your main task is to judge whether the extracted value is consistent with the expected value, which is recognized beforehand. Please pay attention for the following case:
    1) If the extracted result contains some elements that is not in expected value, or contains empty value, it is not consistent.
    2) The raw values containing redundant separators is considered as consistent because we can postprocess it.

The extracted value is: {0}
The expected value is: {1}

Please output your judgement in the following Json format:
{
    "thought": "", # a brief thinking about whether the extracted value is consistent with the expected value
    "judgement": "" # return yes/no directly
}"""

STEPBACK_TEMPLATE = """\
Your main task is to judge whether the following HTML code contains all the expected value, which is recognized beforehand.
Instruction: {0}
And here's the value: {1}
The HTML code is as follow:
```
{2}
```

Please output your judgement in the following Json format:
{
    "thought": "", # a brief thinking about whether the HTML code contains expected value
    "judgement": "" # whether the HTML code contains all extracted value. Return yes/no directly.
}"""


_SLOT_RE = re.compile(r"\{(\d)\}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def slot_count(self) -> int:
        slots = {int(m) for m in _SLOT_RE.findall(self.body)}
        return max(slots) + 1 if slots else 0


TEMPLATES: dict[str, PromptTemplate] = {
    "crawler": PromptTemplate("crawler", CRAWLER_TEMPLATE),
    "reflexion": PromptTemplate("reflexion", REFLEXION_TEMPLATE),
    "synthesis": PromptTemplate("synthesis", SYNTHESIS_TEMPLATE),
    "judgement": PromptTemplate("judgement", JUDGEMENT_TEMPLATE),
    "stepback": PromptTemplate("stepback", STEPBACK_TEMPLATE),
}


def render_prompt(name: str, slots: list[str] | tuple[str, ...]) -> str:
    """Substitute slot values verbatim into the named template.

    Raises :class:`KeyError` for unknown templates and
    :class:`ArityMismatch` when the slot count is off.
    """
    template = TEMPLATES[name]
    if len(slots) != template.slot_count:
        raise ArityMismatch(
            f"template {name!r} takes {template.slot_count} slot(s), got {len(slots)}"
        )
    return _SLOT_RE.sub(lambda m: slots[int(m.group(1))], template.body)
