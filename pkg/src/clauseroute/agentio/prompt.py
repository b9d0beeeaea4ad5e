from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..zoo import Endpoint, Zoo, render_endpoint_row, render_for_agent

NONE_YET = "(none yet)"
_PLACEHOLDER = re.compile(r"\[(N|Prompt|Last Model Metadata|Full Model Zoo CSV)\]")


@dataclass(frozen=True)
class AgentRequest:
    rendered_prompt: str
    n: int


def load_template(path: str | Path | None = None) -> str:
    if path is None:
        return (resources.files("clauseroute") / "data" / "prompt_template.txt").read_text(encoding="utf-8")
    return Path(path).read_text(encoding="utf-8")


def compose_user_prompt(p: str, d: str) -> str:
    """Free-form prompt with the direction key appended as a ``DIRECTION:`` line."""
    direction = f"DIRECTION: {d}"
    return f"{p.rstrip()}\n{direction}" if p.strip() else direction


def render_prompt(
    zoo: Zoo,
    current: Endpoint | None,
    p: str,
    d: str,
    template: str | None = None,
) -> AgentRequest:
    template = load_template() if template is None else template
    values = {
        "N": str(zoo.M),
        "Prompt": compose_user_prompt(p, d),
        "Last Model Metadata": NONE_YET if current is None else render_endpoint_row(current),
        "Full Model Zoo CSV": render_for_agent(zoo).rstrip("\n"),
    }
    # single pass, so placeholder-like text inside substituted values is left alone
    text = _PLACEHOLDER.sub(lambda m: values[m.group(1)], template)
    return AgentRequest(text, zoo.M)
