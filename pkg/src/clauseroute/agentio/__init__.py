"""Router-agent I/O: prompt rendering, HTTP client, simulators, run store."""

from .client import (
    AgentConfig,
    AgentConfigError,
    AgentError,
    AgentStatusError,
    AgentTransportError,
    query_agent,
)
from .prompt import NONE_YET, AgentRequest, compose_user_prompt, load_template, render_prompt
from .simulate import AgentSimulator, Noisy, Oracle, PriorSampler, format_mask, simulate_agent
from .store import (
    BatchIntegrityError,
    RunRecord,
    RunStore,
    RunStoreError,
    RunStoreParseError,
    load_runs,
    store_runs,
)

__all__ = [
    "AgentConfig",
    "AgentConfigError",
    "AgentError",
    "AgentRequest",
    "AgentSimulator",
    "AgentStatusError",
    "AgentTransportError",
    "BatchIntegrityError",
    "NONE_YET",
    "Noisy",
    "Oracle",
    "PriorSampler",
    "RunRecord",
    "RunStore",
    "RunStoreError",
    "RunStoreParseError",
    "compose_user_prompt",
    "format_mask",
    "load_runs",
    "load_template",
    "query_agent",
    "render_prompt",
    "simulate_agent",
    "store_runs",
]
