from typing import Dict, List

from langchain_core.messages import AIMessage, AnyMessage, RemoveMessage

from astra_aoi_tools.utils.models import ExperimentConfig

CONFIG_ARG = "config"


def add_config_to_langchain_tool_call(config: ExperimentConfig, state: dict, messages_key: str) -> Dict[str, List[AnyMessage]]:
    """
    Injects an experiment configuration into the tool calls of the last AI message.

    The tools declare `config` as an injected argument, so the model never
    produces it; this fills it in before the tool node runs.
    """
    messages = state[messages_key]
    last_message = messages[-1]
    if isinstance(last_message, AIMessage) and last_message.tool_calls:
        for tool_call in last_message.tool_calls:
            tool_call["args"][CONFIG_ARG] = config
    return {messages_key: [RemoveMessage(id=last_message.id), last_message]}
