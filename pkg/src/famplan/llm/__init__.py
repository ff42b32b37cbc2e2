"""Provider-agnostic chat-completion client, prompt catalog, and structured
output handling."""

from .extraction import ExtractedJson, extract_json
from .gateway import (
    LlmGateway,
    RepairReply,
    ScheduleReply,
    TutoringExchange,
    render_members,
)
from .prompts import PromptTemplate, load_catalog, load_template
from .providers import (
    Attachment,
    ChatMessage,
    ChatProvider,
    HttpChatProvider,
    ProviderConfig,
    ScriptedProvider,
    StubChatProvider,
    TokenBucket,
    config_from_env,
    stub_key,
)

__all__ = [
    "Attachment",
    "ChatMessage",
    "ChatProvider",
    "ExtractedJson",
    "HttpChatProvider",
    "LlmGateway",
    "PromptTemplate",
    "ProviderConfig",
    "RepairReply",
    "ScheduleReply",
    "ScriptedProvider",
    "StubChatProvider",
    "TokenBucket",
    "TutoringExchange",
    "config_from_env",
    "extract_json",
    "load_catalog",
    "load_template",
    "render_members",
    "stub_key",
]
