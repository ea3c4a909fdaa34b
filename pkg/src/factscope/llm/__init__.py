from .gateway import (
    DEFAULT_MODEL,
    CallError,
    CompletionResult,
    Gateway,
    ModelSettings,
    PromptInvocation,
    ResponseCache,
    UsageReport,
    cache_key,
    complete,
    usage_summary,
)
from .parsing import (
    NOANS,
    ParseError,
    SearchLlmAnswer,
    check_records,
    is_noans,
    parse_json_array,
    parse_search_llm_answer,
    parse_yes_no,
)
from .prompts import PLACEHOLDERS, TEMPLATES, PromptConfigError, TemplateId, format_snippets, render_prompt
from .providers import (
    MockProvider,
    OpenAIChatProvider,
    ProtocolError,
    Provider,
    ProviderError,
    ProviderResponse,
    ScriptedProvider,
    load_provider,
    prompt_digest,
)
