"""Parsers for the structured completions the prompts ask for."""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional

NOANS = "NOANS"


class ParseError(ValueError):
    pass


def _balanced_arrays(text: str):
    """Yield ``(start, end)`` spans of bracket-balanced ``[...]`` regions.

    String literals are honoured so brackets inside quoted JSON strings do
    not count.
    """
    n = len(text)
    start = text.find("[")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        end = None
        for k in range(start, n):
            c = text[k]
            if in_str:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c == "[":
                depth += 1
            elif c == "]":
                depth -= 1
                if depth == 0:
                    end = k + 1
                    break
        if end is not None:
            yield start, end
            # regions nested inside a balanced span are not top-level
            start = text.find("[", end)
        else:
            start = text.find("[", start + 1)


def parse_json_array(text: str) -> list:
    """Return the first balanced top-level JSON array in ``text``, parsed.

    Leading and trailing prose is ignored.
    """
    for start, end in _balanced_arrays(text):
        try:
            value = json.loads(text[start:end])
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    raise ParseError("no balanced JSON array found")


def check_records(records: Sequence, required: Iterable[str] = ("question", "answer", "sentence")) -> list[str]:
    """Element-level violations for records that lack a required non-empty string key."""
    required = tuple(required)
    problems = []
    for k, rec in enumerate(records):
        if not isinstance(rec, dict):
            problems.append(f"record {k} is not an object")
            continue
        for key in required:
            v = rec.get(key)
            if not isinstance(v, str) or not v.strip():
                problems.append(f"record {k} missing {key!r}")
    return problems


@dataclass(frozen=True)
class SearchLlmAnswer:
    answer: Optional[str]
    snippet_indices: tuple[int, ...] = ()

    @property
    def internal(self) -> bool:
        return self.snippet_indices == (-1,)


_INDEX_LIST_RE = re.compile(r"^\[\s*(-?\d+(?:\s*,\s*-?\d+)*)?\s*\]$")


def _is_noans(s: str) -> bool:
    return s.strip().strip("\"'").strip().upper() == NOANS


def parse_search_llm_answer(text: str) -> SearchLlmAnswer:
    """Parse ``[answer]; [i, j, ...]`` or ``[NOANS]``.

    Index -1 marks an answer drawn from the model's own knowledge.
    """
    if not isinstance(text, str):
        raise ParseError("completion is not text")
    s = text.strip()
    if not s.startswith("["):
        raise ParseError("completion must begin with '['")
    cut = s.find("];")
    if cut == -1:
        if s.endswith("]") and _is_noans(s[1:-1]):
            return SearchLlmAnswer(None)
        raise ParseError("missing '];' between answer and indices")
    answer = s[1:cut].strip()
    rest = s[cut + 2 :].strip()
    if _is_noans(answer):
        return SearchLlmAnswer(None)
    if not answer:
        raise ParseError("empty answer")
    m = _INDEX_LIST_RE.match(rest)
    if not m or m.group(1) is None:
        raise ParseError(f"bad index list {rest!r}")
    indices = tuple(int(x) for x in m.group(1).split(","))
    if any(i < -1 for i in indices):
        raise ParseError("snippet index below -1")
    if -1 in indices and len(indices) > 1:
        raise ParseError("-1 cannot be combined with snippet indices")
    return SearchLlmAnswer(answer, indices)


def is_noans(text: str) -> bool:
    """True when a completion says nothing but NOANS, ignoring case, quotes, brackets, punctuation."""
    core = re.sub(r"[\s\"'\[\]().,;:!`*]+", "", text or "")
    return core.upper() == NOANS


def parse_yes_no(text: str) -> Optional[int]:
    """1 for a yes, 0 for a no, None when neither prefix is present."""
    norm = re.sub(r"[^\w\s]", "", (text or "").strip().lower()).strip()
    m = re.match(r"(yes|no)\b", norm)
    if m is None:
        return None
    return 1 if m.group(1) == "yes" else 0
