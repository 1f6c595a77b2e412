"""Text normalization and math-aware tokenization for proof bodies.

Tokenization is whitespace splitting with two merge rules so that pieces of
mathematical notation survive as single tokens:

* a backslash command keeps its attached groups: ``\\sum_{i=1}^n`` and
  ``\\frac{a}{b}`` are one token each;
* an identifier immediately followed by a balanced parenthesized argument
  list is one token: ``g(n-1)``, ``f(x + 1)``.

Student submissions are frequently malformed, so an unbalanced brace or
parenthesis never fails the tokenizer: the whitespace-delimited word that
contains it is split into single characters instead.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_INLINE_WS = re.compile(r"[ \t]+")


@dataclass(frozen=True)
class TokenSequence:
    """Tokens plus their (start, end) byte spans in the normalized text."""

    tokens: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tokens)


def normalize(body_markdown: str) -> str:
    """Canonicalize whitespace: \\n line endings, single spaces within lines,
    line edges trimmed, blank-line paragraph breaks preserved."""
    text = body_markdown.replace("\r\n", "\n").replace("\r", "\n")
    lines = [_INLINE_WS.sub(" ", line).strip() for line in text.split("\n")]
    return "\n".join(lines)


class _Unbalanced(Exception):
    pass


def _scan_group(text: str, i: int, open_ch: str, close_ch: str) -> int:
    """Advance past a balanced open..close group starting at text[i]."""
    depth = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == open_ch:
            depth += 1
        elif c == close_ch:
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    raise _Unbalanced


def _scan_command(text: str, i: int) -> int:
    """Advance past \\name and any attached {..}, _x, ^x groups."""
    n = len(text)
    i += 1  # backslash
    while i < n and text[i].isalpha():
        i += 1
    while i < n:
        c = text[i]
        if c == "{":
            i = _scan_group(text, i, "{", "}")
        elif c in "_^":
            if i + 1 >= n or text[i + 1].isspace():
                return i + 1
            if text[i + 1] == "{":
                i = _scan_group(text, i + 1, "{", "}")
            elif text[i + 1] == "\\" and i + 2 < n and text[i + 2].isalpha():
                i = _scan_command(text, i + 1)
            else:
                i += 2
        else:
            break
    return i


def _scan_word(text: str, start: int) -> int:
    """Advance to the end of one token starting at a non-space position."""
    i = start
    n = len(text)
    while i < n and not text[i].isspace():
        c = text[i]
        if c == "\\" and i + 1 < n and text[i + 1].isalpha():
            i = _scan_command(text, i)
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j < n and text[j] == "(":
                j = _scan_group(text, j, "(", ")")
            i = j
        else:
            i += 1
    return i


def _word_end(text: str, start: int) -> int:
    i = start
    while i < len(text) and not text[i].isspace():
        i += 1
    return i


def merge_math_tokens(text: str) -> TokenSequence:
    """Tokenize normalized text, merging math notation per the module rules."""
    tokens: list[str] = []
    char_spans: list[tuple[int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        start = i
        try:
            i = _scan_word(text, start)
        except _Unbalanced:
            # Malformed math: the containing word degrades to characters.
            end = _word_end(text, start)
            for k in range(start, end):
                tokens.append(text[k])
                char_spans.append((k, k + 1))
            i = end
            continue
        tokens.append(text[start:i])
        char_spans.append((start, i))
    byte_of = _byte_offsets(text)
    spans = tuple((byte_of[s], byte_of[e]) for s, e in char_spans)
    return TokenSequence(tokens=tuple(tokens), spans=spans)


def _byte_offsets(text: str) -> list[int]:
    """byte_of[k] = UTF-8 byte offset of character k (plus one-past-end)."""
    offsets = [0] * (len(text) + 1)
    pos = 0
    for k, ch in enumerate(text):
        offsets[k] = pos
        pos += len(ch.encode("utf-8"))
    offsets[len(text)] = pos
    return offsets


def check_token_budget(tokens, limit: int) -> tuple[bool, int]:
    """Return (fits, token_count) with an inclusive limit."""
    if limit <= 0:
        raise ValueError("token limit must be positive")
    count = len(tokens)
    return count <= limit, count


DEFAULT_TOKEN_LIMIT = 512
