"""Parsing of checker and splitter replies.

Check replies must end with Yes/No/Pending; regroup replies must end with
bracketed number groups like ``[#1,#3,#6], [#2,#4,#5]`` or start with
``Correction failed:`` followed by a reason.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import RegroupingError, ReplyParseError

YES = "Yes"
NO = "No"
PENDING = "Pending"

_TERMINALS = {"yes": YES, "no": NO, "pending": PENDING}
_TRAILING_JUNK = ".,!?;:*'\"`()“”‘’"

_GROUP_RE = re.compile(r"\[\s*#?\d+(?:\s*,\s*#?\d+)*\s*\]")
_NUM_RE = re.compile(r"\d+")
_BETWEEN_GROUPS_RE = re.compile(r"[\s,;.]*")
_FAILED_MARKER = "Correction failed:"


@dataclass(frozen=True)
class Verdict:
    value: str  # one of YES / NO / PENDING
    reason: str = ""


@dataclass(frozen=True)
class Regrouping:
    groups: list[list[int]] | None = None
    failure_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.groups is not None


def parse_verdict(raw: str) -> Verdict:
    """Read the judgment from the reply's final word.

    Trailing punctuation and whitespace are ignored. A reply with no terminal
    Yes/No/Pending raises; callers treat that as Pending (fail-open).
    """
    stripped = raw.strip()
    if not stripped:
        raise ReplyParseError("empty reply")
    last_word = stripped.split()[-1]
    value = _TERMINALS.get(last_word.strip(_TRAILING_JUNK).lower())
    if value is None:
        raise ReplyParseError(
            f"reply does not end with Yes/No/Pending: ...{stripped[-40:]!r}"
        )
    reason = stripped[: len(stripped) - len(last_word)].strip()
    return Verdict(value=value, reason=reason)


def _tail_groups(text: str) -> list[re.Match]:
    """The maximal run of bracketed groups that closes out the reply."""
    matches = list(_GROUP_RE.finditer(text))
    if not matches:
        return []
    tail = text[matches[-1].end() :]
    if tail.strip(_TRAILING_JUNK + " \t\n\r"):
        return []  # prose after the last group: not a grouping tail
    run = [matches[-1]]
    for prev in reversed(matches[:-1]):
        between = text[prev.end() : run[0].start()]
        if _BETWEEN_GROUPS_RE.fullmatch(between):
            run.insert(0, prev)
        else:
            break
    return run


def parse_regrouping(raw: str, k: int) -> Regrouping:
    """Extract the regrouping from a splitter reply over ``k`` mentions.

    Successful replies yield groups forming an exact partition of 1..k
    (numbers are normalized to ascending order within each group); anything
    else raises. A ``Correction failed:`` reply returns the failure reason.
    """
    if k < 2:
        raise ValueError("regrouping applies to clusters of at least two mentions")
    text = raw.strip()
    if not text:
        raise RegroupingError("empty reply")
    if text.startswith(_FAILED_MARKER):
        return Regrouping(failure_reason=text[len(_FAILED_MARKER) :].strip() or "unspecified")
    run = _tail_groups(text)
    if not run:
        if _FAILED_MARKER in text:
            reason = text.split(_FAILED_MARKER, 1)[1].strip()
            return Regrouping(failure_reason=reason or "unspecified")
        raise RegroupingError(f"no grouping found at the end of the reply: ...{text[-40:]!r}")
    groups = [sorted(int(n) for n in _NUM_RE.findall(m.group())) for m in run]
    seen: set[int] = set()
    for group in groups:
        for n in group:
            if not (1 <= n <= k):
                raise RegroupingError(f"mention number {n} outside 1..{k}")
            if n in seen:
                raise RegroupingError(f"mention number {n} appears in more than one group")
            seen.add(n)
    missing = set(range(1, k + 1)) - seen
    if missing:
        raise RegroupingError(f"regrouping omits mention numbers {sorted(missing)}")
    return Regrouping(groups=groups)
