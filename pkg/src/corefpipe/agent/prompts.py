"""Prompt template loading and rendering.

The three templates ship as text resources and are instantiated verbatim; the
only substitution is the payload spliced into the final input section.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

MENTION_CHECK = "mention_check"
CLUSTER_CHECK = "cluster_check"
CLUSTER_SPLIT = "cluster_split"

KINDS = (MENTION_CHECK, CLUSTER_CHECK, CLUSTER_SPLIT)

_REQUIRED_FIELDS = {
    MENTION_CHECK: ("context",),
    CLUSTER_CHECK: ("original", "numbered", "marked"),
    CLUSTER_SPLIT: ("original", "numbered", "marked"),
}


@lru_cache(maxsize=None)
def load_template(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown prompt kind {kind!r}")
    return (
        resources.files("corefpipe.agent")
        .joinpath(f"templates/{kind}.txt")
        .read_text("utf-8")
    )


def render_prompt(kind: str, payload: dict[str, str]) -> str:
    """Instantiate the template for ``kind`` with the payload fields."""
    required = _REQUIRED_FIELDS.get(kind)
    if required is None:
        raise ValueError(f"unknown prompt kind {kind!r}")
    missing = [f for f in required if f not in payload]
    if missing:
        raise ValueError(f"{kind} payload missing fields {missing}")
    return load_template(kind).format(**{f: payload[f] for f in required})
