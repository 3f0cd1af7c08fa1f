from .annotate import (
    annotate_cluster_context,
    annotate_mention_context,
    strip_cluster_markers,
)
from .checker import (
    AgentExchange,
    check_and_split_clusters,
    check_and_split_clusters_aligned,
    check_mentions,
    write_audit_log,
)
from .client import AgentRequest, HttpLlmClient, LlmClientConfig
from .mock import MockLlm
from .prompts import CLUSTER_CHECK, CLUSTER_SPLIT, MENTION_CHECK, render_prompt
from .replies import NO, PENDING, YES, Regrouping, Verdict, parse_regrouping, parse_verdict

__all__ = [
    "AgentExchange",
    "AgentRequest",
    "CLUSTER_CHECK",
    "CLUSTER_SPLIT",
    "HttpLlmClient",
    "LlmClientConfig",
    "MENTION_CHECK",
    "MockLlm",
    "NO",
    "PENDING",
    "Regrouping",
    "Verdict",
    "YES",
    "annotate_cluster_context",
    "annotate_mention_context",
    "check_and_split_clusters",
    "check_and_split_clusters_aligned",
    "check_mentions",
    "parse_regrouping",
    "parse_verdict",
    "render_prompt",
    "strip_cluster_markers",
    "write_audit_log",
]
