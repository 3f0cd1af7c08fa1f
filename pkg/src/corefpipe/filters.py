"""Mention and cluster filters deciding which items reach the LLM.

Pronoun mentions are trusted outright (with "it" excluded from the pronoun
list, since it often carries no reference). Remaining mentions are ranked by
end probability and only the least confident fraction is checked. Clusters
with one mention are never checked; multi-mention clusters are ranked by a
confidence score (mean pair probability minus a small variance penalty) and
again only the bottom fraction is submitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

from .corpus import Cluster, Mention
from .errors import ConfigError


def load_pronouns(include_it: bool = False) -> frozenset[str]:
    """The shipped pronoun list; "it" is excluded unless asked for."""
    text = resources.files("corefpipe").joinpath("data/pronouns.txt").read_text("utf-8")
    words = {line.strip().lower() for line in text.splitlines() if line.strip()}
    if not include_it:
        words.discard("it")
    return frozenset(words)


DEFAULT_PRONOUNS = load_pronouns()


@dataclass
class FilterConfig:
    eta1: float = 0.6
    eta2: float = 0.6
    rho: float = 1e-3
    pronoun_set: frozenset[str] = field(default_factory=lambda: DEFAULT_PRONOUNS)

    def __post_init__(self):
        if not (0.0 <= self.eta1 <= 1.0 and 0.0 <= self.eta2 <= 1.0):
            raise ConfigError("eta1 and eta2 must lie in [0, 1]")
        if self.rho <= 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if "it" in self.pronoun_set:
            raise ConfigError('"it" must not be in the bypass pronoun set')


def is_bypass_pronoun(text: str, cfg: FilterConfig) -> bool:
    """Whole-string, case-insensitive match against the pronoun list.

    Multi-token surfaces can never match: the list holds single tokens only.
    """
    return text.lower() in cfg.pronoun_set


def _bottom_fraction_count(fraction: float, n: int) -> int:
    # round() guards against float noise in fraction * n (e.g. 0.2 * 15).
    return min(n, max(0, math.ceil(round(fraction * n, 9))))


def select_mentions_for_check(
    mentions: list[Mention], cfg: FilterConfig
) -> tuple[list[Mention], list[Mention]]:
    """Split mentions into (to_check, bypassed).

    Pronouns bypass. The rest are ranked by descending end probability
    (stable, so ties keep document order) and the bottom ceil(eta1 * N) go to
    the checker. Both returned lists preserve document order.
    """
    bypassed_idx: set[int] = set()
    ranked: list[int] = []
    for i, m in enumerate(mentions):
        if is_bypass_pronoun(m.text, cfg):
            bypassed_idx.add(i)
        else:
            ranked.append(i)
    ranked.sort(key=lambda i: -(mentions[i].p_end if mentions[i].p_end is not None else 1.0))
    k = _bottom_fraction_count(cfg.eta1, len(ranked))
    check_idx = set(ranked[len(ranked) - k :])
    to_check = [m for i, m in enumerate(mentions) if i in check_idx]
    bypassed = [m for i, m in enumerate(mentions) if i not in check_idx]
    return to_check, bypassed


def cluster_confidence(pair_probs: list[float], rho: float) -> float:
    """Mean pair probability, penalized by rho times the squared deviations.

    Never exceeds the mean; for small rho the ranking it induces coincides
    with ranking by the mean.
    """
    if not pair_probs:
        raise ValueError("cluster_confidence needs at least one pair probability")
    mean = sum(pair_probs) / len(pair_probs)
    penalty = sum((mean - p) ** 2 for p in pair_probs)
    return mean - rho * penalty


def select_clusters_for_check(
    clusters: list[Cluster], cfg: FilterConfig
) -> tuple[list[Cluster], list[Cluster]]:
    """Split clusters into (to_check, bypassed); singletons always bypass.

    Multi-mention clusters are ranked by descending confidence (stable) and
    the bottom ceil(eta2 * N) are checked. Both lists keep input order.
    """
    multi: list[int] = [i for i, c in enumerate(clusters) if len(c) > 1]
    ranked = sorted(multi, key=lambda i: -cluster_confidence(clusters[i].pair_probs, cfg.rho))
    k = _bottom_fraction_count(cfg.eta2, len(ranked))
    check_idx = set(ranked[len(ranked) - k :])
    to_check = [c for i, c in enumerate(clusters) if i in check_idx]
    bypassed = [c for i, c in enumerate(clusters) if i not in check_idx]
    return to_check, bypassed
