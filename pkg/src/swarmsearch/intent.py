"""Rule-based navigational vs. non-navigational query classification.

A query is navigational when any of three rules fires: it has fewer than
three terms, it names a known company/organization/website/person, or it
carries a domain suffix. Name lists are ingested from plain files (one term
per line) instead of being fetched from a live knowledge base.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from swarmsearch.pheromone import normalize_query

MAX_NAVIGATIONAL_TOKENS = 2


class IntentLabel(Enum):
    NAVIGATIONAL = "navigational"
    NON_NAVIGATIONAL = "non_navigational"


@dataclass(frozen=True)
class NameLexicon:
    """Known entity names (as token tuples) and domain suffixes, all lowercase."""

    names: frozenset[tuple[str, ...]] = frozenset()
    suffixes: frozenset[str] = frozenset()

    max_name_tokens: int = field(init=False, default=0)

    def __post_init__(self) -> None:
        longest = max((len(name) for name in self.names), default=0)
        object.__setattr__(self, "max_name_tokens", longest)

    @classmethod
    def from_terms(cls, names: Iterable[str] = (),
                   suffixes: Iterable[str] = ()) -> "NameLexicon":
        name_tuples = set()
        for term in names:
            normalized = normalize_query(term)
            if normalized:
                name_tuples.add(tuple(normalized.split()))
        suffix_set = {s.strip().lower() for s in suffixes if s.strip()}
        return cls(frozenset(name_tuples), frozenset(suffix_set))


def _read_terms(path: str | Path) -> list[str]:
    terms = []
    try:
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                term = line.strip()
                if term and not term.startswith("#"):
                    terms.append(term)
    except OSError as exc:
        raise OSError(f"cannot read lexicon file {path}: {exc}") from exc
    return terms


def load_lexicon(name_files: Sequence[str | Path],
                 suffix_file: str | Path | None = None) -> NameLexicon:
    """Build a lexicon from term files; entries are normalized and deduplicated."""
    names: list[str] = []
    for path in name_files:
        names.extend(_read_terms(path))
    suffixes = _read_terms(suffix_file) if suffix_file is not None else []
    return NameLexicon.from_terms(names, suffixes)


def classify(query: str, lexicon: NameLexicon) -> IntentLabel:
    """Apply the three navigational rules as a disjunction."""
    normalized = normalize_query(query)
    if not normalized:
        raise ValueError("blank query")
    tokens = tuple(normalized.split())
    if len(tokens) <= MAX_NAVIGATIONAL_TOKENS:
        return IntentLabel.NAVIGATIONAL
    if any(suffix in normalized for suffix in lexicon.suffixes):
        return IntentLabel.NAVIGATIONAL
    # whole-token contiguous match, so "john" hits "john smith" but not "johnson"
    for length in range(1, min(lexicon.max_name_tokens, len(tokens)) + 1):
        for start in range(len(tokens) - length + 1):
            if tokens[start:start + length] in lexicon.names:
                return IntentLabel.NAVIGATIONAL
    return IntentLabel.NON_NAVIGATIONAL
