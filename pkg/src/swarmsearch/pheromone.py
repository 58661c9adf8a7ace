"""Decaying click-trail store with three deposition flavors and stochastic recommendation.

Every click on a (query, document) pair deposits weight on a trail; trails
evaporate with a configurable half-life and are read back by a weighted
random sampler, so heavily clicked documents are recommended often while
rarely clicked ones still get a chance.

Weights are stored lazily as (weight, last_touch) pairs: evaporation is
applied on read and, always, before a deposit touches an entry.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "ClockSkewError",
    "ConfigurationError",
    "DecayConfig",
    "ExaminationTable",
    "Flavor",
    "FlavorKeyError",
    "NoPreferenceError",
    "PheromoneEntry",
    "PheromoneStore",
    "derive_elaborate_order",
    "evaporated_weight",
    "expand_query_keys",
    "increment_naive",
    "increment_ranking_bias",
    "normalize_query",
]


class ClockSkewError(ValueError):
    """A timestamp ran backwards; callers must supply monotone time per key."""


class FlavorKeyError(ValueError):
    """Position given for a pair-keyed flavor, or missing for the triplet-keyed one."""


class ConfigurationError(ValueError):
    """A required examination probability is absent from the table."""


class NoPreferenceError(ValueError):
    """No clicks in the session, so no preference order can be derived."""


class Flavor(str, Enum):
    NAIVE = "naive"
    RANKING_BIAS = "ranking_bias"
    ELABORATE = "elaborate"

    @classmethod
    def parse(cls, text: str) -> "Flavor":
        try:
            return cls(text.strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown flavor {text!r}; expected one of "
                             f"{', '.join(f.value for f in cls)}") from None


@dataclass(frozen=True)
class DecayConfig:
    """Half-life ``delta`` in seconds plus the prune floor ``epsilon``."""

    delta: float = 86400.0
    epsilon: float = 1e-6

    DAY = 86400.0
    WEEK = 604800.0

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")


def normalize_query(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace. Idempotent."""
    return " ".join(text.lower().split())


def expand_query_keys(query: str, mode: str = "exact") -> set[str]:
    """Trail keys for a query: the query itself, or every contiguous token n-gram.

    ``ngram`` mode addresses vocabulary mismatch between users phrasing the
    same need differently: each sub-phrase gets its own trail.
    """
    normalized = normalize_query(query)
    if not normalized:
        raise ValueError("blank query")
    if mode == "exact":
        return {normalized}
    if mode == "ngram":
        tokens = normalized.split()
        return {
            " ".join(tokens[i:j])
            for i in range(len(tokens))
            for j in range(i + 1, len(tokens) + 1)
        }
    raise ValueError(f"unknown key mode {mode!r}; expected 'exact' or 'ngram'")


@dataclass(frozen=True)
class PheromoneEntry:
    """Trail state for one key: stored weight and the time it was last touched."""

    weight: float
    last_touch: float
    position: int | None = None

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError(f"weight must be non-negative, got {self.weight}")
        if self.position is not None and self.position < 1:
            raise ValueError(f"position must be >= 1, got {self.position}")


def evaporated_weight(entry: PheromoneEntry, now: float, cfg: DecayConfig) -> float:
    """Current weight of ``entry`` at time ``now``: halves every ``cfg.delta`` seconds.

    Pure; does not mutate the entry.
    """
    if now < entry.last_touch:
        raise ClockSkewError(
            f"now={now} precedes last_touch={entry.last_touch}")
    return entry.weight * 0.5 ** ((now - entry.last_touch) / cfg.delta)


def increment_naive(rank: int | None = None) -> float:
    """Fixed unit deposit per click, regardless of result position."""
    return 1.0


class ExaminationTable:
    """Examination probabilities indexed by (position, position of last click).

    ``last_clicked = 0`` means no click yet. Probabilities must lie in (0, 1].
    """

    def __init__(self, probabilities: Mapping[tuple[int, int], float]) -> None:
        table: dict[tuple[int, int], float] = {}
        for (position, last_clicked), p in probabilities.items():
            if position < 1 or last_clicked < 0 or last_clicked >= position:
                raise ValueError(
                    f"bad index ({position}, {last_clicked}): need "
                    f"position >= 1 and 0 <= last_clicked < position")
            if not 0.0 < p <= 1.0:
                raise ValueError(
                    f"p_exam({position}, {last_clicked}) = {p} outside (0, 1]")
            table[(position, last_clicked)] = float(p)
        self._table = table

    def __len__(self) -> int:
        return len(self._table)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(sorted(self._table))

    def probability(self, position: int, last_clicked: int = 0) -> float:
        try:
            return self._table[(position, last_clicked)]
        except KeyError:
            raise ConfigurationError(
                f"no examination probability for position={position}, "
                f"last_clicked={last_clicked}; extend the table file") from None

    @classmethod
    def load(cls, path: str | Path) -> "ExaminationTable":
        """Read a TSV of ``position <TAB> last_clicked <TAB> p_exam`` rows."""
        probabilities: dict[tuple[int, int], float] = {}
        with open(path, encoding="utf-8") as handle:
            for raw in handle:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                position, last_clicked, p = line.split("\t")
                probabilities[(int(position), int(last_clicked))] = float(p)
        return cls(probabilities)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for position, last_clicked in self:
                p = self._table[(position, last_clicked)]
                handle.write(f"{position}\t{last_clicked}\t{p!r}\n")

    @classmethod
    def default(cls) -> "ExaminationTable":
        """The approximate table shipped with the package (see data/ notes)."""
        ref = resources.files("swarmsearch").joinpath("data/examination_default.tsv")
        with resources.as_file(ref) as path:
            return cls.load(path)


def increment_ranking_bias(position: int, last_clicked: int,
                           table: ExaminationTable) -> float:
    """Deposit that undoes ranking bias: the reciprocal examination probability.

    A click on a rarely examined position is stronger evidence than a click
    on a result everyone reads, so it deposits more.
    """
    if position < 1:
        raise ValueError(f"position must be >= 1, got {position}")
    if last_clicked < 0 or last_clicked >= position:
        raise ValueError(
            f"last_clicked must be in [0, position), got {last_clicked}")
    return 1.0 / table.probability(position, last_clicked)


def derive_elaborate_order(page: Sequence[str],
                           clicked_ranks: Iterable[int]) -> list[tuple[str, int]]:
    """Preference order implied by a click set: clicked docs first, then the
    docs skipped above the last click, each with its derived 1-based position.

    Docs below the last click were never examined and carry no judgment, so
    they are excluded.
    """
    ranks = sorted(set(clicked_ranks))
    if not ranks:
        raise NoPreferenceError("no clicked ranks")
    if ranks[0] < 1 or ranks[-1] > len(page):
        raise ValueError(
            f"clicked ranks {ranks} outside page bounds 1..{len(page)}")
    clicked_set = set(ranks)
    ordered = [page[rank - 1] for rank in ranks]
    ordered += [page[rank - 1] for rank in range(1, ranks[-1])
                if rank not in clicked_set]
    return [(doc, position) for position, doc in enumerate(ordered, start=1)]


# Store keys are (query_key, url, position); position is None except for
# the triplet-keyed Elaborate flavor.
EntryKey = tuple[str, str, int | None]


class PheromoneStore:
    """Trail map from (query key, document[, position]) to a decaying weight.

    Writers (deposit/prune/load) serialize on an internal lock; readers take
    a snapshot under the same lock and then work lock-free, so a read
    concurrent with a deposit sees either the old or the new entry, never a
    torn state. Entries are immutable values and safe to share.
    """

    def __init__(self, flavor: Flavor = Flavor.NAIVE,
                 decay: DecayConfig | None = None) -> None:
        self.flavor = flavor
        self.decay = decay if decay is not None else DecayConfig()
        self._entries: dict[EntryKey, PheromoneEntry] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def entries(self) -> dict[EntryKey, PheromoneEntry]:
        """Snapshot of all entries (consistent, detached copy)."""
        with self._lock:
            return dict(self._entries)

    def entry(self, key: str, doc: str,
              position: int | None = None) -> PheromoneEntry | None:
        return self._entries.get((normalize_query(key), doc, position))

    def _check_position(self, position: int | None) -> None:
        if self.flavor is Flavor.ELABORATE:
            if position is None:
                raise FlavorKeyError("elaborate entries require a position")
        elif position is not None:
            raise FlavorKeyError(
                f"{self.flavor.value} entries must not carry a position")

    def deposit(self, key: str, doc: str, position: int | None,
                increment: float, now: float) -> PheromoneEntry:
        """Evaporate the entry to ``now``, then add ``increment`` to its weight."""
        if increment <= 0:
            raise ValueError(f"increment must be positive, got {increment}")
        if not doc:
            raise ValueError("document must be non-empty")
        self._check_position(position)
        entry_key = (normalize_query(key), doc, position)
        with self._lock:
            old = self._entries.get(entry_key)
            base = evaporated_weight(old, now, self.decay) if old else 0.0
            entry = PheromoneEntry(base + increment, now, position)
            self._entries[entry_key] = entry
        return entry

    def weight(self, key: str, doc: str, position: int | None = None,
               now: float | None = None) -> float:
        """Evaporated weight at ``now`` (stored weight when ``now`` is None)."""
        entry = self.entry(key, doc, position)
        if entry is None:
            return 0.0
        if now is None:
            return entry.weight
        return evaporated_weight(entry, now, self.decay)

    def prune(self, now: float) -> int:
        """Drop every entry whose evaporated weight fell below epsilon."""
        with self._lock:
            doomed = [
                entry_key for entry_key, entry in self._entries.items()
                if evaporated_weight(entry, now, self.decay) < self.decay.epsilon
            ]
            for entry_key in doomed:
                del self._entries[entry_key]
        return len(doomed)

    def recommend(self, keys: Iterable[str], k: int, now: float,
                  rng) -> list[str]:
        """Up to ``k`` documents sampled without replacement, each draw
        proportional to the candidates' remaining summed evaporated weight.

        Deterministic for a fixed store, key set, ``now``, and ``rng`` seed.
        Unknown queries yield an empty list.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        wanted = {normalize_query(key) for key in keys}
        with self._lock:
            snapshot = list(self._entries.items())
        weights: dict[str, float] = {}
        position_mass: dict[str, float] = {}
        for (query_key, doc, position), entry in snapshot:
            if query_key not in wanted:
                continue
            weight = evaporated_weight(entry, now, self.decay)
            if weight <= 0.0:
                continue
            weights[doc] = weights.get(doc, 0.0) + weight
            if position is not None:
                position_mass[doc] = position_mass.get(doc, 0.0) + weight * position
        # Deterministic enumeration: heaviest first, then (for the
        # position-keyed flavor) lower mean deposited position, then URL.
        candidates = sorted(
            weights,
            key=lambda doc: (-weights[doc],
                             position_mass.get(doc, 0.0) / weights[doc],
                             doc),
        )
        picked: list[str] = []
        while candidates and len(picked) < k:
            total = sum(weights[doc] for doc in candidates)
            point = rng.random() * total
            cumulative = 0.0
            chosen = candidates[-1]
            for doc in candidates:
                cumulative += weights[doc]
                if point < cumulative:
                    chosen = doc
                    break
            picked.append(chosen)
            candidates.remove(chosen)
        return picked

    # -- snapshot persistence -------------------------------------------------
    #
    # Line format: query_key <TAB> url <TAB> position-or-"-" <TAB> weight
    # <TAB> last_touch_epoch_seconds. Floats are written with repr() so a
    # load/save round trip is byte-identical modulo line order (save sorts).

    def dumps(self) -> str:
        with self._lock:
            rows = sorted(self._entries.items())
        return "".join(
            f"{query_key}\t{doc}\t{'-' if position is None else position}"
            f"\t{entry.weight!r}\t{entry.last_touch!r}\n"
            for (query_key, doc, position), entry in rows
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(self.dumps())

    @classmethod
    def load(cls, path: str | Path, flavor: Flavor,
             decay: DecayConfig | None = None) -> "PheromoneStore":
        store = cls(flavor, decay)
        with open(path, encoding="utf-8") as handle:
            for raw in handle:
                line = raw.rstrip("\n")
                if not line:
                    continue
                query_key, doc, position_field, weight, last_touch = line.split("\t")
                position = None if position_field == "-" else int(position_field)
                store._check_position(position)
                store._entries[(query_key, doc, position)] = PheromoneEntry(
                    float(weight), float(last_touch), position)
        return store
