"""Knowledge graph store: loading, interning, splitting and min-max statistics"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import pandas as pd

from ..const import INVERSE_SUFFIX, LOGGER
from .exceptions import ConfigError, DatasetFormatError, DegenerateAttributeError, UnknownIdentifierError
from .models import AttributeStat


class RelationalTriple(NamedTuple):
    """(head, relation, tail) over interned ids."""

    head: int
    relation: int
    tail: int


class NumericalTriple(NamedTuple):
    """(entity, attribute, value) over interned ids, value in native units."""

    entity: int
    attribute: int
    value: float


class Vocabulary:
    """Dense interning of names to integer ids"""

    def __init__(self, kind: str, names: Iterable[str] = ()) -> None:
        self.kind = kind
        self._names: list[str] = []
        self._ids: dict[str, int] = {}
        for name in names:
            self.intern(name)

    def intern(self, name: str) -> int:
        """Return the id of name, allocating the next id when unseen."""
        if (idx := self._ids.get(name)) is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def id(self, name: str) -> int:
        """Id of an already interned name."""
        try:
            return self._ids[name]
        except KeyError as err:
            raise UnknownIdentifierError(f"unknown {self.kind} {name!r}") from err

    def name(self, idx: int) -> str:
        """Name behind an id."""
        if not 0 <= idx < len(self._names):
            raise UnknownIdentifierError(f"unknown {self.kind} id {idx}")
        return self._names[idx]

    def __contains__(self, name: object) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    @property
    def names(self) -> list[str]:
        """All names in id order."""
        return list(self._names)


@dataclass(frozen=True)
class Query:
    """Numerical query (entity, attribute, ?) with an optional known target."""

    entity: int
    attribute: int
    target: float | None = None


@dataclass
class DatasetSplit:
    """Disjoint train/validation/test numerical triples."""

    train: list[NumericalTriple] = field(default_factory=list)
    valid: list[NumericalTriple] = field(default_factory=list)
    test: list[NumericalTriple] = field(default_factory=list)

    def get(self, name: str) -> list[NumericalTriple]:
        """Split by name."""
        if name not in ("train", "valid", "test"):
            raise UnknownIdentifierError(f"unknown split {name!r}")
        return getattr(self, name)


@dataclass
class KnowledgeGraph:
    """Immutable multi-relational graph with numerical attributes.

    Relations ``0..base_relation_count-1`` are the loaded ones; each has a synthesized
    inverse at ``r + base_relation_count``. ``numerical_index`` only holds the facts the
    model may read (the training split), so held-out values are never reachable.
    """

    entities: Vocabulary
    relations: Vocabulary
    attributes: Vocabulary
    base_relation_count: int
    relational_triples: list[RelationalTriple]
    numerical_triples: list[NumericalTriple]
    adjacency: list[list[tuple[int, int]]]
    numerical_index: list[list[tuple[int, float]]]

    @classmethod
    def build(
        cls,
        entities: Vocabulary,
        base_relations: Vocabulary,
        attributes: Vocabulary,
        triples: Sequence[RelationalTriple],
        known_values: Sequence[NumericalTriple],
    ) -> KnowledgeGraph:
        """Synthesize inverse relations and index adjacency and known values."""
        base_count = len(base_relations)
        relations = Vocabulary("relation", base_relations.names)
        for name in base_relations.names:
            inverse = name + INVERSE_SUFFIX
            while inverse in relations:
                inverse += INVERSE_SUFFIX
            relations.intern(inverse)

        relational: list[RelationalTriple] = []
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(len(entities))]
        for head, relation, tail in triples:
            inverse = relation + base_count
            relational.append(RelationalTriple(head, relation, tail))
            relational.append(RelationalTriple(tail, inverse, head))
            adjacency[head].append((relation, tail))
            adjacency[tail].append((inverse, head))

        numerical_index: list[list[tuple[int, float]]] = [[] for _ in range(len(entities))]
        for entity, attribute, value in known_values:
            numerical_index[entity].append((attribute, value))

        return cls(
            entities=entities,
            relations=relations,
            attributes=attributes,
            base_relation_count=base_count,
            relational_triples=relational,
            numerical_triples=list(known_values),
            adjacency=adjacency,
            numerical_index=numerical_index,
        )

    def inverse(self, relation: int) -> int:
        """Id of the inverse of a relation (an involution)."""
        if relation < self.base_relation_count:
            return relation + self.base_relation_count
        return relation - self.base_relation_count

    def has_edge(self, head: int, relation: int, tail: int) -> bool:
        """True when (head, relation, tail) is a triple of the graph."""
        return (relation, tail) in self.adjacency[head]

    def known_value(self, entity: int, attribute: int) -> float | None:
        """Visible value of (entity, attribute), if any."""
        for attr, value in self.numerical_index[entity]:
            if attr == attribute:
                return value
        return None

    def describe(self) -> dict[str, int]:
        """Sizes in the layout of a dataset statistics table."""
        return {
            "entities": len(self.entities),
            "relations": self.base_relation_count,
            "relations_with_inverse": len(self.relations),
            "attributes": len(self.attributes),
            "relational_triples": len(self.relational_triples) // 2,
            "numerical_triples": len(self.numerical_triples),
        }


def _rows(path: Path, columns: int) -> Iterable[tuple[int, list[str]]]:
    """Yield (line number, fields) for every non-blank tab-separated row."""
    try:
        handle = path.open(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err.strerror or err}") from err
    with handle:
        for number, line in enumerate(handle, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != columns:
                raise DatasetFormatError(
                    str(path), number, f"expected {columns} tab-separated fields, got {len(fields)}"
                )
            if any(not part.strip() for part in fields):
                raise DatasetFormatError(str(path), number, "empty field")
            yield number, [part.strip() for part in fields]


def read_relational(path: str | Path, entities: Vocabulary, relations: Vocabulary) -> list[RelationalTriple]:
    """Read `head<TAB>relation<TAB>tail` rows, interning every name."""
    path = Path(path)
    triples = []
    for _, (head, relation, tail) in _rows(path, 3):
        triples.append(
            RelationalTriple(entities.intern(head), relations.intern(relation), entities.intern(tail))
        )
    return triples


def read_numerical(
    path: str | Path, entities: Vocabulary, attributes: Vocabulary
) -> list[NumericalTriple]:
    """Read `entity<TAB>attribute<TAB>value` rows against an existing entity vocabulary."""
    path = Path(path)
    triples = []
    for number, (entity, attribute, raw) in _rows(path, 3):
        if entity not in entities:
            raise DatasetFormatError(str(path), number, f"unknown entity {entity!r}")
        try:
            value = float(raw)
        except ValueError as err:
            raise DatasetFormatError(str(path), number, f"not a number: {raw!r}") from err
        if not math.isfinite(value):
            raise DatasetFormatError(str(path), number, f"non-finite value {raw!r}")
        triples.append(NumericalTriple(entities.id(entity), attributes.intern(attribute), value))
    return triples


def split_numerical(
    triples: Sequence[NumericalTriple], seed: int, ratios: tuple[int, int, int] = (8, 1, 1)
) -> DatasetSplit:
    """Shuffle and cut triples into disjoint train/valid/test parts by ratio."""
    order = np.random.default_rng(seed).permutation(len(triples))
    total = sum(ratios)
    n_train = int(round(len(triples) * ratios[0] / total))
    n_valid = int(round(len(triples) * ratios[1] / total))
    shuffled = [triples[i] for i in order]
    return DatasetSplit(
        train=shuffled[:n_train],
        valid=shuffled[n_train : n_train + n_valid],
        test=shuffled[n_train + n_valid :],
    )


def load_dataset(
    relational_path: str | Path,
    train_path: str | Path,
    valid_path: str | Path | None = None,
    test_path: str | Path | None = None,
    seed: int = 0,
) -> tuple[KnowledgeGraph, DatasetSplit]:
    """Load a graph and its numerical splits.

    With only a training file the numerical triples are split 8:1:1 internally. Only
    the training split is indexed as known values.
    """
    entities = Vocabulary("entity")
    base_relations = Vocabulary("relation")
    attributes = Vocabulary("attribute")
    triples = read_relational(relational_path, entities, base_relations)

    train = read_numerical(train_path, entities, attributes)
    if valid_path is None and test_path is None:
        split = split_numerical(train, seed)
    else:
        split = DatasetSplit(
            train=train,
            valid=read_numerical(valid_path, entities, attributes) if valid_path else [],
            test=read_numerical(test_path, entities, attributes) if test_path else [],
        )
    _drop_overlap(split)

    kg = KnowledgeGraph.build(entities, base_relations, attributes, triples, split.train)
    LOGGER.info(
        "Loaded graph: %s; split train=%d valid=%d test=%d",
        kg.describe(),
        len(split.train),
        len(split.valid),
        len(split.test),
    )
    return kg, split


def _drop_overlap(split: DatasetSplit) -> None:
    """Keep the splits pairwise disjoint on (entity, attribute)."""
    seen = {(t.entity, t.attribute) for t in split.train}
    for name in ("valid", "test"):
        kept = []
        for triple in split.get(name):
            key = (triple.entity, triple.attribute)
            if key in seen:
                LOGGER.warning("Dropping %s triple %s already present in an earlier split", name, key)
                continue
            seen.add(key)
            kept.append(triple)
        setattr(split, name, kept)


def queries_from(triples: Iterable[NumericalTriple], with_target: bool = True) -> list[Query]:
    """Turn numerical triples into queries."""
    return [
        Query(t.entity, t.attribute, t.value if with_target else None) for t in triples
    ]


class AttributeStats:
    """Per-attribute min/max/count over the training split."""

    def __init__(self, records: dict[int, AttributeStat]) -> None:
        self.records = records

    def __getitem__(self, attribute: int) -> AttributeStat:
        try:
            return self.records[attribute]
        except KeyError as err:
            raise DegenerateAttributeError(f"no statistics for attribute id {attribute}") from err

    def __contains__(self, attribute: object) -> bool:
        return attribute in self.records

    @property
    def degenerate(self) -> list[str]:
        """Names of attributes whose normalization is undefined."""
        return [rec.attribute for rec in self.records.values() if rec.degenerate]

    def to_frame(self) -> pd.DataFrame:
        """Audit table with one row per attribute."""
        return pd.DataFrame(
            [
                {"attribute": r.attribute, "min": r.min, "max": r.max, "count": r.count}
                for _, r in sorted(self.records.items())
            ],
            columns=["attribute", "min", "max", "count"],
        )

    def write_report(self, path: str | Path) -> None:
        """Write the stats as a tab-separated report."""
        self.to_frame().to_csv(path, sep="\t", index=False, float_format="%.10g")

    def as_list(self) -> list[AttributeStat]:
        """Records in attribute id order."""
        return [self.records[key] for key in sorted(self.records)]

    @classmethod
    def from_list(cls, records: Sequence[AttributeStat], attributes: Vocabulary) -> AttributeStats:
        """Rebuild from serialized records."""
        return cls({attributes.id(rec.attribute): rec for rec in records})


def compute_attribute_stats(
    train: Iterable[NumericalTriple], attributes: Vocabulary
) -> AttributeStats:
    """Exact min/max/count/mean of every attribute over the training triples."""
    values: dict[int, list[float]] = {idx: [] for idx in range(len(attributes))}
    for triple in train:
        values[triple.attribute].append(triple.value)

    records = {}
    for idx, observed in values.items():
        name = attributes.name(idx)
        if not observed:
            LOGGER.warning("Attribute %s has no training values; normalization undefined", name)
            records[idx] = AttributeStat(attribute=name, min=0.0, max=0.0, count=0, mean=0.0)
            continue
        array = np.asarray(observed, dtype=np.float64)
        record = AttributeStat(
            attribute=name,
            min=float(array.min()),
            max=float(array.max()),
            count=int(array.size),
            mean=float(array.mean()),
        )
        if record.degenerate:
            LOGGER.warning("Attribute %s has a degenerate range [%s, %s]", name, record.min, record.max)
        records[idx] = record
    return AttributeStats(records)


def normalize(value: float, attribute: int, stats: AttributeStats) -> float:
    """Min-max normalize into [0, 1], clamping values outside the training range."""
    record = stats[attribute]
    if record.degenerate:
        raise DegenerateAttributeError(f"attribute {record.attribute} has no usable range")
    scaled = (value - record.min) / record.span
    return min(1.0, max(0.0, scaled))


def denormalize(value: float, attribute: int, stats: AttributeStats) -> float:
    """Inverse of normalize on [min, max]."""
    record = stats[attribute]
    if record.degenerate:
        raise DegenerateAttributeError(f"attribute {record.attribute} has no usable range")
    return record.min + value * record.span
