"""Query-guided random-walk retrieval of Relation-Attribute Chains"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from ..const import LOGGER
from .exceptions import RetrievalLimitError
from .graph import KnowledgeGraph, Query

ENUMERATION_LIMIT = 10**6

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class RAChain:
    """(a_p, r_1, ..., r_l, a_q) read from the source entity toward the query entity.

    ``relations[i]`` connects ``entity_path[i]`` to ``entity_path[i + 1]``.
    """

    source_attribute: int
    relations: tuple[int, ...]
    query_attribute: int
    source_value: float
    entity_path: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.relations)

    @property
    def source_entity(self) -> int:
        return self.entity_path[0]

    @property
    def pattern(self) -> tuple[int, tuple[int, ...]]:
        """Key used to group chains in key-chain reports."""
        return self.source_attribute, self.relations

    def sort_key(self) -> tuple:
        return self.entity_path, self.relations, self.source_attribute


@dataclass
class TreeOfChains:
    """A query and the chains retrieved for it."""

    query: Query
    chains: list[RAChain] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        """Set when retrieval found nothing; callers fall back to the attribute mean."""
        return not self.chains

    def __len__(self) -> int:
        return len(self.chains)


def _harvest(
    kg: KnowledgeGraph,
    query: Query,
    walk_entities: Sequence[int],
    walk_relations: Sequence[int],
    same_attribute_only: bool,
) -> Iterable[RAChain]:
    """Chains ending at the query whose source is the last entity of a walk prefix."""
    source = walk_entities[-1]
    entity_path = tuple(reversed(walk_entities))
    relations = tuple(kg.inverse(r) for r in reversed(walk_relations))
    for attribute, value in kg.numerical_index[source]:
        if same_attribute_only and attribute != query.attribute:
            continue
        if source == query.entity and attribute == query.attribute:
            continue
        yield RAChain(attribute, relations, query.attribute, value, entity_path)


def _unique_sorted(chains: Iterable[RAChain]) -> list[RAChain]:
    unique = {chain.sort_key(): chain for chain in chains}
    return [unique[key] for key in sorted(unique)]


def sample_tree(
    kg: KnowledgeGraph,
    query: Query,
    walks: int,
    max_hops: int,
    rng_seed: Seed,
    same_attribute_only: bool = False,
) -> TreeOfChains:
    """Run ``walks`` uniform random walks of up to ``max_hops`` steps from the query entity.

    Every entity a walk reaches emits one chain per known attribute. A walk stops at the
    first step that would revisit an entity.
    """
    if not kg.adjacency[query.entity]:
        LOGGER.debug("Query entity %s has no edges", kg.entities.name(query.entity))
        return TreeOfChains(query)

    draws = np.random.default_rng(rng_seed).random((walks, max_hops))
    found: list[RAChain] = []
    for row in draws:
        entities = [query.entity]
        relations: list[int] = []
        current = query.entity
        for u in row:
            edges = kg.adjacency[current]
            if not edges:
                break
            relation, neighbor = edges[int(u * len(edges))]
            if neighbor in entities:
                break
            entities.append(neighbor)
            relations.append(relation)
            found.extend(_harvest(kg, query, entities, relations, same_attribute_only))
            current = neighbor

    tree = TreeOfChains(query, _unique_sorted(found))
    if tree.empty:
        LOGGER.debug(
            "Empty Tree of Chains for (%s, %s)",
            kg.entities.name(query.entity),
            kg.attributes.name(query.attribute),
        )
    return tree


def enumerate_all_chains(
    kg: KnowledgeGraph,
    query: Query,
    max_hops: int,
    limit: int = ENUMERATION_LIMIT,
    same_attribute_only: bool = False,
) -> list[RAChain]:
    """Every cycle-free chain of at most ``max_hops`` relations ending at the query entity."""
    found: list[RAChain] = []
    visited_paths = 0
    stack: list[tuple[list[int], list[int]]] = [([query.entity], [])]
    while stack:
        entities, relations = stack.pop()
        for relation, neighbor in kg.adjacency[entities[-1]]:
            if neighbor in entities:
                continue
            visited_paths += 1
            if visited_paths > limit:
                raise RetrievalLimitError(f"more than {limit} paths within {max_hops} hops")
            next_entities = [*entities, neighbor]
            next_relations = [*relations, relation]
            found.extend(_harvest(kg, query, next_entities, next_relations, same_attribute_only))
            if len(next_relations) < max_hops:
                stack.append((next_entities, next_relations))
    return _unique_sorted(found)
