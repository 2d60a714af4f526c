"""Graph builders and hypothesis strategies shared by the test suites"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chainsformer.engine.graph import (
    KnowledgeGraph,
    NumericalTriple,
    Query,
    RelationalTriple,
    Vocabulary,
)


def make_graph(
    edges: Iterable[tuple[str, str, str]], values: Iterable[tuple[str, str, float]]
) -> KnowledgeGraph:
    """Graph whose known values are exactly ``values``."""
    entities = Vocabulary("entity")
    relations = Vocabulary("relation")
    attributes = Vocabulary("attribute")
    triples = [
        RelationalTriple(entities.intern(h), relations.intern(r), entities.intern(t)) for h, r, t in edges
    ]
    known = [NumericalTriple(entities.intern(e), attributes.intern(a), float(v)) for e, a, v in values]
    return KnowledgeGraph.build(entities, relations, attributes, triples, known)


def write_rows(path: Path, rows: Sequence[Sequence[object]]) -> Path:
    path.write_text("".join("\t".join(str(part) for part in row) + "\n" for row in rows), encoding="utf-8")
    return path


@st.composite
def small_graphs(draw, max_entities: int = 8, max_edges: int = 8, relations: int = 3, attributes: int = 2):
    """(graph, query) pairs over a few entities with random edges and values."""
    n = draw(st.integers(min_value=2, max_value=max_entities))
    pair = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1])
    edges = draw(st.lists(st.tuples(pair, st.integers(0, relations - 1)), min_size=1, max_size=max_edges))
    values = draw(
        st.lists(
            st.tuples(
                st.integers(0, n - 1),
                st.integers(0, attributes - 1),
                st.floats(min_value=-100, max_value=100, allow_nan=False),
            ),
            min_size=1,
            max_size=2 * n,
            unique_by=lambda row: (row[0], row[1]),
        )
    )
    kg = make_graph(
        [(f"v{h}", f"r{r}", f"v{t}") for (h, t), r in edges],
        [(f"v{e}", f"a{a}", v) for e, a, v in values],
    )
    entity = draw(st.integers(0, len(kg.entities) - 1))
    attribute = draw(st.integers(0, len(kg.attributes) - 1))
    return kg, Query(entity, attribute)


@st.composite
def ball_points(draw, dim: int = 4, curvature: float = 1.0, max_radius: float = 0.9):
    """Points strictly inside the ball of radius 1/sqrt(c)."""
    direction = draw(
        arrays(np.float64, dim, elements=st.floats(min_value=-1, max_value=1, allow_subnormal=False))
    )
    radius = draw(st.floats(min_value=0, max_value=max_radius))
    norm = float(np.linalg.norm(direction))
    if norm < 1e-6:
        return np.zeros(dim)
    return direction / norm * radius / np.sqrt(curvature)


def random_ball_points(rng: np.random.Generator, count: int, dim: int, max_radius: float = 0.9) -> np.ndarray:
    directions = rng.normal(size=(count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * rng.uniform(0, max_radius, size=(count, 1))
