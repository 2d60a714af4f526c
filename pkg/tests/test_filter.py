"""Tests for the hyperbolic chain filter."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from chainsformer.engine.exceptions import ConfigError, UnknownIdentifierError
from chainsformer.engine.filter import (
    FilterEmbeddings,
    affinity_score,
    audit,
    embed_chain,
    embed_chains,
    rank_chains,
    score_chains,
    select_top_k,
)
from chainsformer.engine.graph import Query
from chainsformer.engine.hyperbolic import distance, log_map_origin_array, mobius_add
from chainsformer.engine.retrieval import RAChain, sample_tree


def _embeddings(kg, space="hyperbolic", seed=0, dim=4):
    return FilterEmbeddings(np.random.default_rng(seed), len(kg.relations), len(kg.attributes), dim, space=space)


def _star_tree(star_graph):
    query = Query(star_graph.entities.id("S0"), star_graph.attributes.id("val"))
    return sample_tree(star_graph, query, walks=500, max_hops=2, rng_seed=0)


chain_rows = st.lists(
    st.tuples(
        st.integers(0, 3),
        st.lists(st.integers(0, 4), min_size=1, max_size=3),
        st.lists(st.integers(0, 9), min_size=2, max_size=4),
    ),
    min_size=1,
    max_size=12,
)


def _chains(rows):
    return [RAChain(attr, tuple(rels), 0, 0.0, tuple(path)) for attr, rels, path in rows]


def test_initial_points_are_near_the_origin(chain_graph):
    emb = _embeddings(chain_graph, dim=16)
    for table in (emb.relation_embeddings.data, emb.attribute_embeddings.data):
        assert np.all(np.linalg.norm(table, axis=1) <= 0.1)
    assert emb.relation_count == 6
    assert emb.attribute_count == 2


def test_unknown_space_and_identifiers(chain_graph):
    with pytest.raises(ConfigError):
        _embeddings(chain_graph, space="spherical")
    emb = _embeddings(chain_graph)
    with pytest.raises(UnknownIdentifierError):
        emb.relation(99)
    with pytest.raises(UnknownIdentifierError):
        emb.attribute(-1)
    with pytest.raises(UnknownIdentifierError):
        score_chains([RAChain(0, (1,), 0, 1.0, (1, 2))], 7, emb, 0.5)
    with pytest.raises(UnknownIdentifierError):
        embed_chains([RAChain(0, (42,), 0, 1.0, (1, 2))], emb)


def test_chain_embedding_is_a_left_fold(chain_graph):
    emb = _embeddings(chain_graph)
    chain = RAChain(0, (0, 1, 5), 0, 1.0, (0, 1, 2, 3))
    expected = mobius_add(mobius_add(emb.relation(0), emb.relation(1)), emb.relation(5))
    assert_allclose(embed_chain(chain, emb).coords, expected.coords, atol=1e-12)
    single = RAChain(0, (3,), 0, 1.0, (0, 1))
    assert_allclose(embed_chain(single, emb).coords, emb.relation(3).coords)


def test_euclidean_chain_embedding_is_a_sum(chain_graph):
    emb = _embeddings(chain_graph, space="euclidean")
    chain = RAChain(0, (0, 1, 5), 0, 1.0, (0, 1, 2, 3))
    table = emb.relation_embeddings.data
    assert_allclose(embed_chains([chain], emb)[0], table[0] + table[1] + table[5])


def test_lambda_weights_intra_and_inter_distance(chain_graph):
    emb = _embeddings(chain_graph)
    chain = RAChain(1, (0, 1), 0, 1.0, (0, 1, 2))
    intra = distance(emb.attribute(1), emb.attribute(0))
    inter = distance(embed_chain(chain, emb), emb.attribute(0))
    assert affinity_score(chain, 0, emb, 1.0) == pytest.approx(intra, rel=1e-9)
    assert affinity_score(chain, 0, emb, 0.0) == pytest.approx(inter, rel=1e-9)
    assert affinity_score(chain, 0, emb, 0.25) == pytest.approx(0.25 * intra + 0.75 * inter, rel=1e-9)


def test_token_table_uses_tangent_vectors(chain_graph):
    emb = _embeddings(chain_graph)
    table = emb.token_table().data
    assert table.shape == (2 + 6, 4)
    assert_allclose(table[:2], log_map_origin_array(emb.attribute_embeddings.data), atol=1e-12)
    assert_allclose(table[2:], log_map_origin_array(emb.relation_embeddings.data), atol=1e-12)
    flat = _embeddings(chain_graph, space="euclidean")
    assert_allclose(flat.token_table().data[2:], flat.relation_embeddings.data)


@given(chain_rows, st.data())
@settings(deadline=None)
def test_ranking_ignores_input_order(rows, data):
    chains = _chains(rows)
    scores = np.array(data.draw(st.lists(st.integers(0, 3), min_size=len(chains), max_size=len(chains))), float)
    k = data.draw(st.integers(1, len(chains)))
    perm = data.draw(st.permutations(range(len(chains))))
    picked = {chains[i] for i in rank_chains(scores, chains, k)}
    shuffled = [chains[i] for i in perm]
    picked_shuffled = {shuffled[i] for i in rank_chains(scores[list(perm)], shuffled, k)}
    assert picked == picked_shuffled
    assert len(rank_chains(scores, chains, k)) == k


@given(chain_rows, st.floats(min_value=0.01, max_value=100))
@settings(deadline=None)
def test_ranking_is_scale_invariant(rows, factor):
    chains = _chains(rows)
    scores = np.random.default_rng(len(chains)).random(len(chains))
    assert rank_chains(scores * factor, chains, 3) == rank_chains(scores, chains, 3)


def test_ties_prefer_shorter_chains():
    long = RAChain(0, (0, 1), 0, 0.0, (0, 1, 2))
    short = RAChain(0, (1,), 0, 0.0, (5, 2))
    assert rank_chains(np.zeros(2), [long, short], 1) == [1]


def test_top_k_keeps_the_most_relevant(star_graph):
    tree = _star_tree(star_graph)
    emb = _embeddings(star_graph, seed=3)
    enhanced = select_top_k(tree, emb, 2, 0.5)
    all_scores = score_chains(tree.chains, tree.query.attribute, emb, 0.5)
    rejected = [s for chain, s in zip(tree.chains, all_scores) if chain not in enhanced.chains]

    assert len(enhanced) == 2
    assert enhanced.toc_size == len(tree) == 5
    assert list(enhanced.scores) == sorted(enhanced.scores)
    assert max(enhanced.scores) <= min(rejected)

    largest = select_top_k(tree, emb, 2, 0.5, orientation="largest")
    assert list(largest.scores) == sorted(largest.scores, reverse=True)
    assert min(largest.scores) >= max(s for chain, s in zip(tree.chains, all_scores) if chain not in largest.chains)


def test_k_larger_than_tree_keeps_everything(star_graph):
    tree = _star_tree(star_graph)
    enhanced = select_top_k(tree, _embeddings(star_graph), 50, 0.5)
    assert sorted(enhanced.chains, key=RAChain.sort_key) == tree.chains
    with pytest.raises(ConfigError):
        select_top_k(tree, _embeddings(star_graph), 0, 0.5)


def test_random_selection_is_seeded(star_graph):
    tree = _star_tree(star_graph)
    emb = _embeddings(star_graph, space="random")
    first = select_top_k(tree, emb, 3, 0.5, rng_seed=(1, 2))
    second = select_top_k(tree, emb, 3, 0.5, rng_seed=(1, 2))
    assert first.chains == second.chains
    assert set(first.chains) <= set(tree.chains)
    assert np.all(first.scores == 0.0)
    assert emb.hyperbolic


def test_audit_uses_names(chain_graph):
    query = Query(chain_graph.entities.id("C"), chain_graph.attributes.id("x"))
    tree = sample_tree(chain_graph, query, walks=200, max_hops=2, rng_seed=0)
    record = audit(select_top_k(tree, _embeddings(chain_graph), 2, 0.5), chain_graph)
    assert (record.entity, record.attribute, record.toc_size) == ("C", "x", 3)
    assert len(record.selected) == 2
    for chain in record.selected:
        assert chain.entity_path[-1] == "C"
        assert set(chain.relations) <= {"r1", "r2", "r3"}
