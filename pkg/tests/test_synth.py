"""Tests for the synthetic graph generator."""

import json

import pytest

from chainsformer.engine.exceptions import ConfigError
from chainsformer.engine.graph import load_dataset
from chainsformer.engine.synth import DEFAULT_RULE, GenerativeRule, SynthSpec, generate


@pytest.mark.parametrize(
    "text, expected",
    [
        (DEFAULT_RULE, GenerativeRule("target", "source", ("r_a", "r_b"), 2.0, 0.0)),
        ("y = 0.5 * x + 3 via r", GenerativeRule("y", "x", ("r",), 0.5, 3.0)),
        ("y=-1.5*x-2.5 via r_1, r_2, r_3", GenerativeRule("y", "x", ("r_1", "r_2", "r_3"), -1.5, -2.5)),
    ],
)
def test_rule_parsing(text, expected):
    rule = GenerativeRule.parse(text)
    assert rule == expected
    assert GenerativeRule.parse(str(rule)) == rule


@pytest.mark.parametrize("text", ["target=2*source", "target=source via r", "=2*x via r", "y=2*x via"])
def test_bad_rules(text):
    with pytest.raises(ConfigError):
        GenerativeRule.parse(text)


def test_rule_apply():
    assert GenerativeRule.parse("y=3*x-1 via r").apply(2.0) == 5.0


def test_generation_is_deterministic(tmp_path):
    settings = SynthSpec(entities=90, distractor_relations=4, seed=7)
    first = generate(settings).write(tmp_path / "a")
    second = generate(settings).write(tmp_path / "b")
    for role in ("relational", "train", "valid", "test", "rules"):
        assert first[role].read_bytes() == second[role].read_bytes()
    other = generate(SynthSpec(entities=90, distractor_relations=4, seed=8)).write(tmp_path / "c")
    assert other["relational"].read_bytes() != first["relational"].read_bytes()


def test_every_target_has_its_generative_chain():
    graph = generate(SynthSpec(entities=60, distractor_relations=0, seed=1))
    into = {(r, t): h for h, r, t in graph.relational}
    sources = {e: v for e, a, v in graph.train if a == "source"}
    targets = [row for rows in (graph.train, graph.valid, graph.test) for row in rows if row[1] == "target"]

    assert len(targets) == 20
    for entity, _, value in targets:
        middle = into[("r_b", entity)]
        origin = into[("r_a", middle)]
        assert value == pytest.approx(2.0 * sources[origin])


def test_splits_and_noise(synthetic_files):
    graph = generate(SynthSpec(entities=60, distractor_relations=3, seed=0))
    linked = {h for h, _, _ in graph.relational} | {t for _, _, t in graph.relational}
    noise = [row for row in graph.train if row[1] == "noise"]
    assert all(entity in linked for entity, _, _ in noise)
    assert all(0.0 <= value <= 100.0 for _, _, value in noise)
    assert {attribute for _, attribute, _ in graph.valid + graph.test} == {"target"}
    assert (len(graph.valid), len(graph.test)) == (2, 2)
    assert {r for _, r, _ in graph.relational} <= {"r_a", "r_b", "noise_0", "noise_1", "noise_2"}

    kg, split = load_dataset(synthetic_files["relational"], synthetic_files["train"], synthetic_files["valid"], synthetic_files["test"])
    assert len(split.train) == len(graph.train)
    assert len(kg.entities) <= 60
    rules = json.loads(synthetic_files["rules"].read_text(encoding="utf-8"))
    assert rules[0]["text"] == DEFAULT_RULE


def test_two_rules_alternate():
    rules = [GenerativeRule.parse(DEFAULT_RULE), GenerativeRule.parse("target=0.5*source via r_c,r_d")]
    graph = generate(SynthSpec(entities=30, distractor_relations=0, rules=rules, seed=0))
    relations = [r for _, r, _ in graph.relational]
    assert relations.count("r_a") == relations.count("r_c") == 5


@pytest.mark.parametrize(
    "changes",
    [{"rules": []}, {"entities": 2}, {"distractor_relations": -1}],
)
def test_settings_validation(changes):
    with pytest.raises(ConfigError):
        SynthSpec(**changes)
