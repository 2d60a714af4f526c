"""Synthetic knowledge graphs with known generative chains.

A rule ``target=2*source via r_a,r_b`` plants instances
``(v_p, r_a, v_1), (v_1, r_b, v_q)`` with ``n_q = 2 · n_p`` on fresh entities. Random
distractor relations and a noise attribute are laid over the whole graph.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..const import LOGGER
from .exceptions import ConfigError

RULE_PATTERN = re.compile(
    r"^\s*(?P<target>\w+)\s*=\s*(?P<alpha>[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*\*\s*(?P<source>\w+)"
    r"\s*(?:(?P<sign>[-+])\s*(?P<beta>\d*\.?\d+(?:[eE][-+]?\d+)?))?"
    r"\s+via\s+(?P<path>\w+(?:\s*,\s*\w+)*)\s*$"
)

RELATIONAL_FILE = "relational.tsv"
SPLIT_FILES = {"train": "train.tsv", "valid": "valid.tsv", "test": "test.tsv"}
RULES_FILE = "rules.json"


@dataclass(frozen=True)
class GenerativeRule:
    """n_target = alpha · n_source + beta along a relation path."""

    target: str
    source: str
    relations: tuple[str, ...]
    alpha: float
    beta: float = 0.0

    @classmethod
    def parse(cls, text: str) -> GenerativeRule:
        match = RULE_PATTERN.match(text)
        if match is None:
            raise ConfigError(f"cannot parse rule {text!r}; expected 'target=2*source via r_a,r_b'")
        beta = float(match["beta"]) if match["beta"] else 0.0
        if match["sign"] == "-":
            beta = -beta
        relations = tuple(part.strip() for part in match["path"].split(","))
        return cls(match["target"], match["source"], relations, float(match["alpha"]), beta)

    def apply(self, value: float) -> float:
        return self.alpha * value + self.beta

    def __str__(self) -> str:
        offset = f"{'+' if self.beta >= 0 else '-'}{abs(self.beta):g}" if self.beta else ""
        return f"{self.target}={self.alpha:g}*{self.source}{offset} via {','.join(self.relations)}"


DEFAULT_RULE = "target=2*source via r_a,r_b"


@dataclass
class SynthSpec:
    """Generator settings."""

    entities: int = 500
    distractor_relations: int = 10
    distractor_edges: int | None = None
    rules: list[GenerativeRule] = field(default_factory=lambda: [GenerativeRule.parse(DEFAULT_RULE)])
    source_range: tuple[float, float] = (0.0, 50.0)
    noise_attribute: str = "noise"
    noise_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.rules:
            raise ConfigError("at least one generative rule is required")
        needed = min(len(rule.relations) + 1 for rule in self.rules)
        if self.entities < needed:
            raise ConfigError(f"{self.entities} entities cannot hold a single rule instance")
        if self.distractor_relations < 0:
            raise ConfigError("distractor_relations cannot be negative")


@dataclass
class SyntheticKG:
    """Generated triples by file."""

    relational: list[tuple[str, str, str]]
    train: list[tuple[str, str, float]]
    valid: list[tuple[str, str, float]]
    test: list[tuple[str, str, float]]
    rules: list[GenerativeRule]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        """Write the TSV files plus a rules summary; returns the paths by role."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"relational": out_dir / RELATIONAL_FILE}
        paths["relational"].write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in self.relational), encoding="utf-8")
        for split, name in SPLIT_FILES.items():
            paths[split] = out_dir / name
            rows = getattr(self, split)
            paths[split].write_text("".join(f"{e}\t{a}\t{v!r}\n" for e, a, v in rows), encoding="utf-8")
        paths["rules"] = out_dir / RULES_FILE
        summary = [{**asdict(rule), "relations": list(rule.relations), "text": str(rule)} for rule in self.rules]
        paths["rules"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        LOGGER.info("Wrote synthetic graph to %s", out_dir)
        return paths


def generate(settings: SynthSpec) -> SyntheticKG:
    """Plant rule instances on disjoint entities, then add distractors and noise."""
    rng = np.random.default_rng(settings.seed)
    names = [f"e{i:04d}" for i in range(settings.entities)]
    order = rng.permutation(settings.entities)

    relational: list[tuple[str, str, str]] = []
    sources: list[tuple[str, str, float]] = []
    targets: list[tuple[str, str, float]] = []
    cursor, turn = 0, 0
    while True:
        rule = settings.rules[turn % len(settings.rules)]
        size = len(rule.relations) + 1
        if cursor + size > settings.entities:
            break
        members = [names[i] for i in order[cursor : cursor + size]]
        for head, relation, tail in zip(members, rule.relations, members[1:]):
            relational.append((head, relation, tail))
        value = float(rng.uniform(*settings.source_range))
        sources.append((members[0], rule.source, value))
        targets.append((members[-1], rule.target, rule.apply(value)))
        cursor += size
        turn += 1

    edges = settings.entities if settings.distractor_edges is None else settings.distractor_edges
    if settings.distractor_relations:
        for _ in range(edges):
            head, tail = rng.choice(settings.entities, size=2, replace=False)
            relation = f"noise_{int(rng.integers(settings.distractor_relations))}"
            relational.append((names[head], relation, names[tail]))

    linked = {h for h, _, _ in relational} | {t for _, _, t in relational}
    noise = [
        (name, settings.noise_attribute, float(rng.uniform(0.0, 100.0)))
        for name in names
        if name in linked and rng.random() < settings.noise_fraction
    ]

    shuffled = [targets[i] for i in rng.permutation(len(targets))]
    n_train = int(round(len(shuffled) * 0.8))
    n_valid = int(round(len(shuffled) * 0.1))
    return SyntheticKG(
        relational=relational,
        train=sources + noise + shuffled[:n_train],
        valid=shuffled[n_train : n_train + n_valid],
        test=shuffled[n_train + n_valid :],
        rules=list(settings.rules),
    )
