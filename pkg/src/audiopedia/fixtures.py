"""Shipped fixture corpus: a small discriminative restaurant KB.

Twelve entities with five facts each. Two entities ("Grill House" and
"House Grill") share the same name tokens, so name-only linking cannot
tell them apart while their knowledge sentences can; the other names stay
unique. Several objects collide on purpose (six United States origins,
two Athens headquarters) to feed Yes pairs and retrieval pools.
"""

from __future__ import annotations

from dataclasses import replace
from importlib.resources import files
from pathlib import Path

from .kb import KnowledgeBase, load_kb
from .synth import RelationTemplates, SynthConfig, default_template_table


def fixture_kb_path() -> Path:
    return Path(str(files("audiopedia").joinpath("data/fixture_kb.tsv")))


def load_fixture_kb() -> KnowledgeBase:
    return load_kb(fixture_kb_path())


def fixture_template_table() -> dict[str, RelationTemplates]:
    """Stock templates plus entries for the fixture's extra relations.

    The origin-country Yes/No question is replaced with a form that names
    the relation, which the mock answerer extracts reliably from
    multi-sentence knowledge blocks.
    """
    table = default_template_table()
    table["origin country"] = replace(
        table["origin country"],
        m_aqa="Do these restaurants have the same origin country?",
    )
    table["headquartered in"] = RelationTemplates(
        s_aqa="Which city is {subject} headquartered in?",
        m_aqa="Are these restaurants headquartered in the same city?",
        r_aqa="How many of these restaurants are headquartered in {object}?",
    )
    table["named after"] = RelationTemplates(
        s_aqa="What was {subject} named after?",
        m_aqa="Are these restaurants named after the same thing?",
        r_aqa="How many of these restaurants are named after {object}?",
    )
    return table


def fixture_synth_config(seed: int = 0) -> SynthConfig:
    return SynthConfig(seed=seed, template_table=fixture_template_table())
