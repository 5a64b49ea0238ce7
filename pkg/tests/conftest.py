import random

import pytest

from coplan.modelio import BlockWordsSpec, figure_layout_spec, make_blockwords, word_goal


@pytest.fixture(scope="session")
def demo_spec():
    return figure_layout_spec()


@pytest.fixture(scope="session")
def demo(demo_spec):
    """Two-actor turn-taking demo problem plus word goals."""
    problem, goals = make_blockwords(demo_spec)
    return problem, dict(zip(demo_spec.words, goals))


@pytest.fixture(scope="session")
def solo(demo_spec):
    """Single-actor demo instance (the cost-table model)."""
    spec = BlockWordsSpec(stacks=demo_spec.stacks, words=demo_spec.words, actors=("user",))
    problem, goals = make_blockwords(spec)
    return problem, dict(zip(spec.words, goals))


@pytest.fixture(scope="session")
def small6():
    """Six-block instance whose full state space is exhaustible."""
    spec = BlockWordsSpec(
        stacks=(("t",), ("r", "e", "h"), ("f",), ("a",)),
        words=("father", "ther", "fat", "rate", "heat"),
        actors=("user",),
    )
    problem, goals = make_blockwords(spec)
    return problem, dict(zip(spec.words, goals))


SOLO_COSTS = {
    "father": 6000,
    "mother": 6000,
    "master": 10000,
    "faster": 10000,
    "later": 8000,
    "water": 8000,
}


@pytest.fixture(scope="session")
def solo_costs():
    return dict(SOLO_COSTS)


def random_small_instance(rng: random.Random, max_blocks: int = 6):
    """A random <=6-block single-actor instance with a random chain goal."""
    n = rng.randint(3, max_blocks)
    letters = rng.sample("abcdefghij", n)
    blocks = list(letters)
    rng.shuffle(blocks)
    stacks = []
    i = 0
    while i < len(blocks):
        height = rng.randint(1, min(3, len(blocks) - i))
        stacks.append(tuple(blocks[i:i + height]))
        i += height
    word_len = rng.randint(2, n)
    word = "".join(rng.sample(letters, word_len))
    spec = BlockWordsSpec(stacks=tuple(stacks), words=(word,), actors=("user",))
    problem, goals = make_blockwords(spec)
    return problem, word, goals[0]
