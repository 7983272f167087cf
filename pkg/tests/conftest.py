import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seed_embed.schedule import make_scaled_linear_schedule  # noqa: E402


@pytest.fixture(scope="session")
def sched():
    return make_scaled_linear_schedule(1000, 0.00085, 0.012)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def trained_synthetic(sched):
    """Default synthetic corpus (seed 0) and a model trained on its train split."""
    from seed_embed.corpus import SynthConfig, generate_corpus
    from seed_embed.training import TrainConfig, train

    corpus = generate_corpus(SynthConfig(dim=16, n_speakers=20, utts_per_speaker=10, seed=0))
    model, hist = train(corpus.subset("train"), TrainConfig(groups_per_batch=4, seed=0), sched)
    return corpus, model, np.array(hist)
