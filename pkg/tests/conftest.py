import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from topiclab.rng import Rng, uniform_array


def gaussian_blobs(seed: int, centers: np.ndarray, n_per: int, scale: float = 1.0):
    """Deterministic blob sampler (Box-Muller over the splitmix stream)."""
    k, dim = centers.shape
    points = []
    labels = []
    for b in range(k):
        u = uniform_array(seed * 1000 + b * 2, n_per * dim, 1e-12, 1.0)
        v = uniform_array(seed * 1000 + b * 2 + 1, n_per * dim, 0.0, 1.0)
        normal = np.sqrt(-2.0 * np.log(u)) * np.cos(2.0 * np.pi * v)
        points.append(centers[b] + scale * normal.reshape(n_per, dim))
        labels += [b] * n_per
    return np.vstack(points), np.asarray(labels)


def random_points(seed: int, n: int, dim: int, lo: float = -5.0, hi: float = 5.0):
    return uniform_array(seed, n * dim, lo, hi).reshape(n, dim)


TOPIC_VOCAB = {
    0: ["mask", "masks", "wearing", "cloth", "cover", "face", "n95", "mandate"],
    1: ["vaccine", "vaccines", "dose", "shot", "mrna", "jab", "booster", "trial"],
    2: ["lab", "wuhan", "origin", "leak", "virus", "bat", "market", "china"],
    3: ["cure", "vitamin", "garlic", "bleach", "remedy", "treatment", "drink", "hot"],
}
FILLER = ["people", "report", "claim", "video", "news", "online", "post", "share"]


def synthetic_topic_corpus(seed: int, docs_per_topic: int = 30, words_per_doc: int = 30):
    """Four planted topics with disjoint marker vocabulary plus shared filler."""
    rng = Rng(seed)
    rows = []
    for topic, vocab in TOPIC_VOCAB.items():
        for d in range(docs_per_topic):
            words = []
            for _ in range(words_per_doc):
                pool = vocab if rng.randrange(100) < 80 else FILLER
                words.append(pool[rng.randrange(len(pool))])
            rows.append({
                "id": f"t{topic}d{d:03d}",
                "text": " ".join(words),
                "country": "Atlantis",
                "language": "en",
                "label": "fake",
                "topic": topic,
            })
    return rows


@pytest.fixture(scope="session")
def mock_provider_cmd():
    return f"{sys.executable} -m topiclab.mock_provider"
