"""Topic-modeling engine: embeddings -> manifold reduction -> density
clustering -> topic extraction, with a DBCV sweep harness and coherence
evaluation."""

__version__ = "0.1.0"
