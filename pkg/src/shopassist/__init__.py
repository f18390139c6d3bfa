"""Customer-assistant pipeline: rule routing, intent classification, slot
filling, knowledge-graph QA, retrieval fallback and hybrid rerank chat."""

__version__ = "0.1.0"
