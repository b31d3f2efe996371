"""Collaborative stance detection.

Texts, targets, and stance labels are tied together through topic
distributions inferred by per-stance LDA models; a heterogeneous graph over
texts and topic/label nodes is propagated with a small NGCF-style network
trained contrastively; prediction combines a semantic score (target-attended
token representation against label embeddings) with a distributed score
(topic-composed representation against propagated topic embeddings).
"""

__version__ = "0.1.0"
