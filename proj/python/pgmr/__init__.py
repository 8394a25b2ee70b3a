"""Grounded SPARQL generation with a non-parametric URI memory."""

from ._pgmr import *  # noqa: F401,F403
from ._pgmr import (
    DEFAULT_THRESHOLD,
    HashedTrigramEmbedder,
    Memory,
    PlaceholderBinding,
    UriRef,
    ground_query,
    parse_pgmr,
    sparql_to_pgmr,
)

__version__ = "0.1.0"


def ground_text(text, entities, relations, embedder, threshold=DEFAULT_THRESHOLD):
    """Parses model output in the intermediate format and grounds it."""
    return ground_query(parse_pgmr(text), entities, relations, embedder, threshold)
