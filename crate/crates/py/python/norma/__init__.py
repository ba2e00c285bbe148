"""Contract analysis pipeline: English text to clause tables, formal models,
queries and model checking."""

import json

from ._norma import (
    NormaError,
    coml_to_cnl,
    coml_to_codsh,
    coml_to_uppaal,
    extract,
    semantic,
    syntactic,
    templates,
    tsv_to_coml,
)

__all__ = [
    "NormaError",
    "coml_to_cnl",
    "coml_to_codsh",
    "coml_to_uppaal",
    "extract",
    "list_templates",
    "semantic",
    "syntactic",
    "templates",
    "tsv_to_coml",
]


def list_templates():
    """The query templates as a list of dicts."""
    return json.loads(templates())
