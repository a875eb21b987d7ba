"""Compile a small probabilistic language to PCFG basic blocks and run SMC over them."""

from pathlib import Path

CORPUS = Path(__file__).parent / "corpus"


def corpus_path(name: str) -> Path:
    """Path of a bundled ``.cppl`` program, e.g. ``corpus_path("ssm")``."""
    return CORPUS / (name if name.endswith(".cppl") else name + ".cppl")
