"""Bloom-filter record encryption (double hashing) and a fully automated attack on it.

Modules:
    bitvec      fixed-length bit vectors and filter corpora
    encoder     preprocessing, tagged bigrams, keyed double hashing
    popgen      frequency lists and synthetic populations
    atoms       atom detection over a filter corpus
    assign      co-occurrence matrices and the swap hill climber
    reconstruct Dice matching against reference lists, scoring
    pipeline    file-based stages and the end-to-end driver
"""

from .bitvec import BloomFilter, FilterCorpus, IncompatibleFiltersError
from .encoder import Encoder, HashKeys, IdentifierTag, Record, TaggedBigram, extract_bigrams, preprocess
from .atoms import Atom, detect_atoms, weight_probability
from .assign import build_D, build_E, objective, optimize, swap_delta
from .reconstruct import dice, evaluate, match_reference

__version__ = "0.1.0"

__all__ = [
    "Atom", "BloomFilter", "Encoder", "FilterCorpus", "HashKeys", "IdentifierTag",
    "IncompatibleFiltersError", "Record", "TaggedBigram", "build_D", "build_E", "detect_atoms",
    "dice", "evaluate", "extract_bigrams", "match_reference", "objective", "optimize",
    "preprocess", "swap_delta", "weight_probability",
]
