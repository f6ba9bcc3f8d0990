"""Paths of the data files shipped with the package."""

from pathlib import Path

_DIR = Path(__file__).parent

PALETTE = _DIR / "ade20k_palette.txt"
TAXONOMY = _DIR / "taxonomy.tsv"
SUBSTITUTIONS = _DIR / "substitutions.tsv"
