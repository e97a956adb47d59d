"""Building-block tokenization and molecule-refinement toolkit."""

__version__ = "0.1.0"
