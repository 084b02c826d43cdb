"""Game-theoretic evaluation: Hodge decompositions, Elo/mElo ratings and Nash averaging."""

__version__ = "0.1.0"
