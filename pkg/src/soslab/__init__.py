"""Sum-of-squares relaxations, rounding and lower-bound tooling at desk scale."""

__version__ = "0.1.0"
