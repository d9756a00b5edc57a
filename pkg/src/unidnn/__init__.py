"""OFDM link simulator with LS/MMSE and universal deep-learning receivers."""

__version__ = "0.1.0"
