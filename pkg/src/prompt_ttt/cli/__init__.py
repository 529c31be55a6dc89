"""
CLI package for prompt_ttt.

This package implements the command-line interface.
No public API is exposed at this level.
"""
