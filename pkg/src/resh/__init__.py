"""Resh: an orchestration language and geometry-aware runtime for robot pools."""

__version__ = "0.1.0"
