"""Spatial audio motion understanding toolkit.

Stereo spatial features, a forward-only grounding-fusion reference,
multi-track ACCDDOA loss and SELD metrics, and a rule-grounded motion QA
benchmark with oracle / LLM answering and scoring.
"""

__version__ = "0.1.0"
