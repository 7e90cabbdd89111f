"""Static-analysis + LLM pipeline for decompiled smart-contract
pseudocode: dependency-graph extraction, slicing-guided prompting, and
type- and behavior-verified application of the replies."""

__version__ = "0.1.0"
