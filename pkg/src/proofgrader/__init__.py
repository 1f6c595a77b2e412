"""Rubric-based autograding of natural-language induction proofs."""

__version__ = "0.1.0"

RUBRIC_IDS = ("R1", "R2", "R3", "R4", "R5", "R6", "R7")
NUM_RUBRICS = len(RUBRIC_IDS)
