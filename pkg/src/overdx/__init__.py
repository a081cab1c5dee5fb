"""Preemptive detection of machine-learning-induced overdiagnosis.

Clinical trajectories of correctly labelled patients are clustered with
active trace clustering; true-positive cases that cluster with true
negatives and show indistinguishable outcomes are flagged.
"""

__version__ = "0.1.0"
