"""
PCRPO toolkit - soft-switching constrained policy optimization.

Tabular CMDPs, gradient manipulation between reward and cost, TD policy
evaluation, the PCRPO/CRPO/SCRPO training loops and a command-line
harness for runs, sweeps and numerical verification.
"""

__version__ = "0.3.0"
