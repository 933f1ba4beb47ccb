"""Time series produced by a quench run, shared by both engines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams


@dataclass
class QuenchTrajectory:
    """Concurrence ``C_{1,N}(t)`` on a sampling grid plus engine diagnostics.

    ``discarded_weight`` and ``max_bond`` are per-sample cumulative truncation
    weight and largest bond dimension; the exact engine fills them with 0 and
    the full Hilbert-space bond bound respectively.
    """

    params: ModelParams | None
    engine: str
    times: np.ndarray
    concurrence: np.ndarray
    discarded_weight: np.ndarray = None
    max_bond: np.ndarray = None
    extras: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.concurrence = np.asarray(self.concurrence, dtype=float)
        n = len(self.times)
        if self.discarded_weight is None:
            self.discarded_weight = np.zeros(n)
        if self.max_bond is None:
            self.max_bond = np.zeros(n, dtype=int)
        self.discarded_weight = np.asarray(self.discarded_weight, dtype=float)
        self.max_bond = np.asarray(self.max_bond, dtype=int)
        self.validate()

    def validate(self):
        n = len(self.times)
        if not (len(self.concurrence) == len(self.discarded_weight) == len(self.max_bond) == n):
            raise ValueError("trajectory series lengths differ")
        if n and (self.times[0] != 0 or np.any(np.diff(self.times) <= 0)):
            raise ValueError("trajectory times must start at 0 and increase strictly")
        if n and (self.concurrence.min() < 0 or self.concurrence.max() > 1):
            raise ValueError("concurrence outside [0, 1]")

    def __len__(self):
        return len(self.times)
