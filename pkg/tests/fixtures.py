"""Hand-tallied multi-label fixture: six samples over labels m1..m6, infeasible.

Samples (true -> predicted):
  1: {m1, m3} -> {m1, m3}        exact
  2: {m1}     -> {m1, m2}        one spurious label
  3: {m2, m3} -> {m3}            one missed label, nothing spurious
  4: {inf}    -> {m1}            missed and spurious
  5: {m1, m4} -> {m1, m5, m6}    m4 missed, split over m5 and m6
  6: {}       -> {m2}            no true label
"""
from fractions import Fraction as F

import numpy as np

TRUE = np.array([
    [1, 0, 1, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0],
    [0, 1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0],
])
PRED = np.array([
    [1, 0, 1, 0, 0, 0, 0],
    [1, 1, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 1, 1, 0],
    [0, 1, 0, 0, 0, 0, 0],
])

HAMMING = F(8, 42)
JACCARD = (1 + F(1, 2) + F(1, 2) + 0 + F(1, 4) + 0) / 6
SAMPLE_ACCURACY = F(1, 6)

# label -> (precision, recall, f1, support)
PER_LABEL = {
    "m1": (F(3, 4), F(1), F(6, 7), 3),
    "m2": (F(0), F(0), F(0), 1),
    "m3": (F(1), F(1), F(1), 2),
    "m4": (F(0), F(0), F(0), 1),
    "m5": (F(0), F(0), F(0), 0),
    "m6": (F(0), F(0), F(0), 0),
    "infeasible": (F(0), F(0), F(0), 1),
}
MICRO = (F(1, 2), F(5, 8), F(5, 9))
MACRO = (F(1, 4), F(2, 7), F(4, 15))
WEIGHTED = (F(17, 32), F(5, 8), F(85, 148))
SAMPLE = (F(17, 36), F(1, 2), F(17, 35))
LABEL_MEAN_F1 = F(13, 49)


def mlcm_counts() -> np.ndarray:
    """Rows m1..m6, infeasible, NTL; columns m1..m6, infeasible, NPL."""
    C = np.zeros((8, 8))
    C[0, 0] = 3  # m1 hit in samples 1, 2, 5
    C[2, 2] = 2  # m3 hit in samples 1, 3
    C[1, 7] = 1  # m2 missed with nothing spurious
    C[6, 0] = 1  # infeasible missed, m1 spurious
    C[3, 4] = C[3, 5] = 0.5  # m4 missed, m5 and m6 spurious
    C[7, 1] = 1  # no true label, m2 predicted
    return C
