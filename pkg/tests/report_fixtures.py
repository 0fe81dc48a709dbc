"""Frozen confusion-matrix fixtures for the two reference evaluation reports.

Each matrix was reconstructed by hand from per-class precision, recall and
support values (diagonal = recall * support, column sums = diagonal /
precision, off-diagonal mass distributed consistently with both margins) and
is frozen here together with the metric values it must reproduce.
"""

import numpy as np

# supports {3, 3, 159, 7, 7, 5}, 164/184 correct
BASELINE_CM = np.array([
    [3, 0, 0, 0, 0, 0],
    [0, 2, 0, 0, 0, 1],
    [1, 1, 153, 0, 3, 1],
    [0, 0, 3, 0, 3, 1],
    [0, 1, 1, 0, 5, 0],
    [0, 0, 1, 0, 3, 1],
])

BASELINE_EXPECTED = {
    "precision": ["0.75", "0.50", "0.97", "0.00", "0.36", "0.25"],
    "recall": ["1.00", "0.67", "0.96", "0.00", "0.71", "0.20"],
    "f1": ["0.86", "0.57", "0.97", "0.00", "0.48", "0.22"],
    "support": [3, 3, 159, 7, 7, 5],
    "accuracy": "0.89",
    "macro": ["0.47", "0.59", "0.52"],
    "weighted": ["0.88", "0.89", "0.88"],
}

# supports {3, 3, 159, 7, 7, 5}, 171/184 correct
SEMI_CM = np.array([
    [1, 0, 1, 0, 0, 1],
    [0, 0, 0, 1, 1, 1],
    [0, 0, 159, 0, 0, 0],
    [0, 0, 2, 3, 1, 1],
    [0, 0, 0, 0, 7, 0],
    [0, 0, 2, 2, 0, 1],
])

SEMI_EXPECTED = {
    "precision": ["1.00", "0.00", "0.97", "0.50", "0.78", "0.25"],
    "recall": ["0.33", "0.00", "1.00", "0.43", "1.00", "0.20"],
    "f1": ["0.50", "0.00", "0.98", "0.46", "0.88", "0.22"],
    "support": [3, 3, 159, 7, 7, 5],
    "accuracy": "0.93",
    "macro": ["0.58", "0.49", "0.51"],
    "weighted": ["0.91", "0.93", "0.92"],
}
