"""
Sign random projections as a similarity hash
============================================

Each hyperplane contributes one bit: which side of the plane a state falls on.
Two vectors at angle theta land on the same side of a random plane with
probability 1 - theta/pi, so nearby states tend to share codes.
"""

import math

import numpy as np

from lser import encode, jaccard, nearest_codes, new_hyperplanes
from lser.harness import validate_lsh

# A family of 8 planes in a 4-dimensional state space.
hp = new_hyperplanes(8, 4, seed=7)
s = np.array([1.0, 0.2, -0.3, 0.5])
print("code of s:            ", encode(hp, s))
print("code of s + tiny noise:", encode(hp, s + 1e-3))
print("code of -s:           ", encode(hp, -s))  # every bit flips

# The per-bit collision rate tracks the angular law.
rows, ok = validate_lsh(trials=10_000)
for r in rows:
    print(f"theta={math.degrees(r['theta']):5.1f} deg  empirical={r['empirical']:.4f}  expected={r['expected']:.4f}")
print("all within 0.02:", ok)

# When a query's code has no bucket, the closest occupied codes are found by
# Jaccard similarity of their 1-bit positions (ties broken lexicographically).
occupied = ["0110", "1110", "0001", "1000"]
for c in occupied:
    print(f"jaccard(0111, {c}) = {jaccard('0111', c):.3f}")
print("two nearest:", nearest_codes("0111", occupied, 2))
