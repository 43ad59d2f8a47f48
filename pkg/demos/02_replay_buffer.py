"""
Bucketed replay with reward-ordered buckets
===========================================

Transitions are filed under the hash code of their state.  Each bucket is kept
in ascending reward order, which makes "give me the best b relevant
transitions" a slice.
"""

import numpy as np

from lser import LserBuffer, Transition, new_hyperplanes

rng = np.random.default_rng(0)
hp = new_hyperplanes(3, 2, seed=1)
buf = LserBuffer(capacity=12, hyperplanes=hp, eps_max=1.0, seed=0)


def transition(state, reward):
    state = np.asarray(state, dtype=float)
    return Transition(state, np.zeros(1), False, state, float(reward))


# Fill the buffer with states scattered around the unit circle.
for _ in range(12):
    angle = rng.uniform(0, 2 * np.pi)
    buf.push(transition([np.cos(angle), np.sin(angle)], rng.integers(0, 10)))

for code in sorted(buf.table):
    print(code, buf.table[code].rewards)

# Greedy sampling (eps_max = 1) returns the top rewards of the query's bucket.
# Query with a state from the fullest bucket.
fullest = max(buf.table, key=lambda c: len(buf.table[c]))
query = buf.table[fullest].items[0].state
print("query code", buf.code_of(query), "-> greedy batch rewards", [t.reward for t in buf.sample(2, query)])

# With eps_max = 0 the same call draws uniformly inside the bucket.
buf.eps_max = 0.0
print("uniform batch rewards", [t.reward for t in buf.sample(2, query)])

# Once full, a new transition only gets in by beating its bucket's minimum.
code = buf.code_of(query)
low = buf.table[code].rewards[0]
print("full buffer, push below minimum accepted?", buf.push(transition(query, low - 1)))
print("full buffer, push above minimum accepted?", buf.push(transition(query, 100)))
print(code, buf.table[code].rewards)
print("size, buckets, min reward, max reward:", buf.stats())
