"""
Sampling cost versus buffer size
================================

A bucketed buffer only touches the bucket of the query, so with bucket sizes
held fixed its sampling latency should not depend on how many buckets exist.
A sum-tree walks a path of length log2(capacity).
"""

from lser.harness import bench_buffers

rows = bench_buffers(sizes=(6_400, 64_000), bucket_size=64, batch_size=32, ops=3_000)
print(f"{'buffer':8s} {'size':>7s} {'op':7s} {'median us':>10s}")
for r in rows:
    print(f"{r['buffer']:8s} {r['size']:7d} {r['op']:7s} {r['median_ns'] / 1e3:10.2f}")
