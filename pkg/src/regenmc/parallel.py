"""Replication-level parallelism.

Each work item carries its own derived seed, so results are independent of
scheduling; the collector preserves item order, keeping outputs byte-stable
for any worker count.
"""

from concurrent.futures import ProcessPoolExecutor


def pool_map(fn, items, jobs: int = 1):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))
