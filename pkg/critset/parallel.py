"""Order-preserving worker pool for independent work items."""

from concurrent.futures import ThreadPoolExecutor


def map_ordered(fn, items, threads=1):
    """
    Apply fn to every item, returning results in item order.

    Results never depend on the worker count: reduction order is the item
    index, not completion order.
    """
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
