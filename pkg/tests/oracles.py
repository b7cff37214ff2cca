"""Independent reference implementations used only by the tests."""

import numpy as np


def sublevel_persistence(y):
    """Finite 0-dimensional sublevel persistences of a path graph (elder rule).

    Knots enter in increasing value order; when a knot joins two components the
    one with the higher minimum dies there.  Assumes distinct values.
    """
    y = np.asarray(y, dtype=float)
    parent = {}
    birth = {}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    deaths = []
    for i in np.argsort(y, kind="stable"):
        i = int(i)
        parent[i], birth[i] = i, y[i]
        for j in (i - 1, i + 1):
            if j not in parent:
                continue
            a, b = find(i), find(j)
            if a == b:
                continue
            young, old = (a, b) if birth[a] > birth[b] else (b, a)
            # joining the knot's own fresh component has zero persistence
            if birth[young] < y[i]:
                deaths.append(y[i] - birth[young])
            parent[young] = old
    return sorted(deaths)


def all_persistences(y):
    """Finite persistences of y and of -y, i.e. the P1 and P2 multisets."""
    y = np.asarray(y, dtype=float)
    return sublevel_persistence(y), sublevel_persistence(-y)


def brute_tv(y):
    return float(sum(abs(b - a) for a, b in zip(y[:-1], y[1:])))
