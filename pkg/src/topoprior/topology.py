"""Persistence pairs of 1D knot sequences and the regularizers built on them.

Extrema follow the left-sided plateau convention: on a plateau only its left
knot can be an extremum, and only if the plateau is entered from one side and
left to the other. Pairing processes local maxima in increasing value order and
matches each with the closer (higher) of its two neighboring unpaired minima.
Running the same procedure on ``-y`` pairs the minima; both sets together with
the global min/max pair make up the full pair multiset.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np

P1, P2, GLOBAL = "P1", "P2", "GLOBAL"


@dataclass(frozen=True)
class ExtremaReport:
    minima_indices: List[int]
    maxima_indices: List[int]
    minima_values: List[float]
    maxima_values: List[float]
    i_max: int | None
    global_min_index: int | None
    global_max_index: int | None


@dataclass(frozen=True)
class PersistencePair:
    lo: int
    hi: int
    persistence: float
    origin: str
    kappa: int = 0


@dataclass(frozen=True)
class PairSet:
    pairs: List[PersistencePair] = field(default_factory=list)
    values: np.ndarray | None = field(default=None, repr=False, compare=False)

    def of(self, origin: str) -> List[PersistencePair]:
        return [p for p in self.pairs if p.origin == origin]

    def persistences(self, origin: str | None = None) -> List[float]:
        return [p.persistence for p in self.pairs if origin is None or p.origin == origin]

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def to_csv(self, path=None, line: str | None = None, header: bool = True) -> str:
        """Persistence-diagram export, one row per pair.

        ``line`` prefixes every row with a label column (used for the rows and
        columns of a 2D field).
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["origin", "lo", "hi", "value_lo", "value_hi", "persistence", "kappa"]
        if header:
            writer.writerow((["line"] if line is not None else []) + cols)
        y = self.values
        for p in self.pairs:
            row = [p.origin, p.lo, p.hi, repr(float(y[p.lo])), repr(float(y[p.hi])),
                   repr(float(p.persistence)), p.kappa]
            writer.writerow(([line] if line is not None else []) + row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _as_vector(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("expected a 1D sequence with at least two values")
    if not np.all(np.isfinite(y)):
        raise ValueError("values must be finite")
    return y


def _extrema(y: np.ndarray):
    """Extremum knots in index order and a boolean array marking maxima."""
    m = y.size - 1
    d = np.sign(np.diff(y))
    # direction of the first change strictly after each knot (0 if none)
    nz = np.flatnonzero(d)
    pos = np.searchsorted(nz, np.arange(m))
    ahead = np.zeros(m + 1)
    ok = pos < nz.size
    ahead[:m][ok] = d[nz[pos[ok]]]
    behind = np.zeros(m + 1)
    behind[1:] = d  # sign(y_l - y_{l-1})
    is_min = np.zeros(m + 1, dtype=bool)
    is_max = np.zeros(m + 1, dtype=bool)
    is_min[1:m] = (behind[1:m] < 0) & (ahead[1:m] > 0)
    is_max[1:m] = (behind[1:m] > 0) & (ahead[1:m] < 0)
    is_min[0] = ahead[0] > 0
    is_max[0] = ahead[0] < 0
    is_min[m] = behind[m] < 0
    is_max[m] = behind[m] > 0
    idx = np.flatnonzero(is_min | is_max)
    return idx, is_max[idx]


def classify_extrema(y) -> ExtremaReport:
    y = _as_vector(y)
    idx, mx = _extrema(y)
    mins = [int(i) for i in idx[~mx]]
    maxs = [int(i) for i in idx[mx]]
    # argmin/argmax return the first (smallest-index) occurrence
    gmin = mins[int(np.argmin(y[mins]))] if mins else None
    gmax = maxs[int(np.argmax(y[maxs]))] if maxs else None
    return ExtremaReport(
        minima_indices=mins,
        maxima_indices=maxs,
        minima_values=[float(y[i]) for i in mins],
        maxima_values=[float(y[i]) for i in maxs],
        i_max=int(idx[-1]) if idx.size else None,
        global_min_index=gmin,
        global_max_index=gmax,
    )


def _pair_maxima(y: np.ndarray, idx: np.ndarray, is_max: np.ndarray) -> List[tuple]:
    """Core of the pairing procedure on precomputed extrema; returns ``(lo, hi)`` tuples."""
    n = idx.size
    if n < 3:
        return []
    vals = y[idx]
    prev = list(range(-1, n - 1))
    nxt = list(range(1, n + 1))
    nxt[-1] = -1
    last = int(idx[-1])
    positions = np.flatnonzero(is_max)
    # increasing value, ties by smaller knot index (positions are index-sorted)
    order = positions[np.argsort(vals[positions], kind="stable")]
    pairs = []
    for p in order.tolist():
        k = int(idx[p])
        if k == 0 or k == last:
            continue
        left, right = prev[p], nxt[p]
        if left < 0 and right < 0:
            continue
        v = vals[p]
        if right < 0:
            c = left
        elif left < 0:
            c = right
        else:
            # closer value wins; equal gaps go to the right-hand (larger) knot
            c = left if abs(v - vals[left]) < abs(v - vals[right]) else right
        kc = int(idx[c])
        pairs.append((kc, k) if kc < k else (k, kc))
        # unlink the processed maximum and its partner (adjacent in the list)
        a, b = (c, p) if c < p else (p, c)
        before, after = prev[a], nxt[b]
        if before >= 0:
            nxt[before] = after
        if after >= 0:
            prev[after] = before
    return pairs


def pair_algorithm2(y) -> PairSet:
    """Pairs formed by the local maxima of ``y``."""
    y = _as_vector(y)
    idx, mx = _extrema(y)
    raw = _pair_maxima(y, idx, mx)
    pairs = [PersistencePair(lo, hi, abs(float(y[hi] - y[lo])), P1) for lo, hi in raw]
    kappa = _nesting_depth(raw)
    pairs = [PersistencePair(p.lo, p.hi, p.persistence, P1, k) for p, k in zip(pairs, kappa)]
    return PairSet(pairs, y)


def _nesting_depth(raw: Sequence[tuple]) -> List[int]:
    """Chain order of each interval: 1 + number of enclosing intervals in the same set.

    The global pair is the root of every chain at order 0.
    """
    if not raw:
        return []
    order = sorted(range(len(raw)), key=lambda i: (raw[i][0], -raw[i][1]))
    depth = [0] * len(raw)
    stack: list = []
    for i in order:
        lo, hi = raw[i]
        while stack and raw[stack[-1]][1] < hi:
            stack.pop()
        depth[i] = len(stack) + 1
        stack.append(i)
    return depth


def _global_pair(y: np.ndarray, idx: np.ndarray, is_max: np.ndarray) -> tuple:
    mins, maxs = idx[~is_max], idx[is_max]
    gmin = int(mins[np.argmin(y[mins])]) if mins.size else int(np.argmin(y))
    gmax = int(maxs[np.argmax(y[maxs])]) if maxs.size else int(np.argmax(y))
    if gmin == gmax:
        return 0, y.size - 1
    return (gmin, gmax) if gmin < gmax else (gmax, gmin)


def _raw_pairs(y: np.ndarray):
    idx, mx = _extrema(y)
    p1 = _pair_maxima(y, idx, mx)
    p2 = _pair_maxima(-y, idx, ~mx)
    return p1, p2, _global_pair(y, idx, mx)


def pair_full(y) -> PairSet:
    """All pairs: maxima-driven, minima-driven (via ``-y``) and the global min/max pair."""
    y = _as_vector(y)
    p1, p2, g = _raw_pairs(y)
    pairs = []
    for origin, raw in ((P1, p1), (P2, p2)):
        for (lo, hi), k in zip(raw, _nesting_depth(raw)):
            pairs.append(PersistencePair(lo, hi, abs(float(y[hi] - y[lo])), origin, k))
    pairs.append(PersistencePair(g[0], g[1], abs(float(y[g[1]] - y[g[0]])), GLOBAL, 0))
    return PairSet(pairs, y)


def persistence_distance(y) -> float:
    """Sum of persistences over both pair sets, the global pair excluded."""
    y = _as_vector(y)
    p1, p2, _ = _raw_pairs(y)
    return float(sum(abs(y[hi] - y[lo]) for lo, hi in p1) + sum(abs(y[hi] - y[lo]) for lo, hi in p2))


def discrete_tv(y) -> float:
    y = _as_vector(y)
    return float(np.sum(np.abs(np.diff(y))))


def tp_weight(kappa, persistence, theta: float = 3.0, beta: float = 0.001, power: bool = False):
    """Pair weight ``(kappa + 1) * theta / (1 + beta * persistence)``.

    With ``power=True`` the numerator is ``(kappa + 1) ** theta`` instead.
    """
    kappa = np.asarray(kappa, dtype=float)
    num = (kappa + 1.0) ** theta if power else (kappa + 1.0) * theta
    out = num / (1.0 + beta * np.asarray(persistence, dtype=float))
    return out if out.ndim else float(out)


def _check_tp_params(theta, beta, lam):
    if not theta > 1:
        raise ValueError(f"theta must exceed 1, got {theta}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")


def _tp_sum(y: np.ndarray, theta: float, beta: float, power: bool) -> float:
    # unscaled weighted persistence sum over the full pair multiset
    p1, p2, g = _raw_pairs(y)
    total = 0.0
    for raw in (p1, p2):
        if not raw:
            continue
        arr = np.asarray(raw)
        pers = np.abs(y[arr[:, 1]] - y[arr[:, 0]])
        kappa = np.asarray(_nesting_depth(raw), dtype=float)
        total += float(np.sum(tp_weight(kappa, pers, theta, beta, power) * pers))
    pg = abs(float(y[g[1]] - y[g[0]]))
    total += tp_weight(0, pg, theta, beta, power) * pg
    return total


def tp_regularizer_1d(y, theta: float = 3.0, beta: float = 0.001, lam: float = 1.0,
                      power: bool = False) -> float:
    """``lam * sum(alpha_j * persistence_j)`` over every pair, global pair included."""
    _check_tp_params(theta, beta, lam)
    return lam * _tp_sum(_as_vector(y), theta, beta, power)


def tp_regularizer_2d(Q, theta: float = 3.0, beta: float = 0.001, lam: float = 1.0,
                      power: bool = False) -> float:
    """Row-wise plus column-wise 1D regularizer, ``lam`` applied once."""
    _check_tp_params(theta, beta, lam)
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or min(Q.shape) < 2:
        raise ValueError("expected a matrix with at least 2 rows and 2 columns")
    if not np.all(np.isfinite(Q)):
        raise ValueError("values must be finite")
    total = 0.0
    for row in Q:
        total += _tp_sum(row, theta, beta, power)
    for col in Q.T:
        total += _tp_sum(np.ascontiguousarray(col), theta, beta, power)
    return lam * total


def tv_2d(Q, hx: float = 1.0, hy: float = 1.0) -> float:
    """Isotropic discrete TV: ``sum hx*hy*|grad|`` with forward differences and zero
    difference past the last row/column."""
    Q = np.asarray(Q, dtype=float)
    dx = np.zeros_like(Q)
    dy = np.zeros_like(Q)
    dx[:-1, :] = (Q[1:, :] - Q[:-1, :]) / hx
    dy[:, :-1] = (Q[:, 1:] - Q[:, :-1]) / hy
    return float(hx * hy * np.sum(np.sqrt(dx**2 + dy**2)))


def tv_regularizer(y, lam: float = 1.0, hx: float | None = None, hy: float | None = None) -> float:
    """``lam * TV``: the discrete total variation in 1D, the isotropic form in 2D."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 1:
        return lam * discrete_tv(arr)
    if hx is None or hy is None:
        raise ValueError("2D total variation needs the grid spacings hx and hy")
    return lam * tv_2d(arr, hx, hy)


def pairs_2d_csv(Q, path=None) -> str:
    """Persistence diagrams of every row and column of a 2D field in one CSV."""
    Q = np.asarray(Q, dtype=float)
    chunks = []
    for i, row in enumerate(Q):
        chunks.append(pair_full(row).to_csv(line=f"row{i}", header=(i == 0)))
    for j, col in enumerate(Q.T):
        chunks.append(pair_full(col).to_csv(line=f"col{j}", header=False))
    text = "".join(chunks)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_signal_csv(path) -> np.ndarray:
    """Load a 1D signal: the last numeric column of a CSV (header and ``#`` lines skipped)."""
    values = []
    with open(path, newline="") as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            if not row:
                continue
            try:
                values.append(float(row[-1]))
            except ValueError:
                if values:
                    raise
    return _as_vector(values)
