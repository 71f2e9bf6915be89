"""Step graphons and bipartite sampling.

A step graphon is piecewise constant on a rectangular grid of half-open cells
``[row_breaks[a], row_breaks[a+1]) x [col_breaks[b], col_breaks[b+1])``; the
coordinate value 1 belongs to the last cell.  All randomness goes through
:func:`make_rng`, a Philox (counter-based) generator keyed by a
``numpy.random.SeedSequence``.  Child streams are derived from a master seed
and an integer key tuple, so replicates computed in any order or in any
process see the same bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphonError(ValueError):
    pass


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox stream for ``seed`` split by the integer path ``keys``."""
    if seed < 0 or any(k < 0 for k in keys):
        raise GraphonError("seeds and split keys must be non-negative integers")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def _check_breaks(breaks, name):
    b = np.asarray(breaks, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise GraphonError(f"{name} needs at least two entries")
    if b[0] != 0.0 or b[-1] != 1.0:
        raise GraphonError(f"{name} must start at 0 and end at 1, got {b[0]!r}..{b[-1]!r}")
    if np.any(np.diff(b) <= 0):
        raise GraphonError(f"{name} must be strictly increasing")
    return b


@dataclass(frozen=True)
class StepGraphon:
    row_breaks: np.ndarray
    col_breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rb = _check_breaks(self.row_breaks, "row_breaks")
        cb = _check_breaks(self.col_breaks, "col_breaks")
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape != (rb.size - 1, cb.size - 1):
            raise GraphonError(
                f"values shape {v.shape} does not match grid {(rb.size - 1, cb.size - 1)}"
            )
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise GraphonError("graphon values must lie in [0, 1]")
        for name, arr in (("row_breaks", rb), ("col_breaks", cb), ("values", v)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def row_widths(self) -> np.ndarray:
        return np.diff(self.row_breaks)

    @property
    def col_widths(self) -> np.ndarray:
        return np.diff(self.col_breaks)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def row_cells(self, x) -> np.ndarray:
        return cell_index(self.row_breaks, x)

    def col_cells(self, y) -> np.ndarray:
        return cell_index(self.col_breaks, y)

    def __eq__(self, other):
        if not isinstance(other, StepGraphon):
            return NotImplemented
        return (
            np.array_equal(self.row_breaks, other.row_breaks)
            and np.array_equal(self.col_breaks, other.col_breaks)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def cell_index(breaks: np.ndarray, t) -> np.ndarray:
    """Index of the half-open cell holding each coordinate; 1.0 maps to the last cell."""
    t = np.asarray(t, dtype=float)
    if t.size and (np.any(~np.isfinite(t)) or t.min() < 0.0 or t.max() > 1.0):
        raise GraphonError("coordinates must lie in [0, 1]")
    idx = np.searchsorted(breaks, t, side="right") - 1
    return np.minimum(idx, breaks.size - 2)


def make_step_graphon(row_breaks, col_breaks, values) -> StepGraphon:
    return StepGraphon(np.asarray(row_breaks, float), np.asarray(col_breaks, float),
                       np.asarray(values, float))


def constant_graphon(p: float) -> StepGraphon:
    return make_step_graphon([0.0, 1.0], [0.0, 1.0], [[p]])


def eval_graphon(g: StepGraphon, x, y):
    """omega(x, y); scalars give a float, arrays broadcast elementwise."""
    vals = g.values[g.row_cells(x), g.col_cells(y)]
    return float(vals) if np.ndim(vals) == 0 else vals


def conditional_mean_matrix(g: StepGraphon, x, y) -> np.ndarray:
    """W[i, j] = omega(x[i], y[j])."""
    rc = g.row_cells(np.atleast_1d(np.asarray(x, float)))
    cc = g.col_cells(np.atleast_1d(np.asarray(y, float)))
    if rc.size == 0 or cc.size == 0:
        return np.zeros((rc.size, cc.size))
    return g.values[np.ix_(rc, cc)]


@dataclass(frozen=True)
class BipartiteSample:
    x: np.ndarray
    y: np.ndarray
    W: np.ndarray
    A: np.ndarray
    seed: int
    graphon: StepGraphon = field(repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.x.size

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def row_cells(self) -> np.ndarray:
        return self.graphon.row_cells(self.x)

    @property
    def col_cells(self) -> np.ndarray:
        return self.graphon.col_cells(self.y)


def sample_bipartite(g: StepGraphon, m: int, n: int, seed: int, *keys: int) -> BipartiteSample:
    """Draw x, y ~ U[0,1] i.i.d. and A[i, j] ~ Bernoulli(omega(x_i, y_j)) independently.

    The stream is ``make_rng(seed, *keys)``; draws happen in the fixed order
    x, y, then the m*n uniforms thresholded against W.
    """
    if m < 1 or n < 1:
        raise GraphonError("m and n must both be at least 1")
    rng = make_rng(seed, *keys)
    x = rng.random(m)
    y = rng.random(n)
    W = conditional_mean_matrix(g, x, y)
    A = (rng.random((m, n)) < W).astype(np.int8)
    for arr in (x, y, W, A):
        arr.setflags(write=False)
    return BipartiteSample(x=x, y=y, W=W, A=A, seed=int(seed), graphon=g)


# -- plain-text serialization ------------------------------------------------

def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def format_sections(sections: dict[str, np.ndarray]) -> str:
    """Render named arrays as ``name`` header lines followed by rows of decimals."""
    out = []
    for name, arr in sections.items():
        arr = np.atleast_2d(np.asarray(arr, float))
        out.append(name)
        out.extend(" ".join(_fmt(v) for v in row) for row in arr)
    return "\n".join(out) + "\n"


def parse_sections(text: str, names: tuple[str, ...]) -> dict[str, np.ndarray]:
    sections: dict[str, list[list[float]]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line in names:
            current = line
            sections[current] = []
            continue
        if current is None:
            raise GraphonError(f"data line before any section header: {raw!r}")
        sections[current].append([float(tok) for tok in line.split()])
    missing = [n for n in names if n not in sections]
    if missing:
        raise GraphonError(f"missing sections: {missing}")
    out = {}
    for name, rows in sections.items():
        if len({len(r) for r in rows}) > 1:
            raise GraphonError(f"ragged rows in section {name}")
        out[name] = np.array(rows, dtype=float)
    return out


def dumps_graphon(g: StepGraphon) -> str:
    return format_sections({"row_breaks": g.row_breaks, "col_breaks": g.col_breaks,
                            "values": g.values})


def loads_graphon(text: str) -> StepGraphon:
    s = parse_sections(text, ("row_breaks", "col_breaks", "values"))
    return make_step_graphon(s["row_breaks"].ravel(), s["col_breaks"].ravel(), s["values"])


def save_graphon(g: StepGraphon, path) -> None:
    Path(path).write_text(dumps_graphon(g))


def load_graphon(path) -> StepGraphon:
    return loads_graphon(Path(path).read_text())


def random_step_graphon(rng: np.random.Generator, rows: int, cols: int) -> StepGraphon:
    """Random grid (cell widths bounded away from 0) with uniform values."""
    def breaks(k):
        w = rng.uniform(0.5, 1.5, size=k)
        b = np.concatenate([[0.0], np.cumsum(w) / w.sum()])
        b[-1] = 1.0
        return b
    return make_step_graphon(breaks(rows), breaks(cols), rng.random((rows, cols)))


def four_block_graphon() -> StepGraphon:
    """Default experiment graphon: unequal 4x4 grid with no block structure in the widths."""
    return make_step_graphon(
        [0.0, 0.15, 0.45, 0.7, 1.0],
        [0.0, 0.3, 0.5, 0.85, 1.0],
        [[0.9, 0.2, 0.6, 0.1],
         [0.3, 0.8, 0.15, 0.5],
         [0.05, 0.4, 0.7, 0.95],
         [0.6, 0.1, 0.35, 0.25]],
    )


NAMED_GRAPHONS = {
    "four_block": four_block_graphon,
    "two_block": lambda: make_step_graphon([0, 0.5, 1], [0, 0.5, 1], [[0.9, 0.1], [0.1, 0.9]]),
    "constant": lambda: constant_graphon(0.3),
}


def resolve_graphon(spec: str) -> StepGraphon:
    """A named built-in graphon or a path to a serialized one."""
    if spec in NAMED_GRAPHONS:
        return NAMED_GRAPHONS[spec]()
    return load_graphon(spec)
