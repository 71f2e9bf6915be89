"""Exact population quantities for step graphons.

Population co-clusters ``sigma: [0,1] -> labels`` are represented by mass
allocations: ``mass[l, k]`` is the measure of graphon cell ``l`` sent to
label ``k``.  Every allocation is realized by a genuine partition (see
:func:`realize_partition`), and all integrals over such partitions reduce to
finite sums over cells, so nothing here uses quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphon import BipartiteSample, StepGraphon, format_sections, parse_sections
from .stats import BlockSummary, GeneralLatent, LatentError, in_domain, kernel_matrix

ROW_SUM_TOL = 1e-10


class AllocationError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class AllocationMap:
    cell_lengths: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.cell_lengths, float)
        M = np.atleast_2d(np.asarray(self.mass, float))
        if w.ndim != 1 or np.any(w <= 0):
            raise AllocationError("cell lengths must be a vector of positive reals")
        if M.shape[0] != w.size:
            raise AllocationError(f"mass has {M.shape[0]} rows for {w.size} cells")
        if np.any(M < 0):
            raise AllocationError("allocated masses must be non-negative")
        if np.max(np.abs(M.sum(axis=1) - w)) > ROW_SUM_TOL:
            raise AllocationError("each cell's masses must sum to the cell length")
        object.__setattr__(self, "cell_lengths", w)
        object.__setattr__(self, "mass", M)

    @property
    def K(self) -> int:
        return self.mass.shape[1]

    @property
    def pi(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    @classmethod
    def uniform(cls, cell_lengths, K: int) -> "AllocationMap":
        w = np.asarray(cell_lengths, float)
        return cls(w, np.repeat(w[:, None] / K, K, axis=1))

    @classmethod
    def from_cell_labels(cls, cell_lengths, labels, K: int) -> "AllocationMap":
        """Whole cell ``l`` goes to ``labels[l]``."""
        w = np.asarray(cell_lengths, float)
        M = np.zeros((w.size, K))
        M[np.arange(w.size), np.asarray(labels)] = w
        return cls(w, M)

    def dumps(self) -> str:
        return format_sections({"cell_lengths": self.cell_lengths, "mass": self.mass})

    @classmethod
    def loads(cls, text: str) -> "AllocationMap":
        s = parse_sections(text, ("cell_lengths", "mass"))
        return cls(s["cell_lengths"].ravel(), s["mass"])


def _check_grid(alloc: AllocationMap, widths: np.ndarray, side: str):
    if alloc.cell_lengths.size != widths.size or np.max(np.abs(alloc.cell_lengths - widths)) > ROW_SUM_TOL:
        raise AllocationError(f"{side} allocation does not match the graphon's {side} cells")


def blocked_graphon(g: StepGraphon, row_alloc: AllocationMap, col_alloc: AllocationMap) -> BlockSummary:
    """Integral of omega over the rectangles induced by the two allocations."""
    _check_grid(row_alloc, g.row_widths, "row")
    _check_grid(col_alloc, g.col_widths, "column")
    if row_alloc.K != col_alloc.K:
        raise AllocationError("row and column allocations use different K")
    phi = row_alloc.mass.T @ g.values @ col_alloc.mass
    pi_row, pi_col = row_alloc.pi, col_alloc.pi
    denom = np.outer(pi_row, pi_col)
    theta = np.divide(phi, denom, out=np.zeros_like(phi), where=denom > 0)
    return BlockSummary(phi=phi, pi_row=pi_row, pi_col=pi_col, theta_hat=theta)


def blocked_graphon_mixed(g: StepGraphon, x, S, col_alloc: AllocationMap) -> np.ndarray:
    """(1/m) sum_i int omega(x_i, y) 1{S_i = s, tau(y) = t} dy."""
    _check_grid(col_alloc, g.col_widths, "column")
    x = np.asarray(x, float)
    S = np.asarray(S)
    if x.shape != S.shape:
        raise AllocationError("x and S must have the same length")
    K = col_alloc.K
    if S.size and (S.min() < 0 or S.max() >= K):
        raise LatentError(f"row labels must lie in 0..{K - 1}")
    rows = g.values[g.row_cells(x)] @ col_alloc.mass
    phi = np.zeros((K, K))
    np.add.at(phi, S, rows)
    return phi / max(x.size, 1)


@dataclass(frozen=True)
class PopulationLatentMap:
    """Piecewise-constant latent map on one axis of a step graphon.

    Piece ``p`` covers measure ``lengths[p]`` inside graphon cell ``cells[p]``
    and carries ``labels[p]`` and ``vectors[p]``.  Pieces of a cell tile it.
    """
    cells: np.ndarray
    lengths: np.ndarray
    labels: np.ndarray
    vectors: np.ndarray
    K: int
    cell_widths: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, np.int64)
        lengths = np.asarray(self.lengths, float)
        widths = np.asarray(self.cell_widths, float)
        vec = np.asarray(self.vectors, float)
        if vec.ndim == 1:
            vec = vec[:, None]
        if not (cells.shape == lengths.shape == np.shape(self.labels) and vec.shape[0] == cells.size):
            raise AllocationError("piece arrays disagree in length")
        if np.any(lengths < 0):
            raise AllocationError("piece lengths must be non-negative")
        covered = np.bincount(cells, weights=lengths, minlength=widths.size)
        if covered.size != widths.size or np.max(np.abs(covered - widths)) > ROW_SUM_TOL:
            raise AllocationError("pieces must tile every cell exactly")
        if not in_domain(vec):
            raise LatentError("piece vectors must lie in D")
        lat = GeneralLatent(np.asarray(self.labels), vec, self.K)
        for name, arr in (("cells", cells), ("lengths", lengths), ("labels", lat.labels),
                          ("vectors", vec), ("cell_widths", widths)):
            object.__setattr__(self, name, arr)

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def latent(self) -> GeneralLatent:
        return GeneralLatent(self.labels, self.vectors, self.K)

    @classmethod
    def from_allocation(cls, alloc: AllocationMap, labels=None, vectors=None, K=None):
        """One piece per (cell, allocation label) with positive mass.

        ``labels``/``vectors`` translate allocation labels into latent values
        (composite labels of a quantized latent space); by default allocation
        label k is latent label k with no vector.
        """
        Kc = alloc.K
        labels = np.arange(Kc) if labels is None else np.asarray(labels)
        vectors = np.zeros((Kc, 0)) if vectors is None else np.asarray(vectors, float)
        cells, ks = np.nonzero(alloc.mass > 0)
        return cls(cells=cells, lengths=alloc.mass[cells, ks], labels=labels[ks],
                   vectors=vectors[ks], K=int(K if K is not None else labels.max() + 1),
                   cell_widths=alloc.cell_lengths)

    def to_allocation(self) -> AllocationMap:
        M = np.zeros((self.cell_widths.size, self.K))
        np.add.at(M, (self.cells, self.labels), self.lengths)
        return AllocationMap(self.cell_widths, M)


def _row_atoms(g: StepGraphon, row_side):
    """(row cells, weights, latent) for either a population map or sampled (x, S)."""
    if isinstance(row_side, PopulationLatentMap):
        if row_side.cell_widths.size != g.shape[0]:
            raise AllocationError("row map does not match the graphon's row cells")
        return row_side.cells, row_side.lengths, row_side.latent()
    x, S = row_side
    x = np.asarray(x, float)
    if x.size != len(S):
        raise AllocationError("x and S have different lengths")
    return g.row_cells(x), np.full(x.size, 1.0 / x.size), S


def population_risk(g: StepGraphon, row_side, col_map: PopulationLatentMap, theta, family: int) -> float:
    """Exact integral of (omega - omega_theta(sigma, tau))^2.

    ``row_side`` is a :class:`PopulationLatentMap` (double integral over the
    populations) or a pair ``(x, S)`` with ``S`` a :class:`GeneralLatent`
    (average over the sampled rows of the integral over y).
    """
    if col_map.cell_widths.size != g.shape[1]:
        raise AllocationError("column map does not match the graphon's column cells")
    rcells, rw, S = _row_atoms(g, row_side)
    k = kernel_matrix(S, col_map.latent(), theta, family)
    resid = g.values[np.ix_(rcells, col_map.cells)] - k
    return float(rw @ (resid ** 2) @ col_map.lengths)


def greedy_sigma_star(g: StepGraphon, tau: PopulationLatentMap, theta, family: int, x: float,
                      candidates: GeneralLatent | None = None) -> int:
    """Index of the candidate row latent minimizing int (omega(x, y) - omega_theta(s, tau(y)))^2 dy.

    Candidates default to the K bare labels (family 1).  Ties go to the
    smallest index.
    """
    if candidates is None:
        candidates = GeneralLatent.from_labels(np.arange(tau.K), tau.K)
    r = g.row_cells(np.array([x]))[0]
    k = kernel_matrix(candidates, tau.latent(), theta, family)
    cost = ((g.values[r, tau.cells][None, :] - k) ** 2) @ tau.lengths
    return int(np.argmin(cost))


# -- matching population co-clusters to observed labels -----------------------

@dataclass(frozen=True)
class MatchingProblem:
    """objective(C) = sum_k C[:, k]^T Q C[:, k] - 2 lin[:, k]^T C[:, k] + const,
    over C >= 0 with row sums equal to ``widths``."""
    Q: np.ndarray
    lin: np.ndarray
    const: float
    widths: np.ndarray

    def objective(self, C) -> float:
        C = np.asarray(C, float)
        return float(np.sum(C * (self.Q @ C)) - 2.0 * np.sum(self.lin * C) + self.const)


@dataclass(frozen=True)
class MatchResult:
    alloc: AllocationMap
    objective: float
    gap: float
    iterations: int


def matching_problem(g: StepGraphon, sample: BipartiteSample, labels, K: int, side: str) -> MatchingProblem:
    """Quadratic form of ||G_T - G_tau||^2 (side='column') or ||F_S - F_sigma||^2 (side='row').

    For the column side ``labels`` label the n columns and the allocation
    lives on the graphon's column cells; the profile vectors are indexed by
    the sampled rows.  For the row side ``labels`` label the m rows, the
    allocation lives on the row cells and profiles are step functions of y.
    """
    labels = np.asarray(labels)
    if side == "column":
        if labels.size != sample.n:
            raise AllocationError("column labels must have length n")
        m, n = sample.m, sample.n
        rc = sample.row_cells
        freq_x = np.bincount(rc, minlength=g.shape[0]) / m
        onehot = np.zeros((n, K))
        onehot[np.arange(n), labels] = 1.0
        a = np.asarray(sample.W, float) @ onehot / n          # g_{T=t}, shape (m, K)
        pi_T = onehot.mean(axis=0)
        h = np.zeros((g.shape[0], K))
        np.add.at(h, rc, a)
        h /= m
        V = g.values
        Q = V.T @ (freq_x[:, None] * V) + 1.0
        lin = V.T @ h + pi_T[None, :]
        const = float(np.sum(a * a) / m + pi_T @ pi_T)
        widths = g.col_widths
    elif side == "row":
        if labels.size != sample.m:
            raise AllocationError("row labels must have length m")
        m = sample.m
        rc = sample.row_cells
        f = np.zeros((K, g.shape[1]))                         # f_{S=s} on column cells
        np.add.at(f, labels, g.values[rc])
        f /= m
        pi_S = np.bincount(labels, minlength=K) / m
        wy = g.col_widths
        V = g.values
        Q = V @ (wy[:, None] * V.T) + 1.0
        lin = V @ (wy[:, None] * f.T) + pi_S[None, :]
        const = float(np.sum(wy[None, :] * f * f) + pi_S @ pi_S)
        widths = g.row_widths
    else:
        raise ValueError(f"side must be 'row' or 'column', got {side!r}")
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise LatentError(f"labels must lie in 0..{K - 1}")
    return MatchingProblem(Q=Q, lin=lin, const=const, widths=widths)


def solve_allocation_qp(problem: MatchingProblem, tol: float = 1e-8, max_iter: int = 50_000,
                        init=None) -> tuple[np.ndarray, float, int]:
    """Frank-Wolfe with away steps over the product of scaled simplices.

    Each sweep visits every cell and moves mass from its away vertex (the
    worst label currently holding mass) to its Frank-Wolfe vertex (the best
    label) with an exact line search.  Stops when the Frank-Wolfe duality gap
    ``<grad, C - S>`` drops to ``tol``; this gap bounds the suboptimality.
    Returns ``(mass, gap, sweeps)``.
    """
    Q, lin, w = problem.Q, problem.lin, problem.widths
    L, K = lin.shape
    C = np.repeat(w[:, None] / K, K, axis=1) if init is None else np.array(init, float)
    diagQ = np.diag(Q)
    gap = np.inf
    for it in range(max_iter + 1):
        G = 2.0 * (Q @ C - lin)
        gap = float(np.sum(C * G) - w @ G.min(axis=1))
        if gap <= tol:
            return C, gap, it
        if it == max_iter:
            break
        for b in range(L):
            row = G[b]
            s = int(np.argmin(row))
            held = np.flatnonzero(C[b] > 0)
            v = int(held[np.argmax(row[held])])
            slope = row[v] - row[s]
            if slope <= 0.0:
                continue
            step = slope / (4.0 * diagQ[b])
            if step >= C[b, v]:
                step = C[b, v]
                C[b, s] += step
                C[b, v] = 0.0
            else:
                C[b, v] -= step
                C[b, s] += step
            G[:, s] += 2.0 * step * Q[:, b]
            G[:, v] -= 2.0 * step * Q[:, b]
    raise ConvergenceError(f"allocation QP stopped after {max_iter} sweeps with gap {gap:.3e}")


def match_population_cocluster(g: StepGraphon, sample: BipartiteSample, labels, K: int,
                               side: str = "column", tol: float = 1e-8,
                               max_iter: int = 50_000) -> MatchResult:
    """Allocation whose profile vector is closest to that of the observed labels."""
    if K < 1:
        raise LatentError("K must be at least 1")
    prob = matching_problem(g, sample, labels, K, side)
    C, gap, iters = solve_allocation_qp(prob, tol=tol, max_iter=max_iter)
    # restore exact row sums lost to rounding
    C *= (prob.widths / C.sum(axis=1))[:, None]
    return MatchResult(alloc=AllocationMap(prob.widths, C), objective=prob.objective(C),
                       gap=gap, iterations=iters)


def realize_partition(alloc: AllocationMap, breaks=None) -> list[tuple[float, float, int]]:
    """Split every cell left to right into consecutive intervals of the allocated lengths.

    Returns ``(lo, hi, label)`` triples for half-open intervals; labels with
    zero mass get no interval.
    """
    if breaks is None:
        breaks = np.concatenate([[0.0], np.cumsum(alloc.cell_lengths)])
        breaks[-1] = 1.0
    breaks = np.asarray(breaks, float)
    out = []
    for b in range(alloc.cell_lengths.size):
        lo, end = breaks[b], breaks[b + 1]
        ks = np.flatnonzero(alloc.mass[b] > 0)
        for pos, k in enumerate(ks):
            hi = end if pos == ks.size - 1 else lo + alloc.mass[b, k]
            out.append((float(lo), float(hi), int(k)))
            lo = hi
    return out


def allocation_from_partition(intervals, breaks, K: int) -> AllocationMap:
    """Inverse of :func:`realize_partition` for intervals that each lie in one cell."""
    breaks = np.asarray(breaks, float)
    M = np.zeros((breaks.size - 1, K))
    for lo, hi, k in intervals:
        cell = min(int(np.searchsorted(breaks, lo, side="right")) - 1, breaks.size - 2)
        M[cell, k] += hi - lo
    return AllocationMap(np.diff(breaks), M)


def label_points(intervals, t) -> np.ndarray:
    """Label of each coordinate under a realized partition."""
    t = np.asarray(t, float)
    los = np.array([iv[0] for iv in intervals])
    labs = np.array([iv[2] for iv in intervals])
    idx = np.searchsorted(los, t, side="right") - 1
    return labs[np.clip(idx, 0, los.size - 1)]


def centering_constants(sample: BipartiteSample, g: StepGraphon) -> tuple[float, float, float]:
    """Additive constants that do not depend on the fitted latents or theta.

    ``C1 = R_A - R_W + 2 sum(Phi_A - Phi_W) * theta_bar`` reduces to
    ``mean(A^2) - mean(W^2)``; ``C2`` is the mean over rows of
    ``(1/n) sum_j W_ij^2 - int omega(x_i, y)^2 dy``; ``C3`` is
    ``(1/m) sum_i int omega(x_i, y)^2 dy - int int omega^2``.
    """
    A = np.asarray(sample.A, float)
    W = np.asarray(sample.W, float)
    wy, wx = g.col_widths, g.row_widths
    row_sq = (g.values ** 2) @ wy                     # int omega(x, y)^2 dy per row cell
    sampled_sq = row_sq[sample.row_cells]
    C1 = float(np.mean(A * A) - np.mean(W * W))
    C2 = float(np.mean(np.mean(W * W, axis=1) - sampled_sq))
    C3 = float(np.mean(sampled_sq) - wx @ row_sq)
    return C1, C2, C3
