"""Rate experiments: configuration, candidate labelings, runners and reports.

Seeds.  Every replicate draws its sample from
``make_rng(master_seed, experiment_id, n, rep)`` and candidate ``c`` of that
replicate uses ``make_rng(master_seed, experiment_id, n, rep, c + 1)``.
Replicates are therefore independent of scheduling, and rows are sorted by
``(n, rep, candidate index)`` before they are written.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .estimators import fit_dot_product_model, spectral_cocluster
from .geometry import (composite_labels, composite_table, epsilon_cover, epsilon_schedule,
                       psi_cdf_distance, quantize_latents)
from .graphon import BipartiteSample, make_rng, resolve_graphon, sample_bipartite
from .population import (ConvergenceError, PopulationLatentMap, blocked_graphon,
                         centering_constants, match_population_cocluster, population_risk)
from .stats import CoClusterLabels, GeneralLatent, block_summary, empirical_risk, project_to_domain

EXPERIMENT_IDS = {"theorem1": 1, "theorem2": 2, "lemma1": 3}
TH1_CANDIDATES = ("spectral", "random", "degree", "adversarial")
TH2_CANDIDATES_D0 = ("spectral", "random", "degree", "adversarial")
TH2_CANDIDATES_D = ("als", "random")
RESULT_COLUMNS = ("experiment", "n", "m", "rep", "candidate", "K", "d", "family", "error", "runtime_ms")


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    graphon: str = "four_block"
    n_grid: tuple[int, ...] = (100, 200, 400, 800, 1600)
    ratio: float = 1.0
    K: int = 4
    d: int = 0
    family: int = 1
    reps: int = 20
    master_seed: int = 0
    candidates: tuple[str, ...] = ()
    out: str = "results"
    epsilon: float | None = None
    grid_resolution: int = 32
    lemma_candidates: int = 200
    max_fit_iters: int = 20
    record_runtime: bool = False

    def __post_init__(self):
        ns = tuple(int(v) for v in self.n_grid)
        object.__setattr__(self, "n_grid", ns)
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        if ns[0] < 2:
            raise ConfigError("sample sizes must be at least 2")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if not self.ratio > 0:
            raise ConfigError("ratio m/n must be positive")
        if self.K < 1 or self.K > math.sqrt(ns[0]):
            raise ConfigError(f"K={self.K} must satisfy 1 <= K <= sqrt(min n_grid)")
        if self.family not in (1, 2, 3, 4):
            raise ConfigError(f"unknown family {self.family}")
        if self.d < 0 or self.master_seed < 0:
            raise ConfigError("d and master_seed must be non-negative")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigError("epsilon override must be positive")
        if self.grid_resolution < 8:
            raise ConfigError("grid_resolution must be at least 8")

    def m_for(self, n: int) -> int:
        return max(1, int(round(self.ratio * n)))


def _convert(f, raw: str):
    name = f.name
    raw = raw.strip()
    if name in ("n_grid",):
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if name == "candidates":
        return tuple(v for v in raw.replace(",", " ").split())
    if name in ("K", "d", "family", "reps", "master_seed", "grid_resolution",
                "lemma_candidates", "max_fit_iters"):
        return int(raw)
    if name == "ratio":
        if "/" in raw:
            a, b = raw.split("/", 1)
            return float(a) / float(b)
        return float(raw)
    if name == "epsilon":
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    if name == "record_runtime":
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"bad boolean {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    return raw


def config_overrides(pairs) -> dict:
    known = {f.name: f for f in fields(ExperimentConfig)}
    out = {}
    for key, raw in pairs:
        key = key.strip()
        if key == "seed":
            key = "master_seed"
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _convert(known[key], raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    return replace(base or ExperimentConfig(), **config_overrides(pairs))


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def config_text(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{f.name} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"


# -- results -------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    experiment: str
    n: int
    m: int
    rep: int
    candidate: str
    K: int
    d: int
    family: int
    error: float
    runtime_ms: float


@dataclass
class RateResult:
    """One row per (n, rep, candidate).  Errors are lower bounds on the sup over all labelings."""
    experiment: str
    rows: list[ResultRow] = field(default_factory=list)

    def per_rep_max(self) -> dict[int, list[float]]:
        best: dict[tuple[int, int], float] = {}
        for r in self.rows:
            key = (r.n, r.rep)
            best[key] = max(best.get(key, -np.inf), r.error)
        out: dict[int, list[float]] = {}
        for (n, _), v in sorted(best.items()):
            out.setdefault(n, []).append(v)
        return out

    def medians(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-n median over reps of the max over candidates."""
        per = self.per_rep_max()
        ns = np.array(sorted(per), dtype=float)
        return ns, np.array([float(np.median(per[int(n)])) for n in ns])

    def slope(self) -> tuple[float, float]:
        ns, med = self.medians()
        return fit_rate_exponent(ns, med)


def fit_rate_exponent(ns, errs) -> tuple[float, float]:
    """OLS slope of log(err) on log(n) and its standard error."""
    ns = np.asarray(ns, float)
    errs = np.asarray(errs, float)
    if ns.size != errs.size:
        raise ValueError("ns and errs differ in length")
    if ns.size < 3:
        raise ValueError("need at least 3 points to fit a rate")
    if np.any(errs <= 0) or np.any(ns <= 0):
        raise ValueError("sizes and errors must be positive")
    x, y = np.log(ns), np.log(errs)
    xc = x - x.mean()
    sxx = xc @ xc
    slope = float(xc @ (y - y.mean()) / sxx)
    resid = y - y.mean() - slope * xc
    stderr = float(math.sqrt((resid @ resid) / (ns.size - 2) / sxx))
    return slope, stderr


def count_inversions(values) -> int:
    """Number of adjacent increases in a sequence meant to be non-increasing."""
    v = np.asarray(values, float)
    return int(np.sum(np.diff(v) > 0))


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit_report(result: RateResult, path) -> list[Path]:
    """Write results.csv, summary.csv and rate.svg into directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "results.csv", out / "summary.csv"]
    with open(written[0], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in result.rows:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])
    ns, med = result.medians() if result.rows else (np.array([]), np.array([]))
    slope = stderr = None
    if ns.size >= 3 and np.all(med > 0):
        slope, stderr = fit_rate_exponent(ns, med)
    with open(written[1], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "n", "median_max_error", "slope", "slope_stderr"])
        for n, e in zip(ns, med):
            w.writerow([result.experiment, int(n), _fmt(float(e)),
                        "" if slope is None else _fmt(slope), "" if stderr is None else _fmt(stderr)])
    svg = out / "rate.svg"
    if result.rows:
        _plot(result, ns, med, slope, svg)
        written.append(svg)
    elif svg.exists():
        svg.unlink()
    return written


def _plot(result, ns, med, slope, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "rate"
    fig, ax = plt.subplots(figsize=(5, 4))
    pts = [(r.n, r.error) for r in result.rows if r.error > 0]
    if pts:
        x, y = zip(*pts)
        ax.scatter(x, y, s=6, alpha=0.3, label="candidate errors")
    if ns.size:
        ax.plot(ns, med, "o", color="black", label="median of per-rep max")
    if slope is not None:
        x, y = np.log(ns), np.log(med)
        icpt = y.mean() - slope * x.mean()
        ax.plot(ns, np.exp(icpt + slope * x), "-", color="red", label=f"slope {slope:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("error (lower bound on sup)")
    ax.set_title(result.experiment)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def read_results(path) -> RateResult:
    path = Path(path)
    if path.is_dir():
        path = path / "results.csv"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"unexpected results header {reader.fieldnames}")
        rows = [ResultRow(experiment=r["experiment"], n=int(r["n"]), m=int(r["m"]), rep=int(r["rep"]),
                          candidate=r["candidate"], K=int(r["K"]), d=int(r["d"]),
                          family=int(r["family"]), error=float(r["error"]),
                          runtime_ms=float(r["runtime_ms"]))
                for r in reader]
    return RateResult(rows[0].experiment if rows else "", rows)


# -- candidate labelings -------------------------------------------------------

def quantile_labels(score, K: int) -> np.ndarray:
    """K groups of near-equal size by rank of ``score`` (stable on ties)."""
    order = np.argsort(score, kind="stable")
    lab = np.empty(score.size, np.int64)
    lab[order] = np.arange(score.size) * K // score.size
    return lab


def cell_singular_vectors(sample: BipartiteSample, k: int):
    """Leading singular vectors of W from the small cell-level matrix.

    W = R V C^T with one-hot cell indicators R, C; scaling by the square
    roots of the cell counts turns R and C into orthonormal bases, so an SVD
    of ``sqrt(cx) V sqrt(cy)`` gives W's singular triples exactly.
    """
    g = sample.graphon
    rc, cc = sample.row_cells, sample.col_cells
    cx = np.bincount(rc, minlength=g.shape[0]).astype(float)
    cy = np.bincount(cc, minlength=g.shape[1]).astype(float)
    M = np.sqrt(cx)[:, None] * g.values * np.sqrt(cy)[None, :]
    u, s, vt = np.linalg.svd(M)
    with np.errstate(divide="ignore", invalid="ignore"):
        U = np.where(cx[:, None] > 0, u / np.sqrt(cx)[:, None], 0.0)[rc]
        V = np.where(cy[:, None] > 0, vt.T / np.sqrt(cy)[:, None], 0.0)[cc]
    k = min(k, s.size)
    return U[:, :k], s[:k], V[:, :k]


def _threshold_labels(U, K):
    bits = max(1, math.ceil(math.log2(K))) if K > 1 else 0
    lab = np.zeros(U.shape[0], np.int64)
    for q in range(min(bits, U.shape[1])):
        col = U[:, q]
        lab += (col > np.median(col)).astype(np.int64) << q
    return lab % K


def candidate_labels(name: str, sample: BipartiteSample, K: int, rng: np.random.Generator) -> CoClusterLabels:
    A = np.asarray(sample.A, float)
    m, n = A.shape
    if name == "spectral":
        return spectral_cocluster(A, K, int(rng.integers(2 ** 31)))
    if name == "random":
        return CoClusterLabels(rng.integers(K, size=m), rng.integers(K, size=n), K)
    if name == "degree":
        return CoClusterLabels(quantile_labels(A.sum(axis=1), K), quantile_labels(A.sum(axis=0), K), K)
    if name == "adversarial":
        bits = max(1, math.ceil(math.log2(K)))
        U, _, V = cell_singular_vectors(sample, bits + 1)
        return CoClusterLabels(_threshold_labels(U[:, 1:], K), _threshold_labels(V[:, 1:], K), K)
    raise ConfigError(f"unknown candidate strategy {name!r}")


# -- experiment kernels ----------------------------------------------------------

def theorem1_error(sample: BipartiteSample, labels: CoClusterLabels) -> float:
    """||Phi_A(S,T) - Phi_omega(sigma_S, tau_T)||_F + ||pi_T - pi_tau|| + ||pi_S - pi_sigma||."""
    g = sample.graphon
    K = labels.K
    emp = block_summary(sample.A, labels)
    tau = match_population_cocluster(g, sample, labels.T, K, side="column").alloc
    sigma = match_population_cocluster(g, sample, labels.S, K, side="row").alloc
    pop = blocked_graphon(g, sigma, tau)
    return float(np.linalg.norm(emp.phi - pop.phi) + np.linalg.norm(emp.pi_col - pop.pi_col)
                 + np.linalg.norm(emp.pi_row - pop.pi_row))


def theorem2_error(sample: BipartiteSample, S: GeneralLatent, T: GeneralLatent, theta,
                   family: int, epsilon: float | None, resolution: int) -> float:
    """|R_A(S,T) - R_omega(S_bar, tau_bar) - C1 - C2| + ||Psi_T - Psi_tau_bar||^2 / (K max(d, 1)).

    ``S_bar`` quantizes the row vectors; ``tau_bar`` is the population
    labeling of the composite (label, cover point) values of T matched by
    profile distance.  For d = 0 no quantization happens.
    """
    g = sample.graphon
    K, d = T.K, T.d
    if d == 0:
        S_bar = S
        comp, Kbar = T.labels, K
        tab_labels, tab_vectors = np.arange(K), np.zeros((K, 0))
    else:
        cover = epsilon_cover(d, epsilon)
        S_bar = quantize_latents(S, cover)
        comp, Kbar = composite_labels(T, cover), K * len(cover)
        tab_labels, tab_vectors = composite_table(K, cover)
    alloc = match_population_cocluster(g, sample, comp, Kbar, side="column").alloc
    tau_bar = PopulationLatentMap.from_allocation(alloc, labels=tab_labels, vectors=tab_vectors, K=K)
    C1, C2, _ = centering_constants(sample, g)
    r_a = empirical_risk(sample.A, S, T, theta, family)
    r_w = population_risk(g, (sample.x, S_bar), tau_bar, theta, family)
    psi = psi_cdf_distance(T, tau_bar, resolution) / (K * max(d, 1))
    return abs(r_a - r_w - C1 - C2) + psi


def theorem2_candidates(name: str, sample: BipartiteSample, cfg: ExperimentConfig, rng):
    """Candidate (S, T, theta) for the configured family and dimension."""
    A = np.asarray(sample.A, float)
    K, d, family = cfg.K, cfg.d, cfg.family
    if d == 0:
        labels = candidate_labels(name, sample, K, rng)
        theta = block_summary(A, labels).theta_hat
        return GeneralLatent.from_labels(labels.S, K), GeneralLatent.from_labels(labels.T, K), theta
    if name == "als":
        S, T, theta, _ = fit_dot_product_model(A, K, d, family, int(rng.integers(2 ** 31)),
                                               max_iters=cfg.max_fit_iters)
        return S, T, theta
    if name == "random":
        def latent(count):
            v = project_to_domain(rng.random((count, d)))
            return GeneralLatent(rng.integers(K, size=count), v, K)
        return latent(sample.m), latent(sample.n), rng.random((K, K))
    raise ConfigError(f"unknown candidate strategy {name!r} for d={d}")


def lemma1_error(sample: BipartiteSample, K: int, rng, power_steps: int = 0) -> float:
    """||Phi_A - Phi_W||^2 for labels aligned with the noise E = A - W.

    A random column direction v (optionally sharpened by power steps on
    E^T E) gives row scores u = E v and column scores E^T u; both are cut
    into K quantile groups, so rows and columns align with the same noise
    pattern.
    """
    E = np.asarray(sample.A, float) - sample.W
    v = rng.standard_normal(sample.n)
    for _ in range(power_steps):
        v = E.T @ (E @ v)
        v /= np.linalg.norm(v)
    u = E @ v
    labels = CoClusterLabels(quantile_labels(u, K), quantile_labels(E.T @ u, K), K)
    diff = block_summary(E, labels).phi
    return float(np.sum(diff * diff))


def _candidates_for(experiment: str, cfg: ExperimentConfig) -> tuple[str, ...]:
    if experiment == "lemma1":
        return tuple(f"dir{c:03d}" for c in range(cfg.lemma_candidates))
    if cfg.candidates:
        return cfg.candidates
    if experiment == "theorem1":
        return TH1_CANDIDATES
    return TH2_CANDIDATES_D0 if cfg.d == 0 else TH2_CANDIDATES_D


def run_replicate(experiment: str, cfg: ExperimentConfig, n: int, rep: int) -> list[ResultRow]:
    """All candidate rows of one (n, rep) replicate."""
    eid = EXPERIMENT_IDS[experiment]
    g = resolve_graphon(cfg.graphon)
    m = cfg.m_for(n)
    sample = sample_bipartite(g, m, n, cfg.master_seed, eid, n, rep)
    d = 0 if experiment != "theorem2" else cfg.d
    family = 1 if experiment != "theorem2" else cfg.family
    eps = None
    if experiment == "theorem2" and d > 0:
        eps = cfg.epsilon if cfg.epsilon is not None else epsilon_schedule(cfg.K, d, n)
    rows = []
    for c, name in enumerate(_candidates_for(experiment, cfg)):
        rng = make_rng(cfg.master_seed, eid, n, rep, c + 1)
        t0 = time.perf_counter()
        try:
            if experiment == "theorem1":
                err = theorem1_error(sample, candidate_labels(name, sample, cfg.K, rng))
            elif experiment == "theorem2":
                S, T, theta = theorem2_candidates(name, sample, cfg, rng)
                err = theorem2_error(sample, S, T, theta, family, eps, cfg.grid_resolution)
            else:
                err = lemma1_error(sample, cfg.K, rng, power_steps=c % 3)
        except ConvergenceError as exc:
            raise ExperimentError(f"{experiment} n={n} rep={rep} candidate={name}: {exc}") from exc
        ms = (time.perf_counter() - t0) * 1e3 if cfg.record_runtime else 0.0
        rows.append(ResultRow(experiment, n, m, rep, name, cfg.K, d, family, err, ms))
    return rows


def _replicate_task(args):
    return run_replicate(*args)


def run_experiment(experiment: str, cfg: ExperimentConfig, jobs: int = 1) -> RateResult:
    if experiment not in EXPERIMENT_IDS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    tasks = [(experiment, cfg, n, rep) for n in cfg.n_grid for rep in range(cfg.reps)]
    if jobs <= 1:
        chunks = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replicate_task, tasks))
    rows = [r for chunk in chunks for r in chunk]
    names = _candidates_for(experiment, cfg)
    rows.sort(key=lambda r: (r.n, r.rep, names.index(r.candidate)))
    return RateResult(experiment, rows)


def run_theorem1_experiment(config: ExperimentConfig, jobs: int = 1) -> RateResult:
    return run_experiment("theorem1", config, jobs)


def run_theorem2_experiment(config: ExperimentConfig, jobs: int = 1) -> RateResult:
    if config.d > 2 or config.family not in (1, 2, 4):
        raise ConfigError("risk-gap runs need d <= 2 and family in {1, 2, 4}")
    if (config.family == 1) != (config.d == 0) or (config.family == 2 and config.d != 1):
        raise ConfigError(f"family {config.family} is incompatible with d={config.d}")
    return run_experiment("theorem2", config, jobs)


def run_lemma1_experiment(config: ExperimentConfig, jobs: int = 1) -> RateResult:
    return run_experiment("lemma1", config, jobs)


# -- single-instance lemma checks ---------------------------------------------

def random_latent(rng, count: int, K: int, d: int) -> GeneralLatent:
    v = project_to_domain(rng.random((count, d))) if d else np.zeros((count, 0))
    return GeneralLatent(rng.integers(K, size=count), v, K)


def quantization_check(seed: int, m: int = 40, n: int = 50, K: int = 3, d: int = 2,
                       resolution: int = 64) -> dict:
    """Risk and CDF changes caused by quantizing random family-4 latents.

    Returns the observed gaps next to their bounds 12 eps and K d eps + 2 K d / r.
    """
    rng = make_rng(seed)
    eps = float(rng.uniform(0.05, 1.0))
    A = (rng.random((m, n)) < 0.5).astype(float)
    S, T = random_latent(rng, m, K, d), random_latent(rng, n, K, d)
    theta = rng.random((K, K))
    cover = epsilon_cover(d, eps)
    Sq, Tq = quantize_latents(S, cover), quantize_latents(T, cover)
    gap = abs(empirical_risk(A, S, T, theta, 4) - empirical_risk(A, Sq, Tq, theta, 4))
    psi = psi_cdf_distance(S, Sq, resolution)
    return {"epsilon": eps, "risk_gap": gap, "risk_bound": 12 * eps, "psi": psi,
            "psi_bound": K * d * eps + 2.0 * K * d / resolution}


def centering_residual(sample: BipartiteSample, labels: CoClusterLabels, theta) -> float:
    """R_A - R_W - C1 + 2 sum((Phi_A - Phi_W) * theta) for the block kernel theta."""
    theta = np.asarray(theta, float)
    k = theta[np.ix_(labels.S, labels.T)]
    A = np.asarray(sample.A, float)
    r_a = float(np.mean((A - k) ** 2))
    r_w = float(np.mean((sample.W - k) ** 2))
    C1, _, _ = centering_constants(sample, sample.graphon)
    dphi = block_summary(A, labels).phi - block_summary(sample.W, labels).phi
    return r_a - r_w - C1 + 2.0 * float(np.sum(dphi * theta))
