"""PSD low-rank matrix completion of packed RDM sectors.

The completed matrix is parametrized as L^T L with L a dense r x d factor, so
positive semidefiniteness and the rank cap hold by construction, and the
objective is the plain squared residual over the sampled element set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .errors import (
    BudgetExceedsUnique,
    DimensionMismatch,
    NoFeasiblePoint,
    NonFiniteObjective,
)
from .rdm_core import PackedRDM, rel_error


@dataclass(frozen=True)
class SampleSet:
    """Sampled unique positions (row >= col) of a symmetric d x d matrix."""

    d: int
    rows: np.ndarray
    cols: np.ndarray
    seed: object = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.intp)
        cols = np.array(self.cols, dtype=np.intp)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise DimensionMismatch("rows and cols must be equal-length vectors")
        if rows.size == 0:
            raise DimensionMismatch("sample set is empty")
        if (cols > rows).any() or (rows >= self.d).any() or (cols < 0).any():
            raise DimensionMismatch("positions must satisfy 0 <= col <= row < d")
        flat = rows * (rows + 1) // 2 + cols
        if np.unique(flat).size != flat.size:
            raise DimensionMismatch("duplicate sampled positions")
        for name, arr in (("rows", rows), ("cols", cols)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_sample(self) -> int:
        return self.rows.size

    @property
    def n_unique(self) -> int:
        return self.d * (self.d + 1) // 2

    @property
    def f_sample(self) -> float:
        return self.n_sample / self.n_unique

    def same_positions(self, other: "SampleSet") -> bool:
        return (self.d == other.d and self.rows.size == other.rows.size
                and bool((self.rows == other.rows).all())
                and bool((self.cols == other.cols).all()))


@dataclass(frozen=True)
class LowRankFactor:
    L: np.ndarray

    def __post_init__(self):
        l_arr = np.array(self.L, dtype=np.float64)
        l_arr.setflags(write=False)
        object.__setattr__(self, "L", l_arr)

    def completed(self) -> np.ndarray:
        return self.L.T @ self.L


@dataclass(frozen=True)
class CompletionConfig:
    r: int | None = None
    eps0: float = 0.01
    kappa: float = 0.5
    max_iter: int = 15000
    grad_tol: float = 1e-8
    n_trials: int = 10
    success_quorum: float = 0.9
    seed: int = 0


@dataclass(frozen=True)
class CompletionResult:
    factor: LowRankFactor
    completed: np.ndarray
    converged: bool
    objective_trace: np.ndarray
    n_iter: int


def sample_uniform(d: int, n_sample: int, seed) -> SampleSet:
    """Uniform sample without replacement from the d(d+1)/2 unique positions."""
    n_unique = d * (d + 1) // 2
    if not 1 <= n_sample <= n_unique:
        raise BudgetExceedsUnique(
            f"requested {n_sample} of {n_unique} unique elements"
        )
    rng = np.random.default_rng(seed)
    flat = rng.choice(n_unique, size=n_sample, replace=False)
    rows = ((np.sqrt(8.0 * flat + 1.0) - 1.0) / 2.0).astype(np.intp)
    # guard the float inversion of t = r(r+1)/2 + c against edge rounding
    rows += (flat - rows * (rows + 1) // 2) >= rows + 1
    rows -= (flat - rows * (rows + 1) // 2) < 0
    cols = flat - rows * (rows + 1) // 2
    return SampleSet(d=d, rows=rows, cols=cols, seed=seed)


def full_sample(d: int) -> SampleSet:
    rows, cols = np.tril_indices(d)
    return SampleSet(d=d, rows=rows, cols=cols, seed=None)


def info_bound(r: int, d: int) -> float:
    """Degrees of freedom of a rank-r symmetric matrix over unique elements."""
    if not 1 <= r <= d:
        raise DimensionMismatch(f"need 1 <= r <= d, got r={r}, d={d}")
    return (2 * r * d - r * r + r) / (d * (d + 1))


def _trace_estimate(observed_vals, rows, cols, d, trace_target):
    diag = rows == cols
    if diag.any():
        mean_diag = float(observed_vals[diag].mean())
        if mean_diag > 0.0:
            return mean_diag * d
    if trace_target is not None and trace_target > 0.0:
        return float(trace_target)
    rms = float(np.sqrt(np.mean(observed_vals**2)))
    return rms * d if rms > 0.0 else 1.0


def fit_objective(x: np.ndarray, r: int, d: int, rows, cols,
                  vals) -> tuple[float, np.ndarray]:
    """Squared misfit of L^T L on the sampled elements, with its gradient.

    x is the flattened r-by-d factor.  The gradient is 2 L S where S is the
    symmetric scatter of the residuals; sampled diagonal entries enter S
    doubled because they appear once in the sum but sit on the diagonal.
    """
    l_mat = x.reshape(r, d)
    resid = np.einsum("ca,ca->a", l_mat[:, rows], l_mat[:, cols]) - vals
    val = float(resid @ resid)
    if not np.isfinite(val):
        raise NonFiniteObjective("completion objective diverged")
    s = np.zeros((d, d))
    s[rows, cols] = resid
    s[cols, rows] = resid
    diag = rows == cols
    s[rows[diag], cols[diag]] *= 2.0
    return val, (2.0 * l_mat @ s).ravel()


def complete(observed, sample: SampleSet, cfg: CompletionConfig,
             rng=None, trace_target: float | None = None) -> CompletionResult:
    """Fit L^T L to the observed elements by quasi-Newton descent.

    The factor starts from i.i.d. Gaussians scaled so the expected trace of
    L^T L matches the observed-diagonal estimate (or the supplied target), and
    is refined with L-BFGS-B until the gradient drops below cfg.grad_tol.
    """
    if cfg.r is None:
        raise DimensionMismatch("CompletionConfig.r must be set for complete()")
    mat = observed.data if isinstance(observed, PackedRDM) else np.asarray(observed, float)
    d = sample.d
    if mat.shape != (d, d):
        raise DimensionMismatch(f"observed shape {mat.shape} vs sample d={d}")
    r = cfg.r
    rows, cols = sample.rows, sample.cols
    vals = mat[rows, cols]

    est = _trace_estimate(vals, rows, cols, d, trace_target)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    l0 = rng.normal(scale=np.sqrt(est / (r * d)), size=(r, d))

    trace: list[float] = []

    def fun(x):
        return fit_objective(x, r, d, rows, cols, vals)

    def record(_xk):
        trace.append(fun(_xk)[0])

    res = scipy_minimize(fun, l0.ravel(), jac=True, method="L-BFGS-B",
                         callback=record,
                         options={"maxiter": cfg.max_iter,
                                  "maxfun": 4 * cfg.max_iter,
                                  "gtol": cfg.grad_tol, "ftol": 1e-15})
    l_final = res.x.reshape(r, d)
    # status 0 covers both the gradient test and a stalled objective at a
    # stationary point; hitting the iteration cap reports status 1
    converged = res.status == 0
    factor = LowRankFactor(l_final)
    return CompletionResult(factor=factor, completed=factor.completed(),
                            converged=converged,
                            objective_trace=np.asarray(trace), n_iter=res.nit)


def default_grid(r: int, d: int, n_points: int = 12) -> np.ndarray:
    """Geometric f_sample grid spanning 0.5x to 8x the information bound."""
    bound = info_bound(r, d)
    lo, hi = 0.5 * bound, min(8.0 * bound, 1.0)
    pts = np.geomspace(lo, hi, n_points - 1)
    pts = np.unique(np.concatenate([pts, [1.0]]).round(decimals=12))
    return pts[pts <= 1.0]


@dataclass(frozen=True)
class GridPoint:
    f_sample: float
    n_sample: int
    mean_eps: float
    std_eps: float
    success_frac: float
    n_converged: int


@dataclass(frozen=True)
class FsampleSearch:
    f_star: float
    n_sample_star: int
    records: tuple = field(default_factory=tuple)


def trial_seed(base_seed: int, *path: int) -> np.random.SeedSequence:
    """Deterministic per-trial stream, reproducible from the path alone.

    Trailing zeros do not perturb a SeedSequence entropy pool, so (s, 1, 0)
    aliases (s, 1); callers keep paths distinct in a non-trailing component.
    """
    return np.random.SeedSequence([int(base_seed)] + [int(p) for p in path])


def find_fsample(model, cfg: CompletionConfig, grid=None,
                 trace_target: float | None = None) -> FsampleSearch:
    """Smallest sampled fraction whose completions meet the success quorum.

    A trial succeeds when it converges with eps <= eps0 against the model;
    unconverged trials are excluded from the error averages but count as
    failures toward the quorum.
    """
    mat = model.data if isinstance(model, PackedRDM) else np.asarray(model, float)
    d = mat.shape[0]
    if cfg.r is None:
        raise DimensionMismatch("CompletionConfig.r must be set")
    if grid is None:
        grid = default_grid(cfg.r, d)
    n_unique = d * (d + 1) // 2
    records = []
    f_star, n_star = None, None
    for fi, f in enumerate(grid):
        n_sample = min(max(1, int(round(f * n_unique))), n_unique)
        eps_conv, n_success = [], 0
        for trial in range(cfg.n_trials):
            sample = sample_uniform(d, n_sample, trial_seed(cfg.seed, fi, trial, 0))
            result = complete(mat, sample, cfg,
                              rng=np.random.default_rng(trial_seed(cfg.seed, fi, trial, 1)),
                              trace_target=trace_target)
            eps = rel_error(result.completed, mat)
            if result.converged:
                eps_conv.append(eps)
                if eps <= cfg.eps0:
                    n_success += 1
        mean_eps = float(np.mean(eps_conv)) if eps_conv else float("nan")
        std_eps = float(np.std(eps_conv)) if eps_conv else float("nan")
        frac = n_success / cfg.n_trials
        records.append(GridPoint(float(f), n_sample, mean_eps, std_eps, frac,
                                 len(eps_conv)))
        if f_star is None and frac >= cfg.success_quorum:
            f_star, n_star = float(f), n_sample
    if f_star is None:
        raise NoFeasiblePoint(
            f"no grid point reached the {cfg.success_quorum:.0%} success quorum"
        )
    return FsampleSearch(f_star=f_star, n_sample_star=n_star,
                         records=tuple(records))
