"""MC/RQMC importance-sampling quadratures and the RMSE experiment harness.

The quadratures average G(mu + L z) W(z) over mapped uniform points: the
Gaussian path sends u through the normal quantile, the Student-t path
through tau (normals plus a chi-square) and psi (the t collapse), matching
the d+1-dimensional estimator.  Accumulations use compensated summation.

``rmse_experiment`` replicates every estimator over independent scramble
seeds (RQMC) or RNG streams (MC) on a grid of sample sizes, producing an
``RmseTable`` with per-method log-log slope fits and a fixed CSV schema:

    method,family,nu,N,R,rmse,c_ref,c_ref_provenance,seed0

For posterior-ratio problems each method contributes ``<name>.num``,
``<name>.den`` and ``<name>.ratio`` rows whose replicates share one point
set.  Identical (seed, configuration) pairs reproduce the table bitwise.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from rqmcis.digital_nets import NetSpec, PointSet, owen_scramble, sobol_net
from rqmcis.is_core import GaussianMeasure, Proposal, log_lr_gaussian, log_lr_t
from rqmcis.proposals import Integrand
from rqmcis.transforms import inv_norm_cdf, psi_map, tau_map

__all__ = [
    "CSV_HEADER",
    "EstimateRequest",
    "MethodSpec",
    "Problem",
    "RatioEstimate",
    "RmseRow",
    "RmseTable",
    "SlopeFit",
    "compute_reference",
    "derive_seed",
    "fit_slope",
    "is_quadrature",
    "ratio_estimate",
    "rmse_experiment",
    "run_estimate",
    "sample_uniforms",
    "t_is_quadrature",
]

CSV_HEADER = "method,family,nu,N,R,rmse,c_ref,c_ref_provenance,seed0"

_CLAMP = 2.0**-33
_MAX_LOG2_N = 26


def derive_seed(*parts) -> int:
    """Deterministic 63-bit child seed from arbitrary labelled parts."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big") >> 1


def _check_pow2(n: int) -> int:
    m = int(n).bit_length() - 1
    if n != 1 << m or not 0 <= m <= _MAX_LOG2_N:
        raise ValueError(f"N must be a power of 2 with N <= 2^{_MAX_LOG2_N}, got {n}")
    return m


def sample_uniforms(sampler: str, n: int, dim: int, seed: int) -> np.ndarray:
    """(n, dim) uniforms in the open cube from the requested sampler.

    ``rqmc`` scrambles a cached Sobol' net; ``mc`` draws i.i.d. uniforms and
    clamps them to the same open range the nets use.
    """
    m = _check_pow2(n)
    if sampler == "rqmc":
        return owen_scramble(sobol_net(NetSpec(m=m, d=dim)), seed).points
    if sampler == "mc":
        u = np.random.default_rng(seed).random((n, dim))
        return np.clip(u, _CLAMP, 1.0 - _CLAMP)
    raise ValueError(f"unknown sampler {sampler!r}; expected mc or rqmc")


def _uniforms_of(points) -> np.ndarray:
    u = points.points if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    if u.ndim != 2:
        raise ValueError("points must be an N x dim matrix")
    return u


def _mean_checked(terms: np.ndarray, label: str) -> float:
    bad = ~np.isfinite(terms)
    if np.any(bad):
        idx = int(np.nonzero(bad)[0][0])
        raise ValueError(f"non-finite {label} value at point index {idx}")
    return math.fsum(terms.tolist()) / terms.shape[0]


def _integrand_values(f: Integrand, pushed: np.ndarray, log_w: np.ndarray) -> np.ndarray:
    """G(pushed) * W combined in log space when a log form is available."""
    if f.eval_log_g is not None:
        with np.errstate(over="ignore"):
            return np.exp(np.asarray(f.eval_log_g(pushed)) + log_w)
    return np.asarray(f.eval_g(pushed), dtype=np.float64) * np.exp(log_w)


def _gaussian_terms(f, prop, base, u):
    z = inv_norm_cdf(u)
    return _integrand_values(f, prop.push(z), log_lr_gaussian(z, prop, base)), z


def _t_terms(f, prop, base, u, chisq_first=False):
    x = psi_map(tau_map(u, prop.nu, chisq_first=chisq_first), prop.nu)
    return _integrand_values(f, prop.push(x), log_lr_t(x, prop, base)), x


def is_quadrature(f: Integrand, prop: Proposal, base: GaussianMeasure, points) -> float:
    """(1/N) sum G(mu + L z_i) W(z_i) with z_i the normal quantiles of the points."""
    if prop.family != "gaussian":
        raise ValueError("is_quadrature expects a gaussian proposal")
    u = _uniforms_of(points)
    if u.shape[1] != prop.d:
        raise ValueError(f"points have dimension {u.shape[1]}, proposal is {prop.d}")
    terms, _ = _gaussian_terms(f, prop, base, u)
    return _mean_checked(terms, "integrand")


def t_is_quadrature(
    f: Integrand, prop: Proposal, base: GaussianMeasure, points, chisq_first: bool = False
) -> float:
    """Student-t IS quadrature over points in (0,1)^(d+1)."""
    if prop.family != "student_t":
        raise ValueError("t_is_quadrature expects a student_t proposal")
    u = _uniforms_of(points)
    if u.shape[1] != prop.d + 1:
        raise ValueError(
            f"points have dimension {u.shape[1]}, the t path needs d+1 = {prop.d + 1}"
        )
    terms, _ = _t_terms(f, prop, base, u, chisq_first)
    return _mean_checked(terms, "integrand")


@dataclass(frozen=True)
class RatioEstimate:
    numerator: float
    denominator: float
    ratio: float


def _ratio_components(f_test, likelihood, prop, base, u) -> RatioEstimate:
    if prop.family == "gaussian":
        den_terms, mapped = _gaussian_terms(likelihood, prop, base, u)
    else:
        den_terms, mapped = _t_terms(likelihood, prop, base, u)
    pushed = prop.push(mapped)
    num_terms = np.asarray(f_test(pushed), dtype=np.float64) * den_terms
    den = _mean_checked(den_terms, "denominator integrand")
    num = _mean_checked(num_terms, "numerator integrand")
    if den <= 0.0:
        raise ValueError(f"denominator estimate is not positive ({den!r}); degenerate proposal")
    return RatioEstimate(num, den, num / den)


def ratio_estimate(f_test, likelihood: Integrand, prop: Proposal, base: GaussianMeasure, points) -> float:
    """Posterior-expectation ratio estimator with shared points.

    Numerator and denominator quadratures use the same point set; the
    denominator integrand is l(mu + L z) W(z) and the numerator weighs it
    by the test function.
    """
    u = _uniforms_of(points)
    want = prop.d if prop.family == "gaussian" else prop.d + 1
    if u.shape[1] != want:
        raise ValueError(f"points have dimension {u.shape[1]}, expected {want}")
    return _ratio_components(f_test, likelihood, prop, base, u).ratio


@dataclass(frozen=True)
class EstimateRequest:
    """One estimator evaluation: integrand, proposal, sampler, and N = 2^m."""

    integrand: Integrand
    proposal: Proposal
    base: GaussianMeasure
    sampler: str
    n: int
    seed: int = 0
    test_function: Callable | None = None

    def __post_init__(self):
        _check_pow2(self.n)
        if self.sampler not in ("mc", "rqmc"):
            raise ValueError(f"unknown sampler {self.sampler!r}")


def run_estimate(req: EstimateRequest):
    """Evaluate one request; returns a float, or a RatioEstimate in ratio mode."""
    dim = req.proposal.d + (req.proposal.family == "student_t")
    u = sample_uniforms(req.sampler, req.n, dim, req.seed)
    if req.test_function is not None:
        return _ratio_components(req.test_function, req.integrand, req.proposal, req.base, u)
    if req.proposal.family == "gaussian":
        return is_quadrature(req.integrand, req.proposal, req.base, u)
    return t_is_quadrature(req.integrand, req.proposal, req.base, u)


# ---------------------------------------------------------------------------
# RMSE-over-replicates experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Problem:
    """An estimation problem: base measure, integrand, optional test function.

    With a test function the problem is a posterior ratio and every method
    reports numerator, denominator and ratio estimands.
    """

    name: str
    base: GaussianMeasure
    integrand: Integrand
    test_function: Callable | None = None

    @property
    def estimands(self) -> tuple[str, ...]:
        return ("num", "den", "ratio") if self.test_function is not None else ("value",)


@dataclass(frozen=True)
class MethodSpec:
    """A labelled proposal to benchmark."""

    name: str
    proposal: Proposal


@dataclass(frozen=True)
class RmseRow:
    method: str
    family: str
    nu: float | None
    n: int
    replicates: int
    rmse: float
    c_ref: float
    c_ref_provenance: str


@dataclass(frozen=True)
class SlopeFit:
    """OLS fit of log2(rmse) against log2(N)."""

    slope: float
    stderr: float
    n_points: int


def fit_slope(ns: Sequence[float], rmses: Sequence[float]) -> SlopeFit:
    """Least-squares log-log slope; rows with rmse = 0 are excluded."""
    ns = np.asarray(ns, dtype=np.float64)
    rmses = np.asarray(rmses, dtype=np.float64)
    if ns.shape != rmses.shape or ns.ndim != 1:
        raise ValueError("ns and rmses must be 1-d and of equal length")
    if ns.size < 4:
        raise ValueError(f"need at least 4 sample sizes to fit a slope, got {ns.size}")
    keep = rmses > 0.0
    if keep.sum() < 2:
        raise ValueError("fewer than 2 nonzero-rmse rows; slope is undefined")
    x = np.log2(ns[keep])
    y = np.log2(rmses[keep])
    n = x.size
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    stderr = (
        math.sqrt(float(resid @ resid) / (n - 2) / sxx) if n > 2 else float("nan")
    )
    return SlopeFit(slope=slope, stderr=stderr, n_points=int(n))


@dataclass(frozen=True)
class RmseTable:
    """Per-(method, N) RMSE estimates plus the seed that produced them."""

    rows: tuple[RmseRow, ...]
    seed0: int

    def methods(self) -> list[str]:
        seen = dict.fromkeys(row.method for row in self.rows)
        return list(seen)

    def series(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r.method == method]
        if not rows:
            raise KeyError(f"no rows for method {method!r}")
        ns = np.array([r.n for r in rows], dtype=np.float64)
        if np.any(np.diff(ns) <= 0):
            raise ValueError(f"sample sizes not strictly increasing for {method!r}")
        return ns, np.array([r.rmse for r in rows], dtype=np.float64)

    def slope(self, method: str, n_min: int = 2**7, n_max: int = 2**13) -> SlopeFit:
        ns, rmses = self.series(method)
        window = (ns >= n_min) & (ns <= n_max)
        return fit_slope(ns[window], rmses[window])

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER.split(","))
            for r in self.rows:
                writer.writerow(
                    [
                        r.method,
                        r.family,
                        "" if r.nu is None else repr(r.nu),
                        r.n,
                        r.replicates,
                        repr(r.rmse),
                        repr(r.c_ref),
                        r.c_ref_provenance,
                        self.seed0,
                    ]
                )

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "RmseTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER.split(","):
                raise ValueError(f"{path}: unexpected header {header!r}")
            rows = []
            seed0 = 0
            for rec in reader:
                rows.append(
                    RmseRow(
                        method=rec[0],
                        family=rec[1],
                        nu=float(rec[2]) if rec[2] else None,
                        n=int(rec[3]),
                        replicates=int(rec[4]),
                        rmse=float(rec[5]),
                        c_ref=float(rec[6]),
                        c_ref_provenance=rec[7],
                    )
                )
                seed0 = int(rec[8])
        return cls(rows=tuple(rows), seed0=seed0)


def _replicate_estimates(problem, method, sampler, n, replicates, seed0, workers):
    dim = problem.integrand.dim + (method.proposal.family == "student_t")

    def one(r: int) -> tuple[float, ...]:
        seed = derive_seed(seed0, sampler, method.name, n, r)
        u = sample_uniforms(sampler, n, dim, seed)
        if problem.test_function is not None:
            est = _ratio_components(
                problem.test_function, problem.integrand, method.proposal, problem.base, u
            )
            return (est.numerator, est.denominator, est.ratio)
        if method.proposal.family == "gaussian":
            return (is_quadrature(problem.integrand, method.proposal, problem.base, u),)
        return (t_is_quadrature(problem.integrand, method.proposal, problem.base, u),)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(replicates)))
    return [one(r) for r in range(replicates)]


def compute_reference(
    problem: Problem, method: MethodSpec, n_grid: Sequence[int], seed0: int, workers: int = 1
) -> dict[str, tuple[float, str]]:
    """Self-consistent reference values: 8 RQMC replicates at 4x the top N.

    Used when no closed form is available; the provenance string records
    the reference method, sample size and seed.
    """
    n_ref = min(4 * max(n_grid), 1 << _MAX_LOG2_N)
    reps = 8
    ests = _replicate_estimates(problem, method, "rqmc", n_ref, reps, ("cref", seed0), workers)
    provenance = f"rqmc-{method.name}@N={n_ref}x{reps};seed0={seed0}"
    refs = {}
    cols = list(zip(*ests))
    if problem.test_function is not None:
        num = math.fsum(cols[0]) / reps
        den = math.fsum(cols[1]) / reps
        refs["num"] = (num, provenance)
        refs["den"] = (den, provenance)
        refs["ratio"] = (num / den, provenance)
    else:
        refs["value"] = (math.fsum(cols[0]) / reps, provenance)
    return refs


def rmse_experiment(
    problem: Problem,
    methods: Sequence[MethodSpec],
    n_grid: Sequence[int],
    replicates: int,
    seed0: int,
    sampler: str,
    c_refs: dict[str, tuple[float, str]] | None = None,
    reference_method: MethodSpec | None = None,
) -> RmseTable:
    """RMSE of every method over R independent replicates on an N grid.

    ``c_refs`` maps estimand labels ("value" or "num"/"den"/"ratio") to
    (reference value, provenance); missing references are computed from an
    RQMC run of ``reference_method`` (default: the first method) at four
    times the largest N, averaged over eight scrambles.
    """
    if not methods:
        raise ValueError("method list is empty")
    n_grid = sorted(int(n) for n in n_grid)
    if len(set(n_grid)) != len(n_grid):
        raise ValueError("duplicate sample sizes in the N grid")
    for n in n_grid:
        _check_pow2(n)
    if sampler not in ("mc", "rqmc"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    workers = max(1, int(os.environ.get("RQMCIS_WORKERS", "1")))

    estimands = problem.estimands
    refs = dict(c_refs) if c_refs else {}
    missing = [e for e in estimands if e not in refs]
    if missing:
        refs.update(
            compute_reference(problem, reference_method or methods[0], n_grid, seed0, workers)
        )

    rows: list[RmseRow] = []
    for method in methods:
        per_estimand: dict[str, list[RmseRow]] = {e: [] for e in estimands}
        for n in n_grid:
            ests = _replicate_estimates(
                problem, method, sampler, n, replicates, seed0, workers
            )
            cols = list(zip(*ests))
            for j, estimand in enumerate(estimands):
                c_ref, provenance = refs[estimand]
                rmse = math.sqrt(
                    math.fsum((e - c_ref) ** 2 for e in cols[j]) / replicates
                )
                label = method.name if estimand == "value" else f"{method.name}.{estimand}"
                per_estimand[estimand].append(
                    RmseRow(
                        method=label,
                        family=method.proposal.family,
                        nu=method.proposal.nu,
                        n=n,
                        replicates=replicates,
                        rmse=rmse,
                        c_ref=c_ref,
                        c_ref_provenance=provenance,
                    )
                )
        for estimand in estimands:
            rows.extend(per_estimand[estimand])
    return RmseTable(rows=tuple(rows), seed0=seed0)
