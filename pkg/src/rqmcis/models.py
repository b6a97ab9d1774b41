"""The worked integrands: discount-bond pricing and Bayesian logistic regression.

The bond model prices a one-year zero-coupon bond under geometric interest
rates, G(z) = 1 / (1 + c exp(sigma z)) with c = r0 exp(-sigma^2/2); the
mode and Laplace variance have scalar closed forms and the tails of the IS
integrand can be probed analytically.

The logistic model is Bayesian logistic regression with a standard normal
prior over d = 8 coefficients (intercept plus seven covariates of a
labour-force participation dataset); everything is evaluated through
overflow-safe log-sum-exp forms.
"""

from __future__ import annotations

import csv
import importlib.resources
import math
from dataclasses import dataclass, field

import numpy as np

from rqmcis.is_core import GaussianMeasure, Proposal, log_lr_gaussian
from rqmcis.proposals import Integrand

__all__ = [
    "BondModel",
    "LogisticModel",
    "TailProbe",
    "bond_integrand",
    "bond_mode_solve",
    "bond_sigma_star",
    "bond_tail_probe",
    "logistic_load",
    "bundled_dataset_path",
    "logistic_integrand",
    "logistic_test_fn",
    "exp_integrand",
    "exp_true_value",
    "signed_cubic_integrand",
]

RESPONSE_COLUMN = "inlf"
N_COVARIATES = 7


def _sigmoid(t):
    return np.exp(-np.logaddexp(0.0, -t))


# ---------------------------------------------------------------------------
# Rendleman-Bartter discount bond (d = 1)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BondModel:
    """Bond parameters: initial rate r0 > 0 and volatility sigma > 0."""

    r0: float
    sigma: float
    c: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "c", self.r0 * math.exp(-0.5 * self.sigma**2))

    def rate(self, z):
        """Year-one rate r1(z) = c exp(sigma z)."""
        return self.c * np.exp(self.sigma * np.asarray(z, dtype=np.float64))


def bond_integrand(model: BondModel) -> Integrand:
    """d=1 integrand G(z) = 1/(1 + r1(z)) with analytic log-derivatives."""
    sigma, log_c = model.sigma, math.log(model.c)

    def eval_log_g(z):
        s = log_c + sigma * np.asarray(z, dtype=np.float64)[..., 0]
        return -np.logaddexp(0.0, s)

    def eval_g(z):
        return np.exp(eval_log_g(z))

    def grad_log_g(z):
        s = log_c + sigma * float(np.asarray(z).reshape(-1)[0])
        return np.array([-sigma * _sigmoid(s)])

    def hess_log_g(z):
        s = log_c + sigma * float(np.asarray(z).reshape(-1)[0])
        p = _sigmoid(s)
        return np.array([[-sigma**2 * p * (1.0 - p)]])

    return Integrand(1, eval_g, eval_log_g, grad_log_g, hess_log_g)


def bond_mode_solve(model: BondModel, tol: float = 1e-13) -> float:
    """Solve -sigma r1(mu)/(1 + r1(mu)) = mu on (-sigma, 0).

    Safeguarded Newton on the residual; the root is bracketed because the
    residual is positive at -sigma and negative at 0.
    """
    sigma = model.sigma

    def residual(mu):
        r = float(model.rate(mu))
        return -sigma * r / (1.0 + r) - mu

    def residual_prime(mu):
        r = float(model.rate(mu))
        return -(sigma**2) * r / (1.0 + r) ** 2 - 1.0

    lo, hi = -sigma, 0.0
    mu = -0.5 * sigma
    for _ in range(200):
        f = residual(mu)
        if abs(f) < tol:
            break
        if f > 0:
            lo = mu
        else:
            hi = mu
        step = f / residual_prime(mu)
        mu_new = mu - step
        if not lo < mu_new < hi:
            mu_new = 0.5 * (lo + hi)
        if abs(mu_new - mu) < 1e-16 * max(1.0, abs(mu)):
            mu = mu_new
            break
        mu = mu_new
    return mu


def bond_sigma_star(model: BondModel, mu_star: float) -> float:
    """Laplace variance (1 - F''(mu*))^{-1} with F'' = -sigma^2 r1/(1+r1)^2."""
    r = float(model.rate(mu_star))
    f_second = -(model.sigma**2) * r / (1.0 + r) ** 2
    return 1.0 / (1.0 - f_second)


@dataclass(frozen=True)
class TailProbe:
    """Grid probe of G_IS(z) = G(mu + L z) W(z) for one bond IS method.

    ``classification`` is "growth" when the larger of G_IS(+-8) exceeds
    G_IS(0) by a factor >= 10, "decay" when both are below G_IS(0), and
    "indeterminate" otherwise.  Values are reported in log space; ``max_gis``
    may be +inf when the grid reaches far into a growing tail.
    """

    max_gis: float
    z_at_max: float
    log_gis_0: float
    log_gis_neg8: float
    log_gis_pos8: float
    classification: str


def bond_tail_probe(model: BondModel, method: str, z_grid=None) -> TailProbe:
    """Evaluate the bond IS integrand on a grid and classify its tails."""
    if method not in ("odis", "lapis"):
        raise ValueError(f"unknown method {method!r}; expected odis or lapis")
    mu_star = bond_mode_solve(model)
    scale = 1.0 if method == "odis" else math.sqrt(bond_sigma_star(model, mu_star))
    prop = Proposal("gaussian", [mu_star], [[scale]])
    base = GaussianMeasure([0.0], [[1.0]])
    f = bond_integrand(model)

    def log_gis(z):
        z = np.asarray(z, dtype=np.float64).reshape(-1, 1)
        return f.eval_log_g(prop.push(z)) + log_lr_gaussian(z, prop, base)

    if z_grid is None:
        z_grid = np.linspace(-8.0, 8.0, 321)
    z_grid = np.asarray(z_grid, dtype=np.float64)
    values = log_gis(z_grid)
    k = int(np.argmax(values))
    with np.errstate(over="ignore"):
        max_gis = float(np.exp(values[k]))
    at_0, at_neg, at_pos = (float(log_gis([z])[0]) for z in (0.0, -8.0, 8.0))
    if max(at_neg, at_pos) >= at_0 + math.log(10.0):
        classification = "growth"
    elif max(at_neg, at_pos) < at_0:
        classification = "decay"
    else:
        classification = "indeterminate"
    return TailProbe(max_gis, float(z_grid[k]), at_0, at_neg, at_pos, classification)


# ---------------------------------------------------------------------------
# Bayesian logistic regression (d = 8)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Design matrix with intercept column, binary responses, and sizes."""

    X: np.ndarray
    Y: np.ndarray
    n: int
    d: int


def bundled_dataset_path() -> str:
    """Path of the labour-force participation CSV shipped with the package."""
    return str(importlib.resources.files("rqmcis.data").joinpath("labour_force.csv"))


def logistic_load(path=None, rows: int | None = None, standardize: bool = False) -> LogisticModel:
    """Load the labour-force CSV into a LogisticModel.

    The file must have a header with the binary response column ``inlf``
    and exactly seven covariate columns; an intercept column of ones is
    prepended, giving d = 8.  ``rows`` keeps only the first ``rows``
    records (file order).  ``standardize`` z-scores the non-intercept
    covariates of the selected slice.
    """
    if path is None:
        path = bundled_dataset_path()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if RESPONSE_COLUMN not in header:
            raise ValueError(f"{path}: missing response column {RESPONSE_COLUMN!r}")
        y_col = header.index(RESPONSE_COLUMN)
        if len(header) != N_COVARIATES + 1:
            raise ValueError(
                f"{path}: expected {N_COVARIATES} covariate columns plus "
                f"{RESPONSE_COLUMN!r}, found {len(header)} columns"
            )
        ys, xs = [], []
        for lineno, record in enumerate(reader, start=2):
            if rows is not None and len(ys) >= rows:
                break
            if len(record) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                vals = [float(v) for v in record]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if any(not math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: missing or non-finite value")
            y = vals[y_col]
            if y not in (0.0, 1.0):
                raise ValueError(f"{path}:{lineno}: response must be 0 or 1, got {y}")
            ys.append(y)
            xs.append([v for i, v in enumerate(vals) if i != y_col])
    if rows is not None and len(ys) < rows:
        raise ValueError(f"{path}: asked for {rows} rows, file has {len(ys)}")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if not np.any(x):
        raise ValueError(f"{path}: predictors are all zero")
    if standardize:
        sd = x.std(axis=0)
        if np.any(sd == 0.0):
            ci = int(np.nonzero(sd == 0.0)[0][0])
            bad = header[ci if ci < y_col else ci + 1]
            raise ValueError(f"{path}: cannot standardize constant column {bad!r}")
        x = (x - x.mean(axis=0)) / sd
    x = np.hstack([np.ones((x.shape[0], 1)), x])
    x.setflags(write=False)
    y.setflags(write=False)
    return LogisticModel(X=x, Y=y, n=x.shape[0], d=x.shape[1])


def logistic_integrand(model: LogisticModel) -> Integrand:
    """Likelihood bundle: log l(z), gradient and Hessian, all overflow-safe.

    F(z) = sum_i Y_i x_i'z - sum_i log(1 + exp(x_i'z)); the Hessian is
    -X' S X with S = diag(s_i (1 - s_i)) and s_i the fitted probabilities.
    """
    X, Y = model.X, model.Y

    def eval_log_g(z):
        t = np.asarray(z, dtype=np.float64) @ X.T
        return t @ Y - np.logaddexp(0.0, t).sum(axis=-1)

    def eval_g(z):
        return np.exp(eval_log_g(z))

    def grad_log_g(z):
        s = _sigmoid(X @ np.asarray(z, dtype=np.float64))
        return X.T @ (Y - s)

    def hess_log_g(z):
        s = _sigmoid(X @ np.asarray(z, dtype=np.float64))
        return -(X.T * (s * (1.0 - s))) @ X

    return Integrand(model.d, eval_g, eval_log_g, grad_log_g, hess_log_g)


def logistic_test_fn():
    """Posterior test function f(z) = ||z||^2, vectorized."""

    def f(z):
        z = np.asarray(z, dtype=np.float64)
        return np.sum(z * z, axis=-1)

    return f


# ---------------------------------------------------------------------------
# Synthetic closed-form problems
# ---------------------------------------------------------------------------

def exp_integrand(a) -> Integrand:
    """G(z) = exp(a'z); the base-measure integral has the closed form
    exp(a'mu0 + a'Sigma0 a / 2)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)

    def eval_log_g(z):
        return np.asarray(z, dtype=np.float64) @ a

    def eval_g(z):
        return np.exp(eval_log_g(z))

    def grad_log_g(z):
        return a.copy()

    def hess_log_g(z):
        return np.zeros((a.size, a.size))

    return Integrand(a.size, eval_g, eval_log_g, grad_log_g, hess_log_g)


def exp_true_value(a, base: GaussianMeasure) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    return float(np.exp(a @ base.mu0 + 0.5 * a @ base.sigma0 @ a))


def signed_cubic_integrand() -> Integrand:
    """Signed d=1 integrand G(z) = z^3 - z; the N(0,1) integral is 0."""

    def eval_g(z):
        t = np.asarray(z, dtype=np.float64)[..., 0]
        return t**3 - t

    return Integrand(1, eval_g)
