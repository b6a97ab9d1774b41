"""ODIS and Laplace proposal construction via Newton mode finding.

The target of the search is H(z) = log G(z) + log p(z; mu0, Sigma0), the
log of the unnormalized optimal IS density.  ODIS shifts the proposal mean
to the mode and keeps the base covariance; Laplace IS additionally matches
the curvature, Sigma* = (-grad^2 H(mu*))^{-1} = (Sigma0^{-1} -
grad^2 log G(mu*))^{-1}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from rqmcis.is_core import GaussianMeasure, Proposal, root_from_cov

__all__ = [
    "Integrand",
    "ModeResult",
    "find_mode",
    "laplace_cov",
    "build_prior",
    "build_odis",
    "build_laplace",
    "to_student_t",
]


@dataclass(frozen=True)
class Integrand:
    """Callable bundle for an integrand G against the Gaussian base measure.

    ``eval_g`` and ``eval_log_g`` are vectorized over leading axes;
    ``grad_log_g`` / ``hess_log_g`` are evaluated at single points (they
    exist for mode finding).  For signed integrands only ``eval_g`` is
    meaningful and the log/derivative callbacks may be None.
    """

    dim: int
    eval_g: Callable
    eval_log_g: Callable | None = None
    grad_log_g: Callable | None = None
    hess_log_g: Callable | None = None

    @classmethod
    def from_log_g(cls, dim, eval_log_g, grad_log_g=None, hess_log_g=None) -> "Integrand":
        def eval_g(z):
            return np.exp(eval_log_g(z))

        return cls(dim, eval_g, eval_log_g, grad_log_g, hess_log_g)


@dataclass(frozen=True)
class ModeResult:
    """Outcome of the Newton search for the mode of H."""

    mu_star: np.ndarray
    h_value: float
    grad_norm: float
    iterations: int
    converged: bool


def _require_smooth(f: Integrand) -> None:
    if f.eval_log_g is None or f.grad_log_g is None or f.hess_log_g is None:
        raise ValueError("integrand must provide log G with gradient and Hessian")


def find_mode(
    f: Integrand,
    base: GaussianMeasure,
    tol: float = 1e-10,
    max_iter: int = 100,
    init=None,
) -> ModeResult:
    """Newton ascent with backtracking on H(z) = log G(z) + log p(z; base).

    Falls back to the gradient direction whenever the Newton step is not an
    ascent direction.  Non-convergence is reported in the result, not
    raised; a non-finite H value at an iterate is an error.
    """
    _require_smooth(f)
    z = np.array(base.mu0 if init is None else init, dtype=np.float64).reshape(-1)
    if z.shape[0] != f.dim:
        raise ValueError("init has the wrong dimension")

    def h(zz):
        return float(f.eval_log_g(zz)) + float(base.log_pdf(zz))

    def grad_h(zz):
        return np.asarray(f.grad_log_g(zz), dtype=np.float64) - base.sigma0_inv @ (
            zz - base.mu0
        )

    h_val = h(z)
    if not np.isfinite(h_val):
        raise ValueError("H is not finite at the initial point")
    g = grad_h(z)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= tol:
            return ModeResult(z, h_val, float(np.max(np.abs(g))), iterations - 1, True)
        hess = np.asarray(f.hess_log_g(z), dtype=np.float64) - base.sigma0_inv
        try:
            direction = np.linalg.solve(-hess, g)
        except np.linalg.LinAlgError:
            direction = g
        slope = float(direction @ g)
        if slope <= 0.0:
            direction = g
            slope = float(g @ g)
        step, z_new, h_new = 1.0, None, None
        while step > 2.0**-60:
            cand = z + step * direction
            h_cand = h(cand)
            if np.isfinite(h_cand) and h_cand >= h_val + 1e-4 * step * slope:
                z_new, h_new = cand, h_cand
                break
            step *= 0.5
        if z_new is None or h_new <= h_val:
            # H improvements fell below float resolution; take the full
            # Newton step anyway if it still shrinks the gradient
            cand = z + direction
            h_cand, g_cand = h(cand), grad_h(cand)
            if np.isfinite(h_cand) and np.max(np.abs(g_cand)) < np.max(np.abs(g)):
                z, h_val, g = cand, h_cand, g_cand
                continue
            break  # genuinely stalled
        z, h_val = z_new, h_new
        if not np.isfinite(h_val):
            raise ValueError("H became non-finite during the mode search")
        g = grad_h(z)
    grad_norm = float(np.max(np.abs(g)))
    return ModeResult(z, h_val, grad_norm, iterations, grad_norm <= tol)


def laplace_cov(f: Integrand, mu_star, base: GaussianMeasure) -> np.ndarray:
    """Sigma* = (Sigma0^{-1} - grad^2 log G(mu*))^{-1}.

    Requires the negative curvature of H at the mode to be SPD; the error
    for a degenerate mode reports the offending eigenvalue.
    """
    _require_smooth(f)
    mu_star = np.asarray(mu_star, dtype=np.float64).reshape(-1)
    a = base.sigma0_inv - np.asarray(f.hess_log_g(mu_star), dtype=np.float64)
    a = 0.5 * (a + a.T)
    eig_min = float(np.linalg.eigvalsh(a)[0])
    if eig_min <= 0.0:
        raise np.linalg.LinAlgError(
            f"-grad^2 H(mu*) is not positive definite (eigenvalue {eig_min:.6e}); "
            "the mode is degenerate or not a maximum"
        )
    sigma_star = np.linalg.inv(a)
    return 0.5 * (sigma_star + sigma_star.T)


def build_prior(base: GaussianMeasure, root_method: str = "cholesky") -> Proposal:
    """The base measure itself as the proposal; the likelihood ratio is 1."""
    return Proposal("gaussian", base.mu0, root_from_cov(base.sigma0, root_method))


def _converged_mode(f, base, tol, max_iter, init) -> ModeResult:
    mode = find_mode(f, base, tol=tol, max_iter=max_iter, init=init)
    if not mode.converged:
        raise RuntimeError(
            f"mode search did not converge in {mode.iterations} iterations "
            f"(grad norm {mode.grad_norm:.3e})"
        )
    return mode


def build_odis(
    f: Integrand,
    base: GaussianMeasure,
    tol: float = 1e-10,
    max_iter: int = 100,
    init=None,
    root_method: str = "cholesky",
) -> Proposal:
    """Gaussian proposal N(mu*, Sigma0): optimal drift, original covariance."""
    mode = _converged_mode(f, base, tol, max_iter, init)
    return Proposal("gaussian", mode.mu_star, root_from_cov(base.sigma0, root_method))


def build_laplace(
    f: Integrand,
    base: GaussianMeasure,
    tol: float = 1e-10,
    max_iter: int = 100,
    init=None,
    root_method: str = "cholesky",
) -> Proposal:
    """Gaussian proposal N(mu*, Sigma*): mode and curvature matched."""
    mode = _converged_mode(f, base, tol, max_iter, init)
    sigma_star = laplace_cov(f, mode.mu_star, base)
    return Proposal("gaussian", mode.mu_star, root_from_cov(sigma_star, root_method))


def to_student_t(prop: Proposal, nu: float) -> Proposal:
    """Student-t variant of a Gaussian proposal: same centre and scale root."""
    if prop.family != "gaussian":
        raise ValueError("expected a gaussian proposal")
    return Proposal("student_t", prop.mu, prop.root_l, nu=nu)
