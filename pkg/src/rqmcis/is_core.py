"""Likelihood-ratio evaluation and the eigenvalue QMC-friendliness diagnostic.

All densities and ratios are computed in log space with log-determinants
cached at construction, so no quadratic form is ever exponentiated before
the final combination.  ``GaussianMeasure`` and ``Proposal`` are immutable
after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GaussianMeasure",
    "Proposal",
    "BgcDiagnostic",
    "standard_gaussian",
    "root_from_cov",
    "log_lr_gaussian",
    "log_lr_t",
    "bgc_eigen_diagnostic",
    "rotate_root",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _check_symmetric(mat: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > tol * scale:
        raise ValueError("matrix is not symmetric to 1e-12")
    return 0.5 * (mat + mat.T)


def _cholesky_reporting(mat: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; on failure names the failing pivot."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        # locate the offending pivot with a plain textbook sweep
        d = mat.shape[0]
        a = mat.copy()
        for k in range(d):
            pivot = a[k, k] - np.dot(a[k, :k], a[k, :k])
            if pivot <= 0.0:
                raise np.linalg.LinAlgError(
                    f"matrix is not positive definite: pivot {k} is {pivot:.6e}"
                ) from None
            a[k, k] = math.sqrt(pivot)
            for i in range(k + 1, d):
                a[i, k] = (a[i, k] - np.dot(a[i, :k], a[k, :k])) / a[k, k]
        raise  # pragma: no cover - numpy failed but the sweep passed


class GaussianMeasure:
    """Base measure N(mu0, Sigma0) with cached inverse and log-determinant."""

    def __init__(self, mu0, sigma0):
        self.mu0 = np.asarray(mu0, dtype=np.float64).reshape(-1)
        sigma0 = _check_symmetric(sigma0)
        if sigma0.shape[0] != self.mu0.shape[0]:
            raise ValueError("mu0 and sigma0 dimensions disagree")
        self.sigma0 = sigma0
        chol = _cholesky_reporting(sigma0)
        self.log_det_sigma0 = 2.0 * float(np.sum(np.log(np.diag(chol))))
        self.sigma0_inv = np.linalg.inv(sigma0)
        self.sigma0_inv = 0.5 * (self.sigma0_inv + self.sigma0_inv.T)
        self._chol = chol
        for arr in (self.mu0, self.sigma0, self.sigma0_inv):
            arr.setflags(write=False)

    @property
    def d(self) -> int:
        return self.mu0.shape[0]

    def log_pdf(self, z) -> np.ndarray | float:
        """log N(z; mu0, Sigma0), vectorized over leading axes of z."""
        delta = np.asarray(z, dtype=np.float64) - self.mu0
        q = np.einsum("...i,ij,...j->...", delta, self.sigma0_inv, delta)
        return -0.5 * (self.d * _LOG_2PI + self.log_det_sigma0 + q)

    def __repr__(self) -> str:
        return f"GaussianMeasure(d={self.d})"


def standard_gaussian(d: int) -> GaussianMeasure:
    """N(0, I_d)."""
    return GaussianMeasure(np.zeros(d), np.eye(d))


class Proposal:
    """An IS proposal: Gaussian or Student-t with centre mu and scale root L.

    ``root_l`` satisfies L L^T = Sigma; ``nu`` is the degrees of freedom and
    must be set exactly when the family is ``student_t``.
    """

    families = ("gaussian", "student_t")

    def __init__(self, family: str, mu, root_l, nu: float | None = None):
        if family not in self.families:
            raise ValueError(f"unknown proposal family {family!r}")
        if family == "student_t":
            if nu is None or not nu > 0:
                raise ValueError("student_t proposals require nu > 0")
        elif nu is not None:
            raise ValueError("nu is only meaningful for student_t proposals")
        self.family = family
        self.mu = np.asarray(mu, dtype=np.float64).reshape(-1)
        self.root_l = np.asarray(root_l, dtype=np.float64)
        if self.root_l.shape != (self.mu.shape[0],) * 2:
            raise ValueError("root_l must be d x d")
        sign, log_abs_det = np.linalg.slogdet(self.root_l)
        if sign == 0 or not np.isfinite(log_abs_det):
            raise np.linalg.LinAlgError("root_l is singular")
        self.nu = float(nu) if nu is not None else None
        self.log_det_sigma = 2.0 * float(log_abs_det)
        self.mu.setflags(write=False)
        self.root_l.setflags(write=False)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return self.root_l @ self.root_l.T

    def push(self, z) -> np.ndarray:
        """mu + L z, vectorized over leading axes of z."""
        return self.mu + np.asarray(z, dtype=np.float64) @ self.root_l.T

    def __repr__(self) -> str:
        nu = f", nu={self.nu}" if self.nu is not None else ""
        return f"Proposal({self.family}, d={self.d}{nu})"


@dataclass(frozen=True)
class BgcDiagnostic:
    """Spectrum of L^T Sigma0^{-1} L and the QMC-friendliness verdict.

    The likelihood-ratio factor satisfies the boundary growth condition
    exactly when every eigenvalue is >= 1; ``passes`` applies the numerical
    slack ``tol``.
    """

    eigenvalues: np.ndarray
    min_eig: float
    passes: bool
    tol: float = 1e-10


def root_from_cov(sigma, method: str = "cholesky") -> np.ndarray:
    """Square root L of an SPD matrix with L L^T = sigma.

    ``cholesky`` returns the lower-triangular factor, ``spectral`` the
    symmetric PSD root; both reconstruct sigma to 1e-10 relative Frobenius.
    """
    sigma = _check_symmetric(sigma)
    if method == "cholesky":
        return _cholesky_reporting(sigma)
    if method == "spectral":
        w, q = np.linalg.eigh(sigma)
        if w[0] <= 0.0:
            raise np.linalg.LinAlgError(
                f"matrix is not positive definite: smallest eigenvalue {w[0]:.6e}"
            )
        return (q * np.sqrt(w)) @ q.T
    raise ValueError(f"unknown root method {method!r}")


def log_lr_gaussian(z, prop: Proposal, base: GaussianMeasure):
    """log W(z) for a Gaussian proposal, vectorized over leading axes of z.

    W(z) = p(mu + L z; mu0, Sigma0) / p(mu + L z; mu, Sigma); identically 0
    when the proposal equals the base measure.
    """
    if prop.family != "gaussian":
        raise ValueError("log_lr_gaussian expects a gaussian proposal")
    z = np.asarray(z, dtype=np.float64)
    delta = (prop.mu - base.mu0) + z @ prop.root_l.T
    q = np.einsum("...i,ij,...j->...", delta, base.sigma0_inv, delta)
    zz = np.sum(z * z, axis=-1)
    return 0.5 * (prop.log_det_sigma - base.log_det_sigma0) + 0.5 * zz - 0.5 * q


def _log_t_norm_const(d: int, nu: float, log_det_sigma: float) -> float:
    return (
        math.lgamma(0.5 * (nu + d))
        - math.lgamma(0.5 * nu)
        - 0.5 * d * math.log(nu * math.pi)
        - 0.5 * log_det_sigma
    )


def log_lr_t(x, prop: Proposal, base: GaussianMeasure):
    """log[p(mu + L x; mu0, Sigma0) / q(mu + L x; mu, Sigma, nu)].

    Includes the full Student-t normalizing constant; finite for all finite
    x, and W(x) -> 0 as ||x|| -> infinity whenever L^T Sigma0^{-1} L is SPD.
    """
    if prop.family != "student_t":
        raise ValueError("log_lr_t expects a student_t proposal")
    x = np.asarray(x, dtype=np.float64)
    t = prop.push(x)
    log_p = base.log_pdf(t)
    xx = np.sum(x * x, axis=-1)
    log_q = _log_t_norm_const(prop.d, prop.nu, prop.log_det_sigma) - 0.5 * (
        prop.nu + prop.d
    ) * np.log1p(xx / prop.nu)
    return log_p - log_q


def bgc_eigen_diagnostic(L, base: GaussianMeasure, tol: float = 1e-10) -> BgcDiagnostic:
    """Eigenvalues of L^T Sigma0^{-1} L and the >= 1 verdict.

    Invariant to the choice of square root: any L' = L U with U orthogonal
    yields the same spectrum.
    """
    L = np.asarray(L, dtype=np.float64)
    sign, _ = np.linalg.slogdet(L)
    if sign == 0:
        raise np.linalg.LinAlgError("L is singular")
    m = L.T @ base.sigma0_inv @ L
    eig = np.linalg.eigvalsh(0.5 * (m + m.T))
    if eig[0] <= 0.0:
        raise np.linalg.LinAlgError(
            f"diagnostic matrix is not positive definite (eigenvalue {eig[0]:.6e})"
        )
    eig.setflags(write=False)
    min_eig = float(eig[0])
    return BgcDiagnostic(
        eigenvalues=eig, min_eig=min_eig, passes=min_eig >= 1.0 - tol, tol=tol
    )


def rotate_root(L, U) -> np.ndarray:
    """L U for orthogonal U; preserves L L^T and the diagnostic spectrum."""
    L = np.asarray(L, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if U.shape != L.shape:
        raise ValueError("U must match the shape of L")
    if np.max(np.abs(U.T @ U - np.eye(U.shape[0]))) > 1e-10:
        raise ValueError("U is not orthogonal to 1e-10")
    return L @ U
