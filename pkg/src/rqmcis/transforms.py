"""Maps from uniform variates to Gaussian and Student-t inputs.

Implements the inverse normal CDF (rational approximation plus one Newton
polish step against an in-house erfc), the lower incomplete gamma function
and its inverse (series / continued fraction, Newton with a bisection
safeguard started from a Wilson-Hilferty estimate), and the uniform-to-t
transport pair: ``tau_map`` turns d+1 uniforms into d standard normals plus
a chi-square(nu) variate, ``psi_map`` collapses them to a standard
multivariate-t vector.

All functions accept scalars or arrays and are pure; heavy paths are
vectorized.  The chi-square variate is driven by the *last* input
coordinate by default; ``chisq_first=True`` moves it to the first (most
equidistributed) coordinate for experimentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GammaParams",
    "erfc",
    "normal_cdf",
    "inv_norm_cdf",
    "lower_inc_gamma",
    "inv_lower_inc_gamma",
    "reg_lower_inc_gamma",
    "inv_reg_lower_inc_gamma",
    "tau_map",
    "psi_map",
]

_EPS = np.finfo(float).eps
_TINY = 1e-300
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class GammaParams:
    """Shape/scale pair for the chi-square leg: alpha = nu/2, scale fixed at 2."""

    alpha: float
    scale: float = 2.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def _alpha_of(p) -> float:
    alpha = float(p.alpha) if isinstance(p, GammaParams) else float(p)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return alpha


# ---------------------------------------------------------------------------
# regularized lower incomplete gamma P(a, x) and its inverse
# ---------------------------------------------------------------------------

def _gamma_p_series(alpha: float, x: np.ndarray) -> np.ndarray:
    """P(alpha, x) by the ascending series; intended for x < alpha + 1."""
    out = np.zeros_like(x)
    idx = np.flatnonzero(x > 0)
    xv = x[idx]
    term = np.full_like(xv, 1.0 / alpha)
    total = term.copy()
    n = 0
    # series terms decay once n > x; the cap covers very large alpha
    while idx.size and n < 20000:
        n += 1
        term *= xv / (alpha + n)
        total += term
        done = np.abs(term) <= np.abs(total) * _EPS
        if np.any(done):
            sub = idx[done]
            out[sub] = total[done] * np.exp(
                alpha * np.log(x[sub]) - x[sub] - math.lgamma(alpha)
            )
            keep = ~done
            idx, xv, term, total = idx[keep], xv[keep], term[keep], total[keep]
    if idx.size:  # hit the cap; emit the partial sums
        out[idx] = total * np.exp(alpha * np.log(xv) - xv - math.lgamma(alpha))
    return out


def _gamma_q_contfrac(alpha: float, x: np.ndarray) -> np.ndarray:
    """Q(alpha, x) = 1 - P(alpha, x) by modified Lentz; for x >= alpha + 1."""
    out = np.zeros_like(x)
    idx = np.arange(x.size)
    xv = x.copy()
    b = xv + 1.0 - alpha
    c = np.full_like(xv, 1.0 / _TINY)
    d = 1.0 / np.maximum(b, _TINY)
    h = d.copy()
    for i in range(1, 20000):
        if not idx.size:
            break
        an = -i * (i - alpha)
        b += 2.0
        d = an * d + b
        np.copyto(d, _TINY, where=np.abs(d) < _TINY)
        c = b + an / c
        np.copyto(c, _TINY, where=np.abs(c) < _TINY)
        d = 1.0 / d
        delta = d * c
        h *= delta
        done = np.abs(delta - 1.0) <= _EPS
        if np.any(done):
            sub = idx[done]
            out[sub] = h[done] * np.exp(
                alpha * np.log(x[sub]) - x[sub] - math.lgamma(alpha)
            )
            keep = ~done
            idx, xv, b, c, d, h = (a[keep] for a in (idx, xv, b, c, d, h))
    if idx.size:
        out[idx] = h * np.exp(alpha * np.log(xv) - xv - math.lgamma(alpha))
    return out


def reg_lower_inc_gamma(p, x):
    """Regularized lower incomplete gamma P(alpha, x) = gamma_alpha(x)/Gamma(alpha)."""
    alpha = _alpha_of(p)
    x_arr = np.asarray(x, dtype=np.float64)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    if np.any(x_arr < 0):
        raise ValueError("x must be nonnegative")
    out = np.empty_like(x_arr)
    lo = x_arr < alpha + 1.0
    out[lo] = _gamma_p_series(alpha, x_arr[lo])
    out[~lo] = 1.0 - _gamma_q_contfrac(alpha, x_arr[~lo])
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def lower_inc_gamma(p, x):
    """Lower incomplete gamma gamma_alpha(x); monotone in x with limit Gamma(alpha)."""
    alpha = _alpha_of(p)
    return reg_lower_inc_gamma(alpha, x) * math.gamma(alpha)


def _wilson_hilferty_start(alpha: float, u: np.ndarray) -> np.ndarray:
    """Initial guess for the P(alpha, .) quantile.

    Wilson-Hilferty for alpha > 1; the leading series term
    x ~ (u * Gamma(alpha+1))**(1/alpha) for alpha <= 1 and whenever the
    cube turns nonpositive in the far left tail.
    """
    small_form = np.exp((np.log(u) + math.lgamma(alpha + 1.0)) / alpha)
    if alpha <= 1.0:
        return np.maximum(np.minimum(small_form, 1e300), 1e-300)
    g1 = 1.0 / (9.0 * alpha)
    z = inv_norm_cdf(u)
    x = alpha * (1.0 - g1 + z * np.sqrt(g1)) ** 3
    bad = (x <= 0.0) | ~np.isfinite(x)
    x = np.where(bad & np.isfinite(small_form) & (small_form > 0), small_form, x)
    return np.maximum(x, 1e-300)


def inv_reg_lower_inc_gamma(p, u):
    """Quantile of P(alpha, .): x with P(alpha, x) = u, for u in (0, 1).

    Newton iteration on t = log x with a maintained bracket (quadratic
    convergence at every scale of x, including the far-left tail at small
    alpha); bisects in t whenever a step leaves the bracket.
    """
    alpha = _alpha_of(p)
    u_arr = np.asarray(u, dtype=np.float64)
    scalar = u_arr.ndim == 0
    u_arr = np.atleast_1d(u_arr).astype(np.float64)
    if np.any((u_arr <= 0.0) | (u_arr >= 1.0)):
        raise ValueError("u must lie strictly inside (0, 1)")
    log_norm = math.lgamma(alpha)
    out = np.empty_like(u_arr)

    idx = np.arange(u_arr.size)
    t = np.log(_wilson_hilferty_start(alpha, u_arr))
    uv = u_arr.copy()
    lo = np.full_like(t, -np.inf)
    hi = np.full_like(t, np.inf)
    for _ in range(120):
        if not idx.size:
            break
        x = np.exp(t)
        f = reg_lower_inc_gamma(alpha, x) - uv
        lo = np.where(f < 0, np.maximum(lo, t), lo)
        hi = np.where(f > 0, np.minimum(hi, t), hi)
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            # dP/dt = x^alpha e^{-x} / Gamma(alpha) at x = e^t
            dpdt = np.exp(alpha * t - x - log_norm)
            t_new = np.where(dpdt > 1e-280, t - f / dpdt, np.nan)
            both = np.isfinite(lo) & np.isfinite(hi)
            fallback = np.where(
                both,
                0.5 * (lo + hi),
                np.where(f > 0, t - 1.0, t + 1.0),  # expand toward the unseen side
            )
            bad = ~np.isfinite(t_new) | (t_new <= lo) | (t_new >= hi)
            t_new = np.clip(np.where(bad, fallback, t_new), -745.0, 709.0)
        done = np.abs(t_new - t) <= 1e-13
        if np.any(done):
            sub = idx[done]
            out[sub] = np.exp(t_new[done])
            keep = ~done
            idx, t, uv, lo, hi = (a[keep] for a in (idx, t_new, uv, lo, hi))
        else:
            t = t_new
    if idx.size:
        out[idx] = np.exp(t)
    return float(out[0]) if scalar else out


def inv_lower_inc_gamma(p, y):
    """Inverse of gamma_alpha: x with gamma_alpha(x) = y, for 0 < y < Gamma(alpha)."""
    alpha = _alpha_of(p)
    gamma_alpha = math.gamma(alpha)
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any((y_arr <= 0.0) | (y_arr >= gamma_alpha)):
        raise ValueError(f"y must lie strictly inside (0, Gamma(alpha)={gamma_alpha!r})")
    return inv_reg_lower_inc_gamma(alpha, y_arr / gamma_alpha)


# ---------------------------------------------------------------------------
# erfc, normal CDF and its inverse
# ---------------------------------------------------------------------------

def erfc(x):
    """Complementary error function built on the incomplete gamma pair.

    erfc(x) = Q(1/2, x^2) for x >= 0 and 2 - erfc(-x) for x < 0; the series
    branch handles |x| <= ~1.2, the continued fraction the rest.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    ax2 = x_arr * x_arr
    lo = ax2 < 1.5
    p_part = np.empty_like(x_arr)
    p_part[lo] = _gamma_p_series(0.5, ax2[lo])
    q = np.empty_like(x_arr)
    q[~lo] = _gamma_q_contfrac(0.5, ax2[~lo])
    q[lo] = 1.0 - p_part[lo]
    out = np.where(x_arr >= 0, q, 2.0 - q)
    return float(out[0]) if scalar else out


def normal_cdf(z):
    """Standard normal CDF via the in-house erfc."""
    z_arr = np.asarray(z, dtype=np.float64)
    return 0.5 * erfc(-z_arr / _SQRT2)


# Rational approximation coefficients (Acklam), |relative error| < 1.15e-9.
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_ACK_SPLIT = 0.02425


def _inv_norm_raw(u: np.ndarray) -> np.ndarray:
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    z = np.empty_like(u)
    lower = u < _ACK_SPLIT
    upper = u > 1.0 - _ACK_SPLIT
    central = ~(lower | upper)
    if np.any(central):
        q = u[central] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        z[central] = q * num / den

    def _tail(p_tail: np.ndarray) -> np.ndarray:
        q = np.sqrt(-2.0 * np.log(p_tail))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        return num / den

    if np.any(lower):
        z[lower] = _tail(u[lower])
    if np.any(upper):
        z[upper] = -_tail(1.0 - u[upper])
    return z


def inv_norm_cdf(u):
    """Inverse standard normal CDF, |Phi(z) - u| <= 1e-14.

    Acklam's rational approximation polished by one Newton step whose
    residual is evaluated with the in-house erfc.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    scalar = u_arr.ndim == 0
    u_arr = np.atleast_1d(u_arr)
    if np.any((u_arr <= 0.0) | (u_arr >= 1.0)):
        raise ValueError("u must lie strictly inside (0, 1)")
    z = _inv_norm_raw(u_arr)
    with np.errstate(under="ignore"):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
        resid = normal_cdf(z) - u_arr
        z = np.where(pdf > 1e-295, z - resid / np.maximum(pdf, _TINY), z)
    return float(z[0]) if scalar else z


# ---------------------------------------------------------------------------
# uniform -> (normal, chi-square) -> standard t
# ---------------------------------------------------------------------------

def tau_map(u, nu: float, chisq_first: bool = False):
    """Map (0,1)^(d+1) uniforms to d standard normals plus a chi-square(nu).

    The output keeps the chi-square variate last: ``z[..., :d]`` are the
    normals, ``z[..., d] = 2 * gamma_{nu/2}^{-1}(Gamma(nu/2) * u_chi) > 0``.
    By default ``u_chi`` is the last input coordinate; with
    ``chisq_first=True`` it is the first.
    """
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    u_arr = np.atleast_2d(np.asarray(u, dtype=np.float64))
    single = np.asarray(u).ndim == 1
    if u_arr.shape[-1] < 2:
        raise ValueError("tau_map needs at least 2 input coordinates")
    if chisq_first:
        u_chi, u_norm = u_arr[..., 0], u_arr[..., 1:]
    else:
        u_chi, u_norm = u_arr[..., -1], u_arr[..., :-1]
    z = np.empty_like(u_arr)
    z[..., :-1] = inv_norm_cdf(u_norm)
    z[..., -1] = 2.0 * inv_reg_lower_inc_gamma(nu / 2.0, u_chi)
    return z[0] if single else z


def psi_map(z, nu: float):
    """Collapse (normals, chi-square) to a standard multivariate-t vector.

    x = z_{1:d} / sqrt(z_{d+1} / nu); requires z_{d+1} > 0.
    """
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    z_arr = np.asarray(z, dtype=np.float64)
    chi = z_arr[..., -1]
    if np.any(chi <= 0):
        raise ValueError("chi-square coordinate must be positive")
    return z_arr[..., :-1] / np.sqrt(chi / nu)[..., None]
