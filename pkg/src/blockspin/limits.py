"""Limit laws, rate functions and the mean-field fixed-point analysis."""

from __future__ import annotations

import functools
import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .model import DomainError, Regime, check_couplings, classify_regime

# |x| beyond this contributes < exp(-1728) to the quartic integrals
QUARTIC_CUTOFF = 12.0
QUAD_EPSABS = 1e-13
HESSIAN_TOL = 1e-12
SUP_GRID = 2001
_EDGE = 1e-15


@dataclass(frozen=True)
class Gaussian1D:
    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / math.sqrt(self.variance))

    def to_dict(self) -> dict:
        return {"kind": "gaussian1d", "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class Gaussian2D:
    mean: tuple[float, float]
    cov: tuple[tuple[float, float], tuple[float, float]]

    def __post_init__(self) -> None:
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (2, 2) or c[0, 1] != c[1, 0]:
            raise ValueError("covariance must be a symmetric 2x2 matrix")
        if np.any(np.linalg.eigvalsh(c) <= 0):
            raise ValueError("covariance must be positive definite")

    def marginal(self, i: int) -> Gaussian1D:
        return Gaussian1D(self.mean[i], self.cov[i][i])

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.cov, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "gaussian2d", "mean": list(self.mean), "cov": [list(r) for r in self.cov]}


@dataclass(frozen=True)
class QuarticLaw:
    """Law with density exp(-x**4 / 12) / Z."""

    normalizer: float

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-(x ** 4) / 12) / self.normalizer

    def cdf(self, x):
        return quartic_cdf_many(x)

    def second_moment(self) -> float:
        return quartic_second_moment()

    def to_dict(self) -> dict:
        return {"kind": "quartic", "normalizer": self.normalizer}


@dataclass(frozen=True)
class DiracMixture:
    atoms: tuple[tuple[tuple[float, float], float], ...]

    def __post_init__(self) -> None:
        weights = [w for _, w in self.atoms]
        if not weights or any(w <= 0 for w in weights) or abs(math.fsum(weights) - 1) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        points = [p for p, _ in self.atoms]
        if len(set(points)) != len(points):
            raise ValueError("atoms must be distinct")

    @property
    def points(self) -> list[tuple[float, float]]:
        return [p for p, _ in self.atoms]

    def to_dict(self) -> dict:
        return {"atoms": [{"m1": p[0], "m2": p[1], "w": w} for p, w in self.atoms]}


def _require_high_temperature(alpha: float, beta: float) -> None:
    check_couplings(alpha, beta)
    if not alpha < beta:
        raise DomainError(f"requires alpha < beta, got alpha={alpha}, beta={beta}")
    if not alpha + beta < 2:
        raise DomainError(f"requires alpha + beta < 2, got {alpha + beta}")


def clt_covariance(alpha: float, beta: float) -> Gaussian2D:
    """Limit law of sqrt(n) (m1, m2) for alpha + beta < 2."""
    _require_high_temperature(alpha, beta)
    s2 = (8 - 4 * beta) / ((2 - beta) ** 2 - alpha ** 2)
    r = alpha / (2 - beta)
    return Gaussian2D((0.0, 0.0), ((s2, s2 * r), (s2 * r, s2)))


def w_covariance(alpha: float, beta: float) -> Gaussian2D:
    """Limit law of sqrt(n) ((m1 + m2)/2, (m1 - m2)/2) for alpha + beta < 2."""
    _require_high_temperature(alpha, beta)
    return Gaussian2D(
        (0.0, 0.0),
        ((1 / (1 - (alpha + beta) / 2), 0.0), (0.0, 1 / (1 - (beta - alpha) / 2))),
    )


def _quartic_integrand(x: float) -> float:
    return math.exp(-(x ** 4) / 12)


_normalizer_lock = threading.Lock()
_normalizer: float | None = None


def quartic_normalizer() -> float:
    """Z = integral of exp(-x**4 / 12) over the real line (computed once)."""
    global _normalizer
    if _normalizer is None:
        with _normalizer_lock:
            if _normalizer is None:
                half, _ = integrate.quad(
                    _quartic_integrand, 0.0, QUARTIC_CUTOFF, epsabs=QUAD_EPSABS, epsrel=1e-14, limit=200
                )
                _normalizer = 2 * half
    return _normalizer


@functools.lru_cache(maxsize=None)
def quartic_second_moment() -> float:
    half, _ = integrate.quad(
        lambda x: x * x * _quartic_integrand(x), 0.0, QUARTIC_CUTOFF, epsabs=QUAD_EPSABS, epsrel=1e-14, limit=200
    )
    return 2 * half / quartic_normalizer()


def _quartic_mass(a: float, b: float) -> float:
    if b <= a:
        return 0.0
    if b - a < 1e-6:
        # Simpson's rule; error is far below double precision on such short spans
        return (b - a) / 6 * (_quartic_integrand(a) + 4 * _quartic_integrand((a + b) / 2) + _quartic_integrand(b))
    val, _ = integrate.quad(_quartic_integrand, a, b, epsabs=QUAD_EPSABS, epsrel=1e-14, limit=200)
    return val


def quartic_cdf(x: float) -> float:
    """CDF of the density exp(-x**4 / 12) / Z."""
    if math.isnan(x):
        raise ValueError("x is NaN")
    a = min(abs(x), QUARTIC_CUTOFF)
    half = _quartic_mass(0.0, a) / quartic_normalizer()
    value = 0.5 + half if x >= 0 else 0.5 - half
    return min(1.0, max(0.0, value))


def quartic_cdf_many(xs) -> np.ndarray:
    """Vectorized :func:`quartic_cdf` integrating between sorted |x| values."""
    xs = np.asarray(xs, dtype=float)
    flat = xs.ravel()
    mags = np.minimum(np.abs(flat), QUARTIC_CUTOFF)
    uniq, inverse = np.unique(mags, return_inverse=True)
    edges = np.concatenate(([0.0], uniq))
    pieces = [_quartic_mass(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    half = np.cumsum(pieces)[inverse] / quartic_normalizer()
    out = np.where(flat >= 0, 0.5 + half, 0.5 - half)
    return np.clip(out, 0.0, 1.0).reshape(xs.shape)


def critical_laws(alpha: float, beta: float) -> tuple[QuarticLaw, Gaussian1D]:
    """Limits of n**(1/4) m1 and (sqrt(n)/2)(m1 - m2) on the critical line."""
    check_couplings(alpha, beta)
    if not alpha < beta:
        raise DomainError(f"requires alpha < beta, got alpha={alpha}, beta={beta}")
    if alpha + beta != 2:
        raise DomainError(f"requires alpha + beta == 2, got {alpha + beta!r}")
    return QuarticLaw(quartic_normalizer()), Gaussian1D(0.0, 2 / (2 - (beta - alpha)))


# --- rate functions -------------------------------------------------------


def entropy_rate_I(x):
    """I(x) = (1+x)/2 log(1+x) + (1-x)/2 log(1-x), +inf outside [-1, 1]."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) <= 1
    xc = np.where(inside, x, 0.0)
    val = 0.5 * special.xlogy(1 + xc, 1 + xc) + 0.5 * special.xlogy(1 - xc, 1 - xc)
    val = np.where(inside, np.maximum(val, 0.0), np.inf)
    return float(val) if val.ndim == 0 else val


def rate_J(x1, x2):
    """Legendre transform of (t1, t2) -> (log cosh t1 + log cosh t2) / 2."""
    return 0.5 * entropy_rate_I(2 * np.asarray(x1, dtype=float)) + 0.5 * entropy_rate_I(
        2 * np.asarray(x2, dtype=float)
    )


def _log_cosh(t: float) -> float:
    return float(np.logaddexp(t, -t)) - math.log(2.0)


def _legendre_1d(x: float) -> float:
    """sup_t [t x - log cosh(t) / 2], solving x = tanh(t) / 2 for the maximizer."""
    if abs(x) > 0.5:
        return math.inf
    if abs(x) == 0.5:
        return 0.5 * math.log(2.0)
    if x == 0:
        return 0.0
    hi = 1.0
    while 0.5 * math.tanh(hi) < abs(x):
        hi *= 2
    t = optimize.brentq(lambda s: 0.5 * math.tanh(s) - abs(x), 0.0, hi, xtol=1e-15, maxiter=500)
    return t * abs(x) - 0.5 * _log_cosh(t)


def rate_J_variational(x1: float, x2: float) -> float:
    return _legendre_1d(float(x1)) + _legendre_1d(float(x2))


def free_functional_m(alpha: float, beta: float, x1, x2):
    """F_m(x) - J~(x): energy density minus entropy, m-coordinates."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    energy = 0.5 * (beta / 4 * x1 * x1 + beta / 4 * x2 * x2 + alpha / 2 * x1 * x2)
    return energy - (0.5 * entropy_rate_I(x1) + 0.5 * entropy_rate_I(x2))


@functools.lru_cache(maxsize=64)
def free_functional_sup(alpha: float, beta: float) -> float:
    """Global max of F_m - J~ over [-1, 1]^2.

    Taken over the mean-field critical points, screened against a
    SUP_GRID x SUP_GRID grid of the closed square.
    """
    check_couplings(alpha, beta)
    best = max(float(free_functional_m(alpha, beta, x1, x2)) for x1, x2 in mean_field_fixed_points(alpha, beta))
    g = np.linspace(-1.0, 1.0, SUP_GRID)
    grid_max = float(np.max(free_functional_m(alpha, beta, g[:, None], g[None, :])))
    return max(best, grid_max)


def rate_Jm(alpha: float, beta: float, x1, x2):
    """Rate function of the block magnetizations, speed n, m-coordinates."""
    check_couplings(alpha, beta)
    val = free_functional_sup(float(alpha), float(beta)) - free_functional_m(alpha, beta, x1, x2)
    val = np.maximum(val, 0.0)
    return float(val) if np.ndim(val) == 0 else val


def rate_Jv(alpha: float, beta: float, x1, x2):
    """Rate function in v = m / 2 coordinates."""
    return rate_Jm(alpha, beta, 2 * np.asarray(x1, dtype=float), 2 * np.asarray(x2, dtype=float))


# --- Curie-Weiss equation and mean-field fixed points ----------------------


def cw_equation_solve(theta: float) -> float:
    """Largest solution of m = tanh(theta m) in [0, 1)."""
    if not theta >= 0:
        raise DomainError(f"theta must be >= 0, got {theta}")
    if theta <= 1:
        return 0.0
    lo, hi = 1e-12, 1 - _EDGE
    if math.tanh(theta * hi) - hi >= 0:
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if math.tanh(theta * mid) - mid > 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(math.tanh(theta * lo) - lo) <= abs(math.tanh(theta * hi) - hi) else hi


def _artanh(x):
    x = np.clip(x, -1 + _EDGE, 1 - _EDGE)
    return 0.5 * np.log((1 + x) / (1 - x))


def f_map(alpha: float, beta: float, x):
    """x -> (2/alpha)(artanh(x) - beta x / 2); solutions satisfy x1 = f(x2), x2 = f(x1)."""
    if alpha <= 0:
        raise DomainError("f is defined for alpha > 0 only")
    return 2 / alpha * (_artanh(x) - beta * np.asarray(x, dtype=float) / 2)


def inverse_f_slope(alpha: float, beta: float, y: float) -> float:
    """1 / f'(y) = (alpha/2) / (1/(1-y^2) - beta/2), the local contraction factor of f^{-1}."""
    return alpha / 2 / (1 / (1 - y * y) - beta / 2)


def f_inverse(alpha: float, beta: float, y: float) -> float:
    """Inverse of the (increasing, for beta <= 2) map f on (-1, 1), by bisection."""
    if beta > 2:
        raise DomainError("f is not monotone for beta > 2")
    lo, hi = -1 + _EDGE, 1 - _EDGE
    if y <= float(f_map(alpha, beta, lo)):
        return lo
    if y >= float(f_map(alpha, beta, hi)):
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        if float(f_map(alpha, beta, mid)) < y:
            lo = mid
        else:
            hi = mid


def inverse_f_iteration(alpha: float, beta: float, x0: float, max_iter: int = 10000, tol: float = 1e-14) -> float:
    """Iterate x <- f^{-1}(x) from ``x0``; converges to a fixed point of f."""
    x = x0
    for _ in range(max_iter):
        nxt = f_inverse(alpha, beta, x)
        if abs(nxt - x) <= tol:
            return nxt
        x = nxt
    return x


def critical_point_residual(alpha: float, beta: float, x1: float, x2: float) -> np.ndarray:
    return np.array(
        [
            beta / 2 * x1 + alpha / 2 * x2 - float(_artanh(x1)),
            beta / 2 * x2 + alpha / 2 * x1 - float(_artanh(x2)),
        ]
    )


def _newton_polish(alpha: float, beta: float, x1: float, x2: float, steps: int = 50) -> tuple[float, float]:
    x = np.array([x1, x2], dtype=float)
    res = critical_point_residual(alpha, beta, *x)
    for _ in range(steps):
        if np.max(np.abs(res)) < 1e-15:
            break
        jac = 2 * hessian_matrix(alpha, beta, x[0], x[1])
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            break
        cand = x - step
        if np.any(np.abs(cand) >= 1):
            break
        cand_res = critical_point_residual(alpha, beta, *cand)
        if np.max(np.abs(cand_res)) >= np.max(np.abs(res)):
            break
        x, res = cand, cand_res
    return float(x[0]), float(x[1])


def _asymmetric_candidates(alpha: float, beta: float) -> list[tuple[float, float]]:
    """Solutions with x1 != x2 when beta > 2 (f is then not monotone).

    Scans x1 for sign changes of f(f(x1)) - x1 over the set where f(x1) is in (-1, 1).
    """
    xs = np.linspace(-1, 1, 400001)[1:-1]
    with np.errstate(all="ignore"):
        y = f_map(alpha, beta, xs)
        ok = np.abs(y) < 1 - 1e-12
        r = np.where(ok, f_map(alpha, beta, np.where(ok, y, 0.0)) - xs, np.nan)
    found = []
    s = np.sign(r)
    idx = np.nonzero((s[:-1] * s[1:] < 0) & ok[:-1] & ok[1:])[0]

    def g(t: float) -> float:
        return float(f_map(alpha, beta, f_map(alpha, beta, t))) - t

    for i in idx:
        root = optimize.brentq(g, xs[i], xs[i + 1], xtol=1e-15)
        found.append((root, float(f_map(alpha, beta, root))))
    return found


def mean_field_fixed_points(alpha: float, beta: float) -> list[tuple[float, float]]:
    """All solutions in (-1, 1)^2 of the critical-point equations

        beta x1 / 2 + alpha x2 / 2 = artanh(x1)
        beta x2 / 2 + alpha x1 / 2 = artanh(x2)

    sorted lexicographically.
    """
    check_couplings(alpha, beta)
    points: list[tuple[float, float]] = [(0.0, 0.0)]
    if alpha == 0:
        m = cw_equation_solve(beta / 2)
        coords = [0.0] if m == 0 else [-m, 0.0, m]
        points = [(a, b) for a in coords for b in coords]
        return sorted(points)
    m = cw_equation_solve((alpha + beta) / 2)
    if m > 0:
        points += [_newton_polish(alpha, beta, m, m), _newton_polish(alpha, beta, -m, -m)]
    if beta > 2:
        for cand in _asymmetric_candidates(alpha, beta):
            p = _newton_polish(alpha, beta, *cand)
            if all(math.hypot(p[0] - q[0], p[1] - q[1]) > 1e-9 for q in points):
                points.append(p)
    return sorted(points)


def hessian_matrix(alpha: float, beta: float, x: float, y: float) -> np.ndarray:
    return 0.5 * np.array(
        [
            [beta / 2 - 1 / (1 - x * x), alpha / 2],
            [alpha / 2, beta / 2 - 1 / (1 - y * y)],
        ]
    )


def hessian_Fm_minus_J(alpha: float, beta: float, x: float, y: float) -> tuple[np.ndarray, str]:
    """Hessian of F_m - J~ at (x, y) with its definiteness tag.

    Tags: "negative-definite", "positive-definite", "indefinite", or
    "degenerate" when an eigenvalue is within HESSIAN_TOL of zero.
    """
    check_couplings(alpha, beta)
    if abs(x) >= 1 or abs(y) >= 1:
        raise DomainError(f"Hessian defined on the open square only, got ({x}, {y})")
    h = hessian_matrix(alpha, beta, x, y)
    eig = np.linalg.eigvalsh(h)
    if np.any(np.abs(eig) <= HESSIAN_TOL):
        tag = "degenerate"
    elif np.all(eig < 0):
        tag = "negative-definite"
    elif np.all(eig > 0):
        tag = "positive-definite"
    else:
        tag = "indefinite"
    return h, tag


def limit_mixture(alpha: float, beta: float) -> DiracMixture:
    """Weak limit of the law of (m1, m2) as n -> infinity."""
    regime = classify_regime(alpha, beta)
    if regime in (Regime.SUBCRITICAL, Regime.CRITICAL_LINE):
        return DiracMixture((((0.0, 0.0), 1.0),))
    if regime is Regime.SUPERCRITICAL_DECOUPLED:
        m = cw_equation_solve(beta / 2)
        return DiracMixture(tuple(((s1 * m, s2 * m), 0.25) for s1 in (1, -1) for s2 in (1, -1)))
    m = cw_equation_solve((alpha + beta) / 2)
    return DiracMixture((((m, m), 0.5), ((-m, -m), 0.5)))
