"""Random-variate kernels and dense symmetric-matrix utilities.

Every sampler in the package draws through a :class:`numpy.random.Generator`.
Independent substreams are derived from one master seed with
:func:`make_rng`, so a (seed, stream id) pair always reproduces the same
sequence of draws.
"""

from __future__ import annotations

import math

import numba
import numpy as np

__all__ = [
    "NotPositiveDefiniteError",
    "SymmetricMatrix",
    "make_rng",
    "spawn_rngs",
    "sample_mvn",
    "sample_inverse_wishart",
    "sample_inverse_gamma",
    "sample_polya_gamma",
    "sample_polya_gamma_array",
    "pg_mean",
    "pg_variance",
    "nearest_positive_definite",
]


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a factorization fails; carries the smallest eigenvalue."""

    def __init__(self, message, min_eigenvalue):
        super().__init__(f"{message} (smallest eigenvalue {min_eigenvalue:.6g})")
        self.min_eigenvalue = float(min_eigenvalue)


def make_rng(seed, *stream):
    """Generator for substream ``stream`` of master ``seed``.

    ``make_rng(s)`` and ``make_rng(s, 3, 1)`` are independent; both are
    reproducible across runs and platforms.
    """
    ss = np.random.SeedSequence(int(seed) % 2**64, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


def spawn_rngs(seed, count, *stream):
    return [make_rng(seed, *stream, i) for i in range(count)]


class SymmetricMatrix:
    """Dense symmetric matrix with a lazily cached Cholesky factor.

    The factor doubles as the positive-definiteness certificate: once
    :meth:`cholesky` succeeds, :attr:`certified` is True.
    """

    def __init__(self, entries, symmetrize=False):
        a = np.array(entries, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if symmetrize:
            a = 0.5 * (a + a.T)
        elif not np.array_equal(a, a.T):
            raise ValueError("matrix is not exactly symmetric")
        a.setflags(write=False)
        self.entries = a
        self._chol = None
        self._inv = None

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def certified(self):
        return self._chol is not None

    def cholesky(self):
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.entries)
            except np.linalg.LinAlgError:
                lam = np.linalg.eigvalsh(self.entries).min()
                raise NotPositiveDefiniteError("Cholesky factorization failed", lam) from None
        return self._chol

    def inverse(self):
        if self._inv is None:
            L = self.cholesky()
            Linv = np.linalg.solve(L, np.eye(self.dim))
            inv = Linv.T @ Linv
            self._inv = 0.5 * (inv + inv.T)
        return self._inv

    def logdet(self):
        return 2.0 * np.log(np.diag(self.cholesky())).sum()

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.entries).min())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __repr__(self):
        return f"SymmetricMatrix(dim={self.dim}, certified={self.certified})"


def _as_symmetric(m):
    return m if isinstance(m, SymmetricMatrix) else SymmetricMatrix(m, symmetrize=True)


def sample_mvn(mean, covariance, rng):
    """One draw from MVN(mean, covariance).

    Positive semidefinite covariances are allowed (a zero matrix returns
    ``mean`` exactly); an indefinite one raises
    :class:`NotPositiveDefiniteError`.
    """
    mean = np.asarray(mean, dtype=float)
    cov = _as_symmetric(covariance)
    if mean.shape != (cov.dim,):
        raise ValueError(f"mean has shape {mean.shape}, covariance has dim {cov.dim}")
    z = rng.standard_normal(cov.dim)
    try:
        L = cov.cholesky()
    except NotPositiveDefiniteError:
        lam, vec = np.linalg.eigh(cov.entries)
        tol = 1e-10 * max(1.0, np.abs(lam).max())
        if lam.min() < -tol:
            raise NotPositiveDefiniteError("covariance is indefinite", lam.min()) from None
        return mean + vec @ (np.sqrt(np.clip(lam, 0.0, None)) * z)
    return mean + L @ z


def sample_inverse_wishart(scale, dof, rng):
    """Draw from Inv-Wishart(scale, dof) by Bartlett decomposition.

    Mean is ``scale / (dof - d - 1)`` for ``dof > d + 1``.  In dimension one
    the draw is inverse-gamma(dof/2, scale/2).
    """
    S = _as_symmetric(scale)
    d = S.dim
    if not dof > d - 1:
        raise ValueError(f"inverse-Wishart needs dof > dim - 1, got dof={dof}, dim={d}")
    # Wishart(S^-1, dof) draw W = L B B' L', then invert.
    L = np.linalg.cholesky(S.inverse())
    B = np.zeros((d, d))
    B[np.diag_indices(d)] = np.sqrt(rng.chisquare(dof - np.arange(d)))
    il = np.tril_indices(d, -1)
    B[il] = rng.standard_normal(len(il[0]))
    LB = L @ B
    # (LB LB')^-1 = LB'^-1 LB^-1
    LBinv = np.linalg.solve(LB, np.eye(d))
    out = LBinv.T @ LBinv
    return 0.5 * (out + out.T)


def sample_inverse_gamma(shape, rate, rng, size=None):
    """Inverse-gamma draw with density proportional to x^(-shape-1) exp(-rate/x)."""
    if not (shape > 0 and rate > 0):
        raise ValueError(f"inverse-gamma needs shape > 0 and rate > 0, got ({shape}, {rate})")
    return rate / rng.gamma(shape, 1.0, size=size)


# ---------------------------------------------------------------------------
# Polya-Gamma PG(1, c): Devroye-style alternating-series rejection sampler.

_TRUNC = 0.64
_LOG_HALF_PI = math.log(0.5 * math.pi)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@numba.njit(cache=True)
def _log_norm_cdf(x):
    if x > -30.0:
        return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))
    # asymptotic tail, relative error < 1e-3 beyond -30
    return -0.5 * x * x - math.log(-x) - _LOG_SQRT_2PI


@numba.njit(cache=True)
def _pg_series_coef(n, x):
    k = (n + 0.5) * math.pi
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    return math.exp(math.log(k) - 1.5 * (_LOG_HALF_PI + math.log(x)) - 2.0 * (n + 0.5) ** 2 / x)


@numba.njit(cache=True)
def _inv_gauss_cdf(t, z):
    # CDF at t of inverse-Gaussian(mean 1/z, shape 1); finite at z = 0
    rt = math.sqrt(1.0 / t)
    b = rt * (t * z - 1.0)
    a = -rt * (t * z + 1.0)
    return math.exp(_log_norm_cdf(b)) + math.exp(2.0 * z + _log_norm_cdf(a))


@numba.njit(cache=True)
def _truncated_inv_gauss(z, t, rng):
    # inverse-Gaussian(mean 1/z, shape 1) restricted to (0, t)
    if z < 1.0 / t:
        while True:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = t / ((1.0 + t * e1) ** 2)
            if rng.random() <= math.exp(-0.5 * z * z * x):
                return x
    mu = 1.0 / z
    while True:
        y = rng.standard_normal()
        y = y * y
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * math.sqrt(4.0 * mu * y + (mu * y) ** 2)
        if rng.random() > mu / (mu + x):
            x = mu * mu / x
        if x < t:
            return x


@numba.njit(cache=True)
def _pg1(c, rng):
    z = 0.5 * abs(c)
    fz = math.pi * math.pi / 8.0 + 0.5 * z * z
    mass_right = 0.5 * math.pi * math.exp(-fz * _TRUNC) / fz
    mass_left = 2.0 * math.exp(-z) * _inv_gauss_cdf(_TRUNC, z)
    p_right = mass_right / (mass_right + mass_left)
    while True:
        if rng.random() < p_right:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _truncated_inv_gauss(z, _TRUNC, rng)
        s = _pg_series_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _pg_series_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _pg_series_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True)
def _pg_fill(counts, tilts, out, rng):
    for i in range(counts.shape[0]):
        if counts[i] == 0:
            out[i] = 0.0
        else:
            out[i] = _pg1(tilts[i], rng)


def sample_polya_gamma(count, tilt, rng):
    """Draw from PG(count, tilt) for ``count`` in {0, 1}.

    PG(0, c) is a point mass at zero.  Larger counts are rejected because the
    stick-breaking model only produces 0/1 trials.
    """
    if count not in (0, 1):
        raise ValueError(f"only PG(0, c) and PG(1, c) are supported, got count={count}")
    if not math.isfinite(tilt):
        raise ValueError(f"tilt must be finite, got {tilt}")
    if count == 0:
        return 0.0
    return _pg1(float(tilt), rng)


def sample_polya_gamma_array(counts, tilts, rng):
    """Vectorized :func:`sample_polya_gamma` over matching arrays."""
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    tilts = np.ascontiguousarray(tilts, dtype=float)
    if counts.shape != tilts.shape:
        raise ValueError("counts and tilts must have the same shape")
    if counts.size and (counts.min() < 0 or counts.max() > 1):
        raise ValueError("only PG(0, c) and PG(1, c) are supported")
    out = np.empty(counts.size)
    _pg_fill(counts.ravel(), tilts.ravel(), out, rng)
    return out.reshape(counts.shape)


def pg_mean(c):
    """E[PG(1, c)] = tanh(c/2) / (2c), with limit 1/4 at c = 0."""
    c = abs(float(c))
    if c < 1e-6:
        return 0.25 - c * c / 48.0
    return math.tanh(0.5 * c) / (2.0 * c)


def pg_variance(c):
    """Var[PG(1, c)] = (sinh c - c) / (4 c^3 cosh^2(c/2)), limit 1/24 at 0."""
    c = abs(float(c))
    if c < 1e-3:
        return 1.0 / 24.0 - c * c / 60.0
    return (math.sinh(c) - c) / (4.0 * c**3 * math.cosh(0.5 * c) ** 2)


# ---------------------------------------------------------------------------


def nearest_positive_definite(matrix, eigen_floor=1e-6, max_iter=500, tol=1e-10):
    """Project a symmetric matrix onto {min eigenvalue >= eigen_floor}.

    Inputs with a unit diagonal are treated as correlation matrices: the
    projection alternates between the eigenvalue floor and the unit-diagonal
    set (with Dykstra's correction) and the result keeps a unit diagonal.
    Other inputs get a plain eigenvalue clamp.  An input that already meets
    the floor is returned unchanged, so the map is idempotent.
    """
    a = np.array(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    a = 0.5 * (a + a.T)
    if np.linalg.eigvalsh(a).min() >= eigen_floor:
        return SymmetricMatrix(a)
    unit_diag = np.allclose(np.diag(a), 1.0, atol=1e-12, rtol=0.0)
    if not unit_diag:
        return SymmetricMatrix(_clamp_eigenvalues(a, eigen_floor))

    y = a.copy()
    correction = np.zeros_like(a)
    for _ in range(max_iter):
        r = y - correction
        x = _clamp_eigenvalues(r, eigen_floor)
        correction = x - r
        y_prev = y
        y = x.copy()
        np.fill_diagonal(y, 1.0)
        if np.linalg.norm(y - y_prev, "fro") <= tol * max(1.0, np.linalg.norm(y, "fro")):
            break
    return SymmetricMatrix(_finalize_correlation(y, eigen_floor))


def _clamp_eigenvalues(a, floor):
    lam, vec = np.linalg.eigh(a)
    out = (vec * np.maximum(lam, floor)) @ vec.T
    return 0.5 * (out + out.T)


def _finalize_correlation(y, floor):
    # clamp then rescale to unit diagonal; raise the clamp until the rescaled
    # matrix still clears the floor
    level = floor
    for _ in range(60):
        x = _clamp_eigenvalues(y, level)
        s = 1.0 / np.sqrt(np.diag(x))
        x = x * s[:, None] * s[None, :]
        x = 0.5 * (x + x.T)
        np.fill_diagonal(x, 1.0)
        if np.linalg.eigvalsh(x).min() >= floor:
            return x
        level *= 2.0
    raise NotPositiveDefiniteError("could not reach the eigenvalue floor", np.linalg.eigvalsh(x).min())
