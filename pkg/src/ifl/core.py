"""Shared numerical primitives: covariance hygiene, Gaussian density, sampling.

All filter code funnels its matrix hygiene and density evaluations through
this module so that jitter policy and factorization behaviour are uniform.
"""

from __future__ import annotations

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)


class RngStream:
    """Deterministic random stream: identical seed, identical draw sequence.

    Thin wrapper over numpy's PCG64 generator. Each concurrent consumer
    should own its own stream; a stream is mutated by every draw.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self, size: int) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, low: float, high: float, size: int = 1) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def spawn(self, n: int) -> list["RngStream"]:
        """Derive n independent child streams (deterministic in the seed)."""
        seqs = np.random.SeedSequence(self.seed).spawn(n)
        return [RngStream.from_sequence(s) for s in seqs]

    @classmethod
    def from_sequence(cls, seq: np.random.SeedSequence) -> "RngStream":
        stream = cls.__new__(cls)
        stream.seed = int(seq.generate_state(1, np.uint64)[0])
        stream._gen = np.random.Generator(np.random.PCG64(seq))
        return stream


def _check_square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def symmetrize_psd(m: np.ndarray, jitter: float) -> np.ndarray:
    """Return (m + m^T)/2, lifted by at least jitter*I if indefinite.

    The lift is max(jitter, -min_eigenvalue), so the output is PSD to within
    rounding and the operation is idempotent on its own output.
    """
    m = _check_square(m)
    sym = 0.5 * (m + m.T)
    eigs = np.linalg.eigvalsh(sym)
    if eigs.min() < -1e-10 * max(eigs.max(), 0.0):
        sym = sym + max(jitter, -eigs.min()) * np.eye(m.shape[0])
    return sym


def default_jitter(cov: np.ndarray) -> float:
    """Jitter scale used after every filter update: 1e-12 * trace / dim."""
    n = cov.shape[0]
    tr = float(np.trace(cov))
    return 1e-12 * max(tr, 0.0) / n if n else 0.0


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Plain symmetric part, for quantities that are PSD by construction."""
    return 0.5 * (m + m.T)


def posterior_hygiene(cov: np.ndarray) -> np.ndarray:
    """Symmetrize and re-PSD a covariance right after a filter update.

    Fast path: a successful Cholesky factorization proves definiteness;
    only on failure is the full eigenvalue lift applied.
    """
    cov = np.asarray(cov, dtype=float)
    sym = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(sym + (default_jitter(sym) + 1e-300)
                           * np.eye(sym.shape[0]))
        return sym
    except np.linalg.LinAlgError:
        return symmetrize_psd(sym, default_jitter(sym))


def spd_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b for symmetric positive-definite a via Cholesky.

    Falls back to a jittered factorization once; raises LinAlgError with the
    condition number if that still fails. Never returns NaN silently.
    """
    a = _check_square(a)
    b = np.asarray(b, dtype=float)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        jitter = max(default_jitter(a), 1e-300)
        try:
            chol = np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
        except np.linalg.LinAlgError as exc:
            cond = np.linalg.cond(0.5 * (a + a.T))
            raise np.linalg.LinAlgError(
                f"matrix not positive definite even after jitter "
                f"(cond={cond:.3e})"
            ) from exc
    y = np.linalg.solve(chol, b)
    return np.linalg.solve(chol.T, y)


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Log density of N(mean, cov) at x. Raises on singular covariance."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = x.shape[0]
    if mean.shape[0] != n or cov.shape != (n, n):
        raise ValueError("dimension mismatch between x, mean and cov")
    value, _ = logpdf_and_whiten(x - mean, cov)
    return value


def logpdf_and_whiten(residual: np.ndarray, cov: np.ndarray):
    """(log N(residual; 0, cov), cov^-1 residual) from one factorization."""
    residual = np.atleast_1d(residual)
    cov = np.atleast_2d(cov)
    n = residual.shape[0]
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"singular covariance in gaussian density (cond="
            f"{np.linalg.cond(cov):.3e})") from exc
    dev = np.linalg.solve(chol, residual)
    if not np.all(np.isfinite(dev)):
        raise np.linalg.LinAlgError("non-finite whitened residual")
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    value = float(-0.5 * n * LOG_2PI - 0.5 * logdet - 0.5 * dev @ dev)
    return value, np.linalg.solve(chol.T, dev)


def psd_factor(cov: np.ndarray) -> np.ndarray:
    """Cholesky-like factor L with L @ L.T == cov, tolerant of PSD rank loss."""
    cov = _check_square(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    floor = -1e-10 * max(vals.max(), 0.0) - 1e-300
    if vals.min() < floor:
        raise np.linalg.LinAlgError(
            f"covariance is indefinite (min eigenvalue {vals.min():.3e})"
        )
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_gaussian(rng: RngStream, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Draw one sample from N(mean, cov) using a fixed per-call draw count.

    Always consumes exactly dim standard-normal draws from the stream, so the
    draw sequence depends only on the shapes involved.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    u = rng.standard_normal(mean.shape[0])
    cov = np.atleast_2d(cov)
    if not np.any(cov):
        return mean.copy()
    return mean + psd_factor(cov) @ u
