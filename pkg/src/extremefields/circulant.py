"""Circulant embedding of stationary covariances.

A length-n stationary covariance sequence is embedded into a circulant of
size 2m >= 2n whose eigenvalues are the FFT of the wrapped first row.  When
those eigenvalues are nonnegative the resulting FFT sampler is exact in
distribution.  Tiny negative eigenvalues (roundoff) are clipped and the
clipped mass reported; genuinely negative spectra trigger padding doubling
and, after four attempts, an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EmbeddingError", "Embedding1D", "embed_sequence", "embed_nd"]

REL_TOL = 1e-9
MAX_ATTEMPTS = 4


class EmbeddingError(RuntimeError):
    """Embedding stayed indefinite after the padding retries."""


@dataclass(frozen=True)
class Embedding1D:
    """Spectral data of a 1-d embedding: sqrt eigenvalues of the 2m circulant."""

    n: int
    m: int
    sqrt_eigs: np.ndarray
    clipped_mass: float

    @property
    def size(self) -> int:
        return 2 * self.m


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def embed_sequence(cov_fn, n: int, min_m: int | None = None) -> Embedding1D:
    """Embed the covariance sequence ``cov_fn(k)``, k = 0..m, for an n-point grid.

    cov_fn must accept an integer lag array.  Padding starts at the next
    power of two >= n and doubles on failure.
    """
    m = _next_pow2(max(n, min_m or 1, 2))
    for _ in range(MAX_ATTEMPTS):
        lags = np.arange(m + 1)
        c = np.asarray(cov_fn(lags), dtype=float)
        row = np.concatenate([c, c[-2:0:-1]])
        eigs = np.fft.fft(row).real
        top = float(eigs.max())
        worst = float(eigs.min())
        if worst >= -REL_TOL * top:
            clipped = float(-eigs[eigs < 0].sum()) if worst < 0 else 0.0
            return Embedding1D(
                n=n, m=m, sqrt_eigs=np.sqrt(np.clip(eigs, 0.0, None)),
                clipped_mass=clipped,
            )
        m *= 2
    raise EmbeddingError(
        f"circulant embedding indefinite after {MAX_ATTEMPTS} padding doublings "
        f"(worst eigenvalue {worst:g} vs max {top:g})"
    )


def sample_noise_1d(emb: Embedding1D, rng: np.random.Generator, batch: int = 1) -> np.ndarray:
    """Exact stationary samples with the embedded covariance, shape (batch, n).

    One replicate consumes exactly 2*size standard normals so the draw count
    is independent of the embedding outcome path.
    """
    size = emb.size
    a = rng.standard_normal((batch, size))
    b = rng.standard_normal((batch, size))
    g = a + 1j * b
    y = np.fft.ifft(emb.sqrt_eigs * g, axis=1) * np.sqrt(size)
    return np.ascontiguousarray(y.real[:, : emb.n])


@dataclass(frozen=True)
class EmbeddingND:
    """d-dimensional embedding: sqrt eigenvalue array over the torus."""

    shape: tuple[int, ...]
    embedded_shape: tuple[int, ...]
    sqrt_eigs: np.ndarray
    clipped_mass: float


def embed_nd(corr_fn, counts, spacings) -> EmbeddingND:
    """Embed a d-dimensional stationary correlation on a regular grid.

    ``corr_fn`` maps an (..., d) array of lags to correlations.  Each axis is
    padded to a power of two >= 2*count and the whole torus spectrum checked;
    on failure all axes double, up to four attempts.
    """
    counts = tuple(int(c) for c in counts)
    spacings = tuple(float(q) for q in spacings)
    sizes = [_next_pow2(2 * c) for c in counts]
    for _ in range(MAX_ATTEMPTS):
        axes_lags = []
        for size, q in zip(sizes, spacings):
            j = np.arange(size)
            wrapped = np.minimum(j, size - j)
            axes_lags.append(wrapped * q)
        mesh = np.meshgrid(*axes_lags, indexing="ij")
        lags = np.stack(mesh, axis=-1)
        cov = np.asarray(corr_fn(lags), dtype=float)
        eigs = np.fft.fftn(cov).real
        top = float(eigs.max())
        worst = float(eigs.min())
        if worst >= -REL_TOL * top:
            clipped = float(-eigs[eigs < 0].sum()) if worst < 0 else 0.0
            return EmbeddingND(
                shape=counts, embedded_shape=tuple(sizes),
                sqrt_eigs=np.sqrt(np.clip(eigs, 0.0, None)),
                clipped_mass=clipped,
            )
        sizes = [2 * s for s in sizes]
    raise EmbeddingError(
        f"{len(counts)}-d embedding indefinite after {MAX_ATTEMPTS} padding doublings "
        f"(worst eigenvalue {worst:g} vs max {top:g})"
    )


def sample_noise_nd(emb: EmbeddingND, rng: np.random.Generator) -> np.ndarray:
    """One exact sample on the original grid from a d-dimensional embedding."""
    shape = emb.embedded_shape
    a = rng.standard_normal(shape)
    b = rng.standard_normal(shape)
    y = np.fft.ifftn(emb.sqrt_eigs * (a + 1j * b)) * np.sqrt(float(np.prod(shape)))
    out = y.real
    return np.ascontiguousarray(out[tuple(slice(0, n) for n in emb.shape)])
