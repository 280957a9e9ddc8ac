"""Complex linear algebra, seeded random sampling, and quadrature shared by all modules.

Conventions used throughout the package:
- matrices are numpy complex128 arrays, Hermitian matrices store both triangles;
- eigenvalues are returned in descending order;
- eigenvector phases are pinned (first significant entry real-positive) so
  repeated runs are bit-reproducible;
- every Monte-Carlo trial owns a Philox substream derived from
  (master seed, trial index) and never shares it.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "NumericsError",
    "make_rng",
    "hermitian_eig",
    "generalized_eig",
    "qr_orthonormalize",
    "sample_complex_gaussian",
    "gauss_legendre_nodes",
    "gauss_legendre_integrate",
]


class NumericsError(ValueError):
    """Raised on invalid numeric input (non-finite entries, lost rank, bad pivots)."""


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for (seed, substream...) — independent across substreams.

    ``make_rng(seed)`` is the master stream; ``make_rng(seed, trial)`` is the
    stream owned by one Monte-Carlo trial. Streams are never split after creation.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def _check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a.view(np.float64) if np.iscomplexobj(a) else a)):
        raise NumericsError(f"{name} contains non-finite entries")


def _fix_column_phases(v: np.ndarray) -> np.ndarray:
    """Rotate each column so its first significant entry is real and nonnegative."""
    v = np.array(v, dtype=np.complex128, copy=True)
    for j in range(v.shape[1]):
        col = v[:, j]
        mags = np.abs(col)
        top = mags.max()
        if top == 0.0:
            continue
        k = int(np.argmax(mags > 1e-12 * top))
        pivot = col[k]
        if pivot != 0.0:
            v[:, j] = col * (np.conj(pivot) / abs(pivot))
    return v


def hermitian_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns (w, v) with a @ v[:, i] = w[i] * v[:, i], orthonormal v, and the
    deterministic column phase convention.
    """
    a = np.asarray(a, dtype=np.complex128)
    _check_finite(a, "hermitian_eig input")
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise NumericsError(f"hermitian_eig expects a square matrix, got shape {a.shape}")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    order = np.argsort(w)[::-1]
    return w[order].astype(np.float64), _fix_column_phases(v[:, order])


def generalized_eig(r: np.ndarray, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Solve r @ e = lam * psi @ e for Hermitian r and Hermitian PD psi.

    Reduction via the Cholesky factor psi = L L^H: the standard Hermitian
    problem L^-1 r L^-H is solved and eigenvectors are mapped back through
    L^-H, which keeps the O(dim^3) cost and avoids an explicit inverse of psi.
    Eigenvalues are real and descending; eigenvectors are psi-orthogonal (not
    orthonormal in the Euclidean sense).
    """
    r = np.asarray(r, dtype=np.complex128)
    psi = np.asarray(psi, dtype=np.complex128)
    _check_finite(r, "generalized_eig r")
    _check_finite(psi, "generalized_eig psi")
    if r.shape != psi.shape or r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise NumericsError(f"dimension mismatch: r {r.shape} vs psi {psi.shape}")
    try:
        chol = np.linalg.cholesky(0.5 * (psi + psi.conj().T))
    except np.linalg.LinAlgError:
        pivot = float(np.linalg.eigvalsh(0.5 * (psi + psi.conj().T)).min())
        raise NumericsError(
            f"psi is not positive definite (smallest pivot {pivot:.3e})"
        ) from None
    x = np.linalg.solve(chol, r)
    c = np.linalg.solve(chol, x.conj().T).conj().T
    w, y = np.linalg.eigh(0.5 * (c + c.conj().T))
    order = np.argsort(w)[::-1]
    vecs = np.linalg.solve(chol.conj().T, y[:, order])
    return w[order].astype(np.float64), _fix_column_phases(vecs)


def qr_orthonormalize(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of range(a) via QR, with deterministic column phases.

    Raises on rank deficiency (diagonal pivot below 1e-12 of the column norm).
    """
    a = np.asarray(a, dtype=np.complex128)
    _check_finite(a, "qr_orthonormalize input")
    if a.ndim != 2 or a.shape[0] < a.shape[1]:
        raise NumericsError(f"expected rows >= cols, got shape {a.shape}")
    q, r = np.linalg.qr(a)
    col_norms = np.linalg.norm(a, axis=0)
    pivots = np.abs(np.diag(r))
    if np.any(pivots < 1e-12 * col_norms):
        bad = int(np.argmax(pivots < 1e-12 * col_norms))
        raise NumericsError(
            f"rank deficient input: pivot {pivots[bad]:.3e} in column {bad} "
            f"(norm {col_norms[bad]:.3e})"
        )
    return _fix_column_phases(q)


def sample_complex_gaussian(
    mean: np.ndarray | complex,
    cov_scale: float,
    dim: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Circularly symmetric complex normal with per-component variance cov_scale.

    Real and imaginary parts each carry cov_scale/2 so that
    E|z - mean|^2 = cov_scale and the pseudo-variance E[(z - mean)^2] is zero.
    """
    if cov_scale < 0:
        raise NumericsError(f"cov_scale must be >= 0, got {cov_scale}")
    mean = np.broadcast_to(np.asarray(mean, dtype=np.complex128), (dim,))
    if cov_scale == 0.0:
        return mean.copy()
    scale = np.sqrt(cov_scale / 2.0)
    noise = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return mean + scale * noise


def standard_complex_normal(
    rng: np.random.Generator, shape: int | tuple[int, ...]
) -> np.ndarray:
    """Unit-variance CN(0, 1) array; block form used by the simulation hot path."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


@lru_cache(maxsize=32)
def _leggauss_cached(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_nodes(a: float, b: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped onto [a, b]."""
    if not a < b:
        raise NumericsError(f"need a < b, got [{a}, {b}]")
    if nodes < 2:
        raise NumericsError(f"need at least 2 nodes, got {nodes}")
    x, w = _leggauss_cached(nodes)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def gauss_legendre_integrate(
    f: Callable[[float], np.ndarray | complex | float],
    a: float,
    b: float,
    nodes: int,
) -> np.ndarray:
    """Fixed-node Gauss-Legendre quadrature of a vector-valued integrand."""
    x, w = gauss_legendre_nodes(a, b, nodes)
    values = [np.asarray(f(float(xi))) for xi in x]
    acc = np.zeros_like(values[0], dtype=np.result_type(values[0].dtype, np.float64))
    for wi, vi in zip(w, values):
        acc = acc + wi * vi
    return acc


def hermitize(a: np.ndarray) -> np.ndarray:
    """Average away the antihermitian rounding residue."""
    return 0.5 * (a + a.conj().T)


def is_unitary_columns(q: np.ndarray, tol: float = 1e-10) -> bool:
    g = q.conj().T @ q
    return bool(np.max(np.abs(g - np.eye(q.shape[1]))) <= tol)
