"""Eigenspectrum of distance matrices.

Small-magnitude eigenvalues of a distance matrix flag near-identical rows:
``k`` eigenvalues under a threshold suggest ``k + 1`` mutually similar
series. The decomposition is a cyclic Jacobi sweep; the operator norm is
computed separately by power iteration so the two can check each other.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distance import DistanceMatrix
from .errors import DataError, NumericalError
from .formatting import fmt

MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    """Eigenvalues sorted by ``|lambda|`` ascending; column k of ``eigenvectors`` pairs with ``eigenvalues[k]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        Q = self.eigenvectors
        return (Q * self.eigenvalues) @ Q.T


@dataclass(frozen=True)
class SimilarityCount:
    threshold: float
    k: int

    @property
    def similar_entities(self) -> int | None:
        """``k + 1``, or ``None`` when no eigenvalue falls below the threshold."""
        return self.k + 1 if self.k >= 1 else None

    def describe(self) -> str:
        if self.k < 1:
            return "no similarity group"
        return f"{self.k + 1} similar entities"


def _as_matrix(dist) -> np.ndarray:
    A = np.array(dist.d if isinstance(dist, DistanceMatrix) else dist, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"expected a square matrix, got shape {A.shape}")
    if np.any(np.abs(A - A.T) > 1e-9):
        raise DataError("matrix is not symmetric (tolerance 1e-9)")
    return 0.5 * (A + A.T)


def jacobi_eigh(A: np.ndarray, rtol: float = 1e-12):
    """Cyclic Jacobi on a symmetric matrix.

    Sweeps until the largest off-diagonal entry is below ``rtol`` times the
    Frobenius norm. Returns ``(eigenvalues, eigenvectors, sweeps)`` unsorted.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    tol = rtol * scale
    for sweep in range(MAX_SWEEPS + 1):
        off = np.abs(A - np.diag(np.diag(A)))
        if n < 2 or off.max() <= tol:
            return np.diag(A).copy(), V, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                # smaller root of t^2 + 2 t theta - 1 = 0 keeps the rotation angle <= pi/4
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    raise NumericalError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")


def eigen_decompose(dist) -> EigenSpectrum:
    """Full spectrum of a symmetric matrix (a :class:`DistanceMatrix` or array)."""
    A = _as_matrix(dist)
    w, V, sweeps = jacobi_eigh(A)
    order = np.argsort(np.abs(w), kind="stable")
    w, V = w[order], V[:, order]
    # largest-magnitude component of each eigenvector made positive
    if V.size:
        idx = np.argmax(np.abs(V), axis=0)
        signs = np.sign(V[idx, np.arange(V.shape[1])])
        V = V * np.where(signs == 0, 1.0, signs)
    w.setflags(write=False)
    V.setflags(write=False)
    return EigenSpectrum(w, V, sweeps)


def similarity_count(spec: EigenSpectrum, delta: float) -> SimilarityCount:
    if not delta > 0:
        raise ValueError("threshold must be positive")
    k = int(np.sum(np.abs(spec.eigenvalues) < delta))
    return SimilarityCount(float(delta), min(k, len(spec.eigenvalues) - 1))


def operator_norm(dist, rtol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest ``|lambda|`` by power iteration on ``A @ A``.

    Working with ``A @ A`` makes ``+lambda`` and ``-lambda`` of equal magnitude
    a single dominant eigenvalue. Iteration stops once the eigen-residual
    ``||B v - mu v||`` falls below ``rtol * mu``, which bounds the error of
    ``mu`` directly instead of relying on successive estimates settling.
    """
    A = _as_matrix(dist)
    n = A.shape[0]
    B = A @ A
    B = 0.5 * (B + B.T)
    v = np.ones(n) + 1e-3 * np.arange(1, n + 1) / n
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(max_iter):
        w = B @ v
        mu = float(v @ w)
        if mu <= 0.0:
            if not np.any(w):
                return 0.0
        elif np.linalg.norm(w - mu * v) <= rtol * mu:
            return math.sqrt(mu)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return math.sqrt(max(mu, 0.0))


def write_spectrum_csv(spec: EigenSpectrum, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue", "abs_eigenvalue"])
        for k, lam in enumerate(spec.eigenvalues, start=1):
            w.writerow([k, fmt(lam), fmt(abs(lam))])


def write_eigenvectors_csv(spec: EigenSpectrum, entities, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity", *(f"v{k}" for k in range(1, len(spec.eigenvalues) + 1))])
        for name, row in zip(entities, spec.eigenvectors):
            w.writerow([name, *(fmt(v) for v in row)])
