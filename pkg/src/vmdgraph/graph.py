"""Road graph construction and spectral operators for Chebyshev filtering."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .spectral import InvalidInputError
from .vmd import InvalidConfigError

log = logging.getLogger(__name__)


class EigenNotConvergedError(RuntimeError):
    def __init__(self, message, last_value, last_vector):
        super().__init__(message)
        self.last_value = last_value
        self.last_vector = last_vector


def _check_distances(distances):
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidInputError(f"distance matrix must be square, got shape {d.shape}")
    finite = np.isfinite(d)
    if np.any(d[finite] < 0):
        raise InvalidInputError("distances must be non-negative")
    if np.any(np.diag(d) != 0):
        raise InvalidInputError("distance matrix diagonal must be zero")
    if not np.array_equal(finite, finite.T) or not np.allclose(d[finite], d.T[finite]):
        raise InvalidInputError("distance matrix must be symmetric")
    return d


def default_sigma(distances) -> float:
    """Population standard deviation of the finite off-diagonal distances."""
    d = np.asarray(distances, dtype=np.float64)
    off = d[~np.eye(d.shape[0], dtype=bool)]
    off = off[np.isfinite(off)]
    if off.size == 0:
        return 1.0
    s = float(np.std(off))
    return s if s > 0 else 1.0


def build_adjacency(distances, sigma: float, r: float) -> np.ndarray:
    """Binary adjacency from a thresholded Gaussian kernel of distances.

    Unreachable pairs may be given as ``inf`` and never become edges. The
    diagonal is always zero.
    """
    if not sigma > 0:
        raise InvalidConfigError(f"sigma must be > 0, got {sigma}")
    d = _check_distances(distances)
    with np.errstate(over="ignore"):
        w = np.exp(-(d ** 2) / sigma ** 2)
    A = ((w >= r) & np.isfinite(d)).astype(np.float64)
    np.fill_diagonal(A, 0.0)
    return A


def normalized_laplacian(A) -> np.ndarray:
    """``I - D^-1/2 A D^-1/2``; isolated nodes keep an identity row."""
    A = np.asarray(A, dtype=np.float64)
    deg = A.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    L = np.eye(A.shape[0]) - inv_sqrt[:, None] * A * inv_sqrt[None, :]
    return L


def max_eigenvalue(L, tol: float = 1e-9, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric matrix by shifted power iteration.

    The shift comes from the Gershgorin lower bound so every eigenvalue of
    the shifted matrix is non-negative and the dominant one is the one we want.
    """
    L = np.asarray(L, dtype=np.float64)
    n = L.shape[0]
    radius = np.sum(np.abs(L), axis=1) - np.abs(np.diag(L))
    shift = max(0.0, -float(np.min(np.diag(L) - radius))) if n else 0.0
    B = L + shift * np.eye(n)
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = float(v @ B @ v)
    prev_delta = None
    for _ in range(max_iter):
        w = B @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            # B is zero so L = -shift * I
            return -shift
        v = w / norm
        new = float(v @ B @ v)
        delta = abs(new - lam)
        scale = max(1.0, abs(new))
        if delta <= 1e-14 * scale:
            return new - shift
        # Rayleigh quotients approach the limit geometrically; estimate the
        # remaining tail from the ratio of successive changes
        if prev_delta is not None and delta < prev_delta:
            rho = delta / prev_delta
            if delta * rho / (1.0 - rho) <= tol * scale:
                return new - shift
        prev_delta = delta
        lam = new
    raise EigenNotConvergedError(
        f"power iteration did not converge in {max_iter} steps", lam - shift, v
    )


def scaled_laplacian(L, lambda_max: float) -> np.ndarray:
    return 2.0 * np.asarray(L) / lambda_max - np.eye(L.shape[0])


def chebyshev_basis(L_hat, M: int) -> list[np.ndarray]:
    if M < 1:
        raise InvalidConfigError(f"Chebyshev order M must be >= 1, got {M}")
    L_hat = np.asarray(L_hat, dtype=np.float64)
    basis = [np.eye(L_hat.shape[0])]
    if M > 1:
        basis.append(L_hat.copy())
    for _ in range(2, M):
        basis.append(2.0 * L_hat @ basis[-1] - basis[-2])
    return basis


@dataclass(frozen=True)
class SpectralOps:
    laplacian: np.ndarray
    scaled_laplacian: np.ndarray
    lambda_max: float
    cheb_basis: tuple

    @property
    def order(self) -> int:
        return len(self.cheb_basis)

    @classmethod
    def from_adjacency(cls, A, M: int) -> "SpectralOps":
        L = normalized_laplacian(A)
        try:
            lam = max_eigenvalue(L)
        except EigenNotConvergedError as exc:
            # only the scale of L_hat depends on this; the last iterate is close
            log.warning("%s; using last estimate %.12g", exc, exc.last_value)
            lam = exc.last_value
        L_hat = scaled_laplacian(L, lam)
        return cls(L, L_hat, lam, tuple(chebyshev_basis(L_hat, M)))


@dataclass
class RoadGraph:
    node_ids: list[str]
    distances: np.ndarray
    adjacency: np.ndarray
    metadata: dict = field(default_factory=dict)

    @classmethod
    def build(cls, node_ids, distances, sigma: float | None = None, r: float = 0.1,
              metadata=None) -> "RoadGraph":
        d = _check_distances(distances)
        if len(node_ids) != d.shape[0]:
            raise InvalidInputError("node_ids and distance matrix sizes differ")
        if sigma is None:
            sigma = default_sigma(d)
        return cls(list(node_ids), d, build_adjacency(d, sigma, r), metadata or {})

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    def spectral_ops(self, M: int) -> SpectralOps:
        return SpectralOps.from_adjacency(self.adjacency, M)
