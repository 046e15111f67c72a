"""Dense and banded hermitian linear algebra.

``HermitianOperator`` is the stand-in for every truncated selfadjoint operator
in the package. It stores either a dense array or a scipy sparse matrix; the
sparse form is used for the large line-times-inner operators, whose Kronecker
layout (line index outer) keeps them banded with bandwidth equal to the inner
dimension.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DimensionError, DomainError, ParameterError, SpectralError

SILENT_ASYMMETRY = 1e-12
REJECT_ASYMMETRY = 1e-8
# above this dimension, sparse operators are never densified for eigenvalues
BANDED_MIN_DIM = 256


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


@dataclass(frozen=True)
class KroneckerShape:
    """Tensor layout dim1 (line factor, outer) x dim2 (inner factor)."""

    dim1: int
    dim2: int

    def __post_init__(self):
        if self.dim1 < 1 or self.dim2 < 1:
            raise DimensionError(f"invalid Kronecker shape {self.dim1}x{self.dim2}")

    @property
    def dim(self) -> int:
        return self.dim1 * self.dim2


def _frobenius(m) -> float:
    if sp.issparse(m):
        return float(sp.linalg.norm(m))
    return float(np.linalg.norm(m))


def _bandwidth(m) -> int:
    coo = m.tocoo()
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


class HermitianOperator:
    """Finite hermitian matrix with a lazily cached spectral decomposition.

    Inputs are symmetrized as (H + H*)/2. Relative Frobenius asymmetry above
    1e-8 is rejected, between 1e-12 and 1e-8 it triggers a warning.
    """

    def __init__(self, entries):
        if sp.issparse(entries):
            mat = sp.csr_matrix(entries)
        else:
            mat = np.array(entries, copy=True)
            if mat.ndim == 0:
                mat = mat.reshape(1, 1)
            if not (np.issubdtype(mat.dtype, np.floating) or np.issubdtype(mat.dtype, np.complexfloating)):
                mat = mat.astype(float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"hermitian operator needs a square matrix, got shape {mat.shape}")
        adjoint = mat.conj().T
        scale = _frobenius(mat)
        asym = _frobenius(mat - adjoint) / scale if scale > 0 else 0.0
        if asym > REJECT_ASYMMETRY:
            raise ParameterError(f"matrix is not hermitian (relative asymmetry {asym:.2e})")
        if asym > SILENT_ASYMMETRY:
            warnings.warn(f"symmetrizing matrix with relative asymmetry {asym:.2e}", stacklevel=2)
        mat = (mat + adjoint) * 0.5
        if sp.issparse(mat):
            mat = sp.csr_matrix(mat)
            if np.iscomplexobj(mat.data) and not np.any(mat.data.imag):
                mat = mat.real.tocsr()
        elif np.iscomplexobj(mat) and not np.any(mat.imag):
            mat = mat.real.copy()
        self._matrix = mat

    @property
    def matrix(self):
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self._matrix)

    @cached_property
    def bandwidth(self) -> int:
        if self.is_sparse:
            return _bandwidth(self._matrix)
        return _bandwidth(sp.coo_matrix(self._matrix))

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self._matrix.toarray()
        return self._matrix

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"HermitianOperator(dim={self.dim}, {kind})"

    @cached_property
    def decomposition(self) -> SpectralDecomposition:
        return _eigh(self.dense())

    @cached_property
    def _eigenvalues(self) -> np.ndarray:
        if "decomposition" in self.__dict__:
            return self.decomposition.eigenvalues
        if self.is_sparse and self.dim >= BANDED_MIN_DIM:
            return _banded_eigenvalues(self._matrix, self.bandwidth)
        return _eigvalsh(self.dense())

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues; banded solvers are used for large sparse input."""
        return self._eigenvalues

    def shifted(self, shift: float) -> "HermitianOperator":
        if self.is_sparse:
            return HermitianOperator(self._matrix + shift * sp.identity(self.dim, format="csr"))
        return HermitianOperator(self._matrix + shift * np.eye(self.dim))


def as_hermitian(h) -> HermitianOperator:
    return h if isinstance(h, HermitianOperator) else HermitianOperator(h)


def _condition_estimate(mat: np.ndarray) -> float:
    try:
        return float(np.linalg.cond(mat))
    except (np.linalg.LinAlgError, ValueError):
        return math.nan


def _eigh(mat: np.ndarray) -> SpectralDecomposition:
    try:
        vals, vecs = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(
            f"eigensolver failed for dim={mat.shape[0]}: {exc}",
            dim=mat.shape[0],
            condition=_condition_estimate(mat),
        ) from exc
    return SpectralDecomposition(vals, vecs)


def _eigvalsh(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.eigvalsh(mat)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(
            f"eigensolver failed for dim={mat.shape[0]}: {exc}",
            dim=mat.shape[0],
            condition=_condition_estimate(mat),
        ) from exc


def banded_lower(mat, bandwidth: int) -> np.ndarray:
    """LAPACK lower band storage: row k holds the k-th subdiagonal."""
    mat = sp.dia_matrix(mat)
    n = mat.shape[0]
    dtype = np.result_type(mat.dtype, float)
    band = np.zeros((bandwidth + 1, n), dtype=dtype)
    for k in range(bandwidth + 1):
        band[k, : n - k] = mat.diagonal(-k)
    return band


def _banded_eigenvalues(mat, bandwidth: int) -> np.ndarray:
    n = mat.shape[0]
    try:
        if bandwidth == 0:
            return np.sort(np.real(mat.diagonal()))
        if bandwidth == 1 and not np.iscomplexobj(mat.data):
            return sla.eigh_tridiagonal(
                mat.diagonal(), mat.diagonal(-1), eigvals_only=True, lapack_driver="stemr"
            )
        return sla.eig_banded(banded_lower(mat, bandwidth), lower=True, eigvals_only=True)
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError) as exc:
        raise SpectralError(f"banded eigensolver failed for dim={n}: {exc}", dim=n) from exc


def spectral_decompose(h) -> SpectralDecomposition:
    """Eigen-decomposition (ascending), cached on the operator."""
    return as_hermitian(h).decomposition


def matrix_function(h, f: Callable) -> HermitianOperator:
    """U diag(f(lambda_i)) U* for a real function ``f`` on the spectrum."""
    dec = spectral_decompose(h)
    lam = dec.eigenvalues
    with np.errstate(all="ignore"):
        try:
            values = np.asarray(f(lam), dtype=float)
            if values.shape != lam.shape:
                raise ValueError
        except (ValueError, TypeError, ZeroDivisionError, ArithmeticError):
            values = np.empty_like(lam)
            for i, x in enumerate(lam):
                try:
                    values[i] = float(f(float(x)))
                except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
                    raise DomainError(f"function undefined at eigenvalue {x!r}: {exc}", eigenvalue=float(x)) from exc
    bad = ~np.isfinite(values)
    if np.any(bad):
        x = float(lam[np.argmax(bad)])
        raise DomainError(f"function is not finite at eigenvalue {x!r}", eigenvalue=x)
    u = dec.eigenvectors
    return HermitianOperator((u * values) @ u.conj().T)


def _psd_eigenvalues(h: HermitianOperator, tol: float = 1e-10) -> np.ndarray:
    lam = h.decomposition.eigenvalues
    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    if lam.size and lam[0] < -tol * scale:
        raise ParameterError(f"operator is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    return np.clip(lam, 0.0, None)


def psd_power(h, power: float) -> HermitianOperator:
    """H**power for psd H, clipping eigenvalues that are negative by rounding."""
    h = as_hermitian(h)
    lam = _psd_eigenvalues(h)
    u = h.decomposition.eigenvectors
    return HermitianOperator((u * lam**power) @ u.conj().T)


def fractional_resolvent_power(h, lam: float, s: float, method: str = "spectral", points: int = 200) -> HermitianOperator:
    """(lam + H)**(-s) for psd H.

    ``method="spectral"`` uses the eigen-decomposition. ``method="quadrature"``
    (alias ``"contour-quadrature"``) is an independent path: the integer part of ``s`` is handled with matrix
    inverses and the fractional part q with

        (lam + H)**(-q) = sin(q pi)/pi * int_0^inf mu**(-q) (lam + H + mu)**(-1) dmu,

    evaluated after mu = exp(u) with a sinh-map double-exponential rule.
    """
    if lam <= 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if s <= 0:
        raise ParameterError(f"power must be positive, got {s}")
    h = as_hermitian(h)
    if method == "spectral":
        shifted = _psd_eigenvalues(h) + lam
        u = h.decomposition.eigenvectors
        return HermitianOperator((u * shifted ** (-s)) @ u.conj().T)
    if method not in ("quadrature", "contour-quadrature"):
        raise ParameterError(f"unknown method {method!r}")

    mat = h.dense()
    n = h.dim
    eye = np.eye(n)
    try:
        np.linalg.cholesky(mat + (1e-10 * max(1.0, np.linalg.norm(mat, 1))) * eye)
    except np.linalg.LinAlgError as exc:
        raise ParameterError("operator is not positive semidefinite") from exc
    base = lam * eye + mat
    whole = int(math.floor(s))
    frac = s - whole
    inv = np.linalg.inv(base)
    result = np.linalg.matrix_power(inv, whole) if whole else eye.astype(inv.dtype)
    if frac > 1e-14:
        # centre the rule on the logarithmic mid-scale of the spectrum
        centre = math.log(lam + max(np.trace(mat).real / n, 0.0))
        t, w = _sinh_map(points)
        acc = np.zeros_like(inv, dtype=np.result_type(inv.dtype, float))
        for ui, wi in zip(centre + t, w):
            if ui > 0:
                # mu**(1-q) (base + mu)^-1 = mu**(-q) (I + base/mu)^-1
                term = math.exp(-frac * ui) * np.linalg.inv(eye + base * math.exp(-ui))
            else:
                term = math.exp((1.0 - frac) * ui) * np.linalg.inv(base + math.exp(ui) * eye)
            acc += wi * term
        result = result @ (math.sin(frac * math.pi) / math.pi * acc)
    return HermitianOperator(result)


def _sinh_map(points: int):
    # u = 2 sinh(tau): single-exponential decay of the u-integrand becomes
    # double-exponential in tau
    tau = np.linspace(-6.5, 6.5, points)
    step = tau[1] - tau[0]
    return 2.0 * np.sinh(tau), 2.0 * step * np.cosh(tau)


def schatten_norm(t, q: float) -> float:
    """(sum_i sigma_i**q)**(1/q); q = inf gives the operator norm."""
    if q < 1:
        raise ParameterError(f"Schatten index must be >= 1, got {q}")
    mat = t.dense() if isinstance(t, HermitianOperator) else (t.toarray() if sp.issparse(t) else np.asarray(t))
    sv = np.linalg.svd(np.atleast_2d(mat), compute_uv=False)
    if math.isinf(q):
        return float(sv.max(initial=0.0))
    if sv.size == 0 or sv.max() == 0:
        return 0.0
    top = sv.max()
    return float(top * np.sum((sv / top) ** q) ** (1.0 / q))


def trace_norm(t) -> float:
    return schatten_norm(t, 1)


def operator_norm(t) -> float:
    """Largest singular value (dense LAPACK)."""
    mat = t.toarray() if sp.issparse(t) else np.asarray(t)
    return float(np.linalg.norm(mat, 2))


def partial_trace_first(r, shape: KroneckerShape) -> np.ndarray:
    """(Tr x 1)(R): contract the line (outer) factor of a dim1*dim2 matrix."""
    mat = r.dense() if isinstance(r, HermitianOperator) else (r.toarray() if sp.issparse(r) else np.asarray(r))
    if mat.shape != (shape.dim, shape.dim):
        raise DimensionError(f"matrix of shape {mat.shape} does not match Kronecker shape {shape.dim1}x{shape.dim2}")
    return np.einsum("titj->ij", mat.reshape(shape.dim1, shape.dim2, shape.dim1, shape.dim2))


def iterated_commutator(h, t, k: int) -> np.ndarray:
    """delta^k(T) with delta(T) = [H^(1/2), T] for psd H."""
    if k < 0:
        raise ParameterError("commutator order must be nonnegative")
    out = np.asarray(t)
    if k == 0:
        return out
    root = psd_power(h, 0.5).dense()
    for _ in range(k):
        out = root @ out - out @ root
    return out


def sigma_conjugate(delta_hat, t, k: int) -> np.ndarray:
    """sigma^k(T) with sigma(T) = (D + 1) T (D + 1)^-1 for psd D."""
    if k < 0:
        raise ParameterError("conjugation power must be nonnegative")
    d = as_hermitian(delta_hat)
    b = d.dense() + np.eye(d.dim)
    out = np.asarray(t)
    for _ in range(k):
        # X B^-1 = (B^-1 X^*)^* since B is hermitian
        out = np.linalg.solve(b, (b @ out).conj().T).conj().T
    return out


def kron(a, b, fmt: str = "csr"):
    """Sparse Kronecker product, line factor first."""
    return sp.kron(sp.csr_matrix(a), sp.csr_matrix(b), format=fmt)


__all__ = [
    "HermitianOperator",
    "KroneckerShape",
    "SpectralDecomposition",
    "as_hermitian",
    "banded_lower",
    "fractional_resolvent_power",
    "iterated_commutator",
    "kron",
    "matrix_function",
    "operator_norm",
    "partial_trace_first",
    "psd_power",
    "schatten_norm",
    "sigma_conjugate",
    "spectral_decompose",
    "trace_norm",
]
