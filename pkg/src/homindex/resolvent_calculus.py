"""Multi-index calculus for derivatives of resolvent powers.

For a quadratic family alpha(z) = z T1 + z^2 T0 and R(z) = (D + alpha(z) + lam)^-1,
the l-th derivative of R^(m+1) is the bracket <R^(m+1); (s + e)^l (delta_0)>,
where s inserts a 1 into a multi-index at every position and e increments
each entry in turn. Combinations are stored with merged integer
coefficients.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AccuracyError, GuardError, ParameterError, ResourceError
from .model import LineDiscretization, ModelSpec, tensor_model
from .operators import (
    HermitianOperator,
    as_hermitian,
    iterated_commutator,
    operator_norm,
    psd_power,
    schatten_norm,
    sigma_conjugate,
)
from .quadrature import generalized_laguerre

MultiIndex = tuple
DEFAULT_LEVEL_CAP = 12


# -- symbolic layer -------------------------------------------------------


def multi_index(*entries: int) -> MultiIndex:
    if any(int(k) != k or k < 1 for k in entries):
        raise ParameterError(f"multi-index entries must be positive integers, got {entries}")
    return tuple(int(k) for k in entries)


class IndexCombination:
    """Integer combination of multi-indices; zero coefficients are dropped."""

    __slots__ = ("_terms",)

    def __init__(self, terms=None):
        self._terms: dict[MultiIndex, int] = {}
        for key, coeff in dict(terms or {}).items():
            self._add(multi_index(*key), int(coeff))

    @classmethod
    def basis(cls, *entries: int) -> "IndexCombination":
        return cls({tuple(entries): 1})

    @classmethod
    def empty(cls) -> "IndexCombination":
        """delta_0, the basis vector of the empty multi-index."""
        return cls({(): 1})

    def _add(self, key, coeff):
        total = self._terms.get(key, 0) + coeff
        if total:
            self._terms[key] = total
        else:
            self._terms.pop(key, None)

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def __iter__(self):
        return iter(key for key, _ in self.items())

    def __len__(self):
        return len(self._terms)

    def __getitem__(self, key):
        return self._terms.get(tuple(key), 0)

    def __eq__(self, other):
        if isinstance(other, IndexCombination):
            return self._terms == other._terms
        return NotImplemented

    def __add__(self, other: "IndexCombination") -> "IndexCombination":
        out = IndexCombination(self._terms)
        for key, coeff in other._terms.items():
            out._add(key, coeff)
        return out

    def __rmul__(self, scalar: int) -> "IndexCombination":
        return IndexCombination({k: scalar * c for k, c in self._terms.items()})

    @property
    def mass(self) -> int:
        """Sum of absolute coefficients (number of terms with repetition)."""
        return sum(abs(c) for c in self._terms.values())

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for key, coeff in self.items():
            name = "d_()" if not key else "d_(" + ",".join(map(str, key)) + ")"
            parts.append(name if coeff == 1 else f"{coeff}*{name}")
        return " + ".join(parts)


def apply_s(theta: IndexCombination) -> IndexCombination:
    """Insert a 1 at each of the j+1 slots of every multi-index."""
    out = IndexCombination()
    for key, coeff in theta.items():
        for i in range(len(key) + 1):
            out._add(key[:i] + (1,) + key[i:], coeff)
    return out


def apply_e(theta: IndexCombination) -> IndexCombination:
    """Increment each entry in turn; the empty index maps to 0."""
    out = IndexCombination()
    for key, coeff in theta.items():
        for i in range(len(key)):
            out._add(key[:i] + (key[i] + 1,) + key[i + 1 :], coeff)
    return out


def derivative_combination(l: int, cap: int = DEFAULT_LEVEL_CAP) -> IndexCombination:
    """(s + e)^l applied to delta_0."""
    if l < 0:
        raise ParameterError("derivative order must be nonnegative")
    if l > cap:
        raise ResourceError(f"derivative order {l} exceeds the cap {cap} (term count grows factorially)")
    theta = IndexCombination.empty()
    for _ in range(l):
        theta = apply_s(theta) + apply_e(theta)
    return theta


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` positive integers summing to ``total``, lexicographically."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


# -- numeric layer --------------------------------------------------------


class Resolvent:
    """Factorized (D + alpha(z) + lam) acting by solves."""

    def __init__(self, operator):
        self.dim = operator.shape[0]
        try:
            if sp.issparse(operator):
                self._lu = spla.splu(sp.csc_matrix(operator))
                self._solve = self._lu.solve
            else:
                with np.errstate(all="raise"), warnings.catch_warnings():
                    warnings.simplefilter("error", sla.LinAlgWarning)
                    lu = sla.lu_factor(np.asarray(operator), check_finite=True)
                if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.max(np.abs(np.diag(lu[0]))):
                    raise GuardError("resolvent is numerically singular")
                self._solve = lambda x: sla.lu_solve(lu, x)
        except (RuntimeError, FloatingPointError, sla.LinAlgError, sla.LinAlgWarning, ValueError) as exc:
            raise GuardError(f"resolvent is singular: {exc}") from exc

    def apply(self, x: np.ndarray) -> np.ndarray:
        """R @ x."""
        return self._solve(np.asarray(x))

    def power(self, k: int, dtype=float) -> np.ndarray:
        out = np.eye(self.dim, dtype=dtype)
        for _ in range(k):
            out = self.apply(out)
        return out


def _mul(y, x):
    return y @ x if not sp.issparse(y) else np.asarray(y @ x)


def bracket(resolvent: Resolvent, ys: Sequence, m: int, dtype=float, counter: dict | None = None) -> np.ndarray:
    """(-1)^j sum over |M| = m+1+j of R^m1 y1 R^m2 ... yj R^m(j+1).

    ``None`` entries stand for zero operators. Compositions are streamed
    depth-first from the right so shared suffix products are computed once.
    """
    j = len(ys)
    n = resolvent.dim
    if any(y is None for y in ys):
        return np.zeros((n, n), dtype=dtype)
    total = m + 1 + j
    acc = np.zeros((n, n), dtype=dtype)
    count = 0

    def walk(part: int, remaining: int, suffix):
        # part counts down from j+1 to 1; the first part absorbs what is left
        nonlocal acc, count
        if part == 1:
            term = suffix
            for _ in range(remaining):
                term = resolvent.apply(term)
            acc = acc + term
            count += 1
            return
        term = suffix
        for size in range(1, remaining - (part - 1) + 1):
            term = resolvent.apply(term)
            walk(part - 1, remaining - size, _mul(ys[part - 2], term))

    walk(j + 1, total, np.eye(n, dtype=dtype))
    if counter is not None:
        counter["compositions"] = counter.get("compositions", 0) + count
    return (-1) ** j * acc


def _circle_sup(t1, t0, weight, radius, samples) -> float:
    """max over sampled |z| = radius of ||(z T1 + z^2 T0) W||.

    With z = radius e^(i theta) the norm is radius ||P + w Q||, w = radius e^(i theta),
    whose square is the top eigenvalue of P*P + |w|^2 Q*Q + w P*Q + conj(w) Q*P.
    For real P, Q the angles theta and -theta give conjugate matrices, so only
    the upper half circle is evaluated.
    """
    p = t1 @ weight
    q = t0 @ weight
    base = p.conj().T @ p + radius**2 * (q.conj().T @ q)
    cross = p.conj().T @ q
    thetas = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    if np.isrealobj(p) and np.isrealobj(q):
        thetas = thetas[thetas <= np.pi + 1e-12]
    n = base.shape[0]
    best = 0.0
    for theta in thetas:
        w = radius * np.exp(1j * theta)
        gram = base + w * cross + np.conj(w) * cross.conj().T
        top = sla.eigvalsh(gram, subset_by_index=[n - 1, n - 1])[0]
        best = max(best, radius * math.sqrt(max(top, 0.0)))
    return best


@dataclass(frozen=True)
class QuadraticFamily:
    """alpha(z) = z T1 + z^2 T0 perturbing a psd D at shift lam."""

    delta_hat: HermitianOperator
    t1: object
    t0: object
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "delta_hat", as_hermitian(self.delta_hat))

    @property
    def dim(self) -> int:
        return self.delta_hat.dim

    @property
    def sparse(self) -> bool:
        return self.delta_hat.is_sparse

    def _lift(self, x):
        if self.sparse:
            return sp.csr_matrix(x)
        return x.toarray() if sp.issparse(x) else np.asarray(x)

    def alpha(self, z: complex):
        return z * self._lift(self.t1) + z * z * self._lift(self.t0)

    def alpha_derivative(self, k: int, z: complex):
        """k-th z-derivative of alpha; None for k >= 3."""
        if k == 0:
            return self.alpha(z)
        if k == 1:
            return self._lift(self.t1) + 2 * z * self._lift(self.t0)
        if k == 2:
            return 2 * self._lift(self.t0)
        return None

    def operator(self, z: complex):
        base = self.delta_hat.matrix
        eye = sp.identity(self.dim, format="csr") if self.sparse else np.eye(self.dim)
        return base + self.alpha(z) + self.lam * eye

    def resolvent(self, z: complex) -> Resolvent:
        return Resolvent(self.operator(z))

    def dtype(self, z: complex):
        t1 = self.t1.dtype if hasattr(self.t1, "dtype") else np.asarray(self.t1).dtype
        t0 = self.t0.dtype if hasattr(self.t0, "dtype") else np.asarray(self.t0).dtype
        kinds = [self.delta_hat.matrix.dtype, t1, t0, np.asarray(z).dtype]
        return np.result_type(*kinds, float)

    @cached_property
    def _inv_sqrt_weight(self) -> np.ndarray:
        return psd_power(HermitianOperator(self.delta_hat.dense()).shifted(1.0), -0.5).dense()

    def alpha_weight_sup(self, radius: float = 2.0, samples: int = 16) -> float:
        """sup over |z| = radius of ||alpha(z) (D + 1)^(-1/2)||.

        The norm of a holomorphic operator function is subharmonic, so the
        boundary circle carries the supremum over the disc.
        """
        return _circle_sup(self._dense(self.t1), self._dense(self.t0), self._inv_sqrt_weight, radius, samples)

    def resolvent_contraction(self, radius: float = 2.0, samples: int = 16) -> float:
        """sup over |z| = radius of ||alpha(z) (D + lam)^-1||."""
        inv = np.linalg.inv(self.delta_hat.dense() + self.lam * np.eye(self.dim))
        return _circle_sup(self._dense(self.t1), self._dense(self.t0), inv, radius, samples)

    @staticmethod
    def _dense(x):
        return x.toarray() if sp.issparse(x) else np.asarray(x)


def bracket_eval(fam: QuadraticFamily, m: int, key: Sequence[int], z: complex = 0.0, counter: dict | None = None, resolvent: Resolvent | None = None) -> np.ndarray:
    """<R^(m+1); delta_K>(z); entries >= 3 give the zero matrix."""
    key = tuple(key)
    if m < 0:
        raise ParameterError("m must be nonnegative")
    dtype = fam.dtype(z)
    ys = [fam.alpha_derivative(k, z) for k in key]
    if any(y is None for y in ys):
        return np.zeros((fam.dim, fam.dim), dtype=dtype)
    resolvent = resolvent or fam.resolvent(z)
    return bracket(resolvent, ys, m, dtype=dtype, counter=counter)


def resolvent_derivative(fam: QuadraticFamily, m: int, l: int, z: complex = 0.0, counter: dict | None = None) -> np.ndarray:
    """d^l/dz^l R^(m+1) = <R^(m+1); (s + e)^l (delta_0)>."""
    theta = derivative_combination(l)
    resolvent = fam.resolvent(z)
    out = np.zeros((fam.dim, fam.dim), dtype=fam.dtype(z))
    for key, coeff in theta.items():
        if any(k >= 3 for k in key):
            continue
        out = out + coeff * bracket_eval(fam, m, key, z, counter=counter, resolvent=resolvent)
    return out


# -- finite-difference oracle ----------------------------------------------


def central_difference_weights(order: int, accuracy: int = 4) -> tuple[np.ndarray, list[Fraction]]:
    """Offsets and exact weights of the central stencil for the given derivative."""
    half = (order + 1) // 2 - 1 + accuracy // 2
    offsets = list(range(-half, half + 1))
    size = len(offsets)
    # solve sum_i w_i x_i^p = p! delta_{p,order} exactly
    mat = [[Fraction(x) ** p for x in offsets] for p in range(size)]
    rhs = [Fraction(math.factorial(order)) if p == order else Fraction(0) for p in range(size)]
    for col in range(size):
        pivot = next(r for r in range(col, size) if mat[r][col] != 0)
        mat[col], mat[pivot] = mat[pivot], mat[col]
        rhs[col], rhs[pivot] = rhs[pivot], rhs[col]
        for r in range(size):
            if r != col and mat[r][col] != 0:
                factor = mat[r][col] / mat[col][col]
                mat[r] = [a - factor * b for a, b in zip(mat[r], mat[col])]
                rhs[r] -= factor * rhs[col]
    weights = [rhs[i] / mat[i][i] for i in range(size)]
    return np.array(offsets), weights


def finite_difference_oracle(fam: QuadraticFamily, m: int, l: int, z: complex = 0.0, step: float = 1e-3, dps: int = 40) -> np.ndarray:
    """4th-order central difference of z -> (D + alpha(z) + lam)^-(m+1).

    The step is ``step / ||T1||`` and every stencil point is evaluated in
    ``dps``-digit arithmetic, so the stencil's cancellation does not bring
    double-precision roundoff into the comparison.
    """
    import mpmath

    if l < 1:
        raise ParameterError("finite differences need l >= 1")
    t1 = QuadraticFamily._dense(fam.t1)
    t0 = QuadraticFamily._dense(fam.t0)
    scale = max(np.linalg.norm(t1, 2), 1e-300)
    h = step / scale
    base = fam.delta_hat.dense()
    offsets, weights = central_difference_weights(l, 4)
    with mpmath.workdps(dps):
        def mp(x):
            return mpmath.matrix(np.asarray(x, dtype=complex).tolist())

        d_mp, t1_mp, t0_mp = mp(base), mp(t1), mp(t0)
        eye = mpmath.eye(fam.dim)
        acc = mpmath.zeros(fam.dim, fam.dim)
        hz = mpmath.mpf(h)
        for off, w in zip(offsets, weights):
            if w == 0:
                continue
            zz = mpmath.mpc(z) + int(off) * hz
            op = d_mp + zz * t1_mp + zz * zz * t0_mp + mpmath.mpf(fam.lam) * eye
            inv = op**-1
            acc += (mpmath.mpf(w.numerator) / w.denominator) * inv ** (m + 1)
        acc = acc / hz**l
        out = np.array(acc.tolist(), dtype=complex)
    return out


# -- power series ---------------------------------------------------------


def power_series_check(fam: QuadraticFamily, f_matrix, m: int, terms: int = 10, z_eval: complex = 1.0) -> np.ndarray:
    """Trace-norm errors of the Taylor partial sums of F R(z_eval)^(m+1) around 0.

    Entry L is ||F R^(m+1)(z_eval) - sum_{l<=L} z_eval^l/l! F d^l R^(m+1)(0)||_1.
    """
    sup = fam.alpha_weight_sup(2.0)
    required = sup**2
    if not fam.lam > required:
        raise ParameterError(f"lambda={fam.lam} violates the guard: need lambda > {required:.6g}")
    f_mat = QuadraticFamily._dense(f_matrix)
    target = f_mat @ fam.resolvent(z_eval).power(m + 1, dtype=fam.dtype(z_eval))
    partial = np.zeros_like(target)
    errors = []
    for l in range(terms + 1):
        if l == 0:
            deriv = fam.resolvent(0.0).power(m + 1, dtype=fam.dtype(0.0))
        else:
            deriv = resolvent_derivative(fam, m, l, 0.0)
        partial = partial + (z_eval**l / math.factorial(l)) * (f_mat @ deriv)
        errors.append(schatten_norm(target - partial, 1))
    return np.array(errors)


# -- adiabatic isolation --------------------------------------------------


def isolation_families(spec: ModelSpec, disc: LineDiscretization, eps: float, lam0: float, check_support: bool = True):
    """(R-family from alpha_eps, S-family from beta, tensor model)."""
    tm = tensor_model(spec.with_epsilon(eps), disc, check_support=check_support)
    dhat = HermitianOperator(tm.delta_hat())
    ones = np.ones(tm.line_dim)
    fam_r = QuadraticFamily(dhat, tm.t1(), tm.t0(), lam0)
    fam_s = QuadraticFamily(dhat, tm.t1(ones), tm.t0(ones), lam0)
    return fam_r, fam_s, tm


def isolation_lambda0(spec: ModelSpec, disc: LineDiscretization, eps: float = 1.0, check_support: bool = True) -> float:
    """lam0 = (sup_{|z|<=2} ||alpha(z) (D + 1)^(-1/2)|| + 1)^2 over both families."""
    fam_r, fam_s, _ = isolation_families(spec, disc, eps, 1.0, check_support)
    dense_r = QuadraticFamily(HermitianOperator(fam_r.delta_hat.dense()), fam_r.t1, fam_r.t0, 1.0)
    dense_s = QuadraticFamily(dense_r.delta_hat, fam_s.t1, fam_s.t0, 1.0)
    # share the weight between the two families
    dense_s.__dict__["_inv_sqrt_weight"] = dense_r._inv_sqrt_weight
    sup = max(dense_r.alpha_weight_sup(), dense_s.alpha_weight_sup())
    return max(1.0, (sup + 1.0) ** 2)


def _line_scalar(tm, values) -> sp.csr_matrix:
    return sp.kron(sp.diags(values), sp.identity(tm.inner_dim), format="csr")


def _weighted(dhat: HermitianOperator, power: int, x: np.ndarray) -> np.ndarray:
    # (D + 1)^power @ x by repeated sparse products
    shifted = dhat.shifted(1.0).matrix
    for _ in range(power):
        x = np.asarray(shifted @ x)
    return x


def adiabatic_isolation_gap(
    spec: ModelSpec,
    disc: LineDiscretization,
    m: int,
    l: int,
    eps: float,
    lam0: float | None = None,
    check_support: bool = True,
) -> float:
    """||(D + 1)^(m+1) (d^l R^(m+1)(eps)|_0 - h_eps^l d^l S^(m+1)|_0)||."""
    if lam0 is None:
        lam0 = isolation_lambda0(spec, disc, eps, check_support)
    fam_r, fam_s, tm = isolation_families(spec, disc, eps, lam0, check_support)
    if l == 0:
        return 0.0
    dr = resolvent_derivative(fam_r, m, l, 0.0)
    ds = resolvent_derivative(fam_s, m, l, 0.0)
    diff = dr - np.asarray(_line_scalar(tm, tm.h**l) @ ds)
    return operator_norm(_weighted(fam_r.delta_hat, m + 1, diff))


def commutator_correction_sides(spec, disc, m, key, eps, lam0=None, check_support=True):
    """Both sides of the commutator-correction identity plus the size of its terms."""
    key = tuple(key)
    if lam0 is None:
        lam0 = isolation_lambda0(spec, disc, eps, check_support)
    fam_r, fam_s, tm = isolation_families(spec, disc, eps, lam0, check_support)
    res = fam_r.resolvent(0.0)
    first = bracket_eval(fam_r, m, key, 0.0, resolvent=res)
    second = np.asarray(_line_scalar(tm, tm.h ** sum(key)) @ bracket_eval(fam_s, m, key, 0.0, resolvent=res))
    lhs = first - second
    dhat = fam_r.delta_hat.matrix
    rhs = np.zeros_like(lhs)
    j = len(key)
    for p in range(1, j + 1):
        g = _line_scalar(tm, tm.h ** sum(key[p - 1 :]))
        comm = dhat @ g - g @ dhat
        ys = [fam_r.alpha_derivative(k, 0.0) for k in key[: p - 1]]
        ys += [comm]
        ys += [fam_s.alpha_derivative(k, 0.0) for k in key[p - 1 :]]
        rhs = rhs + bracket(res, ys, m, dtype=lhs.dtype)
    scale = max(np.linalg.norm(first), np.linalg.norm(second), np.linalg.norm(rhs))
    return lhs, rhs, scale


def commutator_correction_check(spec, disc, m, key, eps, lam0=None, check_support=True) -> float:
    """Gap of the exact commutator-correction identity on the truncation.

    The gap is relative to the largest of the two brackets being compared,
    so a vanishing correction (constant h) still yields a rounding-level
    residual.
    """
    lhs, rhs, scale = commutator_correction_sides(spec, disc, m, key, eps, lam0, check_support)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(lhs - rhs) / scale)


def theta_diagnostic(spec: ModelSpec, disc: LineDiscretization, m: int, eps: float, check_support: bool = True) -> float:
    """sup_{i=1..m+1} ||sigma^i((D + 1)^-1 [D, h_eps])||."""
    tm = tensor_model(spec.with_epsilon(eps), disc, check_support=check_support)
    dhat = HermitianOperator(tm.delta_hat())
    g = _line_scalar(tm, tm.h)
    comm = (dhat.matrix @ g - g @ dhat.matrix).toarray()
    base = np.linalg.solve(dhat.dense() + np.eye(dhat.dim), comm)
    return max(operator_norm(sigma_conjugate(dhat, base, i)) for i in range(1, m + 2))


# -- Laplace transform ----------------------------------------------------


def laplace_resolvent_power(h, lam: float, m: int, points: int = 64, tol: float = 1e-10) -> HermitianOperator:
    """(lam + H)^(-m-1) = 1/m! int_0^inf s^m exp(-s(lam + H)) ds.

    With s = u/kappa the weight u^m e^-u is absorbed by generalized
    Gauss-Laguerre; kappa is the geometric mean of the spectral bounds of
    lam + H. The rule is run at ``points`` and ``2*points`` nodes and must
    agree to ``tol`` (relative).
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    h = as_hermitian(h)
    mat = h.dense()
    n = h.dim
    top = lam + max(np.linalg.norm(mat, 2), 0.0)
    kappa = math.sqrt(lam * top)
    shifted = (mat + lam * np.eye(n)) / kappa - np.eye(n)

    def rule(k):
        u, w = generalized_laguerre(k, float(m))
        acc = np.zeros((n, n), dtype=np.result_type(mat.dtype, float))
        for ui, wi in zip(u, w):
            if wi == 0.0:
                continue
            acc += wi * sla.expm(-ui * shifted)
        return acc / (math.factorial(m) * kappa ** (m + 1))

    coarse = rule(points)
    fine = rule(2 * points)
    gap = np.linalg.norm(fine - coarse) / np.linalg.norm(fine)
    if not gap <= tol:
        raise AccuracyError(f"Gauss-Laguerre rule not converged (relative change {gap:.2e})", estimate=gap)
    return HermitianOperator(fine)


# -- resolvent bounds ------------------------------------------------------


def resolvent_bound_check(
    fam: QuadraticFamily,
    p: float,
    lam_values: Sequence[float],
    ks: Sequence[int] = (0, 1, 2),
    z_samples: Sequence[complex] = (0.0,),
    margin: float = 0.0,
) -> dict:
    """Fit the lambda-exponent of ||(D + 1)^p delta^k((D + alpha(z) + lam)^-1)||.

    Lambda values below the guard (sup||alpha (D+1)^(-1/2)|| + margin)^2 are
    skipped. The verdict per k is slope <= -1 + p + 0.1.
    """
    if not 0.0 <= p <= 1.0:
        raise ParameterError("p must lie in [0, 1]")
    dense = QuadraticFamily(HermitianOperator(fam.delta_hat.dense()), fam.t1, fam.t0, fam.lam)
    guard = 0.0
    if np.any(QuadraticFamily._dense(fam.t1)) or np.any(QuadraticFamily._dense(fam.t0)):
        guard = (dense.alpha_weight_sup() + margin) ** 2
    lams = [float(x) for x in lam_values if math.sqrt(x) >= math.sqrt(guard)]
    skipped = [float(x) for x in lam_values if math.sqrt(x) < math.sqrt(guard)]
    weight = psd_power(dense.delta_hat.shifted(1.0), p).dense()
    base = dense.delta_hat.dense()
    report = {"p": p, "lambdas": lams, "skipped": skipped, "guard": guard, "k": {}}
    for k in ks:
        norms = []
        for lam in lams:
            best = 0.0
            for z in z_samples:
                inv = np.linalg.inv(base + QuadraticFamily._dense(dense.alpha(z)) + lam * np.eye(dense.dim))
                best = max(best, operator_norm(weight @ iterated_commutator(dense.delta_hat, inv, k)))
            norms.append(best)
        norms = np.array(norms)
        if len(lams) >= 2 and np.all(norms > 0):
            slope = float(np.polyfit(np.log(lams), np.log(norms), 1)[0])
        else:
            slope = -math.inf
        report["k"][k] = {"norms": norms, "slope": slope, "ok": slope <= -1.0 + p + 0.1}
    report["ok"] = all(v["ok"] for v in report["k"].values())
    return report


__all__ = [
    "IndexCombination",
    "QuadraticFamily",
    "Resolvent",
    "adiabatic_isolation_gap",
    "apply_e",
    "apply_s",
    "bracket",
    "bracket_eval",
    "central_difference_weights",
    "commutator_correction_check",
    "compositions",
    "derivative_combination",
    "finite_difference_oracle",
    "isolation_lambda0",
    "laplace_resolvent_power",
    "multi_index",
    "power_series_check",
    "resolvent_bound_check",
    "resolvent_derivative",
    "theta_diagnostic",
]
