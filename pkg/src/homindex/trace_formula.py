"""Both sides of the trace identity, evaluated independently.

The left side (homological index) only ever touches the line grid and the
eigenvalues of the two assembled Schroedinger operators. The right side only
ever touches inner-space matrices and quadrature in the path parameter. The
two share no numerical code beyond the hermitian-matrix container.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.special import gammaln

from .errors import AccuracyError, DegenerateEndpointError, GuardError, ParameterError
from .model import (
    LineDiscretization,
    ModelSpec,
    assemble_schroedinger_pair,
    build_line_operators,
    build_inner_pair,
    inner_path_operator,
    tensor_model,
)
from .operators import HermitianOperator, banded_lower, fractional_resolvent_power, schatten_norm
from .quadrature import adaptive_gauss_legendre, integrate_real_line

# lambda ladders for the lambda -> 0 extrapolation; the LHS ladder stays above
# the box-mode scale (pi/2T)**2 of the default discretization
DEFAULT_RHS_LAMBDAS = (1e-3, 5e-4, 2.5e-4)
DEFAULT_LHS_LAMBDAS = (0.1, 0.05, 0.025, 0.0125)


@dataclass
class TraceReport:
    value: float
    m: int
    lam: float
    disc: LineDiscretization | None
    error_estimate: float
    wall_time: float
    epsilon: float = 1.0
    label: str = ""
    details: dict = field(default_factory=dict)


def _check_m_lambda(m, lam):
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m}")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")


# -- constant -------------------------------------------------------------


def c_constant(m: int, method: str = "gamma") -> float:
    """C_{m+1/2} = Gamma(m+1/2) / (sqrt(pi) Gamma(m)) = (m/pi) int (1+eta^2)^(-m-1)."""
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m}")
    if method == "gamma":
        return math.exp(gammaln(m + 0.5) - gammaln(m)) / math.sqrt(math.pi)
    if method == "quadrature":
        value, _ = integrate_real_line(lambda eta: (1.0 + eta * eta) ** (-m - 1), tol=1e-15)
        return m / math.pi * float(value)
    raise ParameterError(f"unknown method {method!r}")


def eta_integral(m: int) -> float:
    """int_R (1 + eta^2)^(-m-1) d eta in closed form."""
    return math.sqrt(math.pi) * math.exp(gammaln(m + 0.5) - gammaln(m + 1))


# -- left side ------------------------------------------------------------


def _resolvent_trace_difference(minus: np.ndarray, plus: np.ndarray, lam: float, m: int) -> float:
    # pair eigenvalues by rank so the large, nearly equal high modes cancel termwise
    terms = (lam + minus) ** (-m) - (lam + plus) ** (-m)
    return math.fsum(terms.tolist())


def _lhs_value(spec: ModelSpec, m: int, lam: float, disc: LineDiscretization, **kwargs) -> float:
    h_minus, h_plus = assemble_schroedinger_pair(spec, disc, **kwargs)
    ev_minus = h_minus.eigenvalues()
    ev_plus = h_plus.eigenvalues()
    if np.min(lam + ev_minus) <= 0 or np.min(lam + ev_plus) <= 0:
        raise GuardError(f"lambda={lam} does not shift the discrete spectrum to the right of 0")
    if ev_minus is not ev_plus and np.array_equal(ev_minus, ev_plus):
        tm = tensor_model(spec, disc, check_support=False)
        if np.any(tm.dh) and np.any(tm.a):
            raise GuardError("identical spectra for a nonzero flow term: the pair was not assembled independently")
    return lam**m * _resolvent_trace_difference(ev_minus, ev_plus, lam, m)


def homological_index_lhs(
    spec: ModelSpec,
    m: int,
    lam: float,
    disc: LineDiscretization,
    refine: bool = True,
    **kwargs,
) -> TraceReport:
    """lam^m Tr((lam + H_-)^-m - (lam + H_+)^-m) on the discretized line.

    With ``refine`` the grid spacing is halved once and the error estimate is
    the absolute change between the two levels; the reported value is the
    one at ``disc``.
    """
    _check_m_lambda(m, lam)
    start = time.perf_counter()
    value = _lhs_value(spec, m, lam, disc, **kwargs)
    estimate = 0.0
    details = {}
    if refine:
        fine = _lhs_value(spec, m, lam, disc.refined(), **kwargs)
        estimate = abs(fine - value)
        details["refined_value"] = fine
    return TraceReport(value, m, lam, disc, estimate, time.perf_counter() - start, spec.epsilon, "lhs", details)


def telescoping_trap_value(spec: ModelSpec, m: int, lam: float, disc: LineDiscretization) -> float:
    """The wrong construction: both products from one truncated D_+.

    D_- D_+ = D_+^* D_+ and D_+ D_- = D_+ D_+^* share the squared singular
    values of D_+, so the trace difference vanishes identically.
    """
    tm = tensor_model(spec, disc)
    _, ddt, _ = build_line_operators(disc)
    eye_line = sp.identity(tm.line_dim)
    d_plus = (
        sp.kron(ddt, sp.identity(tm.inner_dim))
        + sp.kron(eye_line, tm.d2)
        + sp.kron(sp.diags(tm.h), tm.a)
    ).toarray()
    sv = np.linalg.svd(d_plus, compute_uv=False) ** 2
    return lam**m * _resolvent_trace_difference(np.sort(sv), np.sort(sv), lam, m)


# -- right side -----------------------------------------------------------


def path_integrand(spec: ModelSpec, m: int, lam: float, method: str = "spectral") -> Callable[[float], float]:
    """r -> Tr(A_+ (lam + (D2 + r A_+)^2)^(-m-1/2) - (same with A_-))."""
    _, a = build_inner_pair(spec)
    a_mat = a.dense()
    profile = spec.scaled_profile
    sides = [(+1.0, profile.h_plus, "+"), (-1.0, profile.h_minus, "-")]
    sides = [s for s in sides if s[1] != 0.0]

    def integrand(r: float) -> float:
        total = 0.0
        for weight, level, sign in sides:
            x = inner_path_operator(spec, r, sign).dense()
            power = fractional_resolvent_power(HermitianOperator(x @ x.conj().T), lam, m + 0.5, method=method)
            total += weight * level * float(np.real(np.trace(a_mat @ power.dense())))
        return total

    return integrand


def rhs_integral(spec: ModelSpec, m: int, lam: float, tol: float = 1e-10, method: str = "spectral") -> TraceReport:
    """lam^m C_{m+1/2} int_0^1 Tr(A_+ (...)^(-m-1/2) - A_- (...)^(-m-1/2)) dr."""
    _check_m_lambda(m, lam)
    start = time.perf_counter()
    _, a = build_inner_pair(spec)
    if not np.any(a.dense()):
        return TraceReport(0.0, m, lam, None, 0.0, time.perf_counter() - start, spec.epsilon, "rhs")
    prefactor = lam**m * c_constant(m)
    integral, err = adaptive_gauss_legendre(
        path_integrand(spec, m, lam, method), 0.0, 1.0, tol=tol / max(prefactor, 1e-300)
    )
    return TraceReport(
        prefactor * float(integral), m, lam, None, prefactor * err, time.perf_counter() - start, spec.epsilon, "rhs"
    )


# -- lambda -> 0 ----------------------------------------------------------


def extrapolate_sqrt_lambda(lams: Sequence[float], values: Sequence[float], degree: int = 2) -> float:
    """Value at lambda = 0 of the least-squares polynomial in sqrt(lambda)."""
    x = np.sqrt(np.asarray(lams, dtype=float))
    y = np.asarray(values, dtype=float)
    if x.size < degree + 1:
        raise ParameterError(f"need at least {degree + 1} points for a degree-{degree} fit")
    with np.errstate(all="raise"):
        try:
            coef = np.polynomial.polynomial.polyfit(x, y, degree)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise AccuracyError(f"sqrt(lambda) fit failed: {exc}") from exc
    if not np.all(np.isfinite(coef)):
        raise AccuracyError("sqrt(lambda) fit produced non-finite coefficients")
    return float(coef[0])


def witten_index_estimate(
    spec: ModelSpec,
    m: int,
    lam_grid: Sequence[float] | None = None,
    side: str = "rhs",
    disc: LineDiscretization | None = None,
    tol: float = 1e-12,
) -> tuple[np.ndarray, float]:
    """Evaluate one side along a descending lambda ladder and extrapolate to 0."""
    if side not in ("lhs", "rhs"):
        raise ParameterError(f"side must be 'lhs' or 'rhs', got {side!r}")
    if lam_grid is None:
        lam_grid = DEFAULT_RHS_LAMBDAS if side == "rhs" else DEFAULT_LHS_LAMBDAS
    lam_grid = [float(x) for x in lam_grid]
    if len(lam_grid) < 3:
        raise ParameterError("lambda grid needs at least 3 points")
    if any(b >= a for a, b in zip(lam_grid, lam_grid[1:])) or lam_grid[-1] <= 0:
        raise ParameterError("lambda grid must be positive and strictly descending")
    if side == "lhs":
        if disc is None:
            raise ParameterError("the lhs side needs a line discretization")
        values = [homological_index_lhs(spec, m, lam, disc, refine=False).value for lam in lam_grid]
    else:
        values = [rhs_integral(spec, m, lam, tol=tol).value for lam in lam_grid]
    values = np.array(values)
    if not np.any(values):
        return values, 0.0
    return values, extrapolate_sqrt_lambda(lam_grid, values)


# -- spectral flow --------------------------------------------------------


def _negatives(op) -> int:
    return int(np.count_nonzero(np.asarray(op.eigenvalues()) < 0))


def spectral_flow_crossings(
    path: Callable[[float], HermitianOperator],
    steps: int = 64,
    margin: float = 1e-8,
    resolution: float = 1e-10,
    max_depth: int = 80,
    return_crossings: bool = False,
):
    """Net number of eigenvalues crossing 0 upwards along r in [0, 1].

    The path is sampled uniformly; every sample interval on which the count of
    negative eigenvalues changes is bisected until each change is localized
    to parameter width ``resolution``.
    """
    if steps < 1:
        raise ParameterError("steps must be positive")
    for r in (0.0, 1.0):
        ev = np.asarray(path(r).eigenvalues())
        if ev.size and np.min(np.abs(ev)) < margin:
            raise DegenerateEndpointError(f"eigenvalue within {margin:g} of 0 at endpoint r={r}")

    cache: dict[float, int] = {}

    def count(r: float) -> int:
        if r not in cache:
            cache[r] = _negatives(path(r))
        return cache[r]

    crossings: list[tuple[float, int]] = []

    def locate(lo: float, hi: float, depth: int) -> None:
        n_lo, n_hi = count(lo), count(hi)
        if n_lo == n_hi and depth > 0:
            return
        if hi - lo <= resolution:
            crossings.append((0.5 * (lo + hi), n_lo - n_hi))
            return
        if depth >= max_depth:
            raise AccuracyError(f"crossing in [{lo}, {hi}] not resolved after {max_depth} bisections", estimate=hi - lo)
        mid = 0.5 * (lo + hi)
        locate(lo, mid, depth + 1)
        locate(mid, hi, depth + 1)

    grid = np.linspace(0.0, 1.0, steps + 1)
    for lo, hi in zip(grid[:-1], grid[1:]):
        if count(float(lo)) != count(float(hi)):
            locate(float(lo), float(hi), 1)
    flow = count(0.0) - count(1.0)
    if sum(c for _, c in crossings) != flow:
        raise AccuracyError("localized crossings do not add up to the endpoint count difference")
    return (flow, crossings) if return_crossings else flow


def inner_flow_path(spec: ModelSpec, sign: str = "+") -> Callable[[float], HermitianOperator]:
    return lambda r: inner_path_operator(spec, r, sign)


# -- quadrature identities --------------------------------------------------


def check_xi_integral_identity(x, lam: float, m: int, tol: float = 1e-13) -> float:
    """Relative gap in int (lam + X^2 + xi^2)^(-m-1) d xi = c_m (lam + X^2)^(-m-1/2).

    Left side: matrix-valued quadrature over xi with explicit inverses; right
    side: spectral fractional power times the closed-form eta integral.
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    mat = x.dense() if isinstance(x, HermitianOperator) else np.atleast_2d(np.asarray(x))
    base = lam * np.eye(mat.shape[0]) + mat @ mat.conj().T
    right = eta_integral(m) * fractional_resolvent_power(HermitianOperator(mat @ mat.conj().T), lam, m + 0.5).dense()
    scale = float(np.max(np.abs(right)))

    def integrand(xi):
        return np.linalg.matrix_power(np.linalg.inv(base + xi * xi * np.eye(base.shape[0])), m + 1)

    left, _ = integrate_real_line(integrand, tol=tol * scale)
    return float(np.linalg.norm(left - right) / np.linalg.norm(right))


def flow_trace_sides(spec: ModelSpec, disc: LineDiscretization, m: int, lam: float, l: int, r: float):
    """Both sides of (Tr x 1)(F h^l (Delta_hat + beta(r) + lam)^(-m-1)) = ... A int(...) d xi."""
    _check_m_lambda(m, lam)
    tm = tensor_model(spec, disc)
    d2, a = tm.d2, tm.a
    dim2 = tm.inner_dim
    profile = spec.scaled_profile

    # left: partial trace over the support of dh, via banded Cholesky solves
    ones = np.ones(tm.line_dim)
    op = tm.delta_hat() + r * tm.t1(ones) + r * r * tm.t0(ones) + lam * sp.identity(tm.line_dim * dim2)
    op = HermitianOperator(op)
    support = np.flatnonzero(tm.dh)
    left = np.zeros((dim2, dim2), dtype=np.result_type(a.dtype, op.matrix.dtype))
    if support.size:
        cols = (support[:, None] * dim2 + np.arange(dim2)[None, :]).ravel()
        rhs = np.zeros((op.dim, cols.size), dtype=left.dtype)
        rhs[cols, np.arange(cols.size)] = 1.0
        chol = sla.cholesky_banded(banded_lower(op.matrix, max(op.bandwidth, 1)), lower=True)
        sol = rhs
        for _ in range(m + 1):
            sol = sla.cho_solve_banded((chol, True), sol)
        for k, t in enumerate(support):
            block = sol[t * dim2 : (t + 1) * dim2, k * dim2 : (k + 1) * dim2]
            left = left + 2.0 * tm.dh[t] * tm.h[t] ** l * (a @ block)

    # right: inner eigen-decomposition and a scalar xi quadrature per eigenvalue
    x = d2 + r * a
    dec = HermitianOperator(x @ x.conj().T).decomposition
    mu = np.clip(dec.eigenvalues, 0.0, None)
    weights, _ = integrate_real_line(lambda xi: (lam + mu + xi * xi) ** (-m - 1), tol=1e-14 * lam ** (-m - 1))
    inner = (dec.eigenvectors * weights) @ dec.eigenvectors.conj().T
    coeff = (profile.h_plus ** (l + 1) - profile.h_minus ** (l + 1)) / (math.pi * (l + 1))
    right = coeff * a @ inner
    return left, right


def check_flow_trace_identity(
    spec: ModelSpec,
    disc: LineDiscretization,
    m: int,
    lam: float,
    l: int = 0,
    r: float = 0.0,
    min_n: int = 1024,
) -> float:
    """Relative trace-norm gap between the two sides of the partial-trace identity."""
    if disc.n < min_n:
        raise ParameterError(f"grid too coarse for the flow-trace identity: n={disc.n} < {min_n}")
    left, right = flow_trace_sides(spec, disc, m, lam, l, r)
    denom = schatten_norm(right, 1)
    gap = schatten_norm(left - right, 1)
    return gap / denom if denom > 0 else gap


# -- epsilon invariance -----------------------------------------------------


def epsilon_invariance_report(
    spec: ModelSpec,
    m: int,
    lam: float,
    eps_list: Sequence[float],
    disc: LineDiscretization,
    refine: bool = False,
) -> dict:
    """H-Ind evaluated for each rescaling epsilon at one fixed discretization."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ParameterError("epsilon list is empty")
    disc.check_support(spec.with_epsilon(min(eps_list)).scaled_profile)
    reports = [homological_index_lhs(spec.with_epsilon(e), m, lam, disc, refine=refine) for e in eps_list]
    values = np.array([rep.value for rep in reports])
    centre = abs(float(np.mean(values)))
    spread = 0.0 if not np.any(values) else float(np.ptp(values)) / centre
    return {"epsilon": eps_list, "values": values, "spread": spread, "reports": reports}
