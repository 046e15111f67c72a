"""Model ingredients: inner operators, interpolating profiles, line grids.

The line factor is discretized on the Dirichlet interval [-T, T] with n
interior points; every operator on the tensor space uses the ordering
``index = t * inner_dim + i`` (line index outer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import scipy.sparse as sp
from scipy.stats import unitary_group

from .errors import ConfigurationError, DiscretizationError, ParameterError, ResourceError
from .operators import HermitianOperator, kron

DEFAULT_DIM_CAP = 1 << 17


# -- profiles ---------------------------------------------------------------


def _psi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _dpsi(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos]) / x[pos] ** 2
    return out


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    p, q = _psi(x), _psi(1.0 - np.asarray(x, dtype=float))
    return p / (p + q)


def smooth_step_derivative(x):
    x = np.asarray(x, dtype=float)
    p, q = _psi(x), _psi(1.0 - x)
    return (_dpsi(x) * q + p * _dpsi(1.0 - x)) / (p + q) ** 2


def _tanh_clamped(t, cutoff):
    # tanh on |t| <= K/2, glued to sign(t) by a smooth cutoff on K/2 <= |t| <= K
    a = np.abs(t)
    half = 0.5 * cutoff
    x = (a - half) / half
    c = 1.0 - smooth_step(x)
    dc = -smooth_step_derivative(x) * np.sign(t) / half
    th = np.tanh(t)
    sgn = np.sign(t)
    u = c * th + (1.0 - c) * sgn
    du = dc * (th - sgn) + c / np.cosh(t) ** 2
    return u, du


def _smoothed_step(t, cutoff):
    x = (t + cutoff) / (2.0 * cutoff)
    return 2.0 * smooth_step(x) - 1.0, smooth_step_derivative(x) / cutoff


_SHAPES = {"tanh-clamped": _tanh_clamped, "smoothed-step": _smoothed_step}


@dataclass(frozen=True)
class Profile:
    """Interpolating function h, exactly constant beyond the cutoff.

    ``h(t) = h_minus`` for t <= -K/epsilon and ``h_plus`` for t >= K/epsilon;
    the stored shape is the unscaled one and ``epsilon`` applies h(epsilon t).
    """

    shape: str = "tanh-clamped"
    h_minus: float = -1.0
    h_plus: float = 1.0
    K: float = 8.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ConfigurationError(f"unknown profile shape {self.shape!r}; choose from {sorted(_SHAPES)}")
        if not self.K > 0:
            raise ParameterError("profile cutoff K must be positive")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")

    @property
    def cutoff(self) -> float:
        """Support radius K/epsilon of the derivative."""
        return self.K / self.epsilon

    def _unit(self, t):
        return _SHAPES[self.shape](np.asarray(t, dtype=float), self.K)

    def __call__(self, t):
        u, _ = self._unit(self.epsilon * np.asarray(t, dtype=float))
        return 0.5 * (self.h_plus + self.h_minus) + 0.5 * (self.h_plus - self.h_minus) * u

    def derivative(self, t):
        _, du = self._unit(self.epsilon * np.asarray(t, dtype=float))
        return self.epsilon * 0.5 * (self.h_plus - self.h_minus) * du

    def rescaled(self, epsilon: float) -> "Profile":
        """h_eps(t) = h(eps t): cutoff grows to K/eps, asymptotes unchanged."""
        return replace(self, epsilon=self.epsilon * epsilon)

    def swapped(self) -> "Profile":
        return replace(self, h_minus=self.h_plus, h_plus=self.h_minus)


PROFILE_PRESETS = {
    "tanh-clamped": Profile("tanh-clamped", -1.0, 1.0),
    "full-kink": Profile("tanh-clamped", -1.0, 1.0),
    "half-kink": Profile("tanh-clamped", 0.0, 1.0),
    "smoothed-step": Profile("smoothed-step", -1.0, 1.0),
}


# -- model specification ----------------------------------------------------


@dataclass(frozen=True)
class Generator:
    kind: str
    params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)


D2_KINDS = ("scalar", "diagonal-linear", "harmonic", "matrix", "random")
A_KINDS = ("scalar", "matrix", "random", "banded", "conjugation-shift")


@dataclass(frozen=True)
class ModelSpec:
    inner_dim: int
    d2_gen: Generator
    a_gen: Generator
    profile: Profile = field(default_factory=Profile)
    epsilon: float = 1.0

    def __post_init__(self):
        if self.inner_dim < 1:
            raise ConfigurationError("inner_dim must be positive")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")

    @property
    def scaled_profile(self) -> Profile:
        return self.profile.rescaled(self.epsilon)

    def with_epsilon(self, epsilon: float) -> "ModelSpec":
        return replace(self, epsilon=epsilon)

    def with_profile(self, profile: Profile) -> "ModelSpec":
        return replace(self, profile=profile)


def scalar_model(profile: Profile | str = "half-kink", d2: float = 0.0, a: float = 1.0, epsilon: float = 1.0) -> ModelSpec:
    if isinstance(profile, str):
        profile = PROFILE_PRESETS[profile]
    return ModelSpec(1, Generator("scalar", {"value": d2}), Generator("scalar", {"value": a}), profile, epsilon)


@dataclass(frozen=True)
class LineDiscretization:
    T: float
    n: int
    bc: str = "dirichlet"
    safety_factor: float = 4.0

    def __post_init__(self):
        if not self.T > 0:
            raise DiscretizationError("half-length T must be positive")
        if self.n < 3:
            raise DiscretizationError("need at least 3 grid points")
        if self.bc != "dirichlet":
            raise DiscretizationError(f"unsupported boundary condition {self.bc!r}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.T / (self.n + 1)

    @property
    def grid(self) -> np.ndarray:
        return -self.T + self.spacing * np.arange(1, self.n + 1)

    def refined(self) -> "LineDiscretization":
        """Halve the spacing; grid points of the coarse level are kept."""
        return replace(self, n=2 * self.n + 1)

    def check_support(self, profile: Profile) -> None:
        if self.T < self.safety_factor * profile.cutoff:
            raise DiscretizationError(
                f"T={self.T} must be at least {self.safety_factor} x profile support {profile.cutoff:g}"
            )


# -- builders ---------------------------------------------------------------


def _random_hermitian(rng, dim, scale, complex_entries):
    g = rng.standard_normal((dim, dim))
    if complex_entries:
        g = g + 1j * rng.standard_normal((dim, dim))
    return scale * (g + g.conj().T) / (2.0 * math.sqrt(dim))


def _explicit(gen: Generator, dim: int, name: str) -> np.ndarray:
    entries = np.array(gen.get("entries"), dtype=complex)
    if np.all(entries.imag == 0):
        entries = entries.real
    if entries.shape != (dim, dim):
        raise ConfigurationError(f"{name} matrix has shape {entries.shape}, expected {(dim, dim)}")
    return entries


def _build_d2(gen: Generator, dim: int) -> np.ndarray:
    kind = gen.kind
    if kind == "scalar":
        if dim != 1:
            raise ConfigurationError("scalar generators require inner_dim = 1")
        return np.array([[float(gen.get("value", 0.0))]])
    if kind == "diagonal-linear":
        k_max = int(gen.get("k_max"))
        if dim != 2 * k_max + 1:
            raise ConfigurationError(f"diagonal-linear k_max={k_max} needs inner_dim={2 * k_max + 1}")
        return np.diag(np.arange(-k_max, k_max + 1, dtype=float))
    if kind == "harmonic":
        return np.diag(np.arange(dim, dtype=float) + 0.5)
    if kind == "matrix":
        return _explicit(gen, dim, "D2")
    if kind == "random":
        rng = np.random.default_rng(int(gen.get("seed", 0)))
        return _random_hermitian(rng, dim, float(gen.get("scale", 1.0)), bool(gen.get("complex", False)))
    raise ConfigurationError(f"unknown D2 generator {kind!r}; choose from {D2_KINDS}")


def _build_a(gen: Generator, dim: int, d2: np.ndarray) -> np.ndarray:
    kind = gen.kind
    if kind == "scalar":
        if dim != 1:
            raise ConfigurationError("scalar generators require inner_dim = 1")
        return np.array([[float(gen.get("value", 1.0))]])
    if kind == "matrix":
        return _explicit(gen, dim, "A")
    if kind == "random":
        rng = np.random.default_rng(int(gen.get("seed", 0)))
        return _random_hermitian(rng, dim, float(gen.get("scale", 1.0)), bool(gen.get("complex", False)))
    if kind == "banded":
        diag = float(gen.get("diag", 0.0))
        off = float(gen.get("off", 1.0))
        return diag * np.eye(dim) + off * (np.eye(dim, k=1) + np.eye(dim, k=-1))
    if kind == "conjugation-shift":
        # A = u D2 u* - D2: D2 and D2 + A are unitarily equivalent
        u = unitary_group.rvs(dim, random_state=int(gen.get("seed", 0))) if dim > 1 else np.ones((1, 1))
        return u @ d2 @ u.conj().T - d2
    raise ConfigurationError(f"unknown A generator {kind!r}; choose from {A_KINDS}")


def build_inner_pair(spec: ModelSpec) -> tuple[HermitianOperator, HermitianOperator]:
    """(D2, A) as hermitian matrices of size inner_dim."""
    d2 = _build_d2(spec.d2_gen, spec.inner_dim)
    a = _build_a(spec.a_gen, spec.inner_dim, d2)
    return HermitianOperator(d2), HermitianOperator(a)


def build_line_operators(disc: LineDiscretization):
    """(Delta_1, d/dt, grid) for the Dirichlet interval.

    Delta_1 is the 3-point second difference scaled by 1/spacing**2; d/dt is
    the centred first difference scaled by 1/(2 spacing), exactly
    antisymmetric.
    """
    n, hs = disc.n, disc.spacing
    ones = np.ones(n - 1)
    lap = sp.diags([-ones, 2.0 * np.ones(n), -ones], [-1, 0, 1], format="csr") / hs**2
    ddt = sp.diags([-ones, ones], [-1, 1], format="csr") / (2.0 * hs)
    return HermitianOperator(lap), ddt, disc.grid


def _guard_dim(dim1, dim2, cap):
    if dim1 * dim2 > cap:
        raise ResourceError(f"tensor dimension {dim1}x{dim2}={dim1 * dim2} exceeds cap {cap}")


@dataclass(frozen=True)
class TensorModel:
    """All tensor-space pieces for one (spec, disc) pair, assembled once."""

    d2: np.ndarray
    a: np.ndarray
    lap1: sp.csr_matrix
    grid: np.ndarray
    h: np.ndarray
    dh: np.ndarray

    @property
    def inner_dim(self) -> int:
        return self.d2.shape[0]

    @property
    def line_dim(self) -> int:
        return self.grid.size

    def on_line(self, values, inner) -> sp.csr_matrix:
        """diag(values) (x) inner."""
        return kron(sp.diags(values), inner)

    def delta_hat(self) -> sp.csr_matrix:
        """Delta_1 (x) I + I (x) D2**2."""
        eye_line = sp.identity(self.line_dim, format="csr")
        eye_inner = sp.identity(self.inner_dim, format="csr")
        return kron(self.lap1, eye_inner) + kron(eye_line, self.d2 @ self.d2)

    def t1(self, values=None) -> sp.csr_matrix:
        """Symmetrized M N + N M with M = I (x) D2, N = diag(values) (x) A."""
        values = self.h if values is None else values
        m = kron(sp.identity(self.line_dim), self.d2)
        nmat = self.on_line(values, self.a)
        return m @ nmat + nmat @ m

    def t0(self, values=None) -> sp.csr_matrix:
        values = self.h if values is None else values
        return self.on_line(values**2, self.a @ self.a)

    def derivative_term(self) -> sp.csr_matrix:
        return self.on_line(self.dh, self.a)


def tensor_model(spec: ModelSpec, disc: LineDiscretization, dim_cap: int = DEFAULT_DIM_CAP, check_support: bool = True) -> TensorModel:
    profile = spec.scaled_profile
    if check_support:
        disc.check_support(profile)
    _guard_dim(disc.n, spec.inner_dim, dim_cap)
    d2, a = build_inner_pair(spec)
    lap1, _, grid = build_line_operators(disc)
    return TensorModel(d2.dense(), a.dense(), lap1.matrix, grid, profile(grid), profile.derivative(grid))


def assemble_schroedinger_pair(spec: ModelSpec, disc: LineDiscretization, dim_cap: int = DEFAULT_DIM_CAP, check_support: bool = True):
    """(H_minus, H_plus) = Delta_hat + T1 + h**2 A**2 -/+ (dh/dt) A.

    Assembled term by term, never as products of a truncated D_+.
    """
    tm = tensor_model(spec, disc, dim_cap, check_support)
    common = tm.delta_hat() + tm.t1() + tm.t0()
    p = tm.derivative_term()
    return HermitianOperator(common - p), HermitianOperator(common + p)


def assemble_F(spec: ModelSpec, disc: LineDiscretization, dim_cap: int = DEFAULT_DIM_CAP, check_support: bool = True) -> HermitianOperator:
    """F = diag(2 dh_eps(t_k)) (x) A."""
    profile = spec.scaled_profile
    if check_support:
        disc.check_support(profile)
    _guard_dim(disc.n, spec.inner_dim, dim_cap)
    _, a = build_inner_pair(spec)
    return HermitianOperator(kron(sp.diags(2.0 * profile.derivative(disc.grid)), a.dense()))


def inner_path_operator(spec: ModelSpec, r: float, sign: str) -> HermitianOperator:
    """D2 + r h_sign A on the inner space."""
    d2, a = build_inner_pair(spec)
    profile = spec.scaled_profile
    if sign in ("+", "plus", 1):
        level = profile.h_plus
    elif sign in ("-", "minus", -1):
        level = profile.h_minus
    else:
        raise ParameterError(f"sign must be '+' or '-', got {sign!r}")
    return HermitianOperator(d2.dense() + (r * level) * a.dense())


def summability_profile(spec: ModelSpec, q_values, r: float = 1.0, s: float = 1.0) -> dict[float, float]:
    """q -> ||(1 + D2^2)^(-r/2) A (1 + D2^2)^(-s/2)||_q on the truncation.

    A diagnostic only: truncation cannot certify the summability exponent.
    """
    from .operators import psd_power, schatten_norm

    d2, a = build_inner_pair(spec)
    lap2 = HermitianOperator(d2.dense() @ d2.dense()).shifted(1.0)
    left = psd_power(lap2, -0.5 * r).dense()
    right = psd_power(lap2, -0.5 * s).dense()
    core = left @ a.dense() @ right
    return {float(q): schatten_norm(core, q) for q in q_values}


def model_from_dict(data: dict[str, Any]) -> ModelSpec:
    """Build a ModelSpec from its JSON form (already schema-validated)."""
    prof = data.get("profile", {})
    if isinstance(prof, str):
        profile = PROFILE_PRESETS[prof]
    else:
        base = PROFILE_PRESETS[prof["preset"]] if "preset" in prof else Profile()
        fields = {k: v for k, v in prof.items() if k != "preset"}
        profile = replace(base, **fields)

    def gen(d):
        d = dict(d)
        return Generator(d.pop("kind"), d)

    return ModelSpec(int(data["inner_dim"]), gen(data["d2"]), gen(data["a"]), profile, float(data.get("epsilon", 1.0)))


def model_to_dict(spec: ModelSpec) -> dict[str, Any]:
    p = spec.profile
    return {
        "inner_dim": spec.inner_dim,
        "d2": {"kind": spec.d2_gen.kind, **spec.d2_gen.params},
        "a": {"kind": spec.a_gen.kind, **spec.a_gen.params},
        "profile": {"shape": p.shape, "h_minus": p.h_minus, "h_plus": p.h_plus, "K": p.K, "epsilon": p.epsilon},
        "epsilon": spec.epsilon,
    }
