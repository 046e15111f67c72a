import math

import numpy as np
import pytest

from homindex.errors import ConfigurationError, DiscretizationError, ResourceError
from homindex.model import (
    PROFILE_PRESETS,
    Generator,
    LineDiscretization,
    ModelSpec,
    Profile,
    assemble_F,
    assemble_schroedinger_pair,
    build_inner_pair,
    build_line_operators,
    inner_path_operator,
    model_from_dict,
    model_to_dict,
    scalar_model,
    smooth_step,
    summability_profile,
    tensor_model,
)
from homindex.operators import fractional_resolvent_power, schatten_norm

SHIPPED = ["tanh-clamped", "half-kink", "smoothed-step", "full-kink"]


# -- profiles ------------------------------------------------------------------


@pytest.mark.parametrize("name", SHIPPED)
def test_profile_constant_tails(name):
    prof = PROFILE_PRESETS[name]
    t = np.linspace(prof.cutoff, 5 * prof.cutoff, 200)
    assert np.all(prof(t) == prof.h_plus)
    assert np.all(prof(-t) == prof.h_minus)


@pytest.mark.parametrize("name", SHIPPED)
def test_profile_derivative_compact_support(name):
    prof = PROFILE_PRESETS[name]
    t = np.linspace(prof.cutoff, 5 * prof.cutoff, 200)
    assert np.all(prof.derivative(t) == 0.0)
    assert np.all(prof.derivative(-t) == 0.0)


@pytest.mark.parametrize("name", SHIPPED)
def test_profile_derivative_matches_difference_quotient(name):
    prof = PROFILE_PRESETS[name]
    t = np.linspace(-prof.cutoff, prof.cutoff, 41)
    step = 1e-5
    numeric = (prof(t + step) - prof(t - step)) / (2 * step)
    np.testing.assert_allclose(prof.derivative(t), numeric, atol=1e-8)


@pytest.mark.parametrize("name", SHIPPED)
def test_profile_derivative_integrates_to_jump(name):
    prof = PROFILE_PRESETS[name]
    t = np.linspace(-prof.cutoff, prof.cutoff, 20001)
    assert np.trapezoid(prof.derivative(t), t) == pytest.approx(prof.h_plus - prof.h_minus, abs=1e-8)


def test_rescaling_pointwise():
    prof = PROFILE_PRESETS["full-kink"]
    eps = 0.25
    scaled = prof.rescaled(eps)
    t = np.linspace(-40, 40, 101)
    np.testing.assert_array_equal(scaled(t), prof(eps * t))
    np.testing.assert_allclose(scaled.derivative(t), eps * prof.derivative(eps * t), rtol=1e-15)
    assert scaled.cutoff == pytest.approx(prof.cutoff / eps)
    assert (scaled.h_minus, scaled.h_plus) == (prof.h_minus, prof.h_plus)


def test_smooth_step_endpoints():
    assert smooth_step(np.array([0.0]))[0] == 0.0
    assert smooth_step(np.array([1.0]))[0] == 1.0
    assert smooth_step(np.array([0.5]))[0] == pytest.approx(0.5)


def test_profile_rejects_unknown_shape():
    with pytest.raises(ConfigurationError):
        Profile(shape="sawtooth")


# -- inner pair ------------------------------------------------------------------


def test_scalar_inner_pair():
    d2, a = build_inner_pair(scalar_model("half-kink"))
    np.testing.assert_array_equal(d2.dense(), [[0.0]])
    np.testing.assert_array_equal(a.dense(), [[1.0]])


def test_diagonal_linear_generator():
    spec = ModelSpec(5, Generator("diagonal-linear", {"k_max": 2}), Generator("banded", {"diag": 0.0, "off": 1.0}))
    d2, a = build_inner_pair(spec)
    np.testing.assert_array_equal(d2.dense(), np.diag([-2.0, -1.0, 0.0, 1.0, 2.0]))
    assert a.dense()[0, 1] == 1.0 and a.dense()[0, 2] == 0.0


def test_harmonic_generator():
    spec = ModelSpec(3, Generator("harmonic"), Generator("random", {"seed": 1}))
    d2, _ = build_inner_pair(spec)
    np.testing.assert_array_equal(np.diag(d2.dense()), [0.5, 1.5, 2.5])


def test_random_generator_reproducible():
    spec = ModelSpec(6, Generator("random", {"seed": 5}), Generator("random", {"seed": 9, "complex": True}))
    first = build_inner_pair(spec)
    second = build_inner_pair(spec)
    for x, y in zip(first, second):
        np.testing.assert_array_equal(x.dense(), y.dense())
    assert np.allclose(first[1].dense(), first[1].dense().conj().T)


def test_conjugation_shift_is_unitarily_equivalent():
    spec = ModelSpec(6, Generator("random", {"seed": 2}), Generator("conjugation-shift", {"seed": 3}))
    d2, a = build_inner_pair(spec)
    np.testing.assert_allclose(np.linalg.eigvalsh(d2.dense() + a.dense()), np.linalg.eigvalsh(d2.dense()), atol=1e-12)


def test_unknown_generator_rejected():
    with pytest.raises(ConfigurationError):
        build_inner_pair(ModelSpec(2, Generator("lattice"), Generator("scalar")))


def test_scalar_generator_requires_dim_one():
    with pytest.raises(ConfigurationError):
        build_inner_pair(ModelSpec(2, Generator("scalar"), Generator("random")))


def test_explicit_matrix_generator_shape_checked():
    with pytest.raises(ConfigurationError):
        build_inner_pair(ModelSpec(2, Generator("matrix", {"entries": [[1.0]]}), Generator("random")))


# -- line operators -----------------------------------------------------------------


def test_line_operators_small_example():
    lap, ddt, grid = build_line_operators(LineDiscretization(2.0, 3))
    np.testing.assert_array_equal(lap.dense(), [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])
    np.testing.assert_array_equal(grid, [-1.0, 0.0, 1.0])
    assert ddt[0, 1] == pytest.approx(0.5)


def test_derivative_exactly_antisymmetric():
    _, ddt, _ = build_line_operators(LineDiscretization(5.0, 40))
    assert abs(ddt + ddt.T).max() == 0.0


def test_lowest_dirichlet_eigenvalue():
    lap, _, _ = build_line_operators(LineDiscretization(2.0, 512))
    low = lap.eigenvalues()[0]
    assert low == pytest.approx((math.pi / 4.0) ** 2, rel=0.01)


def test_discretization_validation():
    with pytest.raises(DiscretizationError):
        LineDiscretization(-1.0, 10)
    with pytest.raises(DiscretizationError):
        LineDiscretization(1.0, 2)
    with pytest.raises(DiscretizationError):
        LineDiscretization(1.0, 10, bc="periodic")


def test_refinement_keeps_coarse_points():
    disc = LineDiscretization(10.0, 9)
    fine = disc.refined()
    assert fine.spacing == pytest.approx(disc.spacing / 2)
    np.testing.assert_allclose(fine.grid[1::2], disc.grid)


def test_support_guard():
    spec = scalar_model("full-kink")
    with pytest.raises(DiscretizationError):
        assemble_schroedinger_pair(spec, LineDiscretization(20.0, 64))


# -- assembly ---------------------------------------------------------------------------


def test_zero_a_gives_equal_pair():
    spec = scalar_model("full-kink", d2=0.3, a=0.0)
    minus, plus = assemble_schroedinger_pair(spec, LineDiscretization(40.0, 64))
    assert (minus.matrix != plus.matrix).nnz == 0
    lap, _, _ = build_line_operators(LineDiscretization(40.0, 64))
    np.testing.assert_allclose(minus.dense(), lap.dense() + 0.09 * np.eye(64))


def test_scalar_pair_hand_expansion():
    spec = scalar_model("full-kink")
    disc = LineDiscretization(40.0, 64)
    minus, plus = assemble_schroedinger_pair(spec, disc)
    lap, _, grid = build_line_operators(disc)
    h = spec.scaled_profile(grid)
    dh = spec.scaled_profile.derivative(grid)
    np.testing.assert_allclose(minus.dense(), lap.dense() + np.diag(h**2 - dh), atol=1e-14)
    np.testing.assert_allclose(plus.dense(), lap.dense() + np.diag(h**2 + dh), atol=1e-14)


def test_difference_equals_F():
    spec = ModelSpec(3, Generator("random", {"seed": 1}), Generator("random", {"seed": 2}), PROFILE_PRESETS["full-kink"])
    disc = LineDiscretization(40.0, 128)
    minus, plus = assemble_schroedinger_pair(spec, disc)
    f = assemble_F(spec, disc)
    diff = (plus.matrix - minus.matrix).toarray()
    # shared terms cancel up to one rounding of the diagonal
    scale = abs(minus.matrix).max()
    assert np.max(np.abs(diff - f.dense())) <= 4 * np.finfo(float).eps * scale


def test_F_vanishes_for_constant_profile():
    spec = scalar_model(Profile("tanh-clamped", 0.4, 0.4))
    f = assemble_F(spec, LineDiscretization(40.0, 64))
    assert not np.any(f.dense())


def test_F_supported_on_cutoff():
    spec = scalar_model("half-kink")
    disc = LineDiscretization(40.0, 256)
    diag = assemble_F(spec, disc).matrix.diagonal()
    assert np.all(diag[np.abs(disc.grid) >= spec.scaled_profile.cutoff] == 0)


def test_F_trace_norm_uniform_in_epsilon():
    spec = scalar_model("full-kink")
    disc = LineDiscretization(80.0, 1024, safety_factor=2.0)
    values = []
    for eps in (1.0, 0.5, 0.25):
        tm = tensor_model(spec.with_epsilon(eps), disc)
        f = assemble_F(spec.with_epsilon(eps), disc).dense()
        resolvent = fractional_resolvent_power(tm.delta_hat().toarray(), 1.0, 2.0).dense()
        values.append(schatten_norm(f @ resolvent, 1))
    assert max(values) <= 1.5 * min(values)


def test_dimension_cap():
    spec = ModelSpec(4, Generator("harmonic"), Generator("random"), PROFILE_PRESETS["full-kink"])
    with pytest.raises(ResourceError):
        assemble_schroedinger_pair(spec, LineDiscretization(40.0, 1000), dim_cap=2000)


# -- inner path -------------------------------------------------------------------------


def test_inner_path_endpoints():
    spec = ModelSpec(3, Generator("harmonic"), Generator("random", {"seed": 4}), PROFILE_PRESETS["full-kink"])
    d2, a = build_inner_pair(spec)
    np.testing.assert_array_equal(inner_path_operator(spec, 0.0, "+").dense(), d2.dense())
    np.testing.assert_allclose(inner_path_operator(spec, 1.0, "+").dense(), d2.dense() + a.dense())
    np.testing.assert_allclose(inner_path_operator(spec, 1.0, "-").dense(), d2.dense() - a.dense())


def test_inner_path_scalar_half_kink():
    assert inner_path_operator(scalar_model("half-kink"), 0.5, "+").dense()[0, 0] == 0.5


# -- diagnostics and serialization ----------------------------------------------------------


def test_summability_profile_monotone_in_q():
    spec = ModelSpec(9, Generator("diagonal-linear", {"k_max": 4}), Generator("banded", {"off": 1.0}))
    prof = summability_profile(spec, [1, 2, 4, np.inf])
    values = [prof[q] for q in sorted(prof)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_model_dict_round_trip():
    spec = ModelSpec(2, Generator("random", {"seed": 3}), Generator("banded", {"off": 0.5}), PROFILE_PRESETS["smoothed-step"], 0.5)
    assert model_from_dict(model_to_dict(spec)) == spec
