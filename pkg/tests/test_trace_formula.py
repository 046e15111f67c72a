import math
from dataclasses import replace

import numpy as np
import pytest

from homindex.errors import DegenerateEndpointError, ParameterError
from homindex.model import (
    PROFILE_PRESETS,
    Generator,
    LineDiscretization,
    ModelSpec,
    Profile,
    scalar_model,
)
from homindex.operators import HermitianOperator
from homindex.trace_formula import (
    c_constant,
    check_flow_trace_identity,
    check_xi_integral_identity,
    epsilon_invariance_report,
    extrapolate_sqrt_lambda,
    homological_index_lhs,
    inner_flow_path,
    rhs_integral,
    spectral_flow_crossings,
    telescoping_trap_value,
    witten_index_estimate,
)

DISC = LineDiscretization(40.0, 1024)

# frozen from the eigenvalue evaluation at T=40, n=1024
LHS_FULL_KINK_M1 = 0.70794164101458


def swapped(spec):
    return replace(spec, profile=spec.profile.swapped())


# -- constant -----------------------------------------------------------------


def test_c_constant_values():
    assert c_constant(1) == pytest.approx(0.5, abs=1e-15)
    assert c_constant(2) == pytest.approx(0.75, abs=1e-15)
    assert c_constant(3) == pytest.approx(15.0 / 16.0, abs=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3, 5, 8])
def test_c_constant_quadrature_agrees(m):
    assert c_constant(m, "quadrature") == pytest.approx(c_constant(m), rel=1e-13)


def test_c_constant_rejects_bad_m():
    with pytest.raises(ParameterError):
        c_constant(0)


# -- left side -------------------------------------------------------------------


def test_lhs_zero_for_vanishing_a():
    rep = homological_index_lhs(scalar_model("full-kink", a=0.0), 1, 1.0, DISC)
    assert rep.value == 0.0
    assert rep.error_estimate == 0.0


def test_lhs_frozen_full_kink():
    rep = homological_index_lhs(scalar_model("full-kink"), 1, 1.0, DISC)
    assert rep.value == pytest.approx(LHS_FULL_KINK_M1, abs=1e-12)
    assert rep.error_estimate < 1e-3


def test_lhs_refinement_moves_towards_rhs():
    spec = scalar_model("full-kink")
    rep = homological_index_lhs(spec, 1, 1.0, DISC)
    exact = 1.0 / math.sqrt(2.0)
    assert abs(rep.details["refined_value"] - exact) < abs(rep.value - exact)


def test_lhs_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        homological_index_lhs(scalar_model("full-kink"), 0, 1.0, DISC)
    with pytest.raises(ParameterError):
        homological_index_lhs(scalar_model("full-kink"), 1, -1.0, DISC)


def test_lhs_swap_negates_full_kink():
    # with D2 = 0 the swap maps H_- onto H_+ exactly
    spec = scalar_model("full-kink")
    plain = homological_index_lhs(spec, 1, 1.0, DISC, refine=False).value
    flipped = homological_index_lhs(swapped(spec), 1, 1.0, DISC, refine=False).value
    assert flipped == -plain


def test_telescoping_trap_is_zero():
    value = telescoping_trap_value(scalar_model("full-kink"), 1, 1.0, LineDiscretization(40.0, 256))
    assert value == 0.0


# -- right side --------------------------------------------------------------------


def test_rhs_zero_for_vanishing_a():
    assert rhs_integral(scalar_model("full-kink", a=0.0), 1, 1.0).value == 0.0


def test_rhs_full_kink_closed_forms():
    spec = scalar_model("full-kink")
    assert rhs_integral(spec, 1, 1.0).value == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)
    assert rhs_integral(spec, 2, 1.0).value == pytest.approx(5.0 / (4.0 * math.sqrt(2.0)), abs=1e-12)


def test_rhs_half_kink_closed_form():
    assert rhs_integral(scalar_model("half-kink"), 1, 1.0).value == pytest.approx(1.0 / (2.0 * math.sqrt(2.0)), abs=1e-12)


def test_rhs_swap_negates_exactly():
    spec = ModelSpec(3, Generator("random", {"seed": 1}), Generator("random", {"seed": 2}), PROFILE_PRESETS["half-kink"])
    assert rhs_integral(swapped(spec), 1, 0.5).value == pytest.approx(-rhs_integral(spec, 1, 0.5).value, rel=1e-12)


def test_rhs_methods_agree():
    spec = ModelSpec(3, Generator("random", {"seed": 4}), Generator("random", {"seed": 5}), PROFILE_PRESETS["full-kink"])
    a = rhs_integral(spec, 2, 0.7).value
    b = rhs_integral(spec, 2, 0.7, method="quadrature").value
    assert b == pytest.approx(a, rel=1e-8)


def test_lhs_matches_rhs_matrix_model():
    spec = ModelSpec(2, Generator("matrix", {"entries": [[0.5, 0.0], [0.0, -0.3]]}),
                     Generator("matrix", {"entries": [[1.0, 0.2], [0.2, 0.5]]}), PROFILE_PRESETS["full-kink"])
    disc = LineDiscretization(40.0, 1024)
    lhs = homological_index_lhs(spec, 1, 1.0, disc)
    rhs = rhs_integral(spec, 1, 1.0)
    assert abs(lhs.value - rhs.value) <= 3 * lhs.error_estimate + 1e-3


# -- Witten index ---------------------------------------------------------------------


def test_witten_full_kink_is_one():
    values, est = witten_index_estimate(scalar_model("full-kink"), 1)
    assert est == pytest.approx(1.0, abs=1e-5)
    assert np.all(np.diff(values) > 0)


def test_witten_half_kink_is_one_half():
    _, est = witten_index_estimate(scalar_model("half-kink"), 1)
    assert est == pytest.approx(0.5, abs=1e-5)


def test_witten_zero_a():
    values, est = witten_index_estimate(scalar_model("full-kink", a=0.0), 1)
    assert est == 0.0 and not np.any(values)


def test_witten_rejects_short_or_ascending_grid():
    spec = scalar_model("full-kink")
    with pytest.raises(ParameterError):
        witten_index_estimate(spec, 1, [1e-3, 5e-4])
    with pytest.raises(ParameterError):
        witten_index_estimate(spec, 1, [1e-4, 5e-4, 1e-3])
    with pytest.raises(ParameterError):
        witten_index_estimate(spec, 1, side="lhs")


def test_sqrt_extrapolation_exact_for_quadratic():
    lams = [0.04, 0.01, 0.0025, 0.0004]
    values = [2.0 - 3.0 * math.sqrt(x) + 0.5 * x for x in lams]
    assert extrapolate_sqrt_lambda(lams, values) == pytest.approx(2.0, abs=1e-12)


# -- spectral flow ---------------------------------------------------------------------


def test_spectral_flow_constant_path():
    op = HermitianOperator(np.diag([-1.0, 2.0]))
    assert spectral_flow_crossings(lambda r: op) == 0


def test_spectral_flow_linear_crossing():
    flow, crossings = spectral_flow_crossings(lambda r: HermitianOperator(np.array([[2 * r - 1.0]])), return_crossings=True)
    assert flow == 1
    assert crossings[0][0] == pytest.approx(0.5, abs=1e-9)


def test_spectral_flow_downward_crossing():
    assert spectral_flow_crossings(lambda r: HermitianOperator(np.array([[1.0 - 3 * r]]))) == -1


def test_spectral_flow_degenerate_endpoint():
    with pytest.raises(DegenerateEndpointError):
        spectral_flow_crossings(lambda r: HermitianOperator(np.array([[r]])))


def test_inner_flow_path_scalar():
    spec = scalar_model("full-kink", d2=-0.5)
    assert spectral_flow_crossings(inner_flow_path(spec, "+")) == 1
    assert spectral_flow_crossings(inner_flow_path(spec, "-")) == 0


# -- auxiliary identities ------------------------------------------------------------


def test_xi_identity_scalar():
    assert check_xi_integral_identity(np.array([[0.0]]), 1.0, 1) < 1e-13


@pytest.mark.parametrize("m", [1, 2, 3])
def test_xi_identity_random(m):
    rng = np.random.default_rng(m)
    x = rng.standard_normal((4, 4))
    assert check_xi_integral_identity(x, 0.5, m) < 1e-11


def test_xi_identity_rejects_bad_lambda():
    with pytest.raises(ParameterError):
        check_xi_integral_identity(np.eye(2), 0.0, 1)


def test_flow_trace_identity_scalar():
    spec = scalar_model("full-kink", d2=0.3)
    gap = check_flow_trace_identity(spec, LineDiscretization(40.0, 1024), 1, 1.0, l=1, r=0.5)
    assert gap < 1e-3


def test_flow_trace_identity_min_n_guard():
    with pytest.raises(ParameterError):
        check_flow_trace_identity(scalar_model("full-kink"), LineDiscretization(40.0, 256), 1, 1.0)


# -- epsilon invariance -------------------------------------------------------------


def test_epsilon_report_zero_a():
    rep = epsilon_invariance_report(scalar_model("full-kink", a=0.0), 1, 1.0, [1.0, 0.5], LineDiscretization(80.0, 512))
    assert rep["spread"] == 0.0
    assert not np.any(rep["values"])


def test_epsilon_report_small_spread():
    rep = epsilon_invariance_report(scalar_model("full-kink"), 1, 1.0, [1.0, 0.5], LineDiscretization(80.0, 2048, safety_factor=2.0))
    assert rep["spread"] < 1e-3


def test_epsilon_report_rejects_empty():
    with pytest.raises(ParameterError):
        epsilon_invariance_report(scalar_model("full-kink"), 1, 1.0, [], DISC)


def test_lhs_zero_for_constant_profile():
    spec = scalar_model(Profile("tanh-clamped", 0.0, 0.0), d2=0.0, a=1.0)
    assert homological_index_lhs(spec, 1, 1.0, DISC, refine=False).value == 0.0
