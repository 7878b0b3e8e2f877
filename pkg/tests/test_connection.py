import numpy as np
import pytest

from qkt.errors import DimensionError, NotQKTError
from qkt.qkt_connection import (
    auxiliary_one_forms,
    build_qkt,
    build_qkt_dim4,
    classify,
    compute_K,
    existence_residual,
    nijenhuis_via_connection,
    sp1_forms,
    structure_invariant_residuals,
    torsion_one_form_spread,
    torsion_one_forms,
)
from qkt.quaternionic import (
    CYCLIC,
    QuaternionicHermitianData,
    build_standard_hypercomplex,
    j_apply_oneform,
    nijenhuis_bracket,
    rotated_hypercomplex,
)
from qkt.tensor_core import (
    CoordinatePatch,
    FDScheme,
    FormField,
    TensorField,
    constant_form,
    covariant_derivative_array,
    levi_civita,
    wedge_arrays,
)

SCHEME = FDScheme()


def flat_patch(n):
    dim = 4 * n
    eye = np.eye(dim)
    return CoordinatePatch(n=n, lo=-0.6 * np.ones(dim), hi=0.6 * np.ones(dim),
                           metric=lambda p: eye)


def conformal_data(n=2):
    dim = 4 * n
    metric = lambda p: np.exp(p[0]) * np.eye(dim)
    patch = CoordinatePatch(n=n, lo=-0.6 * np.ones(dim), hi=0.6 * np.ones(dim),
                            metric=metric)
    return QuaternionicHermitianData(patch, build_standard_hypercomplex(n))


@pytest.fixture(scope="module")
def conformal_struct():
    return build_qkt(conformal_data(), SCHEME)


@pytest.fixture(scope="module")
def flat_struct_n2():
    data = QuaternionicHermitianData(flat_patch(2), build_standard_hypercomplex(2))
    return build_qkt(data, SCHEME)


@pytest.fixture(scope="module")
def sine_dim4():
    t_form = FormField(1, lambda q: np.array([np.sin(q[1]), 0.0, 0.0, 0.0]))
    return build_qkt_dim4(flat_patch(1), build_standard_hypercomplex(1), t_form, SCHEME)


POINT8 = np.array([0.05, -0.1, 0.2, 0.0, 0.11, -0.02, 0.3, -0.2])
POINT4 = np.array([0.03, -0.12, 0.2, 0.07])
DX1_8 = np.eye(8)[0]


# ---------------------------------------------------------------------------
# K and the existence condition
# ---------------------------------------------------------------------------

def test_compute_K_flat_vanishes(flat_struct_n2):
    data = flat_struct_n2.data
    for a in range(3):
        assert np.max(np.abs(compute_K(data, a, np.zeros(8), SCHEME))) <= 1e-12


def test_compute_K_conformal_value():
    data = conformal_data()
    J = data.hyper.matrices(POINT8)
    for a, b, c in CYCLIC:
        got = compute_K(data, a, POINT8, SCHEME)
        expected = -2.0 * j_apply_oneform(J[b], DX1_8)
        assert np.max(np.abs(got - expected)) <= 1e-8


def test_compute_K_scales_with_lee_data():
    # doubling the exponent of the conformal factor doubles d ln f and K
    dim = 8
    one = conformal_data()
    two = QuaternionicHermitianData(
        CoordinatePatch(n=2, lo=-0.6 * np.ones(dim), hi=0.6 * np.ones(dim),
                        metric=lambda p: np.exp(2.0 * p[0]) * np.eye(dim)),
        build_standard_hypercomplex(2))
    k_one = compute_K(one, 0, POINT8, SCHEME)
    k_two = compute_K(two, 0, POINT8, SCHEME)
    assert np.max(np.abs(k_two - 2.0 * k_one)) <= 1e-7


def test_compute_K_rejects_dim4():
    data = QuaternionicHermitianData(flat_patch(1), build_standard_hypercomplex(1))
    with pytest.raises(DimensionError):
        compute_K(data, 0, np.zeros(4), SCHEME)


def test_existence_residual_flat_and_conformal():
    flat = QuaternionicHermitianData(flat_patch(2), build_standard_hypercomplex(2))
    assert existence_residual(flat, np.zeros(8), SCHEME) <= 1e-10
    assert existence_residual(conformal_data(), POINT8, SCHEME) <= 1e-5


def test_existence_residual_detects_incompatible_j2():
    data = QuaternionicHermitianData(
        conformal_data().patch, rotated_hypercomplex(2, 5.0))
    assert existence_residual(data, POINT8, SCHEME) > 1e-2


def test_existence_residual_rejects_dim4():
    data = QuaternionicHermitianData(flat_patch(1), build_standard_hypercomplex(1))
    with pytest.raises(DimensionError):
        existence_residual(data, np.zeros(4), SCHEME)


# ---------------------------------------------------------------------------
# the generic build
# ---------------------------------------------------------------------------

def test_flat_build_is_levi_civita(flat_struct_n2):
    struct = flat_struct_n2
    p = np.full(8, 0.1)
    assert np.max(np.abs(struct.torsion(p))) == 0.0
    assert np.max(np.abs(struct.connection(p))) == 0.0
    omegas, residual = struct.caches["omega_bundle"](p)
    assert np.max(np.abs(omegas)) <= 1e-12
    assert residual <= 1e-12


def test_build_rejects_tilted_structure():
    data = QuaternionicHermitianData(
        conformal_data().patch, rotated_hypercomplex(2, 5.0))
    with pytest.raises(NotQKTError) as err:
        build_qkt(data, SCHEME, check_points=[POINT8])
    assert err.value.residual > 1e-2
    assert err.value.details["eq4"] > 1e-2


def test_build_needs_n_at_least_two():
    data = QuaternionicHermitianData(flat_patch(1), build_standard_hypercomplex(1))
    with pytest.raises(DimensionError):
        build_qkt(data, SCHEME)


def test_conformal_torsion_matches_transport_formula(conformal_struct):
    struct = conformal_struct
    bundle = struct.bundle_at(POINT8)
    J = bundle["J"]
    fval = float(np.exp(POINT8[0]))
    df = fval * DX1_8
    expected = np.zeros((8, 8, 8))
    for a in range(3):
        expected += wedge_arrays(j_apply_oneform(J[a], df), np.eye(8) @ J[a])
    assert np.max(np.abs(struct.torsion(POINT8) - expected)) <= 1e-5
    assert bundle["alpha_agreement"] <= 1e-5


def test_structure_invariants(conformal_struct):
    inv = structure_invariant_residuals(conformal_struct, POINT8)
    assert inv["torsion_skew"] <= 1e-10
    assert inv["metricity"] <= 1e-5
    assert inv["torsion_purity"] <= 1e-5
    assert inv["eq1"] <= 1e-5
    assert inv["quaternionic"] <= 1e-10


def test_torsion_12_raised_consistently(conformal_struct):
    struct = conformal_struct
    T3 = struct.torsion(POINT8)
    T12 = struct.torsion_12_at(POINT8)
    g = struct.metric_at(POINT8)
    assert np.max(np.abs(np.einsum("kij,km->ijm", T12, g) - T3)) <= 1e-12


def test_torsion_recovered_from_connection_difference(conformal_struct):
    # g(2 (nabla_X - nabla^g_X) Y, Z) reproduces the stored 3-form
    struct = conformal_struct
    gamma = struct.connection(POINT8)
    gamma_g = levi_civita(struct.data.patch.metric, POINT8, SCHEME)
    g = struct.metric_at(POINT8)
    recovered = 2.0 * np.einsum("lij,lm->ijm", gamma - gamma_g, g)
    assert np.max(np.abs(recovered - struct.torsion(POINT8))) <= 1e-10


def test_dim4_lee_identities_with_nonzero_theta():
    # theta_a = J_b theta_{a,c} = -J_c theta_{a,b} on a dimension-4 model
    # whose Lee forms do not vanish (conformally flat metric)
    from qkt.quaternionic import cross_lee_form, lee_form
    dim = 4
    metric = lambda p: np.exp(p[0]) * np.eye(dim)
    patch = CoordinatePatch(n=1, lo=-0.6 * np.ones(dim), hi=0.6 * np.ones(dim),
                            metric=metric)
    data = QuaternionicHermitianData(patch, build_standard_hypercomplex(1))
    p = POINT4
    J = data.hyper.matrices(p)
    for a, b, c in CYCLIC:
        theta = lee_form(data, a, p, SCHEME)
        assert np.max(np.abs(theta)) > 0.5  # genuinely nonzero
        via_c = j_apply_oneform(J[b], cross_lee_form(data, a, c, p, SCHEME))
        via_b = -j_apply_oneform(J[c], cross_lee_form(data, a, b, p, SCHEME))
        assert np.max(np.abs(theta - via_c)) <= 1e-5
        assert np.max(np.abs(theta - via_b)) <= 1e-5


# ---------------------------------------------------------------------------
# dimension 4
# ---------------------------------------------------------------------------

def test_dim4_zero_torsion_is_levi_civita():
    struct = build_qkt_dim4(flat_patch(1), build_standard_hypercomplex(1),
                            constant_form(1, np.zeros(4)), SCHEME)
    assert np.max(np.abs(struct.torsion(POINT4))) == 0.0
    assert np.max(np.abs(struct.connection(POINT4))) == 0.0


def test_dim4_constant_torsion_star():
    struct = build_qkt_dim4(flat_patch(1), build_standard_hypercomplex(1),
                            constant_form(1, np.array([0.5, 0, 0, 0])), SCHEME)
    dx = np.eye(4)
    expected = 0.5 * wedge_arrays(wedge_arrays(dx[1], dx[2]), dx[3])
    assert np.max(np.abs(struct.torsion(POINT4) - expected)) <= 1e-14
    # closed torsion
    from qkt.tensor_core import exterior_derivative
    dT = exterior_derivative(struct.torsion, SCHEME)(POINT4)
    assert np.max(np.abs(dT)) <= 1e-12


def test_dim4_recovers_input_one_form(sine_dim4):
    t1, t2, t3, t = torsion_one_forms(sine_dim4, POINT4)
    expected = np.array([np.sin(POINT4[1]), 0.0, 0.0, 0.0])
    assert np.max(np.abs(t - expected)) <= 1e-10
    # each t_a ^ F_a reproduces the torsion
    g = sine_dim4.metric_at(POINT4)
    for a, t_a in enumerate((t1, t2, t3)):
        F = g @ sine_dim4.j_at(a, POINT4)
        assert np.max(np.abs(sine_dim4.torsion(POINT4) - wedge_arrays(t_a, F))) <= 1e-10


def test_dim4_requires_n_one():
    with pytest.raises(DimensionError):
        build_qkt_dim4(flat_patch(2), build_standard_hypercomplex(2),
                       constant_form(1, np.zeros(8)), SCHEME)


def test_dim4_star_dT_equals_minus_delta_t(sine_dim4):
    from qkt.tensor_core import codifferential, exterior_derivative, hodge_star_array
    struct = sine_dim4
    # t = sin(x1) dx1 makes both sides nonzero; rebuild with that form
    t_form = FormField(1, lambda q: np.array([np.sin(q[0]), 0.0, 0.0, 0.0]))
    nontrivial = build_qkt_dim4(flat_patch(1), build_standard_hypercomplex(1),
                                t_form, SCHEME)
    for built, form in ((struct, struct.torsion_one_form_field()), (nontrivial, t_form)):
        p = POINT4
        dT = exterior_derivative(built.torsion, SCHEME)(p)
        star_dT = hodge_star_array(dT, built.metric_at(p), built.patch.orientation)
        delta_t = codifferential(form, built.data.patch.metric, p, SCHEME)
        assert abs(float(star_dT) + float(delta_t)) <= 1e-5
    delta = codifferential(t_form, nontrivial.data.patch.metric, POINT4, SCHEME)
    assert abs(float(delta) + np.cos(POINT4[0])) <= 1e-8  # genuinely nonzero case


# ---------------------------------------------------------------------------
# derived one-forms
# ---------------------------------------------------------------------------

def test_torsion_one_forms_flat(flat_struct_n2):
    t1, t2, t3, t = torsion_one_forms(flat_struct_n2, np.zeros(8))
    for value in (t1, t2, t3, t):
        assert np.max(np.abs(value)) == 0.0


def test_torsion_one_form_conformal_value(conformal_struct):
    *_, t = torsion_one_forms(conformal_struct, POINT8)
    assert np.max(np.abs(t + 5.0 * DX1_8)) <= 1e-5


def test_common_one_form_spread(conformal_struct, sine_dim4):
    assert torsion_one_form_spread(conformal_struct, POINT8) <= 1e-8
    assert torsion_one_form_spread(sine_dim4, POINT4) <= 1e-8


def test_sp1_forms_flat(flat_struct_n2):
    record = sp1_forms(flat_struct_n2, np.zeros(8))
    assert np.max(np.abs(record.omegas)) <= 1e-12
    assert record.eq1_residual <= 1e-12
    assert record.c7_residual <= 1e-12


def test_sp1_forms_conformal(conformal_struct):
    record = sp1_forms(conformal_struct, POINT8)
    J = conformal_struct.data.hyper.matrices(POINT8)
    for a in range(3):
        expected = -j_apply_oneform(J[a], DX1_8)
        assert np.max(np.abs(record.omegas[a] - expected)) <= 1e-5
    assert record.eq1_residual <= 1e-5
    assert record.c7_residual <= 1e-5


def test_auxiliary_forms_relations(conformal_struct):
    # A_a = J_b(theta_c - theta_b) and (n-1) J_b C_a = theta_a - J_b theta_{a,c}
    struct = conformal_struct
    aux = auxiliary_one_forms(struct, POINT8)
    bundle = struct.bundle_at(POINT8)
    theta, cross, J = bundle["theta"], bundle["theta_cross"], bundle["J"]
    for a, b, c in CYCLIC:
        assert np.max(np.abs(
            aux.A[a] - j_apply_oneform(J[b], theta[c] - theta[b]))) <= 1e-5
        lhs = (struct.n - 1.0) * j_apply_oneform(J[b], aux.C[a])
        rhs = theta[a] - j_apply_oneform(J[b], cross[a, c])
        assert np.max(np.abs(lhs - rhs)) <= 1e-5
    assert aux.K is not None


# ---------------------------------------------------------------------------
# Nijenhuis reconstruction and classification
# ---------------------------------------------------------------------------

def test_nijenhuis_via_connection_flat(flat_struct_n2):
    for a in range(3):
        assert np.max(np.abs(
            nijenhuis_via_connection(flat_struct_n2, a, np.zeros(8)))) <= 1e-12


def test_nijenhuis_reconstruction_matches_bracket(conformal_struct, sine_dim4):
    for struct, p in ((conformal_struct, POINT8), (sine_dim4, POINT4)):
        for a in range(3):
            rebuilt = nijenhuis_via_connection(struct, a, p)
            bracket = nijenhuis_bracket(struct.data, a, p, struct.scheme)
            assert np.max(np.abs(rebuilt - bracket)) <= 1e-5


def test_classify_flat(flat_struct_n2):
    points = [np.zeros(8), np.full(8, 0.2)]
    record = classify(flat_struct_n2, points)
    assert record.is_hkt and record.is_integrable
    assert record.is_parallel_torsion and record.is_strong
    assert record.dT_type22_residual <= 1e-10


def test_classify_conformal(conformal_struct):
    record = classify(conformal_struct, [POINT8])
    assert record.is_integrable
    assert record.is_hkt is False
    assert record.hkt_residual > 1e-3


def test_classify_dim4_constant_torsion():
    struct = build_qkt_dim4(flat_patch(1), build_standard_hypercomplex(1),
                            constant_form(1, np.array([0.5, 0, 0, 0])), SCHEME)
    record = classify(struct, [POINT4])
    assert record.is_parallel_torsion and record.is_strong
    assert record.is_hkt is None
    # parallel torsion <=> the 1-form is Levi-Civita parallel (here: constant)
    gamma_g = levi_civita(struct.data.patch.metric, POINT4, SCHEME)
    nabla_t = covariant_derivative_array(
        gamma_g, TensorField("d", struct.torsion_one_form_field().func, nested=True),
        POINT4, SCHEME)
    assert np.max(np.abs(nabla_t)) <= 1e-8
