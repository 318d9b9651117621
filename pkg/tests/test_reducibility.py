import numpy as np
import pytest

from hypersde.errors import ConsistencyError, DomainError
from hypersde.paths import sample_wiener
from hypersde.reducibility import (
    check_cp_system,
    check_reducible_scalar,
    compute_N1N2_cp,
    construct_reduction,
    gard_N,
    lift_to_cp,
    n1n2_split_formula,
)


def test_gard_N_examples():
    assert gard_N("0.7*Z", "0.3*Z", (0.2, 1.3)) == pytest.approx(0.0, abs=1e-15)
    assert gard_N("0", "1", (0.5, 2.0)) == 0.0
    assert gard_N("0", "Z^2", (0.3, 1.7)) == pytest.approx(1.7**2)
    assert gard_N("0", "z^2", (0.3, 1.7), kappa=0.0) == 0.0
    with pytest.raises(DomainError):
        gard_N("0", "Z", (0.0, 0.0))


def test_gard_N_time_dependent():
    # g = exp(t) Z, f = 0: N = g * g_t / g^2 = 1
    assert gard_N("0", "exp(t)*Z", (0.4, 1.2)) == pytest.approx(1.0)


def test_scalar_verdicts():
    r = check_reducible_scalar("1.2*Z", "0.4*Z")
    assert r.verdict == "reducible" and r.residuals["dN/dZ"] <= 1e-10
    r = check_reducible_scalar("0", "Z^2")
    assert r.verdict == "not_reducible"
    t, z = r.witnesses["dN/dZ"]
    assert z != 0 and r.residuals["dN/dZ"] == pytest.approx(2 * z)
    assert check_reducible_scalar("0", "1").verdict == "reducible"


def test_scalar_undecided_when_evaluation_fails():
    r = check_reducible_scalar("0", "ln(Z)", z_values=np.linspace(-2, 0.5, 9))
    assert r.verdict == "undecided" and r.n_failed > 0.2 * r.n_points


def test_gbm_reduction():
    t = np.linspace(0, 1, 5)
    z = np.linspace(0.5, 3.0, 7)
    rr = construct_reduction("1.2*Z", "0.4*Z", t, z, anchor=1.0)
    assert np.allclose(rr.b, 1.2 / 0.4 - 0.2, atol=1e-6)
    assert np.allclose(rr.a, 1.0)
    assert np.allclose(rr.h, np.log(z)[None, :] / 0.4, atol=1e-6)


def test_trivial_reductions():
    t = np.linspace(0, 1, 3)
    z = np.linspace(-1, 1, 5)
    rr = construct_reduction("0", "1", t, z, anchor=0.0)
    assert np.allclose(rr.h, z[None, :]) and np.allclose(rr.a, 1) and np.allclose(rr.b, 0)
    rr = construct_reduction("0.7", "1", t, z, anchor=0.0)
    assert np.allclose(rr.b, 0.7)


def test_time_dependent_reduction():
    t = np.linspace(0, 1, 4)
    rr = construct_reduction("0", "exp(t)*Z", t, np.linspace(0.5, 2, 4), anchor=1.0)
    assert np.allclose(rr.a, np.exp(t), rtol=1e-10)


def test_reduction_rejects_irreducible():
    with pytest.raises(ConsistencyError):
        construct_reduction("0", "Z^2", np.linspace(0, 1, 3), np.linspace(0.5, 2, 5), anchor=1.0)


def test_reduction_regresses_onto_dt_and_dw():
    """``h`` applied to an exact GBM path has increments b dt + a dW."""
    b, G = 0.9, 0.5
    g = sample_wiener(1, 1.0, 2**14, 5)
    Zp = np.exp((b - G * G / 2) * g.t + G * g.W[0])
    rr = construct_reduction(f"{b}*Z", f"{G}*Z", [0.0, 1.0], [0.5, 1.0, 2.0], anchor=1.0)
    Y = np.log(Zp) / G  # tabulated h equals ln(Z)/G, checked above
    dY = np.diff(Y)
    A = np.stack([np.full(g.steps, g.dt), g.increments[0]], axis=1)
    coef, *_ = np.linalg.lstsq(A, dY, rcond=None)
    assert coef[0] == pytest.approx(rr.b[0], rel=0.05)
    assert coef[1] == pytest.approx(rr.a[0], rel=0.05)


def test_N1N2_examples():
    assert compute_N1N2_cp(-1, "0", "0", "1", "0", (0.1, 0.4, 0.2)) == (0.0, 0.0)
    assert compute_N1N2_cp(-1, "X", "Y", "1", "0", (0.1, 0.4, 0.2)) == pytest.approx((-1.0, 0.0))
    n1, n2 = compute_N1N2_cp(-1, "0", "0", "X", "Y", (0.1, 0.4, 0.2))
    assert abs(n1) < 1e-14 and abs(n2) < 1e-14


def test_N1N2_matches_scalar_N_on_real_axis():
    # with Y = 0 and real coefficients, Cp and scalar N coincide (same kappa)
    for p in (-1.0, 0.0, 1.0):
        u, v = lift_to_cp("0.3*Z + t", p)
        gu, gv = lift_to_cp("1 + Z^2", p)
        n1, n2 = compute_N1N2_cp(p, u, v, gu, gv, (0.3, 0.8, 0.0), kappa=1.0)
        assert n1 == pytest.approx(gard_N("0.3*Z + t", "1 + Z^2", (0.3, 0.8)))
        assert n2 == pytest.approx(0.0, abs=1e-14)


def test_split_formula_is_only_a_diagnostic():
    pt = (0.3, 0.7, 0.2)
    # agrees with the derived N for a real, state-independent g
    got = n1n2_split_formula(-1, "t", "1", "1 + t", "0", pt)
    want = compute_N1N2_cp(-1, "t", "1", "1 + t", "0", pt, kappa=1.0)
    assert np.allclose(got, want)
    # its second component lacks the -g2 g1_t / |g|^2 term
    got = n1n2_split_formula(-1, "t", "1", "1 + t", "0.5", pt)
    want = compute_N1N2_cp(-1, "t", "1", "1 + t", "0.5", pt, kappa=1.0)
    D = 1.3**2 + 0.25
    assert got[1] - 0.5 * 1.0 / D == pytest.approx(want[1])
    # and disagrees for g = Z
    got = n1n2_split_formula(-1, "0", "0", "X", "Y", pt)
    assert not np.allclose(got, compute_N1N2_cp(-1, "0", "0", "X", "Y", pt, kappa=1.0))


def test_cp_identity_map_reducible():
    r = check_cp_system(-1, "0", "0", "X", "Y")
    assert r.verdict == "reducible" and r.hypercomplexifiable
    assert r.branch.startswith("p != 0")


def test_cp_scheffers_failure():
    r = check_cp_system(-1, "0", "0", "X^2", "0")
    assert r.verdict == "not_reducible" and not r.hypercomplexifiable
    assert r.scheffers["g"].max_residual > 0


@pytest.mark.parametrize("p, convention", [(0.0, "algebra"), (1.0, "algebra"), (-1.0, "identity")])
def test_cp_square_not_reducible(p, convention):
    u, v = lift_to_cp("Z^2", p)
    r = check_cp_system(p, "0", "0", u, v, convention=convention)
    assert r.hypercomplexifiable and r.verdict == "not_reducible"


def test_cp_square_reducible_for_complex_noise():
    # dWW = dW1 + i dW2 squares to zero in C, so the Itô term drops out
    u, v = lift_to_cp("Z^2", -1.0)
    assert check_cp_system(-1.0, "0", "0", u, v).verdict == "reducible"


def test_cp_state_dependent_drift_flagged():
    r = check_cp_system(-1, "X", "Y", "1", "0")
    assert r.drift_depends_on_state and r.verdict == "reducible"


def test_p_zero_branch_checks_y_derivative():
    r = check_cp_system(0.0, "0", "0", "X", "Y")
    assert "dN1/dY" in r.residuals and r.branch.startswith("p = 0")


PAIRS = [("0", "Z"), ("1.2*Z", "0.4*Z"), ("0", "Z^2"), ("0.5", "1 + t*Z"), ("Z - Z^2", "0.3*Z")]


@pytest.mark.parametrize("p", [-1.0, 0.0, 1.0])
@pytest.mark.parametrize("f, g", PAIRS)
def test_cp_verdict_matches_scalar(p, f, g):
    fu, fv = lift_to_cp(f, p)
    gu, gv = lift_to_cp(g, p)
    grid = (np.linspace(0, 1, 4), np.linspace(0.5, 1.5, 4), np.linspace(0.1, 0.6, 4))
    r = check_cp_system(p, fu, fv, gu, gv, grid=grid)
    s = check_reducible_scalar(f, g, kappa=1.0 + p)
    assert r.verdict == s.verdict


def test_report_serializes():
    import json

    r = check_cp_system(-1, "0", "0", "X", "Y", grid=(np.array([0.0]), np.array([1.0]), np.array([0.5])))
    doc = json.loads(json.dumps(r.to_dict()))
    assert doc["verdict"] == "reducible" and doc["p"] == -1
