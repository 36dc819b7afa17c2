import math

import numpy as np
import pytest

from isomonodromy.model import SystemPair
from isomonodromy.frobenius import build_fuchsian
from isomonodromy.laplace import SingularF1, f1
from isomonodromy.deformation import (
    DeformationState,
    NotReducible,
    StepFailure,
    integrability_residual,
    jordan_reduce_Bj,
    omega,
    radial_family,
    schlesinger_rhs,
    transport,
    transport_along,
    vanishing_check,
)


def test_omega_diagonal_is_zero():
    sp = SystemPair(np.diag([0.5, -0.3]), [0.0, 1.0])
    assert np.max(np.abs(omega(sp, 0))) == 0.0


def test_omega_matches_commutator_with_E_k(system_2x2):
    """omega_k must equal [F_1, E_k] computed by matrix algebra."""
    F1 = f1(system_2x2)
    n = system_2x2.n
    for k in range(n):
        Ek = np.zeros((n, n))
        Ek[k, k] = 1.0
        assert np.allclose(omega(system_2x2, k), F1 @ Ek - Ek @ F1)
    # worked entry values: (omega_1)_{12} = A_12/(u_1-u_2) = -2,
    # (omega_1)_{21} = -A_21/(u_2-u_1) = -3
    om = omega(system_2x2, 0)
    assert om[0, 1] == pytest.approx(-2.0)
    assert om[1, 0] == pytest.approx(-3.0)


def test_omega_sum_vanishes(system_2x2):
    total = sum(omega(system_2x2, k) for k in range(2))
    assert np.max(np.abs(total)) < 1e-14


def test_omega_rejects_violated_vanishing():
    A = np.array([[0.2, 0.5], [0.1, 0.9]], dtype=complex)
    with pytest.raises(SingularF1):
        omega(SystemPair(A, [0.0, 0.0]), 0)


def test_schlesinger_rhs_diagonal_zero():
    fs = build_fuchsian(SystemPair(np.diag([0.5, -0.3]), [0.0, 1.0]))
    derivs, cons = schlesinger_rhs(fs)
    assert all(np.max(np.abs(D)) < 1e-15 for D in derivs.values())
    assert cons < 1e-15


def test_schlesinger_rhs_consistency_identity():
    rng = np.random.default_rng(9)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0, 0.6 + 0.9j]))
    _, cons = schlesinger_rhs(fs)
    assert cons < 1e-12


def test_schlesinger_rhs_finite_difference_oracle(system_2x2):
    """d B_2/d u_1 compared against a short-transport finite difference."""
    fs = build_fuchsian(system_2x2)
    derivs, _ = schlesinger_rhs(fs)
    h = 1e-5
    states = []
    for s in (+h, -h):
        u = system_2x2.u.copy()
        u[0] += s
        st = transport(DeformationState(u=system_2x2.u, A=system_2x2.A.copy()),
                       u, tol=1e-13)
        states.append(build_fuchsian(st.system()))
    fd = (states[0].B[1] - states[1].B[1]) / (2 * h)
    assert np.max(np.abs(fd - derivs[(0, 1)])) < 1e-7


def test_transport_diagonal_identity():
    sp = SystemPair(np.diag([0.5, -0.3]), [0.0, 1.0])
    st = transport(DeformationState(u=sp.u, A=sp.A.copy()),
                   np.array([0.3j, 1.5]), tol=1e-12)
    assert np.max(np.abs(st.A - sp.A)) < 1e-14


def test_transport_closed_loop_integrability():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(3, 3)) * 0.5 + 1j * rng.normal(size=(3, 3)) * 0.2
    u0 = np.array([0.0, 1.0, 0.6 + 0.9j], dtype=complex)
    loop = [u0 + np.array([0, 0, dz]) for dz in (0.2, 0.2 + 0.2j, 0.2j, 0.0)]
    st = transport_along(DeformationState(u=u0, A=A.copy()), loop, tol=1e-12)
    assert np.max(np.abs(st.A - A)) < 1e-10


def test_transport_invariants_and_path_independence():
    rng = np.random.default_rng(13)
    A = rng.normal(size=(3, 3)) * 0.4 + 1j * rng.normal(size=(3, 3)) * 0.3
    u0 = np.array([0.0, 1.0, 0.6 + 0.9j], dtype=complex)
    u1 = u0 + np.array([0.1j, -0.15, 0.2])
    s_direct = transport(DeformationState(u=u0, A=A.copy()), u1, tol=1e-12)
    mid = u0 + np.array([0.3, 0.1j, -0.2j])
    s_detour = transport_along(DeformationState(u=u0, A=A.copy()),
                               [mid, u1], tol=1e-12)
    assert np.max(np.abs(s_direct.A - s_detour.A)) < 1e-10
    assert s_direct.diag_drift < 1e-12
    assert s_direct.spectrum_drift < 1e-10


def test_transport_guard_near_delta():
    sp = SystemPair(np.diag([0.5, -0.3]), [0.0, 1.0])
    with pytest.raises(StepFailure):
        transport(DeformationState(u=sp.u, A=sp.A.copy()),
                  np.array([2.0, 1.0]), tol=1e-12)  # segment crosses u_1 = u_2


def test_radial_decay_slope(vanishing_A_uc):
    uc = np.array([0, 0, 1.0], dtype=complex)
    u1 = np.array([0.04 + 0.02j, -0.04 - 0.02j, 1.0], dtype=complex)
    ts = [1.0, 0.1, 0.01, 0.001]
    states = radial_family(SystemPair(vanishing_A_uc, u1), uc, ts, tol=1e-12)
    xs = [math.log(t) for t in ts]
    ys = [math.log(abs(st.A[0, 1])) for st in states]
    slope = np.polyfit(xs, ys, 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)
    # commutator bound ||[B_i, B_j]|| <= C |u_i - u_j| along the approach
    for t, st in zip(ts, states):
        fs = build_fuchsian(st.system())
        comm = np.max(np.abs(fs.B[0] @ fs.B[1] - fs.B[1] @ fs.B[0]))
        assert comm <= 20.0 * abs(st.u[0] - st.u[1])


def test_vanishing_check_constructed_pass():
    d = 1e-5
    c = 0.7
    A = np.array([[0.2, c * d], [-c * d, 0.9]], dtype=complex)
    rows = vanishing_check(SystemPair(A, [d, 0.0]), groups=[(0, 1)])
    assert rows[0]["pass"]
    assert rows[0]["ratio"] == pytest.approx(c, rel=1e-6)


def test_vanishing_check_constructed_fail():
    A = np.array([[0.2, 0.5], [0.3, 0.9]], dtype=complex)
    rows = vanishing_check(SystemPair(A, [1e-6, 0.0]), groups=[(0, 1)])
    assert not rows[0]["pass"]
    assert rows[0]["commutator_norm"] > 0.1


def test_vanishing_check_along_transported_family(vanishing_A_uc):
    uc = np.array([0, 0, 1.0], dtype=complex)
    u1 = np.array([0.02, -0.02, 1.0], dtype=complex)
    st = radial_family(SystemPair(vanishing_A_uc, u1), uc, [1e-3], tol=1e-12)[0]
    rows = vanishing_check(st.system(), groups=[(0, 1)])
    assert rows[0]["pass"]


def test_integrability_residual_quadratic():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(3, 3)) * 0.5 + 1j * rng.normal(size=(3, 3)) * 0.2
    sp = SystemPair(A, [0.0, 1.0, 0.6 + 0.9j])
    r1 = integrability_residual(sp, step=2e-3, tol=1e-13)
    r2 = integrability_residual(sp, step=1e-3, tol=1e-13)
    assert 3.5 < r1 / r2 < 4.5


def test_integrability_negative_control():
    """Holding A fixed over the stencil leaves a step-independent residual."""
    rng = np.random.default_rng(7)
    A = rng.normal(size=(3, 3)) * 0.5 + 1j * rng.normal(size=(3, 3)) * 0.2
    u0 = np.array([0.0, 1.0, 0.6 + 0.9j], dtype=complex)

    def resid_fixed(step):
        worst = 0.0
        for i in range(3):
            for k in range(i + 1, 3):
                up, um = u0.copy(), u0.copy()
                up[i] += step
                um[i] -= step
                dik = (omega(SystemPair(A, up), k) - omega(SystemPair(A, um), k)) / (2 * step)
                up2, um2 = u0.copy(), u0.copy()
                up2[k] += step
                um2[k] -= step
                dki = (omega(SystemPair(A, up2), i) - omega(SystemPair(A, um2), i)) / (2 * step)
                oi, ok = omega(SystemPair(A, u0), i), omega(SystemPair(A, u0), k)
                worst = max(worst, np.max(np.abs(dik - dki - (oi @ ok - ok @ oi))))
        return worst

    assert resid_fixed(1e-3) > 1e-2
    assert abs(resid_fixed(1e-3) / resid_fixed(5e-4) - 1.0) < 0.05


def test_jordan_reduce_diagonalizable(system_2x2):
    fs = build_fuchsian(system_2x2)
    G, T, branch = jordan_reduce_Bj(fs, 0)
    assert branch == "diagonal"
    assert np.allclose(np.diag(T), [-1.5, 0.0])
    # footnote columns: (e_0, e_1 - (A_01/(lambda'_0+1)) e_0)
    assert np.allclose(G[:, 0], [1.0, 0.0])
    assert np.allclose(G[:, 1], [-2.0 / 1.5, 1.0])


def test_jordan_reduce_diagonal_A_is_identity():
    fs = build_fuchsian(SystemPair(np.diag([0.5, -0.3]), [0.0, 1.0]))
    G, T, branch = jordan_reduce_Bj(fs, 0)
    assert np.allclose(G, np.eye(2))


def test_jordan_reduce_nilpotent_branch():
    A = np.array([[-1.0, 0.8], [0.3, 0.4]], dtype=complex)
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0]))
    G, T, branch = jordan_reduce_Bj(fs, 0)
    assert branch == "jordan"
    J = np.linalg.solve(G, fs.B[0] @ G)
    assert np.max(np.abs(J - T)) < 1e-12
    assert T[0, 1] == 1.0 and np.count_nonzero(T) == 1


def test_jordan_reduce_zero_row_branch():
    A = np.array([[-1.0, 0.0], [0.3, 0.4]], dtype=complex)
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0]))
    G, T, branch = jordan_reduce_Bj(fs, 0)
    assert branch == "zero"
    with pytest.raises(NotReducible):
        jordan_reduce_Bj(fs, 0, strict=True)


def test_jordan_simultaneous_reduction_at_uc(vanishing_A_uc):
    """G^(1) G^(2) reduces both group residues at u^c simultaneously."""
    fs = build_fuchsian(SystemPair(vanishing_A_uc, [0.0, 0.0, 1.0]))
    G0, T0, _ = jordan_reduce_Bj(fs, 0)
    G1, T1, _ = jordan_reduce_Bj(fs, 1)
    G = G0 @ G1
    for j, T in ((0, T0), (1, T1)):
        R = np.linalg.solve(G, fs.B[j] @ G)
        assert np.max(np.abs(R - T)) < 1e-10
