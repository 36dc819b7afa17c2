import cmath
import math

import numpy as np
import pytest

from isomonodromy.model import CutPlane, SystemPair
from isomonodromy.frobenius import (
    analytic_basis,
    build_fuchsian,
    selected_solution,
    singular_solution,
)
from isomonodromy.continuation import (
    BasisSingular,
    Path,
    connection_coefficients,
    connection_products,
    continue_solution,
    loop_at_pole,
    monodromy_matrix,
    plan_path,
    transport_to_base,
    verify_connection_constancy,
)

ETA = 1.5 * math.pi - math.pi / 4


def test_transport_diagonal_power_law():
    A = np.diag([0.3 + 0.1j, -0.7])
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0]))
    lam0, lam1 = -0.5 - 0.5j, 1.8 + 0.7j
    path = plan_path(lam0, lam1, fs.u)
    v = continue_solution(fs, np.array([1.0, 0.0], complex), lam0, path, tol=1e-12)
    rho = -A[0, 0] - 1
    branch = ((lam1 - fs.u[0]) / (lam0 - fs.u[0])) ** rho
    assert abs(v[0] - branch) < 1e-12
    assert abs(v[1]) == 0.0


def test_transport_contractible_loop_is_identity():
    A = np.array([[0.5, 2.0], [3.0, 1.0 / 3.0]], dtype=complex)
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0]))
    lam0 = -0.4 - 0.6j
    square = [lam0, lam0 + 0.25, lam0 + 0.25 + 0.25j, lam0 + 0.25j, lam0]
    v0 = np.array([1.0, 2.0], complex)
    v = continue_solution(fs, v0, lam0, square, tol=1e-12)
    assert np.max(np.abs(v - v0)) < 1e-11


def test_transport_composition_consistency():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    u = [0.0, 1.0, 0.5 + 1.0j]
    fs = build_fuchsian(SystemPair(A, u))
    v0 = np.array([1.0, -0.5, 0.25j], complex)
    c = 0.5 + 0.2j
    r = 2.2
    half = [c + r, c + r * 1j, c - r]
    quarter1 = [c + r, c + r * cmath.exp(0.25j * math.pi), c + r * 1j]
    quarter2 = [c + r * 1j, c + r * cmath.exp(0.75j * math.pi), c - r]
    va = continue_solution(fs, v0, c + r, half, tol=1e-11)
    vb = continue_solution(fs, v0, c + r, quarter1, tol=1e-11)
    vb = continue_solution(fs, vb, c + r * 1j, quarter2, tol=1e-11)
    assert np.max(np.abs(va - vb)) < 1e-10 * max(1.0, np.max(np.abs(va)))


def test_path_clearance_and_detours():
    poles = np.array([0.0, 1.0, 0.5 + 0.02j])
    path = plan_path(-1.0 + 0.02j, 2.0 + 0.02j, poles)
    assert path.min_pole_distance(poles) >= path.clearance * 0.999


def test_path_cut_crossing_bookkeeping():
    cut = CutPlane(eta=math.pi / 2)
    poles = [0.0 + 0.0j]
    crossing = Path(waypoints=[-1.0 + 1.0j, 1.0 + 1.0j], clearance=0.1)
    hits = crossing.cuts_crossed(poles, cut)
    assert len(hits) == 1 and hits[0][0] == 0
    below = Path(waypoints=[-1.0 - 1.0j, 1.0 - 1.0j], clearance=0.1)
    assert below.cuts_crossed(poles, cut) == []


# ---------------------------------------------------------------------------
# monodromy
# ---------------------------------------------------------------------------


def test_monodromy_diagonal():
    A = np.diag([0.3 + 0.1j, -0.7])
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0]))
    for k in range(2):
        M = monodromy_matrix(fs, k, CutPlane(eta=ETA), tol=1e-12)
        expected = np.eye(2, dtype=complex)
        expected[k, k] = cmath.exp(-2j * math.pi * A[k, k])
        assert np.max(np.abs(M - expected)) < 5e-12


def test_monodromy_half_exponent(system_2x2):
    fs = build_fuchsian(system_2x2)
    M = monodromy_matrix(fs, 0, CutPlane(eta=ETA), tol=1e-12)
    assert M[0, 0] == pytest.approx(-1.0, abs=1e-9)
    # identity outside row k
    assert abs(M[1, 0]) < 1e-9 and M[1, 1] == pytest.approx(1.0, abs=1e-9)


def test_monodromy_eigenvalue_structure(system_2x2):
    fs = build_fuchsian(system_2x2)
    for k in range(2):
        M = monodromy_matrix(fs, k, CutPlane(eta=ETA), tol=1e-12)
        ev = sorted(np.linalg.eigvals(M), key=lambda z: z.real)
        expect = sorted(
            [1.0, cmath.exp(-2j * math.pi * fs.lambda_prime[k])], key=lambda z: z.real
        )
        assert np.max(np.abs(np.array(ev) - np.array(expect))) < 1e-9


def _basis_at_big_base(fs, cut, radius, tol=1e-13):
    """Basis matrix at u_0 - radius e^{i eta}, reached without cut crossings.

    Each column is brought to the standard base point of u_0 by the
    cut-safe production route and then slid outward along the anti-cut ray
    of u_0, which crosses no cuts for an admissible eta.
    """
    base_big = fs.u[0] - radius * cut.direction()
    cols = []
    for k in range(fs.n):
        b0, v = transport_to_base(fs, k, 0, cut, tol=tol)
        cols.append(continue_solution(fs, v, b0, [b0, base_big], tol=tol))
    return base_big, np.column_stack(cols)


def test_big_loop_matches_infinity_monodromy(system_2x2):
    """Loop around both poles: eigenvalues e^{-2 pi i spec(A+I)}."""
    fs = build_fuchsian(system_2x2)
    cut = CutPlane(eta=ETA)
    radius = 2.8
    assert radius > abs(fs.u[1] - fs.u[0])  # circle encloses both poles
    base, Psi = _basis_at_big_base(fs, cut, radius)
    looped = loop_at_pole(fs, 0, Psi, base, tol=1e-13)
    Mbig = np.linalg.solve(Psi, looped)
    ev = np.sort_complex(np.linalg.eigvals(Mbig))
    expect = np.sort_complex(
        np.exp(-2j * math.pi * (np.linalg.eigvals(system_2x2.A) + 1.0))
    )
    assert np.max(np.abs(ev - expect)) < 1e-8


def test_loop_composition_two_poles(system_2x2):
    """A loop around both poles equals the ordered product of small loops."""
    fs = build_fuchsian(system_2x2)
    cut = CutPlane(eta=ETA)
    base, Psi = _basis_at_big_base(fs, cut, 2.8)
    looped = loop_at_pole(fs, 0, Psi, base, tol=1e-13)
    Mbig = np.linalg.solve(Psi, looped)
    M = [monodromy_matrix(fs, k, cut, tol=1e-13) for k in range(2)]
    candidates = [M[0] @ M[1], M[1] @ M[0]]
    errs = [np.max(np.abs(Mbig - c)) for c in candidates]
    assert min(errs) < 1e-7


def test_basis_singular_raises_for_integer_spectrum():
    A = np.array([[0.0, 1.0], [0.0, 2.0]], dtype=complex)  # eigenvalues 0, 2
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0]))
    with pytest.raises(BasisSingular):
        monodromy_matrix(fs, 0, CutPlane(eta=ETA), tol=1e-12)


# ---------------------------------------------------------------------------
# connection coefficients
# ---------------------------------------------------------------------------


def test_connection_diagonal_identity_pattern():
    A = np.diag([0.3 + 0.1j, -1.0, 0.21])
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0, 0.4 + 0.9j]))
    conn = connection_coefficients(fs, CutPlane(eta=ETA), tol=1e-12)
    C = conn.C
    assert abs(C[0, 0] - 1.0) < 1e-12  # noninteger diagonal
    assert abs(C[1, 1]) == 0.0  # integer exponent: c_kk = 0
    off = C - np.diag(np.diag(C))
    assert np.max(np.abs(off)) < 5e-12


def test_connection_series_matching_oracle(system_2x2):
    """c_12 from monodromy projection vs direct local-basis fit at u_1."""
    fs = build_fuchsian(system_2x2)
    cut = CutPlane(eta=ETA)
    conn = connection_coefficients(fs, cut, tol=1e-13)
    # continue Psi_2 to points near u_1 and fit against (Psi_1^{sing}, analytic basis)
    from isomonodromy.continuation import seed_point_and_value, transport_to_base

    sol2 = selected_solution(fs, 1, cut, 40)
    sol1 = selected_solution(fs, 0, cut, 40)
    basis1 = analytic_basis(fs, 0, N=40)
    base, v = transport_to_base(fs, 1, 0, cut, sol=sol2, tol=1e-13)
    samples = [base, fs.u[0] + 0.8 * (base - fs.u[0]), fs.u[0] + 1.3 * (base - fs.u[0])]
    vals = [v]
    for s in samples[1:]:
        vals.append(continue_solution(fs, v, base, [base, s], tol=1e-13))
    rows = []
    rhs = []
    for s, val in zip(samples, vals):
        x = s - fs.u[0]
        f_sing = sol1.selected_value(s, cut)
        f_reg = [sum(b[l] * x ** l for l in range(b.shape[0])) for b in basis1]
        rows.append(np.column_stack([f_sing] + f_reg))
        rhs.append(val)
    Mfit = np.vstack(rows)
    coeffs, *_ = np.linalg.lstsq(Mfit, np.concatenate(rhs), rcond=None)
    assert abs(coeffs[0] - conn.C[0, 1]) < 1e-7


def test_connection_branch_consistency(system_2x2):
    """Perturbing eta within the same labelled interval leaves c_jk fixed."""
    fs = build_fuchsian(system_2x2)
    c_ref = connection_coefficients(fs, CutPlane(eta=ETA), tol=1e-13).C
    for deta in (-0.3, 0.2):
        c2 = connection_coefficients(fs, CutPlane(eta=ETA + deta), tol=1e-13).C
        assert np.max(np.abs(c2 - c_ref)) < 1e-7


def test_connection_invariant_under_regular_completion():
    """c_jk does not depend on the completion chosen for Psi_j^{sing}.

    The extraction projects the loop difference onto Psi_j; adding any
    analytic solution to the singular companion cannot change it.  Checked
    by re-running the projection against two completions of the local
    basis fit.
    """
    A = np.array([[-2.0, 0.9], [0.55, 0.37]], dtype=complex)
    fs = build_fuchsian(SystemPair(A, [0.0, 1.0]))
    cut = CutPlane(eta=ETA)
    conn = connection_coefficients(fs, cut, tol=1e-13)
    sng = singular_solution(fs, 0, N=40)
    assert not sng.zero
    sel0 = selected_solution(fs, 0, cut, 40)
    sol1 = selected_solution(fs, 1, cut, 40)
    from isomonodromy.continuation import transport_to_base

    base, v = transport_to_base(fs, 1, 0, cut, sol=sol1, tol=1e-13)
    x = base - fs.u[0]

    def fit_c(phi):
        # fit Psi_1 against c * Psi_0^{sing} + span of analytic solutions
        f_sing = (
            sum(sel0.b[l] * x ** (l + 1) for l in range(sel0.b.shape[0]))
            * cmath.log(x)
            + sum(phi[l] * x ** l for l in range(phi.shape[0]))
        )
        cols = [f_sing] + [
            sum(b[l] * x ** l for l in range(b.shape[0]))
            for b in sng.analytic_completion
        ]
        coeffs, res, *_ = np.linalg.lstsq(np.column_stack(cols), v, rcond=None)
        return coeffs[0]

    c_a = fit_c(sng.phi)
    completion2 = sng.phi + 0.7 * sng.analytic_completion[0][: sng.phi.shape[0]]
    c_b = fit_c(completion2)
    assert abs(c_a - c_b) < 1e-8
    assert abs(c_a - conn.C[0, 1]) < 1e-7


def test_connection_products_structural_zero(coalescing_geometry, vanishing_A_uc):
    sp = SystemPair(vanishing_A_uc, [0.02, -0.02, 1.0])
    cut = CutPlane(eta=coalescing_geometry.eta)
    P, conn = connection_products(sp, cut, tol=1e-11, geometry=coalescing_geometry)
    assert conn.provenance[0][1] == "zero-by-coalescence"
    assert P[0, 1] == 0.0 and P[1, 0] == 0.0


def test_verify_connection_constancy_one_cell(system_2x2, geometry_2x2):
    samples = [
        np.array([0.0, 1.0], complex),
        np.array([0.02 + 0.02j, 1.0], complex),
        np.array([0.02 + 0.02j, 1.0 - 0.04j], complex),
    ]
    report = verify_connection_constancy(system_2x2, geometry_2x2, samples, tol=1e-13)
    assert report["max_variation"] < 1e-7
    assert all(report["in_cell"])
