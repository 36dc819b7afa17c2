"""Isomonodromic transport and its consistency checks.

The reduced deformation flow dA = sum_j [omega_j(u), A] du_j is integrated
along segments in deformation space; diagonal and spectrum of A are
conserved quantities and double as error monitors.  The non-normalized
Schlesinger right-hand sides, the integrability residual, the vanishing
checks near the coalescence locus and the per-pole Jordan reductions live
here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .model import COALESCE_TOL, SystemPair
from .frobenius import FuchsianSystem, build_fuchsian, _jordan_reduce_single
from .continuation import StepFailure

NEAR_DELTA_GUARD = 1e-4


class DriftExceeded(RuntimeError):
    """Conserved quantities drifted beyond the allowed multiple of tol."""


class NotReducible(np.linalg.LinAlgError):
    """Requested explicit reduction branch does not apply."""


def omega(system, k, coalesce_tol=COALESCE_TOL, vanish_tol=1e-10):
    """Deformation coefficient omega_k = [F_1, E_k].

    Entry (i, j) is A_ij (delta_ik - delta_jk)/(u_i - u_j); only row k and
    column k are populated.  Coalesced pairs require vanishing A_ij and
    contribute 0.
    """
    A = np.asarray(system.A, dtype=complex)
    u = np.asarray(system.u, dtype=complex)
    n = u.size
    W = np.zeros((n, n), dtype=complex)
    scale = max(1.0, float(np.max(np.abs(A))))
    for i in range(n):
        for j in range(n):
            if i == j or (i != k and j != k):
                continue
            d = u[i] - u[j]
            if abs(d) < coalesce_tol:
                if abs(A[i, j]) > vanish_tol * scale:
                    from .laplace import SingularF1

                    raise SingularF1(
                        f"u_{i} = u_{j} with |A[{i},{j}]| = {abs(A[i, j]):.2e}"
                    )
                continue
            W[i, j] = A[i, j] * ((1 if i == k else 0) - (1 if j == k else 0)) / d
    return W


def omega_all(system, **kw):
    return [omega(system, k, **kw) for k in range(system.n)]


def schlesinger_rhs(fs: FuchsianSystem, u=None):
    """Non-normalized Schlesinger right-hand sides d B_k / d u_i.

    Returns ``(derivs, consistency)`` where ``derivs[(i, k)]`` is the
    matrix-valued derivative and ``consistency`` is the max norm of
    sum_k derivs[(i, k)] - [omega_i, sum_k B_k] over i (an identity of the
    system; should be at machine precision).
    """
    if u is None:
        u = fs.u
    system = SystemPair(fs.A, u)
    n = fs.n
    om = omega_all(system)
    derivs = {}
    for i in range(n):
        for k in range(n):
            if i != k:
                derivs[(i, k)] = (
                    (fs.B[i] @ fs.B[k] - fs.B[k] @ fs.B[i]) / (u[i] - u[k])
                    + om[i] @ fs.B[k] - fs.B[k] @ om[i]
                )
        acc = np.zeros((n, n), dtype=complex)
        for k in range(n):
            if k != i:
                acc -= (fs.B[i] @ fs.B[k] - fs.B[k] @ fs.B[i]) / (u[i] - u[k])
        derivs[(i, i)] = acc + om[i] @ fs.B[i] - fs.B[i] @ om[i]
    Bsum = sum(fs.B)
    worst = 0.0
    for i in range(n):
        total = sum(derivs[(i, k)] for k in range(n))
        target = om[i] @ Bsum - Bsum @ om[i]
        worst = max(worst, float(np.max(np.abs(total - target))))
    return derivs, worst


@dataclass
class DeformationState:
    """Current deformation point and matrix, with transport statistics."""

    u: np.ndarray
    A: np.ndarray
    history: list = field(default_factory=list)
    diag_drift: float = 0.0
    spectrum_drift: float = 0.0

    def system(self):
        return SystemPair(self.A, self.u)


def _spectrum_distance(ev0, ev1):
    """Max matched distance between two eigenvalue sets (optimal pairing)."""
    from scipy.optimize import linear_sum_assignment

    D = np.abs(ev0[:, None] - ev1[None, :])
    r, c = linear_sum_assignment(D)
    return float(np.max(D[r, c]))


def _min_ingroup_gap_on_segment(u0, u1, samples=33):
    """Min over the segment of the min pairwise |u_i - u_j| that shrinks."""
    best = math.inf
    for t in np.linspace(0.0, 1.0, samples):
        u = u0 + t * (u1 - u0)
        for i in range(u.size):
            for j in range(i + 1, u.size):
                best = min(best, abs(u[i] - u[j]))
    return best


def transport(state: DeformationState, target_u, tol=1e-10, guard=NEAR_DELTA_GUARD,
              enforce_guard=True) -> DeformationState:
    """Transport A along the straight segment to ``target_u``.

    Integrates dA/dt = sum_j [omega_j(A, u(t)), A] u_j'(t) with an adaptive
    high-order method; reports the diagonal and spectrum drift and raises
    :class:`DriftExceeded` when they pass 100 * tol.  Segments whose
    interior approaches the coalescence locus below ``guard`` are rejected
    (endpoint limits should be sampled and extrapolated instead).
    """
    u0 = np.asarray(state.u, dtype=complex)
    u1 = np.asarray(target_u, dtype=complex)
    if np.allclose(u0, u1):
        return state
    gap = _min_ingroup_gap_on_segment(u0, u1)
    if enforce_guard and gap < guard:
        raise StepFailure(
            f"segment approaches the coalescence locus (min gap {gap:.2e} < {guard}); "
            "stop at a guarded endpoint and extrapolate"
        )
    n = u0.size
    du = u1 - u0
    A0 = np.asarray(state.A, dtype=complex)
    lead0 = np.linalg.eigvals(A0)
    diag0 = np.diag(A0).copy()

    def rhs(t, y):
        A = y.reshape(n, n)
        u = u0 + t * du
        sp = SystemPair(A, u)
        dA = np.zeros((n, n), dtype=complex)
        for j in range(n):
            if abs(du[j]) == 0.0:
                continue
            om = omega(sp, j)
            dA += (om @ A - A @ om) * du[j]
        return dA.ravel()

    sol = solve_ivp(rhs, (0.0, 1.0), A0.ravel(), method="DOP853",
                    rtol=max(tol, 1e-13), atol=1e-3 * tol)
    if not sol.success:
        raise StepFailure(f"transport integrator failed: {sol.message}")
    A1 = sol.y[:, -1].reshape(n, n)
    diag_drift = float(np.max(np.abs(np.diag(A1) - diag0)))
    spec_drift = _spectrum_distance(lead0, np.linalg.eigvals(A1))
    if max(diag_drift, spec_drift) > 100 * tol:
        raise DriftExceeded(
            f"invariant drift too large: diag {diag_drift:.2e}, spectrum {spec_drift:.2e}"
        )
    new_hist = state.history + [(u0.copy(), u1.copy())]
    return DeformationState(u=u1, A=A1, history=new_hist,
                            diag_drift=max(state.diag_drift, diag_drift),
                            spectrum_drift=max(state.spectrum_drift, spec_drift))


def transport_along(state, waypoints, tol=1e-10, **kw):
    for w in waypoints:
        state = transport(state, np.asarray(w, dtype=complex), tol=tol, **kw)
    return state


def radial_family(system, u_c, t_values, tol=1e-11, t_seed=1e-8):
    """Isomonodromic family along u(t) = u^c + t (u - u^c), seeded at u^c.

    The matrix of ``system`` prescribes A(u^c): its in-group entries (for
    pairs coalescing at u^c) must vanish.  The family is grown outward from
    t_seed (in-group quotients are O(t) there, so the relative seeding
    error is O(t_seed)) and then transported to the requested t values.

    Returns the list of :class:`DeformationState` at ``t_values`` (sorted
    ascending internally, returned in the requested order).
    """
    u_c = np.asarray(u_c, dtype=complex)
    u1 = np.asarray(system.u, dtype=complex)
    v = u1 - u_c
    A0 = np.asarray(system.A, dtype=complex).copy()
    for i in range(u_c.size):
        for j in range(u_c.size):
            if i != j and abs(u_c[i] - u_c[j]) < COALESCE_TOL:
                if abs(A0[i, j]) > 1e-10:
                    raise ValueError(
                        f"A[{i},{j}] must vanish at u^c for the coalescing pair"
                    )
                A0[i, j] = 0.0
    order = np.argsort(np.asarray(t_values))
    ts = np.asarray(t_values)[order]
    state = DeformationState(u=u_c + t_seed * v, A=A0)
    out = []
    t_prev = t_seed
    for t in ts:
        state = transport(state, u_c + t * v, tol=tol, enforce_guard=False)
        out.append(state)
        t_prev = t
    result = [None] * len(out)
    for pos, idx in enumerate(order):
        result[idx] = out[pos]
    return result


def vanishing_check(system, groups=None, coalesce_scale=None):
    """Vanishing-condition report for the in-group pairs at the current u.

    For each pair that coalesces (per ``groups`` or per proximity), report
    |A_ij|, the ratio |A_ij|/|u_i-u_j| and ||[B_i, B_j]||, with a verdict
    per the equivalence |A_ij| -> 0  <=>  [B_i, B_j] -> 0.
    """
    fs = build_fuchsian(system)
    u = system.u
    n = system.n
    if groups is None:
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    else:
        pairs = [
            (i, j)
            for g in groups
            for i in g
            for j in g
            if i < j
        ]
    scale = max(1.0, float(np.max(np.abs(system.A))))
    ratio_bound = 1e3 * scale
    rows = []
    for i, j in pairs:
        gap = abs(u[i] - u[j])
        comm = fs.B[i] @ fs.B[j] - fs.B[j] @ fs.B[i]
        comm_norm = float(np.max(np.abs(comm)))
        aij = max(abs(system.A[i, j]), abs(system.A[j, i]))
        ratio = aij / gap if gap > 0 else math.inf
        comm_ratio = comm_norm / gap if gap > 0 else math.inf
        near = gap < 1e-3
        # A_ij = O(u_i - u_j) and [B_i, B_j] = O(u_i - u_j) are equivalent;
        # judged only near the locus, with a generous O-constant
        ok_a = aij <= ratio_bound * gap + 1e-12
        ok_c = comm_norm <= 10.0 * ratio_bound * scale * gap + 1e-12
        rows.append({
            "pair": (i, j),
            "gap": gap,
            "abs_A": aij,
            "ratio": ratio,
            "commutator_norm": comm_norm,
            "commutator_ratio": comm_ratio,
            "pass": bool((ok_a and ok_c) if near else True),
            "near_locus": bool(near),
        })
    return rows


def integrability_residual(system, step=1e-3, tol=1e-12):
    """Residual of d_i omega_k - d_k omega_i = [omega_i, omega_k] by stencils.

    Central finite differences in u_i, u_k with the matrix A transported
    isomonodromically to each stencil point.  Returns the max over pairs.
    """
    n = system.n
    base = DeformationState(u=np.asarray(system.u, dtype=complex),
                            A=np.asarray(system.A, dtype=complex))

    def omega_at(du_index, delta, k):
        u = base.u.copy()
        u[du_index] += delta
        st = transport(base, u, tol=tol, enforce_guard=False)
        return omega(st.system(), k)

    worst = 0.0
    for i in range(n):
        for k in range(i + 1, n):
            d_i_om_k = (omega_at(i, step, k) - omega_at(i, -step, k)) / (2 * step)
            d_k_om_i = (omega_at(k, step, i) - omega_at(k, -step, i)) / (2 * step)
            om_i = omega(system, i)
            om_k = omega(system, k)
            comm = om_i @ om_k - om_k @ om_i
            worst = max(worst, float(np.max(np.abs(d_i_om_k - d_k_om_i - comm))))
    return worst


def jordan_reduce_Bj(fs: FuchsianSystem, j, strict=False):
    """Holomorphic reduction of B_j to constant Jordan form.

    Returns ``(G, T, branch)``: for lambda'_j != -1 the explicit
    diagonalizing columns, for lambda'_j = -1 the rank-1 nilpotent Jordan
    branch; ``branch == "zero"`` marks B_j = 0 (row of zeros), where no
    nontrivial reduction exists (raised as :class:`NotReducible` when
    ``strict``).
    """
    G, T, branch = _jordan_reduce_single(fs, j)
    if branch == "zero" and strict:
        raise NotReducible(f"B_{j} vanishes identically: nothing to reduce")
    resid = float(np.max(np.abs(np.linalg.solve(G, fs.B[j] @ G) - T)))
    if resid > 1e-10 * max(1.0, float(np.max(np.abs(fs.B[j])))):
        raise NotReducible(f"reduction residual {resid:.2e} for B_{j}")
    return G, T, branch
