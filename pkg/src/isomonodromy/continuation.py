"""Analytic continuation of Fuchsian solutions in the cut lambda-plane.

Vector solutions are transported along pole-avoiding polylines with an
adaptive high-order Runge-Kutta integrator; small positive loops at the
poles yield monodromy matrices, whose k-th rows encode the connection
coefficients c_jk through the projection
gamma_j Psi_k - Psi_k = alpha_j c_jk Psi_j.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import COALESCE_TOL, CutPlane
from .frobenius import (
    FuchsianSystem,
    build_fuchsian,
    needs_gamma_shift,
    pick_gamma,
    gamma_shift,
    selected_solution,
)

DEFAULT_TOL = 1e-10


class StepFailure(RuntimeError):
    """Adaptive integrator failed (step underflow or solver error)."""


class BasisSingular(np.linalg.LinAlgError):
    """Selected solutions do not form a fundamental system at this point."""


class IllConditioned(RuntimeError):
    """A least-squares projection left a residual above tolerance."""


@dataclass
class Path:
    """Polyline in the lambda-plane avoiding poles by a clearance margin."""

    waypoints: list
    clearance: float

    def segments(self):
        w = self.waypoints
        return [(w[i], w[i + 1]) for i in range(len(w) - 1)]

    def min_pole_distance(self, poles):
        best = math.inf
        for a, b in self.segments():
            for p in poles:
                best = min(best, _point_segment_distance(p, a, b))
        return best

    def cuts_crossed(self, poles, cut: CutPlane):
        """Which cuts L_m the polyline crosses, with crossing side.

        Side +1 means crossing with the pole's cut oriented left-to-right
        (counterclockwise contribution around the pole), -1 the opposite.
        """
        e = cut.direction()
        crossings = []
        for a, b in self.segments():
            for m, p in enumerate(poles):
                hit = _segment_ray_intersect(a, b, p, e)
                if hit is not None:
                    crossings.append((m, hit))
        return crossings


def _point_segment_distance(p, a, b):
    d = b - a
    L2 = (d * d.conjugate()).real
    if L2 == 0.0:
        return abs(p - a)
    t = ((p - a) * d.conjugate()).real / L2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * d))


def _segment_ray_intersect(a, b, base, e):
    """Crossing side of segment [a,b] over the ray {base + t e, t>0}, or None."""
    # coordinates in the frame where the ray is the positive real axis
    za = (a - base) / e
    zb = (b - base) / e
    if (za.imag > 0) == (zb.imag > 0):
        return None
    if abs(za.imag - zb.imag) < 1e-300:
        return None
    t = za.imag / (za.imag - zb.imag)
    x = za.real + t * (zb.real - za.real)
    if x <= 0:
        return None
    return 1 if za.imag < 0 else -1


def plan_path(start, end, poles, clearance=None, detour_factor=1.5):
    """Straight segment from start to end with detour arcs around poles.

    Poles closer to the segment than the clearance are bypassed along an
    arc of radius clearance * detour_factor on the side of the pole away
    from the segment.
    """
    poles = np.asarray(poles, dtype=complex)
    if clearance is None:
        gaps = [abs(p - q) for i, p in enumerate(poles) for q in poles[i + 1:]]
        clearance = 0.1 * min(gaps) if gaps else 0.1
    waypoints = [complex(start)]

    def extend(a, b, depth=0):
        if depth > 8:
            waypoints.append(b)
            return
        blockers = []
        for p in poles:
            d = _point_segment_distance(p, a, b)
            if d < clearance and abs(p - a) > 1e-14 and abs(p - b) > 1e-14:
                t = ((p - a) * (b - a).conjugate()).real / abs(b - a) ** 2
                blockers.append((t, p))
        if not blockers:
            waypoints.append(b)
            return
        blockers.sort()
        _, p = blockers[0]
        r = clearance * detour_factor
        # entry and exit points on the circle around p, arcs on the far side
        da = a - p
        db = b - p
        pa = p + r * da / abs(da)
        pb = p + r * db / abs(db)
        extend(a, pa, depth + 1)
        a0 = cmath.phase(da)
        a1 = cmath.phase(db)
        sweep = (a1 - a0) % (2 * math.pi)
        if sweep > math.pi:
            sweep -= 2 * math.pi
        steps = max(2, int(abs(sweep) / (math.pi / 8)) + 1)
        for i in range(1, steps):
            waypoints.append(p + r * cmath.exp(1j * (a0 + sweep * i / steps)))
        extend(pb, b, depth + 1)

    extend(complex(start), complex(end))
    # drop duplicate consecutive points
    out = [waypoints[0]]
    for wpt in waypoints[1:]:
        if abs(wpt - out[-1]) > 1e-14:
            out.append(wpt)
    return Path(waypoints=out, clearance=clearance)


def continue_solution(fs: FuchsianSystem, value, start, path, tol=DEFAULT_TOL,
                      dense=False):
    """Transport a vector (or matrix) solution along a path.

    ``path`` may be a :class:`Path` or a plain waypoint list starting at
    ``start``.  Returns the value at the endpoint, or the pair
    ``(value, interpolant)`` when ``dense`` is set (interpolant maps the
    arclength parameter of the last segment chunk).
    """
    waypoints = path.waypoints if isinstance(path, Path) else list(path)
    if abs(waypoints[0] - start) > 1e-12:
        raise ValueError("path does not start at the given point")
    y = np.asarray(value, dtype=complex)
    shape = y.shape
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        seg = b - a

        def rhs(t, yy):
            lam = a + t * seg
            M = fs.rhs(lam)
            return (M @ yy.reshape(shape) * seg).ravel()

        sol = solve_ivp(
            rhs, (0.0, 1.0), y.ravel(), method="DOP853",
            rtol=max(tol, 1e-13), atol=1e-3 * tol, dense_output=dense,
        )
        if not sol.success:
            raise StepFailure(f"integrator failed on segment {a} -> {b}: {sol.message}")
        y = sol.y[:, -1].reshape(shape)
    if dense:
        return y, sol.sol
    return y


def ray_continuation(fs, k, seed_value, t0, t1, direction, tol=DEFAULT_TOL):
    """Dense continuation of a vector solution along u_k + t*e^{i d}, t in [t0, t1].

    Returns a callable t -> vector.
    """
    e = cmath.exp(1j * direction)
    anchor = fs.u[k]
    y0 = np.asarray(seed_value, dtype=complex)

    def rhs(t, yy):
        lam = anchor + t * e
        return (fs.rhs(lam) @ yy) * e

    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853",
                    rtol=max(tol, 1e-13), atol=1e-3 * tol, dense_output=True)
    if not sol.success:
        raise StepFailure(f"ray continuation failed: {sol.message}")
    return sol.sol


def loop_at_pole(fs, j, base_value, base_point, radius=None, tol=DEFAULT_TOL,
                 orientation=+1, arcs=8):
    """Continue a solution once around u_j on a circle through the base point.

    The base point must lie on the circle; returns the value back at the
    base point after a positive (counterclockwise) loop.
    """
    c = fs.u[j]
    z0 = base_point - c
    r = abs(z0)
    y = np.asarray(base_value, dtype=complex)
    shape = y.shape
    th0 = cmath.phase(z0)

    def rhs(t, yy):
        lam = c + r * cmath.exp(1j * t)
        dlam = 1j * r * cmath.exp(1j * t)
        return (fs.rhs(lam) @ yy.reshape(shape) * dlam).ravel()

    t_end = th0 + orientation * 2 * math.pi
    sol = solve_ivp(rhs, (th0, t_end), y.ravel(), method="DOP853",
                    rtol=max(tol, 1e-13), atol=1e-3 * tol)
    if not sol.success:
        raise StepFailure(f"loop integration failed at pole {j}: {sol.message}")
    return sol.y[:, -1].reshape(shape)


# ---------------------------------------------------------------------------
# monodromy and connection coefficients
# ---------------------------------------------------------------------------


def _anti_cut_point(fs, j, cut: CutPlane, frac=0.5):
    """Point below u_j on the ray opposite to its cut, clear of other cuts."""
    r = frac * _loop_radius(fs, j, cut)
    return fs.u[j] - r * cut.direction(), r


def _loop_radius(fs, j, cut: CutPlane):
    """Loop radius at u_j: clear of other poles and of their cuts."""
    e = cut.direction()
    best = math.inf
    for m in range(fs.n):
        if m == j:
            continue
        best = min(best, abs(fs.u[j] - fs.u[m]))
        # distance from u_j to the cut ray of pole m
        z = (fs.u[j] - fs.u[m]) / e
        d_ray = abs(z.imag) if z.real > 0 else abs(z)
        best = min(best, d_ray)
    return 0.3 * best


def _depth_frame(fs, cut: CutPlane):
    """Depth needed so a lateral move stays below every pole and cut."""
    e = cut.direction()
    depths = [((p) * np.conj(e)).real for p in fs.u]
    spread = max(abs(p - q) for p in fs.u for q in fs.u) if fs.n > 1 else 1.0
    return max(depths) - min(depths) + 2.0 * spread + 1.0


def seed_point_and_value(fs, k, cut, sol=None, N=40, frac=0.5):
    """Series-evaluated value of Psi_k at a point just below u_k."""
    if sol is None:
        sol = selected_solution(fs, k, cut, N)
    p, _ = _anti_cut_point(fs, k, cut, frac=frac)
    if abs(p - fs.u[k]) > sol.radius:
        p = fs.u[k] + 0.5 * sol.radius * (p - fs.u[k]) / abs(p - fs.u[k])
    return p, sol.selected_value(p, cut)


def transport_to_base(fs, k, j, cut, sol=None, tol=DEFAULT_TOL, N=40, base_frac=0.5):
    """Continue Psi_k from its series zone to the anti-cut base point of u_j.

    The route descends below the pole configuration, moves laterally, and
    rises to the base point; vertical moves run along anti-cut rays and the
    lateral move runs below every cut, so no cut of the plane is crossed.
    """
    start, val = seed_point_and_value(fs, k, cut, sol=sol, N=N)
    base, _ = _anti_cut_point(fs, j, cut, frac=base_frac)
    if k == j:
        return base, val if abs(base - start) < 1e-15 else continue_solution(
            fs, val, start, plan_path(start, base, fs.u, clearance=0.2 * _loop_radius(fs, j, cut)), tol=tol)
    e = cut.direction()
    D = _depth_frame(fs, cut)
    low_k = fs.u[k] - D * e
    low_j = fs.u[j] - D * e
    clearance = 0.25 * min(_loop_radius(fs, k, cut), _loop_radius(fs, j, cut))
    waypoints = [start]
    for target in (low_k, low_j, base):
        leg = plan_path(waypoints[-1], target, fs.u, clearance=clearance)
        waypoints.extend(leg.waypoints[1:])
    path = Path(waypoints=waypoints, clearance=clearance)
    return base, continue_solution(fs, val, start, path, tol=tol)


def monodromy_matrix(fs: FuchsianSystem, k: int, cut=None, tol=DEFAULT_TOL, N=40,
                     basis_sols=None):
    """Monodromy M_k of the selected-solution basis around a small loop at u_k.

    Expresses gamma_k Psi = Psi M_k: identity except row k, whose diagonal
    entry is e^{-2 pi i lambda'_k} and off-diagonal entries are
    alpha_k c_kj.  Raises :class:`BasisSingular` when the selected
    solutions fail to form a fundamental system at the base point.
    """
    if cut is None:
        cut = CutPlane(eta=_default_eta(fs))
    n = fs.n
    if basis_sols is None:
        basis_sols = [selected_solution(fs, m, cut, N) for m in range(n)]
    base, _ = _anti_cut_point(fs, k, cut)
    cols = []
    for m in range(n):
        _, v = transport_to_base(fs, m, k, cut, sol=basis_sols[m], tol=tol, N=N)
        cols.append(v)
    Psi = np.column_stack(cols)
    cond = np.linalg.cond(Psi)
    if not np.isfinite(cond) or cond > 1e12:
        raise BasisSingular(
            f"selected solutions are not a fundamental system near u_{k} "
            f"(condition {cond:.2e}); gamma-shift the system first"
        )
    looped = loop_at_pole(fs, k, Psi, base, tol=tol)
    return np.linalg.solve(Psi, looped)


def _default_eta(fs):
    """Any admissible eta for the given pole configuration (deterministic)."""
    args = sorted(
        cmath.phase(fs.u[j] - fs.u[m]) % math.pi
        for j in range(fs.n) for m in range(fs.n)
        if j != m and abs(fs.u[j] - fs.u[m]) > COALESCE_TOL
    )
    if not args:
        return 0.5 * math.pi
    gaps = [(args + [args[0] + math.pi])[i + 1] - args[i] for i in range(len(args))]
    i = int(np.argmax(gaps))
    return (args[i] + gaps[i] / 2.0) % math.pi


def alpha_factor(lambda_prime_k, klass):
    """alpha_k = e^{-2 pi i lambda'_k} - 1, or 2 pi i for integer exponents."""
    if klass == "noninteger":
        return cmath.exp(-2j * math.pi * complex(lambda_prime_k)) - 1.0
    return 2j * math.pi


@dataclass
class ConnectionData:
    """Connection coefficients c_jk with per-entry provenance tags."""

    C: np.ndarray
    alpha: np.ndarray
    nu: int
    eta: float
    provenance: np.ndarray
    residuals: np.ndarray
    gamma: float = 0.0

    @property
    def alpha_c(self):
        """Products alpha_j c_jk (the invariants entering the Stokes formula)."""
        return self.C * self.alpha[:, None]


def connection_coefficients(fs: FuchsianSystem, cut: CutPlane, tol=DEFAULT_TOL,
                            N=40, nu=0, geometry=None, sols=None, sing_sols=None):
    """Extract the full matrix of connection coefficients at fixed u.

    For each pair j != k the selected solution Psi_k is continued to a base
    point near u_j and around a small positive loop; the loop difference is
    projected onto Psi_j:  gamma_j Psi_k - Psi_k = alpha_j c_jk Psi_j.
    Diagonal entries follow from the arithmetic class.  Entries across a
    coalescing pair of ``geometry`` (if given) are structural zeros.
    Raises :class:`IllConditioned` if a projection residual exceeds
    tolerance relative to the continued solution.
    """
    from .frobenius import singular_solution  # local import to avoid cycle noise

    n = fs.n
    classes = [fs.integer_class(m) for m in range(n)]
    alpha = np.array([alpha_factor(fs.lambda_prime[m], classes[m]) for m in range(n)])
    C = np.zeros((n, n), dtype=complex)
    prov = np.full((n, n), "monodromy-projection", dtype=object)
    resid = np.zeros((n, n))
    if sols is None:
        sols = [selected_solution(fs, m, cut, N) for m in range(n)]
    if sing_sols is None:
        sing_sols = {}
        for m in range(n):
            if classes[m] == "negative_integer":
                sing_sols[m] = singular_solution(fs, m, cut, N)
    for m in range(n):
        if classes[m] == "noninteger":
            C[m, m] = 1.0
        else:
            C[m, m] = 0.0
        prov[m, m] = "diagonal-by-class"
    for j in range(n):
        degenerate_row = (
            classes[j] == "negative_integer" and sing_sols[j].zero
        )
        base, _ = _anti_cut_point(fs, j, cut)
        psi_j = sols[j].selected_value(base, cut)
        for k in range(n):
            if j == k:
                continue
            if geometry is not None and geometry.same_group(j, k):
                C[j, k] = 0.0
                prov[j, k] = "zero-by-coalescence"
                continue
            if degenerate_row or sols[k].zero:
                C[j, k] = 0.0
                prov[j, k] = "zero-by-degenerate-singular"
                continue
            _, v = transport_to_base(fs, k, j, cut, sol=sols[k], tol=tol, N=N)
            looped = loop_at_pole(fs, j, v, base, tol=tol)
            diff = looped - v
            denom = (psi_j.conj() @ psi_j).real
            c = (psi_j.conj() @ diff) / denom / alpha[j]
            r = np.linalg.norm(diff - alpha[j] * c * psi_j)
            scale = max(np.linalg.norm(v), 1.0)
            resid[j, k] = r / scale
            if resid[j, k] > max(100 * tol, 1e-7):
                raise IllConditioned(
                    f"projection residual {resid[j, k]:.2e} for c[{j},{k}] "
                    f"(condition of target {np.linalg.norm(psi_j):.2e})"
                )
            C[j, k] = c
    return ConnectionData(C=C, alpha=alpha, nu=nu, eta=cut.eta,
                          provenance=prov, residuals=resid)


def connection_products(system, cut: CutPlane, tol=DEFAULT_TOL, N=40,
                        geometry=None, nu=0, gamma=None):
    """Products alpha_k c_jk of the original system, via gamma-shift if needed.

    For systems with integer diagonal entries or integer eigenvalues the
    selected solutions are not fundamental, so the coefficients are taken
    from a shifted system and mapped back with
    alpha_k c_jk = e^{-2 pi i gamma} alpha_k[gamma] c_jk[gamma]  (k succ j),
    alpha_k c_jk = alpha_k[gamma] c_jk[gamma]                    (k prec j),
    where the ordering is taken at the working point u.  ``gamma``
    overrides the automatic choice of the shift.

    Returns ``(P, conn)`` with P[j, k] = alpha_k c_jk.
    """
    fs = build_fuchsian(system)
    tau = 1.5 * math.pi - cut.eta
    if not needs_gamma_shift(system):
        conn = connection_coefficients(fs, cut, tol=tol, N=N, geometry=geometry, nu=nu)
        return conn.C * conn.alpha[None, :], conn
    g = pick_gamma(system) if gamma is None else float(gamma)
    shifted = gamma_shift(system, g)
    fs_g = build_fuchsian(shifted)
    conn_g = connection_coefficients(fs_g, cut, tol=tol, N=N, geometry=geometry, nu=nu)
    conn_g.gamma = g
    n = fs.n
    P = np.zeros((n, n), dtype=complex)
    phase = cmath.exp(-2j * math.pi * g)
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            pg = conn_g.alpha[k] * conn_g.C[j, k]
            s = (cmath.exp(1j * tau) * (system.u[j] - system.u[k])).real
            if s < 0:  # j prec k, i.e. k succ j
                P[j, k] = phase * pg
            else:
                P[j, k] = pg
    return P, conn_g


def verify_connection_constancy(system, geometry, u_samples, tol=DEFAULT_TOL, N=40,
                                transport_tol=None):
    """Recompute c_jk along a deformation path; report per-entry variation.

    ``u_samples`` is a sequence of deformation points; the matrix A is
    Schlesinger-transported from sample to sample and the connection matrix
    is re-extracted at each.  Returns a dict with the stacked coefficient
    matrices and the max entrywise variation.
    """
    from .deformation import transport, DeformationState

    if transport_tol is None:
        transport_tol = tol
    cut = CutPlane(eta=geometry.eta)
    state = DeformationState(u=np.asarray(u_samples[0], dtype=complex),
                             A=system.A.copy())
    mats = []
    cells = []
    from .model import is_in_cell
    for i, u_next in enumerate(u_samples):
        if i > 0:
            state = transport(state, u_next, tol=transport_tol)
        from .model import SystemPair
        sp = SystemPair(state.A, state.u)
        P, conn = connection_products(sp, cut, tol=tol, N=N, geometry=geometry)
        mats.append(conn.C)
        cells.append(is_in_cell(state.u, geometry)[0])
        last_conn = conn
    stack = np.stack(mats)
    variation = np.max(np.abs(stack - stack[0]), axis=0)
    return {
        "samples": stack,
        "max_variation": float(np.max(variation)),
        "per_entry_variation": variation,
        "in_cell": cells,
        "final": last_conn,
    }
