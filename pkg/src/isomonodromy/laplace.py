"""Laplace transform of local solutions along hairpin and half-line contours.

Columns of the sectorial fundamental solutions of dY/dz = (Lambda + A/z) Y
are produced as contour integrals of the selected/singular solutions of the
dual Fuchsian system:

* lambda'_k not integer:  (1/2 pi i) * hairpin around u_k of e^{z lam} Psi_k;
* lambda'_k natural:      residue of the pole part plus a half-line integral
  of the analytic selected series (the log part reduces to a half-line);
* lambda'_k negative int: half-line integral of the analytic Psi_k.

All returned column values are *reduced*: the exponential prefactor
e^{z u_k} is factored out so that quadrature never overflows; callers that
need the raw column multiply it back.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma as _cgamma

from .model import ANGLE_TOL, COALESCE_TOL, CutPlane, angular_distance_mod_pi
from .frobenius import FuchsianSystem, build_fuchsian, selected_solution
from .continuation import ray_continuation, StepFailure


class SingularF1(ZeroDivisionError):
    """A quotient A_ij/(u_j-u_i) is singular: vanishing conditions violated."""


class QuadratureDivergence(RuntimeError):
    """The requested z lies outside the convergence half-plane of the contour."""


# ---------------------------------------------------------------------------
# formal solution recursion
# ---------------------------------------------------------------------------


def f1(system, coalesce_tol=COALESCE_TOL, vanish_tol=1e-10):
    """Leading formal coefficient: (F_1)_ij = A_ij/(u_j-u_i), diagonal closed up.

    Coalesced pairs require a correspondingly small A_ij (vanishing
    conditions); the quotient is then set to 0.  Raises
    :class:`SingularF1` otherwise.
    """
    A = np.asarray(system.A, dtype=complex)
    u = np.asarray(system.u, dtype=complex)
    n = u.size
    F = np.zeros((n, n), dtype=complex)
    scale = max(1.0, float(np.max(np.abs(A))))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = u[j] - u[i]
            if abs(d) < coalesce_tol:
                if abs(A[i, j]) > vanish_tol * scale:
                    raise SingularF1(
                        f"u_{i} = u_{j} but |A[{i},{j}]| = {abs(A[i, j]):.2e}: "
                        "vanishing conditions violated"
                    )
                F[i, j] = 0.0
            else:
                F[i, j] = A[i, j] / d
    for i in range(n):
        F[i, i] = -sum(A[i, j] * F[j, i] for j in range(n) if j != i)
    return F


@dataclass
class FormalSolution:
    """Truncated coefficients F_l of the formal solution at z = infinity."""

    F: list
    u: np.ndarray
    lambda_prime: np.ndarray
    L: int
    free_positions: list = field(default_factory=list)
    obstructed_positions: list = field(default_factory=list)

    def series_eval(self, z):
        """I + sum F_l z^{-l} evaluated at complex z."""
        n = self.u.size
        acc = np.zeros((n, n), dtype=complex)
        for Fl in self.F[::-1]:
            acc = acc / z + Fl
        return np.eye(n) + acc / z


def formal_recursion(system, L, coalesce_tol=COALESCE_TOL, vanish_tol=1e-10,
                     free_values=None):
    """Coefficients F_1..F_L of the formal solution at z = infinity.

    For pairwise distinct u this is the plain entrywise recursion.  At a
    coalescence point the in-group entries are 0/0 limits that the
    recursion cannot see; the columns are then produced from the local
    series at the merged poles (Levelt construction for groups, ordinary
    Frobenius for singletons).  Positions with an in-group resonance
    lambda'_j - lambda'_i = l are genuine free parameters of the
    formal-solution family, reported in ``free_positions`` and filled from
    ``free_values`` (default 0); a nonzero log obstruction at a resonant
    position is reported in ``obstructed_positions``.
    """
    A = np.asarray(system.A, dtype=complex)
    u = np.asarray(system.u, dtype=complex)
    n = u.size
    lp = np.diag(A)
    if free_values is None:
        free_values = {}
    coalesced = any(
        abs(u[i] - u[j]) < coalesce_tol for i in range(n) for j in range(i + 1, n)
    )
    if coalesced:
        return _formal_at_confluence(system, L, coalesce_tol, vanish_tol, free_values)
    Fs = [f1(system, coalesce_tol, vanish_tol)]
    for k in range(2, L + 1):
        prev = Fs[-1]
        Fk = np.zeros((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                num = (A[i, i] - A[j, j] + k - 1) * prev[i, j]
                num += sum(A[i, p] * prev[p, j] for p in range(n) if p != i)
                Fk[i, j] = num / (u[j] - u[i])
        for i in range(n):
            Fk[i, i] = -sum(A[i, j] * Fk[j, i] for j in range(n) if j != i) / k
        Fs.append(Fk)
    return FormalSolution(F=Fs, u=u.copy(), lambda_prime=lp.copy(), L=L)


def _formal_at_confluence(system, L, coalesce_tol, vanish_tol, free_values):
    """Columns of F_l at a coalescence point, from merged-pole series.

    Group columns come from the Levelt normal form at the merged pole:
    b_l^{(j)} = Gamma(lambda'_j + 1) (G G_l e_j), divided by
    Gamma(lambda'_j + 1 - l); singleton columns from the ordinary local
    series.  Group exponents must be noninteger (the generic case of the
    formal-solution family).
    """
    from .frobenius import (
        ResonanceAmbiguity,
        build_fuchsian,
        levelt_at_confluence,
        selected_solution,
    )
    from .model import _group_partition

    A = np.asarray(system.A, dtype=complex)
    u = np.asarray(system.u, dtype=complex)
    n = u.size
    lp = np.diag(A)
    fs = build_fuchsian(system)
    groups, _ = _group_partition(u, coalesce_tol)
    cols = np.zeros((L, n, n), dtype=complex)
    free_positions = []
    obstructed = []
    for group in groups:
        if len(group) == 1:
            k = group[0]
            sol = selected_solution(fs, k, N=L + max(int(round(max(0.0, lp[k].real))), 0) + 2)
            fl = asymptotic_coeffs(sol, L)
            for l in range(L):
                cols[l][:, k] = fl[l]
            continue
        for j in group:
            if fs.integer_class(j) != "noninteger":
                raise ResonanceAmbiguity(
                    f"integer exponent lambda'_{j} inside a coalescing group: "
                    "gamma-shift before computing the formal family at u^c"
                )
        data = levelt_at_confluence(fs, group, N=L,
                                    free_values=free_values,
                                    vanish_tol=vanish_tol)
        free_positions.extend(data.free_parameters)
        for (l, i, j) in data.free_parameters:
            if l in data.R_parts and abs(data.R_parts[l][i, j]) > 1e-10:
                obstructed.append((l, i, j))
        for j in group:
            gam = complex(_cgamma(complex(lp[j]) + 1))
            for l in range(1, L + 1):
                b = gam * (data.G @ data.G_series[l][:, j])
                cols[l - 1][:, j] = b / complex(_cgamma(complex(lp[j]) + 1 - l))
    return FormalSolution(
        F=[cols[l] for l in range(L)], u=u.copy(), lambda_prime=lp.copy(), L=L,
        free_positions=sorted(set(free_positions)),
        obstructed_positions=sorted(set(obstructed)),
    )


# ---------------------------------------------------------------------------
# quadrature engine
# ---------------------------------------------------------------------------

_GL_NODES = {}


def _gl(n):
    if n not in _GL_NODES:
        x, w = leggauss(n)
        _GL_NODES[n] = (x, w)
    return _GL_NODES[n]


def _panel(f, a, b, order):
    x, w = _gl(order)
    t = 0.5 * (b - a) * x + 0.5 * (a + b)
    vals = f(t)
    return 0.5 * (b - a) * np.tensordot(w, vals, axes=(0, 0))


def adaptive_quad(f, a, b, tol, scale=1.0, order=24, depth=0, max_depth=14):
    """Adaptive Gauss-Legendre quadrature of a vectorized integrand.

    ``f`` maps an array of parameters to an array of values (first axis =
    parameter).  Returns (integral, error_estimate).
    """
    coarse = _panel(f, a, b, order)
    m = 0.5 * (a + b)
    fine = _panel(f, a, m, order) + _panel(f, m, b, order)
    err = float(np.max(np.abs(fine - coarse)))
    bound = tol * max(scale, float(np.max(np.abs(fine))))
    if err <= bound or depth >= max_depth:
        return fine, err
    left, el = adaptive_quad(f, a, m, tol, scale, order, depth + 1, max_depth)
    right, er = adaptive_quad(f, m, b, tol, scale, order, depth + 1, max_depth)
    return left + right, el + er


# ---------------------------------------------------------------------------
# contours
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Contour:
    """Integration contour for one Laplace column.

    ``kind`` is ``"hairpin"`` (small loop at the pole, legs along the cut),
    ``"halfline"`` (straight from the pole) or ``"group"`` (loop around the
    whole coalescence disc, legs along the pole's cut).
    """

    kind: str
    anchor: complex
    direction: float
    loop_radius: float
    t_max: float


def _direction_for(labels, h, theta, u, margin=0.05):
    """Contour direction d for computing Y at label h*mu and arg z = theta.

    d must lie in the label's eta-window (eta_{m+1}, eta_m), inside the
    convergence half-plane (pi/2 - theta, 3 pi/2 - theta), and away from
    inter-pole directions mod pi.
    """
    m = h * labels.mu
    eta_hi = 1.5 * math.pi - labels.tau_nu(m)      # eta_m
    eta_lo = 1.5 * math.pi - labels.tau_nu(m + 1)  # eta_{m+1}
    lo = max(eta_lo, 0.5 * math.pi - theta)
    hi = min(eta_hi, 1.5 * math.pi - theta)
    if not lo < hi:
        raise QuadratureDivergence(
            f"arg z = {theta:.4f} outside the sector of label {m}"
        )
    pad = min(margin * (hi - lo), 0.45 * (hi - lo))
    lo2, hi2 = lo + pad, hi - pad
    d = min(max(math.pi - theta, lo2), hi2)
    # nudge off inter-pole directions so the cuts miss the poles
    bad = [cmath.phase(a - b) for i, a in enumerate(u) for b in u[i + 1:]
           if abs(a - b) > COALESCE_TOL]
    step = (hi2 - lo2) / 64.0
    tries = 0
    while any(angular_distance_mod_pi(d, bb) < 16 * ANGLE_TOL for bb in bad) and tries < 128:
        d = lo2 + ((d - lo2 + step) % (hi2 - lo2))
        tries += 1
    return d


def _t_max(rate, power_growth, target=42.0):
    R = target / rate
    for _ in range(3):
        R = (target + power_growth * math.log(max(R, 1.0))) / rate
    return R


@dataclass
class LaplaceColumn:
    """Sampled reduced column of a sectorial solution.

    ``reduced[i]`` equals Y_k(z_i) e^{-z_i u_k}; multiply by e^{z u_k} for
    the raw column.  ``error`` is the accumulated quadrature error
    estimate, relative to the reduced scale.
    """

    k: int
    label: int
    z: np.ndarray
    reduced: np.ndarray
    pole: complex
    eta_used: float
    error: float

    def raw(self, i):
        return self.reduced[i] * cmath.exp(self.z[i] * self.pole)


def laplace_column(fs: FuchsianSystem, k, h, geometry, z_values, arg=None,
                   sols=None, tol=1e-12, N=40, contour="hairpin", cont_tol=1e-12,
                   direction=None):
    """Column k of Y_{nu+h mu} at the given z samples (reduced values).

    ``z_values`` must share one argument: one ray, whose position on the
    universal cover is ``arg`` (defaults to the principal argument; labels
    with |h| >= 2 need it spelled out).  The contour direction is chosen
    inside the label's admissible eta-window, optimal for decay at that
    argument; ``direction`` overrides it (validated against the window).
    The integrand is evaluated by the local series inside
    0.75 * validity radius and by numerical continuation outside.
    """
    z_values = np.asarray(z_values, dtype=complex)
    thetas = np.angle(z_values)
    theta = float(thetas[0]) if arg is None else float(arg)
    if np.max(np.abs(np.exp(1j * thetas) - cmath.exp(1j * theta))) > 1e-9:
        raise ValueError("all z samples must lie on the ray of the given argument")
    labels = geometry.labels
    if direction is None:
        d = _direction_for(labels, h, theta, fs.u)
    else:
        d = float(direction)
        m = h * labels.mu
        if not (1.5 * math.pi - labels.tau_nu(m + 1) < d < 1.5 * math.pi - labels.tau_nu(m)):
            raise ValueError(
                f"direction {d} outside the eta-window of label {m}"
            )
    lp = fs.lambda_prime[k]
    klass = fs.integer_class(k)
    if sols is None:
        sol = selected_solution(fs, k, CutPlane(eta=d), N)
    else:
        sol = sols[k]
    e_d = cmath.exp(1j * d)
    sigma = z_values * e_d
    if np.max(sigma.real) >= -1e-12 * np.max(np.abs(z_values)):
        raise QuadratureDivergence(
            f"Re(z e^(i d)) = {np.max(sigma.real):.3e} not negative: z outside "
            f"the convergence half-plane of direction {d:.4f}"
        )
    validity = sol.radius
    t_switch = 0.75 * validity
    growth = max(0.0, float((-lp - 1).real))
    rate_min = float(np.min(-sigma.real))
    t_hi = max(_t_max(rate_min, growth), 2 * t_switch)

    if contour == "group":
        alpha = geometry.group_of(k)
        center = geometry.group_values[alpha]
        r_loop = 1.2 * geometry.epsilon0
        # keep clear of the other groups
        for beta, val in enumerate(geometry.group_values):
            if beta != alpha:
                r_loop = min(r_loop, 0.5 * (abs(val - center) + geometry.epsilon0))
        contour_obj = Contour("group", center, d, r_loop, t_hi)
        if klass != "noninteger":
            raise ValueError("group contour is implemented for the branched class only")
        reduced, err = _group_column(fs, k, sol, contour_obj, z_values, tol, cont_tol)
        return LaplaceColumn(k=k, label=h * labels.mu, z=z_values, reduced=reduced,
                             pole=fs.u[k], eta_used=d, error=err)

    kind = "hairpin" if klass == "noninteger" else "halfline"
    r_loop = min(0.5 * validity, 2.0 / float(np.max(np.abs(z_values))))
    r_loop = max(r_loop, 1e-3 * validity)
    contour_obj = Contour(kind, fs.u[k], d, r_loop, t_hi)

    if klass == "noninteger":
        reduced, err = _hairpin_column(fs, k, sol, contour_obj, z_values, tol, cont_tol)
    elif klass == "natural":
        reduced, err = _natural_column(fs, k, sol, contour_obj, z_values, tol, cont_tol)
    else:
        reduced, err = _halfline_column(fs, k, sol, contour_obj, z_values, tol, cont_tol)
    return LaplaceColumn(k=k, label=h * labels.mu, z=z_values, reduced=reduced,
                         pole=fs.u[k], eta_used=d, error=err)


def _ray_values_factory(fs, k, sol, d, t_switch, t_hi, cont_tol, branched=True):
    """Vectorized evaluator of Psi_k (right branch) along u_k + t e^{i d}."""
    e_d = cmath.exp(1j * d)
    lp = fs.lambda_prime[k]
    rho = -lp - 1
    interp = None
    if t_hi > t_switch:
        x0 = t_switch * e_d
        psi0 = sol.eval_series(sol.b if sol.d is None else sol.d, x0)
        if branched:
            seed = psi0 * np.exp(rho * (math.log(t_switch) + 1j * d))
        else:
            seed = psi0
        interp = ray_continuation(fs, k, seed, t_switch, t_hi, d, tol=cont_tol)

    coeffs = sol.b if sol.d is None else sol.d

    def values(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.zeros((ts.size, fs.n), dtype=complex)
        inside = ts <= t_switch
        if np.any(inside):
            x = ts[inside] * e_d
            acc = np.zeros((x.size, fs.n), dtype=complex)
            for c in coeffs[::-1]:
                acc = acc * x[:, None] + c[None, :]
            if branched:
                acc = acc * np.exp(rho * (np.log(ts[inside]) + 1j * d))[:, None]
            out[inside] = acc
        if np.any(~inside):
            out[~inside] = interp(ts[~inside]).T
        return out

    return values


def _hairpin_column(fs, k, sol, contour, z_values, tol, cont_tol):
    """Class noninteger: legs with the branch-jump factor plus the small circle."""
    lp = fs.lambda_prime[k]
    rho = -lp - 1
    d = contour.direction
    e_d = cmath.exp(1j * d)
    r = contour.loop_radius
    leg_factor = e_d * (1.0 - cmath.exp(2j * math.pi * lp))
    values = _ray_values_factory(fs, k, sol, d, 0.75 * sol.radius, contour.t_max,
                                 cont_tol, branched=True)
    out = np.zeros((z_values.size, fs.n), dtype=complex)
    total_err = 0.0
    for i, z in enumerate(z_values):
        sigma = z * e_d

        def leg_integrand(ts):
            return values(ts) * np.exp(sigma * ts)[:, None]

        leg, e1 = adaptive_quad(leg_integrand, r, contour.t_max, tol)

        def circle_integrand(thetas):
            x = r * np.exp(1j * thetas)
            acc = np.zeros((thetas.size, fs.n), dtype=complex)
            for c in sol.b[::-1]:
                acc = acc * x[:, None] + c[None, :]
            w = np.exp(z * x + rho * (math.log(r) + 1j * thetas)) * (1j * x)
            return acc * w[:, None]

        circ, e2 = adaptive_quad(circle_integrand, d - 2 * math.pi, d, tol)
        out[i] = (leg_factor * leg + circ) / (2j * math.pi)
        total_err += e1 + e2
    return out, total_err / max(float(np.max(np.abs(out))), 1e-300)


def _group_column(fs, k, sol, contour, z_values, tol, cont_tol):
    """Branched class on the group contour: loop around the whole disc.

    Equivalent to the hairpin at u_k because Psi_k is holomorphic at the
    sibling poles; the circle part is evaluated by continuation around
    the disc boundary.
    """
    from scipy.integrate import solve_ivp

    lp = fs.lambda_prime[k]
    rho = -lp - 1
    d = contour.direction
    e_d = cmath.exp(1j * d)
    center = contour.anchor
    r = contour.loop_radius
    # leg junction: |u_k - center + t e^{id}| = r, positive root
    w0 = fs.u[k] - center
    bh = (w0 * np.conj(e_d)).real
    t_exit = -bh + math.sqrt(max(bh * bh - (abs(w0) ** 2 - r * r), 0.0))
    th_exit = cmath.phase(w0 + t_exit * e_d)
    leg_factor = e_d * (1.0 - cmath.exp(2j * math.pi * lp))
    values = _ray_values_factory(fs, k, sol, d, 0.75 * sol.radius, contour.t_max,
                                 cont_tol, branched=True)
    seed = values(np.array([t_exit]))[0]

    def circ_rhs(th, y):
        lam = center + r * cmath.exp(1j * th)
        dlam = 1j * r * cmath.exp(1j * th)
        return (fs.rhs(lam) @ y) * dlam

    circ = solve_ivp(circ_rhs, (th_exit, th_exit - 2 * math.pi), seed,
                     method="DOP853", rtol=max(cont_tol, 1e-13), atol=1e-3 * cont_tol,
                     dense_output=True)
    if not circ.success:
        raise StepFailure(f"group-circle continuation failed: {circ.message}")

    out = np.zeros((z_values.size, fs.n), dtype=complex)
    total_err = 0.0
    for i, z in enumerate(z_values):
        sigma = z * e_d

        def leg_integrand(ts):
            return values(ts) * np.exp(sigma * ts)[:, None]

        leg, e1 = adaptive_quad(leg_integrand, t_exit, contour.t_max, tol)

        def circle_integrand(thetas):
            vals = circ.sol(thetas).T
            lamred = center - fs.u[k] + r * np.exp(1j * thetas)
            w = np.exp(z * lamred) * (1j * r * np.exp(1j * thetas))
            return vals * w[:, None]

        circ_val, e2 = adaptive_quad(circle_integrand, th_exit - 2 * math.pi,
                                     th_exit, tol)
        out[i] = (leg_factor * leg + circ_val) / (2j * math.pi)
        total_err += e1 + e2
    return out, total_err / max(float(np.max(np.abs(out))), 1e-300)


def _halfline_column(fs, k, sol, contour, z_values, tol, cont_tol):
    """Class negative_integer: straight integral of the analytic Psi_k."""
    lp = fs.lambda_prime[k]
    rho_int = int(round((-lp - 1).real))
    d = contour.direction
    e_d = cmath.exp(1j * d)
    # Psi_k = (sum b_l x^l) x^rho with integer rho >= 0: fold the power in
    out = np.zeros((z_values.size, fs.n), dtype=complex)
    values = _ray_values_factory(fs, k, sol, d, 0.75 * sol.radius, contour.t_max,
                                 cont_tol, branched=True)
    total_err = 0.0
    for i, z in enumerate(z_values):
        sigma = z * e_d

        def integrand(ts):
            vals = values(ts)
            return vals * np.exp(sigma * ts)[:, None]

        I, e1 = adaptive_quad(integrand, 0.0, contour.t_max, tol)
        out[i] = I * e_d
        total_err += e1
    return out, total_err / max(float(np.max(np.abs(out))), 1e-300)


def _natural_column(fs, k, sol, contour, z_values, tol, cont_tol):
    """Class natural: residue of the pole part plus half-line of the log part."""
    lp = fs.lambda_prime[k]
    Nk = int(round(lp.real))
    d = contour.direction
    e_d = cmath.exp(1j * d)
    out = np.zeros((z_values.size, fs.n), dtype=complex)
    # residue of e^{z lam} psi_k(lam)/(lam-u_k)^(Nk+1), reduced by e^{-z u_k}
    for i, z in enumerate(z_values):
        acc = np.zeros(fs.n, dtype=complex)
        for l in range(Nk + 1):
            acc += sol.b[l] * z ** (Nk - l) / math.factorial(Nk - l)
        out[i] = acc
    total_err = 0.0
    if not sol.zero:
        values = _ray_values_factory(fs, k, sol, d, 0.75 * sol.radius,
                                     contour.t_max, cont_tol, branched=False)
        for i, z in enumerate(z_values):
            sigma = z * e_d

            def integrand(ts):
                return values(ts) * np.exp(sigma * ts)[:, None]

            I, e1 = adaptive_quad(integrand, 0.0, contour.t_max, tol)
            out[i] += I * e_d
            total_err += e1
    return out, total_err / max(float(np.max(np.abs(out))), 1e-300)


# ---------------------------------------------------------------------------
# asymptotic coefficients
# ---------------------------------------------------------------------------


def asymptotic_coeffs(sol, L):
    """Columns f_l^{(k)}, l = 1..L, of the formal expansion from series data.

    Exact arithmetic mapping per class:
    noninteger        f_l = b_l / Gamma(lambda' + 1 - l);
    natural           f_l = b_l / (lambda' - l)! for l <= lambda', then
                      f_l = (-1)^(l-lambda') (l-lambda'-1)! d_{l-lambda'-1};
    negative integer  f_l = (-1)^(l-lambda') (l-lambda'-1)! b_l.
    """
    lp = sol.lambda_prime_k
    n = sol.b.shape[1]
    out = np.zeros((L, n), dtype=complex)
    if sol.klass == "noninteger":
        for l in range(1, L + 1):
            out[l - 1] = sol.b[l] / complex(_cgamma(complex(lp) + 1 - l))
        return out
    r = int(round(lp.real))
    if sol.klass == "natural":
        for l in range(1, L + 1):
            if l <= r:
                out[l - 1] = sol.b[l] / math.factorial(r - l)
            else:
                if sol.zero:
                    out[l - 1] = 0.0
                else:
                    out[l - 1] = ((-1) ** (l - r)) * math.factorial(l - r - 1) * sol.d[l - r - 1]
        return out
    for l in range(1, L + 1):
        out[l - 1] = ((-1) ** (l - r)) * math.factorial(l - r - 1) * sol.b[l]
    return out


def assemble_formal(sols, L):
    """F_l matrices assembled from per-column asymptotic coefficients."""
    n = len(sols)
    cols = [asymptotic_coeffs(s, L) for s in sols]
    return [np.column_stack([cols[k][l] for k in range(n)]) for l in range(L)]


def asymptotic_fit(z_values, reduced_columns, lambda_prime, L, args=None):
    """Least-squares fit of reduced columns against I + sum F_l z^{-l}.

    ``reduced_columns[k]`` holds samples of Y_k e^{-z u_k} at ``z_values``
    on one ray; the fit removes z^{lambda'_k} using the cover argument
    (``args`` defaults to the principal argument of the samples).
    Returns (F_list, condition, residual).
    """
    from .continuation import IllConditioned

    z_values = np.asarray(z_values, dtype=complex)
    if args is None:
        args = np.angle(z_values)
    n = len(reduced_columns)
    logz = np.log(np.abs(z_values)) + 1j * np.asarray(args)
    V = np.vander(1.0 / z_values, N=L + 1, increasing=True)  # columns z^0 .. z^-L
    cond = np.linalg.cond(V)
    if cond > 4.0e15:
        raise IllConditioned(
            f"fit order L={L} too large for the sample range (condition {cond:.2e})"
        )
    F = np.zeros((L, n, n), dtype=complex)
    resid = 0.0
    for k in range(n):
        W = reduced_columns[k] * np.exp(-lambda_prime[k] * logz)[:, None]
        ek = np.zeros(n)
        ek[k] = 1.0
        target = W - ek[None, :]
        coef, res, rank, sv = np.linalg.lstsq(V[:, 1:], target, rcond=None)
        F[:, :, k] = coef
        pred = V[:, 1:] @ coef
        resid = max(resid, float(np.max(np.abs(pred - target))))
    return [F[l] for l in range(L)], float(cond), resid
