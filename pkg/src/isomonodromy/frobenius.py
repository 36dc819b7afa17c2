"""Fuchsian system B_k = -E_k(A+I) and local Frobenius series at its poles.

At each pole u_k the dual system (Lambda - lam) dPsi/dlam = (A+I) Psi has
exponents 0 (n-1 fold) and -lambda'_k - 1.  The arithmetic class of
lambda'_k = A_kk decides the local structure:

* ``noninteger``       Psi_k = psi_k(lam) (lam-u_k)^(-lambda'_k-1), branch point;
* ``negative_integer`` Psi_k analytic, the singular companion carries a log;
* ``natural``          the singular companion has a pole and a log, and the
                       analytic selected solution may degenerate to zero.

All series are produced by direct recursions in the original coordinates;
nothing here depends on the branch cut (only evaluation does).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as _cgamma

from .model import COALESCE_TOL, INTEGER_TOL, SystemPair


class ResonanceAmbiguity(ArithmeticError):
    """A local exponent recursion hit an unresolved zero divisor."""


class BadGamma(ValueError):
    """The requested gamma does not clear the integer spectrum conditions."""


@dataclass(frozen=True)
class FuchsianSystem:
    """Residue matrices B_k = -E_k(A+I) at pole locations u."""

    B: tuple
    u: np.ndarray
    lambda_prime: np.ndarray
    A: np.ndarray

    @property
    def n(self):
        return self.u.size

    def rhs(self, lam):
        """Coefficient matrix sum_k B_k/(lam - u_k) of the ODE."""
        M = np.zeros((self.n, self.n), dtype=complex)
        for k in range(self.n):
            M += self.B[k] / (lam - self.u[k])
        return M

    def min_gap(self, k):
        gaps = [abs(self.u[k] - self.u[m]) for m in range(self.n) if m != k]
        return min(gaps) if gaps else math.inf

    def validity_radius(self, k):
        """Radius within which the local series at u_k is trusted."""
        return 0.75 * self.min_gap(k)

    def integer_class(self, k, tol=INTEGER_TOL):
        lp = self.lambda_prime[k]
        r = round(lp.real)
        if abs(lp.imag) < tol and abs(lp.real - r) < tol:
            return "natural" if r >= 0 else "negative_integer"
        return "noninteger"


def build_fuchsian(system: SystemPair) -> FuchsianSystem:
    """Entrywise construction of the residue matrices B_k = -E_k(A+I)."""
    A = system.A
    n = system.n
    B = []
    for k in range(n):
        Bk = np.zeros((n, n), dtype=complex)
        Bk[k, :] = -(A[k, :] + np.eye(n)[k, :])
        B.append(Bk)
    return FuchsianSystem(
        B=tuple(B), u=system.u.copy(), lambda_prime=system.lambda_prime.copy(), A=A.copy()
    )


# ---------------------------------------------------------------------------
# series recursions at a single pole
# ---------------------------------------------------------------------------


def _local_coeffs(fs: FuchsianSystem, k: int, order: int):
    """Taylor coefficients C_p of sum_{m!=k} B_m/(lam-u_m) at lam = u_k."""
    n = fs.n
    C = [np.zeros((n, n), dtype=complex) for _ in range(order + 1)]
    for m in range(n):
        if m == k:
            continue
        a = fs.u[k] - fs.u[m]
        if abs(a) < COALESCE_TOL:
            raise ResonanceAmbiguity(
                f"poles u_{k} and u_{m} coincide; local series at a merged pole "
                "must go through the confluent Levelt construction"
            )
        inv = 1.0 / a
        for p in range(order + 1):
            C[p] += ((-1) ** p) * fs.B[m] * inv ** (p + 1)
    return C


def _row_vector(fs, k):
    """w = row k of (A+I); B_k = -e_k w^T."""
    n = fs.n
    w = -fs.B[k][k, :].copy()
    assert w.shape == (n,)
    return w


def leading_factor(lambda_prime_k, klass):
    """Normalizing constant f_k of the leading series coefficient."""
    if klass == "noninteger":
        return complex(_cgamma(complex(lambda_prime_k) + 1))
    r = round(lambda_prime_k.real)
    if klass == "negative_integer":
        return complex((-1) ** r) / math.factorial(-r - 1)
    # natural: pole part of the singular companion leads with lambda'_k!
    return float(math.factorial(r))


@dataclass
class LocalSolution:
    """Truncated Frobenius data of a selected or singular solution at u_k.

    ``b`` is the (N+1) x n array of coefficients of the psi_k factor
    (classes noninteger / negative_integer: selected solution is
    psi_k(x) x^(-lambda'_k-1); class natural: pole part of the singular
    companion).  ``d`` is the analytic selected series for class natural.
    ``phi`` is the pinned regular completion of a log-singular solution
    (classes negative_integer and natural).
    """

    k: int
    klass: str
    lambda_prime_k: complex
    pole: complex
    f_k: complex
    N: int
    radius: float
    b: np.ndarray = None
    d: np.ndarray = None
    phi: np.ndarray = None
    is_singular: bool = False
    zero: bool = False
    zero_verdict: str = ""
    analytic_completion: list = field(default_factory=list)
    residual: float = 0.0

    @property
    def rho(self):
        """Exponent of the branched factor, -lambda'_k - 1."""
        return -self.lambda_prime_k - 1

    def eval_series(self, coeffs, x):
        """Evaluate a coefficient array sum_l c_l x^l (Horner)."""
        acc = np.zeros(coeffs.shape[1], dtype=complex)
        for c in coeffs[::-1]:
            acc = acc * x + c
        return acc

    def selected_value(self, lam, cut):
        """Value of the selected solution Psi_k on the branch of ``cut``."""
        x = lam - self.pole
        if self.klass == "natural":
            if self.zero:
                return np.zeros(self.b.shape[1], dtype=complex)
            return self.eval_series(self.d, x)
        base = self.eval_series(self.b, x)
        if self.klass == "negative_integer":
            return base * x ** int(round(self.rho.real))
        a = cut.arg_from(lam, self.pole)
        return base * np.exp(self.rho * (np.log(abs(x)) + 1j * a))


def selected_solution(fs: FuchsianSystem, k: int, cut=None, N: int = 40) -> LocalSolution:
    """Normalized selected vector solution Psi_k as a truncated series.

    Classes noninteger / negative_integer fill ``b`` with the psi_k series
    (leading coefficient f_k e_k).  Class natural fills ``d`` with the
    analytic series fixed by the singular companion's normalization, plus
    ``b`` with the companion's pole part; a ``zero`` flag marks the
    degenerate case Psi_k == 0 (tolerance-based verdict).
    """
    if N < 1:
        raise ValueError("N >= 1 required")
    n = fs.n
    lp = fs.lambda_prime[k]
    klass = fs.integer_class(k)
    C = _local_coeffs(fs, k, N)
    Bk = fs.B[k]
    radius = fs.validity_radius(k)
    ek = np.eye(n, dtype=complex)[k]

    if klass in ("noninteger", "negative_integer"):
        rho = -lp - 1
        fk = leading_factor(lp, klass)
        b = np.zeros((N + 1, n), dtype=complex)
        b[0] = fk * ek
        eye = np.eye(n)
        for l in range(1, N + 1):
            rhs = np.zeros(n, dtype=complex)
            for p in range(l):
                rhs += C[p] @ b[l - 1 - p]
            M = (l + rho) * eye - Bk
            if abs(np.linalg.det(M)) < 1e-300:
                raise ResonanceAmbiguity(
                    f"singular recursion matrix at pole {k}, order {l}"
                )
            b[l] = np.linalg.solve(M, rhs)
        sol = LocalSolution(
            k=k, klass=klass, lambda_prime_k=lp, pole=fs.u[k], f_k=fk,
            N=N, radius=radius, b=b,
        )
        sol.residual = _series_residual(fs, k, sol, C)
        return sol

    # class natural: coupled pole/log recursion
    Nk = int(round(lp.real))
    rho = -lp - 1  # = -(Nk + 1)
    w = _row_vector(fs, k)
    if abs(w[k] - (Nk + 1)) > 1e-10:
        raise ResonanceAmbiguity("inconsistent diagonal entry in B_k")
    fk = leading_factor(lp, klass)
    order_b = N + Nk + 1
    Cb = _local_coeffs(fs, k, order_b)
    b = np.zeros((order_b + 1, n), dtype=complex)
    d = np.zeros((N + 1, n), dtype=complex)
    b[0] = fk * ek
    eye = np.eye(n)
    for m in range(1, Nk + 1):
        rhs = np.zeros(n, dtype=complex)
        for p in range(m):
            rhs += Cb[p] @ b[m - 1 - p]
        b[m] = np.linalg.solve((m + rho) * eye - Bk, rhs)
    # order Nk+1 fixes d_0 and the pole-part continuation jointly
    R = np.zeros(n, dtype=complex)
    for p in range(Nk + 1):
        R += Cb[p] @ b[Nk - p]
    d[0] = R.copy()
    d[0, k] = 0.0
    d[0, k] = -(w @ d[0]) / w[k]
    for l in range(1, N + 1):
        rhs = np.zeros(n, dtype=complex)
        for p in range(l):
            rhs += C[p] @ d[l - 1 - p]
        d[l] = np.linalg.solve(l * eye - Bk, rhs)
    beta = (R[k] - d[0, k]) / w[k]
    b[Nk + 1] = beta * ek  # kernel freedom pinned: off-k components zero
    for m in range(Nk + 2, order_b + 1):
        rhs = np.zeros(n, dtype=complex)
        for p in range(m):
            rhs += Cb[p] @ b[m - 1 - p]
        rhs -= d_at(d, m - Nk - 1)
        b[m] = np.linalg.solve((m + rho) * eye - Bk, rhs)
    zero, verdict = _zero_verdict(fs, k, d)
    sol = LocalSolution(
        k=k, klass=klass, lambda_prime_k=lp, pole=fs.u[k], f_k=fk,
        N=N, radius=radius, b=b[: N + 1].copy(), d=d, zero=zero, zero_verdict=verdict,
    )
    sol.residual = _series_residual(fs, k, sol, C)
    return sol


def d_at(d, l):
    return d[l] if l < d.shape[0] else np.zeros(d.shape[1], dtype=complex)


def _zero_verdict(fs, k, d, tol=1e-12):
    """Tolerance-based verdict that the analytic selected series vanishes."""
    peak = float(np.max(np.abs(d)))
    if peak > tol:
        return False, ""
    g = fs.min_gap(k)
    K = sum(np.linalg.norm(fs.B[m]) for m in range(fs.n) if m != k)
    normB = np.linalg.norm(fs.B[k])
    N = d.shape[0] - 1
    # one-step forward bound on the weighted tail of the recursion
    weighted = sum(float(np.linalg.norm(c)) * g ** l for l, c in enumerate(d))
    nxt = (K / g) * weighted / max(N + 1 - normB, 1.0)
    certified = nxt < tol
    verdict = "numerical" + ("" if certified else " (forward bound inconclusive)")
    return True, verdict


def _series_residual(fs, k, sol, C):
    """Max residual of the recursion over the computed orders (sanity metric)."""
    # The recursions are solved exactly per order; report the linear-solve
    # backward error at the last order as a cheap certificate.
    coeffs = sol.d if sol.klass == "natural" and sol.d is not None else sol.b
    l = coeffs.shape[0] - 1
    if l < 1:
        return 0.0
    rho = 0.0 if (sol.klass == "natural" and sol.d is not None) else sol.rho
    rhs = np.zeros(fs.n, dtype=complex)
    for p in range(l):
        rhs += C[p] @ coeffs[l - 1 - p]
    lhs = ((l + rho) * np.eye(fs.n) - fs.B[k]) @ coeffs[l]
    scale = max(np.max(np.abs(coeffs)), 1.0)
    return float(np.max(np.abs(lhs - rhs)) / scale)


def analytic_basis(fs: FuchsianSystem, k: int, N: int = 40):
    """Basis of solutions analytic at u_k with exponent 0.

    Returns a list of (N+1) x n coefficient arrays.  For
    lambda'_k in Z_- the continuation past the resonant order keeps only
    seeds whose obstruction functional vanishes; the kernel component of
    the resonant solve is pinned to zero.
    """
    n = fs.n
    lp = fs.lambda_prime[k]
    klass = fs.integer_class(k)
    C = _local_coeffs(fs, k, N)
    Bk = fs.B[k]
    w = _row_vector(fs, k)
    eye = np.eye(n)
    # seeds span ker(w . ) = leads of analytic solutions
    idx = [i for i in range(n) if i != k]
    seeds = []
    for i in idx:
        v = np.zeros(n, dtype=complex)
        v[i] = 1.0
        if abs(w[k]) > 1e-13:
            v[k] = -w[i] / w[k]
        seeds.append(v)
    if klass == "negative_integer":
        rho = int(round((-lp - 1).real))
    else:
        rho = None

    def propagate(seed):
        phi = np.zeros((N + 1, n), dtype=complex)
        phi[0] = seed
        for l in range(1, N + 1):
            rhs = np.zeros(n, dtype=complex)
            for p in range(l):
                rhs += C[p] @ phi[l - 1 - p]
            if rho is not None and l == rho and rho >= 1:
                obstruction = w @ rhs
                if abs(obstruction) > 1e-9 * max(1.0, float(np.max(np.abs(phi)))):
                    return None
                phi[l] = rhs / l
                phi[l, k] = 0.0
            else:
                phi[l] = np.linalg.solve(l * eye - Bk, rhs)
        return phi

    if rho is not None and rho >= 1:
        # restrict seeds to the null space of the obstruction functional
        obs = []
        for s in seeds:
            phi = np.zeros((rho, n), dtype=complex)
            phi[0] = s
            for l in range(1, rho):
                rhs = np.zeros(n, dtype=complex)
                for p in range(l):
                    rhs += C[p] @ phi[l - 1 - p]
                phi[l] = np.linalg.solve(l * eye - Bk, rhs)
            rhs = np.zeros(n, dtype=complex)
            for p in range(rho):
                rhs += C[p] @ phi[rho - 1 - p]
            obs.append(w @ rhs)
        obs = np.array(obs)
        scale = float(np.max(np.abs(obs)))
        if scale > 1e-12:
            # orthonormal basis of the null space of the 1 x m functional
            m = len(seeds)
            Q, _ = np.linalg.qr(np.column_stack([obs.conj()] + [np.eye(m)[:, i] for i in range(m)]))
            null_dirs = Q[:, 1:m]
            seeds = [sum(c * s for c, s in zip(null_dirs[:, j], seeds)) for j in range(null_dirs.shape[1])]
    out = []
    for s in seeds:
        phi = propagate(s)
        if phi is not None:
            out.append(phi)
    return out


def singular_solution(fs: FuchsianSystem, k: int, cut=None, N: int = 40) -> LocalSolution:
    """Singular companion solution at u_k with uniquely fixed singular part.

    * noninteger: alias of :func:`selected_solution`;
    * natural: pole part psi_k/(x)^(lambda'_k+1) plus log part Psi_k;
    * negative_integer: Psi_k ln(x) + phi with phi a pinned regular
      completion; the ``zero`` flag marks the exceptional case (possible
      for lambda'_k <= -2) where no singular solution exists.
    """
    klass = fs.integer_class(k)
    if klass == "noninteger":
        return selected_solution(fs, k, cut, N)
    if klass == "natural":
        sol = selected_solution(fs, k, cut, N)
        sol.is_singular = True
        return sol

    # negative integer: fix the log coefficient at the selected solution
    sel = selected_solution(fs, k, cut, N)
    n = fs.n
    lp = fs.lambda_prime[k]
    rho = int(round((-lp - 1).real))
    C = _local_coeffs(fs, k, N)
    Bk = fs.B[k]
    w = _row_vector(fs, k)
    eye = np.eye(n)
    b = sel.b  # Psi_k = sum_l b_l x^(l+rho)

    def b_shift(l):
        return b[l - rho] if 0 <= l - rho <= sel.N else np.zeros(n, dtype=complex)

    phi = np.zeros((N + 1, n), dtype=complex)
    zero = False
    verdict = ""
    if rho == 0:
        if np.linalg.norm(w) < 1e-13:
            zero = True
            verdict = "numerical (B_k = 0: pole absent)"
        else:
            # order 0 demands -B_k phi_0 = -b_0, i.e. e_k (w . phi_0) = -f_k e_k;
            # min-norm solution of w . phi_0 = -f_k
            phi[0] = w.conj() * (-sel.f_k / (w @ w.conj()))
            for l in range(1, N + 1):
                rhs = np.zeros(n, dtype=complex)
                for p in range(l):
                    rhs += C[p] @ phi[l - 1 - p]
                rhs -= b_shift(l)
                phi[l] = np.linalg.solve(l * eye - Bk, rhs)
    else:
        # affine propagation phi_l(y) to the resonant order; seed in ker(w .)
        idx = [i for i in range(n) if i != k]
        seeds = []
        for i in idx:
            v = np.zeros(n, dtype=complex)
            v[i] = 1.0
            if abs(w[k]) > 1e-13:
                v[k] = -w[i] / w[k]
            seeds.append(v)

        def chain(seed, inhomog):
            phi_loc = np.zeros((rho, n), dtype=complex)
            phi_loc[0] = seed
            for l in range(1, rho):
                rhs = np.zeros(n, dtype=complex)
                for p in range(l):
                    rhs += C[p] @ phi_loc[l - 1 - p]
                if inhomog:
                    rhs -= b_shift(l)
                phi_loc[l] = np.linalg.solve(l * eye - Bk, rhs)
            rhs = np.zeros(n, dtype=complex)
            for p in range(rho):
                rhs += C[p] @ phi_loc[rho - 1 - p]
            if inhomog:
                rhs -= b_shift(rho)
            return phi_loc, w @ rhs

        _, c0 = chain(np.zeros(n, dtype=complex), True)
        L = np.array([chain(s, False)[1] for s in seeds])
        scale = max(float(np.max(np.abs(L))), 1e-300)
        if float(np.max(np.abs(L))) < 1e-12 * max(1.0, abs(c0)):
            if abs(c0) > 1e-10:
                zero = True
                verdict = "numerical (log obstruction unreachable: trivial local monodromy)"
            y = np.zeros(len(seeds), dtype=complex)
        else:
            # min-norm solution of L . y = -c0
            y = -c0 * L.conj() / (L @ L.conj())
        if not zero:
            phi[0] = sum(yi * s for yi, s in zip(y, seeds))
            for l in range(1, N + 1):
                rhs = np.zeros(n, dtype=complex)
                for p in range(l):
                    rhs += C[p] @ phi[l - 1 - p]
                rhs -= b_shift(l)
                if l == rho:
                    resid = abs(w @ rhs) / max(1.0, float(np.max(np.abs(phi))), float(np.max(np.abs(rhs))))
                    if resid > 1e-8:
                        raise ResonanceAmbiguity(
                            f"inconsistent resonant solve at pole {k}, order {l} (residual {resid:.2e})"
                        )
                    phi[l] = rhs / l
                    phi[l, k] = 0.0
                else:
                    phi[l] = np.linalg.solve(l * eye - Bk, rhs)

    sol = LocalSolution(
        k=k, klass=klass, lambda_prime_k=lp, pole=fs.u[k], f_k=sel.f_k,
        N=N, radius=sel.radius, b=sel.b, phi=(None if zero else phi),
        is_singular=True, zero=zero, zero_verdict=verdict,
    )
    if not zero:
        # the regular completion may shift by any solution analytic at u_k:
        # the exponent-0 survivors plus the selected solution itself
        shifted = np.zeros((N + 1, n), dtype=complex)
        for l in range(sel.b.shape[0]):
            if l + rho <= N:
                shifted[l + rho] = sel.b[l]
        sol.analytic_completion = [shifted] + analytic_basis(fs, k, N)
    return sol


# ---------------------------------------------------------------------------
# Levelt data at the confluence point
# ---------------------------------------------------------------------------


def _jordan_reduce_single(fs: FuchsianSystem, j: int):
    """Reduce B_j to constant Jordan form; returns (G, T, branch).

    branch is ``"diagonal"`` (explicit column formula, lambda'_j != -1),
    ``"jordan"`` (lambda'_j = -1, nilpotent rank 1) or ``"zero"``
    (lambda'_j = -1 with a vanishing row: B_j = 0).
    """
    n = fs.n
    lp = fs.lambda_prime[j]
    A = fs.A
    G = np.eye(n, dtype=complex)
    if abs(lp + 1) > 1e-12:
        for l in range(n):
            if l != j:
                G[j, l] = -A[j, l] / (lp + 1)
        T = np.zeros((n, n), dtype=complex)
        T[j, j] = -1 - lp
        return G, T, "diagonal"
    w = _row_vector(fs, j)
    if np.linalg.norm(w) < 1e-13:
        return np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex), "zero"
    wmask = w.copy()
    wmask[j] = 0.0
    m = int(np.argmax(np.abs(wmask)))
    eye = np.eye(n, dtype=complex)
    cols = []
    for l in range(n):
        if l == j:
            cols.append(eye[j])
        elif l == m:
            cols.append(-eye[m] / w[m])
        else:
            cols.append(eye[l] - (w[l] / w[m]) * eye[m])
    G = np.column_stack(cols)
    T = np.zeros((n, n), dtype=complex)
    T[j, m] = 1.0
    return G, T, "jordan"


@dataclass
class LeveltData:
    """Levelt normal form data of the merged pole of one coalescence group."""

    group: tuple
    T: np.ndarray
    G: np.ndarray
    G_series: list
    R_parts: dict
    kappa: int
    free_parameters: list
    partial_nonresonance: bool


def levelt_at_confluence(fs_uc: FuchsianSystem, group, N: int = 20,
                         free_values=None, vanish_tol=1e-10) -> LeveltData:
    """Levelt exponents and resonant structure at a merged pole.

    ``fs_uc`` must be the Fuchsian system evaluated at u = u^c, ``group``
    the indices coalescing to one value lambda_alpha.  Runs the recursion
    for the normal-form series G_l; positions with an integer exponent gap
    T_ii - T_jj = l are reported as free parameters (defaulted to 0, or to
    the entries of ``free_values``), and the obstruction matrices R_l are
    computed there.
    """
    group = tuple(group)
    n = fs_uc.n
    lam_alpha = fs_uc.u[group[0]]
    for i in group:
        if abs(fs_uc.u[i] - lam_alpha) > COALESCE_TOL * max(1.0, abs(lam_alpha)):
            raise ValueError("group indices do not coalesce at the given point")
    for i in group:
        for j in group:
            if i != j and abs(fs_uc.A[i, j]) > vanish_tol:
                raise ValueError(
                    f"vanishing conditions violated at u^c: |A[{i},{j}]| = {abs(fs_uc.A[i, j]):.2e}"
                )
    # simultaneous reduction of the group residues (diagonalizable branch)
    G = np.eye(n, dtype=complex)
    for j in group:
        if abs(fs_uc.lambda_prime[j] + 1) < 1e-12 and np.linalg.norm(_row_vector(fs_uc, j)) > 1e-13:
            raise ResonanceAmbiguity(
                f"lambda'_{j} = -1 with nilpotent residue: the diagonal Levelt "
                "reduction does not apply to this group"
            )
        Gj, _, _ = _jordan_reduce_single(fs_uc, j)
        G = G @ Gj
    T = np.zeros(n, dtype=complex)
    for j in group:
        T[j] = -1 - fs_uc.lambda_prime[j]
    # other groups' merged residues, conjugated
    others = {}
    Ginv = np.linalg.inv(G)
    for i in range(n):
        if i in group:
            continue
        key = None
        for v in others:
            if abs(fs_uc.u[i] - v) < COALESCE_TOL * max(1.0, abs(fs_uc.u[i])):
                key = v
                break
        if key is None:
            key = fs_uc.u[i]
            others[key] = np.zeros((n, n), dtype=complex)
        others[key] += Ginv @ fs_uc.B[i] @ G

    def D_m(m):
        out = np.zeros((n, n), dtype=complex)
        for lam_beta, Db in others.items():
            out += ((-1) ** (m + 1)) / (lam_alpha - lam_beta) ** m * Db
        return out

    Dm = [None] + [D_m(m) for m in range(1, N + 1)]
    Gl = [np.eye(n, dtype=complex)]
    Rl = {}
    free = []
    if free_values is None:
        free_values = {}
    for l in range(1, N + 1):
        S = Dm[l].copy()
        for p in range(1, l):
            S += Dm[l - p] @ Gl[p]
            if (l - p) in Rl:
                S -= Gl[p] @ Rl[l - p]
        Gnew = np.zeros((n, n), dtype=complex)
        Rnew = np.zeros((n, n), dtype=complex)
        has_res = False
        for i in range(n):
            for j in range(n):
                gap = T[i] - T[j]
                if abs(gap.imag) < INTEGER_TOL and abs(gap.real - l) < INTEGER_TOL:
                    free.append((l, i, j))
                    Gnew[i, j] = free_values.get((l, i, j), 0.0)
                    Rnew[i, j] = S[i, j]
                    has_res = True
                else:
                    Gnew[i, j] = S[i, j] / (T[j] - T[i] + l)
        Gl.append(Gnew)
        if has_res:
            Rl[l] = Rnew
    gaps = [
        int(round((T[i] - T[j]).real))
        for i in range(n)
        for j in range(n)
        if abs((T[i] - T[j]).imag) < INTEGER_TOL
        and abs((T[i] - T[j]).real - round((T[i] - T[j]).real)) < INTEGER_TOL
        and round((T[i] - T[j]).real) > 0
    ]
    kappa = max(gaps) if gaps else 0
    return LeveltData(
        group=group,
        T=np.diag(T),
        G=G,
        G_series=Gl,
        R_parts=Rl,
        kappa=kappa,
        free_parameters=free,
        partial_nonresonance=(len(free) == 0),
    )


# ---------------------------------------------------------------------------
# gamma shift
# ---------------------------------------------------------------------------


def gamma_shift(system: SystemPair, gamma: float, tol=INTEGER_TOL) -> SystemPair:
    """Gauge shift A -> A - gamma I moving exponents off the integers.

    Raises :class:`BadGamma` if some shifted diagonal entry or eigenvalue
    of the shifted matrix is still an integer within tolerance.
    """
    A = system.A - gamma * np.eye(system.n)
    shifted = np.diag(A)
    for x in shifted:
        if abs(x.imag) < tol and abs(x.real - round(x.real)) < tol:
            raise BadGamma(f"shifted diagonal entry {x} is integer within tolerance")
    for ev in np.linalg.eigvals(A):
        if abs(ev.imag) < tol and abs(ev.real - round(ev.real)) < tol:
            raise BadGamma(f"shifted eigenvalue {ev} is integer within tolerance")
    return SystemPair(A, system.u)


def pick_gamma(system: SystemPair, candidates=(0.3, 0.23, 0.41, 0.17, 0.37, 0.29)):
    """First gamma from a fixed candidate list that clears the conditions."""
    last = None
    for g in candidates:
        try:
            gamma_shift(system, g)
            return g
        except BadGamma as exc:
            last = exc
    raise BadGamma(f"no candidate gamma worked: {last}")


def needs_gamma_shift(system: SystemPair, tol=INTEGER_TOL) -> bool:
    """True if some diagonal entry or eigenvalue of A is integer."""
    for x in np.concatenate([system.lambda_prime, np.linalg.eigvals(system.A)]):
        if abs(x.imag) < tol and abs(x.real - round(x.real)) < tol:
            return True
    return False
