"""Maximum channel entropy and minimum channel relative entropy solvers.

The fixed-input problem

    minimize   D(N(phi) || M(phi)) + sum_m eta_m (s_m - tr E^m N)^2
    subject to tr C^j N = q_j,  tr D^l N <= r_l,  tr_B N = 1_R,  N >= 0

is solved through its concave dual in ``(mu, nu, w, F_R)``. With
``L = 1_B (x) phi^{1/2}`` the primal is recovered as

    N(phi) = L N L = exp(-L^{-1} G L^{-1}),
    G = sum mu C + sum nu D + sum w E - 1 (x) F - L log(L M L) L,

and the dual objective is

    g = tr F + 1 - tr exp(-L^{-1} G L^{-1}) - mu.q - nu.r - w.s - sum w^2/(4 eta).

Its gradient is the vector of constraint residuals and its Hessian is the
Frechet derivative of the matrix exponential, so a damped Newton method
converges in a handful of steps on strictly feasible problems. Without a
reference channel ``M`` the objective is minus the conditional entropy.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import entropy, qcore
from .errors import DimMismatch, Infeasible, NotConverged, RankDeficientInput
from .qcore import ChoiMatrix, InputState


@dataclass
class MaxEntProblem:
    """Constraints and reference channel of a thermal channel problem.

    Attributes:
        dim_a (int): input dimension (``d_R``).
        dim_b (int): output dimension.
        equality (list): pairs ``(C, q)`` with ``C`` on ``B (x) R``.
        inequality (list): pairs ``(D, r)`` meaning ``tr D N <= r``.
        quadratic (list): triples ``(E, s, eta)`` adding ``eta (s - tr E N)^2``.
        reference (ChoiMatrix): reference channel; ``None`` means the map
            ``tr(.) 1``, i.e. plain entropy maximization.
    """

    dim_a: int
    dim_b: int
    equality: list = field(default_factory=list)
    inequality: list = field(default_factory=list)
    quadratic: list = field(default_factory=list)
    reference: ChoiMatrix = None

    def __post_init__(self):
        d = self.dim_a * self.dim_b

        def op(X):
            X = qcore.hermitize(qcore.check_hermitian(X, tol=1e-10))
            if X.shape[0] != d:
                raise DimMismatch(f"constraint operator of size {X.shape[0]}, expected {d}")
            return X

        self.equality = [(op(C), float(q)) for C, q in self.equality]
        self.inequality = [(op(D), float(r)) for D, r in self.inequality]
        quad = []
        for E, s, eta in self.quadratic:
            if eta < 0:
                raise ValueError("quadratic weights must be nonnegative")
            quad.append((op(E), float(s), float(eta)))
        self.quadratic = quad
        if self.reference is not None:
            if (self.reference.dim_b, self.reference.dim_r) != (self.dim_b, self.dim_a):
                raise DimMismatch("reference channel has the wrong dimensions")

    @property
    def dim(self):
        return self.dim_a * self.dim_b


@dataclass
class KktReport:
    """Residuals of the optimality conditions, recomputed from a solution."""

    exp_form_residual: float
    tp_residual: float
    constraint_residuals: list
    G_min_eigenvalue: float
    slackness_residuals: list
    w_consistency_residuals: list
    entropy_identity_residual: float
    y_support_residual: float = 0.0
    nu_min: float = 0.0

    def max_residual(self):
        vals = [self.exp_form_residual, self.tp_residual, self.entropy_identity_residual,
                self.y_support_residual, max(0.0, -self.nu_min)]
        vals += list(self.constraint_residuals) + list(self.slackness_residuals)
        vals += list(self.w_consistency_residuals)
        return float(max(vals))

    def ok(self, tol=1e-6, g_tol=1e-8):
        return self.max_residual() <= tol and self.G_min_eigenvalue >= -g_tol

    def to_dict(self):
        return {
            "exp_form_residual": self.exp_form_residual,
            "tp_residual": self.tp_residual,
            "constraint_residuals": list(self.constraint_residuals),
            "G_min_eigenvalue": self.G_min_eigenvalue,
            "slackness_residuals": list(self.slackness_residuals),
            "w_consistency_residuals": list(self.w_consistency_residuals),
            "entropy_identity_residual": self.entropy_identity_residual,
            "y_support_residual": self.y_support_residual,
            "nu_min": self.nu_min,
        }


@dataclass
class ThermalSolution:
    """Optimal channel with its dual certificate.

    ``achieved`` is the value of the minimization objective (relative
    entropy plus quadratic losses). For problems without a reference channel
    ``entropy`` holds the attained conditional entropy ``S_phi(N)``.
    """

    choi: ChoiMatrix
    mu: np.ndarray
    nu: np.ndarray
    w: np.ndarray
    F_R: np.ndarray
    S_BR: np.ndarray
    Y_BR: np.ndarray
    G_BR: np.ndarray
    phi: InputState
    achieved: float
    residuals: KktReport = None
    entropy: float = None
    degenerate_input: bool = False
    converged: bool = True
    iterations: int = 0
    phi_residual: float = None
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the solvers.

    Attributes:
        tol (float): acceptance tolerance on every KKT residual.
        inner_tol (float): Newton stopping tolerance on the residuals.
        max_iter (int): Newton iteration cap.
        regularize (bool): regularize rank-deficient inputs instead of raising.
        reg_eps (tuple): regularization ladder for rank-deficient inputs.
        rank_tol (float): eigenvalues of ``phi`` below this count as zero.
        n_starts (int): multi-starts of the outer search over ``phi``.
        seed (int): seed of the random starts.
        outer_eps (float): mixing with ``I/d`` during the outer search.
        degenerate_tol (float): eigenvalue threshold that flags a rank
            deficient optimal input.
        phi_tol (float): tolerance of the stationarity residual of ``phi``.
        use_symmetry (bool): restrict the outer search using detected symmetries.
        outer_gtol (float): gradient tolerance of the outer search.
        outer_maxiter (int): iteration cap per start of the outer search.
    """

    tol: float = 1e-6
    inner_tol: float = 1e-11
    max_iter: int = 300
    regularize: bool = True
    reg_eps: tuple = (1e-4, 1e-6, 1e-8)
    rank_tol: float = 1e-9
    n_starts: int = 8
    seed: int = 0
    outer_eps: float = 1e-7
    degenerate_tol: float = 1e-6
    phi_tol: float = 1e-4
    use_symmetry: bool = True
    outer_gtol: float = 1e-9
    outer_maxiter: int = 400


# ---------------------------------------------------------------------------
# helpers


def hermitian_basis(d):
    """Orthonormal (Hilbert-Schmidt) basis of Hermitian ``d x d`` matrices."""
    basis = []
    for i in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[i, i] = 1
        basis.append(E)
    for i in range(d):
        for j in range(i + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = E[j, i] = 1 / np.sqrt(2)
            basis.append(E)
            E = np.zeros((d, d), dtype=complex)
            E[i, j], E[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            basis.append(E)
    return basis


def _expm_frechet_weights(x):
    """Divided differences ``(e^xi - e^xj)/(xi - xj)`` (``e^xi`` on the diagonal)."""
    xi, xj = x[:, None], x[None, :]
    dx = xi - xj
    small = np.abs(dx) < 1e-9
    safe = np.where(small, 1.0, dx)
    G = np.exp(xj) * np.expm1(dx) / safe
    mid = np.exp(0.5 * (xi + xj))
    return np.where(small, mid, G)


def _log_reference(problem, L_full, support_tol=1e-14):
    """``log(L M L)``, or ``1 (x) log phi`` without a reference."""
    d_b = problem.dim_b
    if problem.reference is None:
        phi = L_full[:problem.dim_a, :problem.dim_a] @ L_full[:problem.dim_a, :problem.dim_a]
        return np.kron(np.eye(d_b), qcore.mat_fn_hermitian(phi, "log", support_tol))
    return qcore.mat_fn_hermitian(L_full @ problem.reference.op @ L_full, "log", support_tol)


class _Dual:
    """Dual objective in the variables ``theta = (mu, nu, w, f)``.

    ``f`` are coordinates of ``tilde F = phi^{-1/2} F phi^{-1/2}`` in an
    orthonormal Hermitian basis; this keeps the Hessian well scaled.
    """

    def __init__(self, problem, phi):
        self.problem = problem
        self.phi = phi
        d_a, d_b = problem.dim_a, problem.dim_b
        self.L = qcore.psd_sqrt(phi)
        self.Linv = qcore.mat_fn_hermitian(phi, "invsqrt", support_tol=0.0)
        Lf = np.kron(np.eye(d_b), self.L)
        Li = np.kron(np.eye(d_b), self.Linv)
        self.Lfull = Lf
        self.Z0 = _log_reference(problem, Lf)
        A, b, quad, nonneg = [], [], [], []
        for C, q in problem.equality:
            A.append(-Li @ C @ Li); b.append(-q); quad.append(0.0); nonneg.append(False)
        for D, r in problem.inequality:
            A.append(-Li @ D @ Li); b.append(-r); quad.append(0.0); nonneg.append(True)
        self.n_eq, self.n_in = len(problem.equality), len(problem.inequality)
        self.w_index = []
        for E, s, eta in problem.quadratic:
            if eta > 0:
                self.w_index.append(len(A))
                A.append(-Li @ E @ Li); b.append(-s); quad.append(1.0 / (4 * eta)); nonneg.append(False)
        self.basis = hermitian_basis(d_a)
        self.f0 = len(A)
        for P in self.basis:
            A.append(np.kron(np.eye(d_b), P)); b.append(np.trace(phi @ P).real); quad.append(0.0)
            nonneg.append(False)
        self.A = np.array(A)
        self.b = np.array(b)
        self.quad = np.array(quad)
        self.nonneg = np.array(nonneg)
        # each A_a is Hermitian; keep the flattened form for the Hessian
        self.n = len(b)

    def exponent(self, theta):
        return self.Z0 + np.tensordot(theta, self.A, axes=1)

    def value(self, theta):
        x = np.linalg.eigvalsh(qcore.hermitize(self.exponent(theta)))
        return float(self.b @ theta + 1.0 - np.sum(np.exp(x)) - self.quad @ theta**2)

    def evaluate(self, theta, hessian=True):
        Z = qcore.hermitize(self.exponent(theta))
        x, U = np.linalg.eigh(Z)
        ex = np.exp(x)
        X = (U * ex) @ U.conj().T
        trXA = np.real(np.einsum("ij,aji->a", X, self.A))
        grad = self.b - trXA - 2 * self.quad * theta
        g = float(self.b @ theta + 1.0 - ex.sum() - self.quad @ theta**2)
        if not hessian:
            return g, grad, None, X
        At = np.einsum("ki,akl,lj->aij", U.conj(), self.A, U)
        W = At * np.sqrt(_expm_frechet_weights(x))[None]
        Wf = W.reshape(self.n, -1)
        H = -np.real(Wf.conj() @ Wf.T) - np.diag(2 * self.quad)
        return g, grad, H, X

    def split(self, theta):
        mu = theta[: self.n_eq]
        nu = theta[self.n_eq : self.n_eq + self.n_in]
        w = np.zeros(len(self.problem.quadratic))
        for m, idx in enumerate(self.w_index):
            w[m] = theta[idx]
        Ft = sum(c * P for c, P in zip(theta[self.f0 :], self.basis))
        F = self.L @ Ft @ self.L
        return mu, nu, w, qcore.hermitize(F)

    def choi(self, X):
        Li = np.kron(np.eye(self.problem.dim_b), self.Linv)
        return qcore.hermitize(Li @ X @ Li)

    def residual(self, theta, N):
        """Largest violation in the units of the primal problem."""
        p = self.problem
        res = [np.linalg.norm(qcore.partial_trace(N, p.dim_b, p.dim_a) - np.eye(p.dim_a))]
        res += [abs(np.trace(C @ N).real - q) for C, q in p.equality]
        nu = theta[self.n_eq : self.n_eq + self.n_in]
        for (D, r), v in zip(p.inequality, nu):
            t = np.trace(D @ N).real
            res += [max(0.0, t - r), abs(v * (r - t))]
        for idx, (E, s, eta) in zip(self.w_index, [q for q in p.quadratic if q[2] > 0]):
            res.append(abs(theta[idx] - 2 * eta * (np.trace(E @ N).real - s)))
        return float(max(res))


def _newton(dual, theta0, inner_tol, max_iter):
    """Projected damped Newton ascent on the dual; returns ``(theta, X, info)``."""
    theta = np.array(theta0, dtype=float)
    theta[dual.nonneg] = np.maximum(theta[dual.nonneg], 0.0)
    best_res = np.inf
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            g, grad, H, X = dual.evaluate(theta)
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(grad))):
            status = "overflow"
            break
        N = dual.choi(X)
        res = dual.residual(theta, N)
        best_res = min(best_res, res)
        if res <= inner_tol:
            status = "converged"
            break
        if not np.isfinite(g) or g > 1e12:
            status = "unbounded"
            break
        active = dual.nonneg & (theta <= 0) & (grad < 0)
        free = ~active
        Hf = -H[np.ix_(free, free)]
        gf = grad[free]
        s = 1.0 / np.sqrt(np.maximum(np.diag(Hf), 1e-300))
        Ms = Hf * s[:, None] * s[None, :]
        ev, V = np.linalg.eigh(Ms)
        keep = ev > 1e-13 * max(ev[-1], 1e-300)
        step_f = s * (V[:, keep] @ ((V[:, keep].T @ (s * gf)) / ev[keep]))
        step = np.zeros_like(theta)
        step[free] = step_f
        slope = grad @ step
        if not np.isfinite(slope) or slope <= 0:
            step = np.where(active, 0.0, grad)
            slope = grad @ step
        t = 1.0
        accepted = False
        for _ in range(60):
            trial = theta + t * step
            trial[dual.nonneg] = np.maximum(trial[dual.nonneg], 0.0)
            with np.errstate(over="ignore", invalid="ignore"):
                gt = dual.value(trial)
            if np.isfinite(gt) and gt >= g + 1e-4 * (grad @ (trial - theta)) - 1e-15 * max(1.0, abs(g)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            status = "stalled"
            break
        if np.max(np.abs(trial - theta)) == 0.0:
            status = "stalled"
            break
        theta = trial
    g, grad, _, X = dual.evaluate(theta, hessian=False)
    res = dual.residual(theta, dual.choi(X))
    if res <= inner_tol:
        status = "converged"
    return theta, X, {"status": status, "iterations": it, "residual": res, "dual_value": g}


def _dual_parts(problem, mu, nu, w, F):
    """``(full objective, relative-entropy part)`` from the dual variables."""
    base = np.trace(F).real
    base -= sum(m * q for m, (_, q) in zip(mu, problem.equality))
    base -= sum(v * r for v, (_, r) in zip(nu, problem.inequality))
    full = base
    rel = base
    for wm, (E, s, eta) in zip(w, problem.quadratic):
        if eta > 0:
            full -= wm * s + wm**2 / (4 * eta)
            rel -= wm * s + wm**2 / (2 * eta)
    return float(full), float(rel)


def g_operator(problem, phi, mu, nu, w, F, S=None):
    """``G_BR`` of the exponential form for the given dual variables."""
    d_b = problem.dim_b
    G = -np.kron(np.eye(d_b), F)
    for m, (C, _) in zip(mu, problem.equality):
        G = G + m * C
    for v, (D, _) in zip(nu, problem.inequality):
        G = G + v * D
    for wm, (E, _, _) in zip(w, problem.quadratic):
        G = G + wm * E
    L = np.kron(np.eye(d_b), qcore.psd_sqrt(phi))
    G = G - L @ _log_reference(problem, L) @ L
    if S is not None:
        G = G - S
    return qcore.hermitize(G)


# ---------------------------------------------------------------------------
# solvers


def _default_theta(dual, problem):
    theta = np.zeros(dual.n)
    if problem.reference is None:
        # completely depolarizing channel: tilde F = -log(d_B) 1
        theta[dual.f0 : dual.f0 + problem.dim_a] = -np.log(problem.dim_b)
    return theta


def _solve_full_rank(problem, phi, opts, theta0=None):
    dual = _Dual(problem, phi)
    default = _default_theta(dual, problem)
    if theta0 is None or len(theta0) != dual.n:
        theta0 = default
    else:
        # a warm start from another input may be far off; keep the better one
        with np.errstate(all="ignore"):
            v0 = dual.value(theta0)
        if not np.isfinite(v0) or v0 < dual.value(default):
            theta0 = default
    theta, X, info = _newton(dual, theta0, opts.inner_tol, opts.max_iter)
    mu, nu, w, F = dual.split(theta)
    N = dual.choi(X)
    full, rel = _dual_parts(problem, mu, nu, w, F)
    G = g_operator(problem, phi, mu, nu, w, F)
    zero = np.zeros_like(N)
    sol = ThermalSolution(
        choi=ChoiMatrix(N, problem.dim_b, problem.dim_a), mu=mu, nu=nu, w=w, F_R=F, S_BR=zero, Y_BR=zero,
        G_BR=G, phi=InputState(phi), achieved=full, entropy=-rel if problem.reference is None else None,
        iterations=info["iterations"], info=dict(info, theta=theta),
    )
    return sol


def _finish(sol, problem, opts, raise_errors=True):
    sol.residuals = kkt_verify(sol, problem)
    sol.converged = sol.residuals.ok(opts.tol)
    if not sol.converged and raise_errors:
        cons = list(sol.residuals.constraint_residuals) + [sol.residuals.tp_residual]
        if sol.info.get("status") == "unbounded" or max(cons) > 1e-4:
            raise Infeasible(f"constraint residual floor {max(cons):.3e} not reachable")
        raise NotConverged(f"KKT residual {sol.residuals.max_residual():.3e} above {opts.tol:g}", best=sol)
    return sol


def solve_fixed_input(problem, phi, opts=None, theta0=None, raise_errors=True):
    """Optimal channel for a fixed input ``phi_R``.

    Args:
        problem (MaxEntProblem): constraints and reference.
        phi (InputState or ndarray): input state on R.
        opts (SolverOptions): tolerances.
        theta0 (ndarray): optional warm start of the dual variables.
        raise_errors (bool): raise ``Infeasible``/``NotConverged`` when the
            certificate fails; otherwise return the best solution found.

    Returns:
        ThermalSolution: the channel with its certificate and KKT report.
    """
    opts = opts or SolverOptions()
    phi = qcore.input_state(phi).phi
    if phi.shape[0] != problem.dim_a:
        raise DimMismatch("input state does not act on R")
    w, v = qcore.eigh(phi)
    if w[0] > opts.rank_tol:
        return _finish(_solve_full_rank(problem, phi, opts, theta0), problem, opts, raise_errors)
    if not opts.regularize:
        raise RankDeficientInput(f"input has eigenvalue {w[0]:.3e}")
    return _finish(_solve_regularized(problem, phi, opts, theta0), problem, opts, raise_errors)


def _solve_regularized(problem, phi, opts, theta0=None):
    """Limit of full-rank solutions ``phi_eps = (1-eps) phi + eps I/d``."""
    w, v = qcore.eigh(phi)
    w = np.where(w > opts.rank_tol, w, 0.0)
    phi = qcore.hermitize((v * (w / w.sum())) @ v.conj().T)
    d = problem.dim_a
    sols = []
    theta = theta0
    for eps in opts.reg_eps:
        phi_e = (1 - eps) * phi + eps * np.eye(d) / d
        s = _solve_full_rank(problem, phi_e, opts, theta)
        theta = s.info["theta"]
        sols.append((eps, s))
    (e1, s1), (e2, s2) = sols[-2], sols[-1]
    c = e2 / (e1 - e2)
    N0 = qcore.hermitize(s2.choi.op + c * (s2.choi.op - s1.choi.op))
    # remove tiny negative eigenvalues created by the extrapolation
    ev, U = np.linalg.eigh(N0)
    if ev[0] < 0:
        N0 = qcore.hermitize((U * np.clip(ev, 0, None)) @ U.conj().T)
    full0 = s2.achieved + c * (s2.achieved - s1.achieved)
    Pi = np.kron(np.eye(problem.dim_b), qcore.support_projector(phi, opts.rank_tol))
    Y = qcore.hermitize(N0 - Pi @ N0 @ Pi)
    mu, nu, wv = s2.mu, s2.nu, s2.w
    F = s2.F_R
    G = g_operator(problem, phi, mu, nu, wv, F)
    _, rel = _dual_parts(problem, mu, nu, wv, F)
    rel1 = _dual_parts(problem, s1.mu, s1.nu, s1.w, s1.F_R)[1]
    rel0 = rel + c * (rel - rel1)
    return ThermalSolution(
        choi=ChoiMatrix(N0, problem.dim_b, problem.dim_a), mu=mu, nu=nu, w=wv, F_R=F,
        S_BR=np.zeros_like(N0), Y_BR=Y, G_BR=G, phi=InputState(phi), achieved=float(full0),
        entropy=-float(rel0) if problem.reference is None else None, degenerate_input=True,
        iterations=sum(s.iterations for _, s in sols),
        info=dict(s2.info, extrapolation_gap=float(np.linalg.norm(s2.choi.op - s1.choi.op)),
                  eps=list(opts.reg_eps)),
    )


def _outer_restriction(problem, opts):
    if not opts.use_symmetry:
        return "full"
    sym = symmetry_reduce(problem)
    if sym["bell_input"]:
        return "fixed"
    if sym["dephasing_R"]:
        return "diagonal"
    return "full"


def maximize_over_inputs(problem, opts=None, starts=None, restrict=None):
    """Outer search ``max_phi`` of the fixed-input optimum.

    By the minimax interchange this equals the optimal value of the
    channel-level problem. Returns ``(phi, value, iterations)``.
    """
    opts = opts or SolverOptions()
    d = problem.dim_a
    restrict = restrict or _outer_restriction(problem, opts)
    cache = {}

    def value(phi):
        phi_r = (1 - opts.outer_eps) * phi + opts.outer_eps * np.eye(d) / d
        s = _solve_full_rank(problem, phi_r, opts, cache.get("theta"))
        if s.info["residual"] < 1e-6:
            cache["theta"] = s.info["theta"]
        return s.achieved

    phi, val, nit, _ = entropy.optimize_over_inputs(value, d, maximize=True, n_starts=opts.n_starts,
                                                    seed=opts.seed, restrict=restrict, starts=starts,
                                                    gtol=opts.outer_gtol, maxiter=opts.outer_maxiter)
    return phi, val, nit


def solve_thermal_channel(problem, opts=None, starts=None, raise_errors=True):
    """Channel-level optimum: the thermal channel (or minimum relative entropy channel).

    The optimal input is found by an outer multi-start search over ``phi_R``
    with an inner ``solve_fixed_input``. If the optimal input is rank
    deficient the solution is the regularized limit and
    ``degenerate_input`` is set.
    """
    opts = opts or SolverOptions()
    phi, _, nit = maximize_over_inputs(problem, opts, starts)
    ev, U = qcore.eigh(phi)
    sol = None
    if ev[0] < opts.degenerate_tol:
        snapped = np.where(ev < opts.degenerate_tol, 0.0, ev)
        phi_s = qcore.hermitize((U * (snapped / snapped.sum())) @ U.conj().T)
        try:
            cand = solve_fixed_input(problem, phi_s, opts, raise_errors=False)
            ref = solve_fixed_input(problem, phi, opts, raise_errors=False) if ev[0] > opts.rank_tol else None
            if ref is None or cand.achieved >= ref.achieved - 1e-9:
                sol = cand
        except Exception:  # fall back to the unsnapped input
            sol = None
    if sol is None:
        sol = solve_fixed_input(problem, phi, opts, raise_errors=False)
    sol.iterations += nit
    if problem.reference is None and not sol.degenerate_input:
        sol.phi_residual = entropy.stationarity_residual(sol.choi, sol.phi)
    return _finish(sol, problem, opts, raise_errors)


# ---------------------------------------------------------------------------
# certificate verification


def kkt_verify(sol, problem, support_tol=1e-9):
    """Recompute every optimality residual of ``sol`` from scratch.

    The exponential form is checked on the support of ``phi_R``; off that
    support the Choi matrix is the free operator ``Y_BR``.
    """
    d_a, d_b = problem.dim_a, problem.dim_b
    phi = sol.phi.phi
    N = sol.choi.op
    lam, V = np.linalg.eigh(phi)
    on = lam > support_tol
    Vs, ls = V[:, on], lam[on]
    sq = (V * np.sqrt(np.clip(lam, 0, None))) @ V.conj().T
    Lf = np.kron(np.eye(d_b), sq)
    X = Lf @ N @ Lf
    P = np.kron(np.eye(d_b), Vs)
    K = np.kron(np.eye(d_b), np.diag(1 / np.sqrt(ls)))
    G = g_operator(problem, phi, sol.mu, sol.nu, sol.w, sol.F_R, sol.S_BR)
    Gs = K @ (P.conj().T @ G @ P) @ K
    x, U = np.linalg.eigh(qcore.hermitize(Gs))
    expo = (U * np.exp(-x)) @ U.conj().T
    Xs = P.conj().T @ X @ P
    exp_res = float(np.linalg.norm(Xs - expo))
    tp = float(np.linalg.norm(qcore.partial_trace(N, d_b, d_a) - np.eye(d_a)))
    cons = [abs(np.trace(C @ N).real - q) for C, q in problem.equality]
    slack = []
    for (D, r), v in zip(problem.inequality, sol.nu):
        t = np.trace(D @ N).real
        cons.append(max(0.0, t - r))
        slack.append(abs(v * (r - t)))
    wres = []
    for (E, s, eta), wm in zip(problem.quadratic, sol.w):
        wres.append(abs(wm - 2 * eta * (np.trace(E @ N).real - s)))
    Gp = P.conj().T @ G @ P
    gmin = float(np.linalg.eigvalsh(qcore.hermitize(Gp))[0])
    # primal relative-entropy part against the dual formula
    if problem.reference is None:
        primal = -entropy.channel_entropy_at_input(sol.choi, sol.phi)
    else:
        primal = qcore.relative_entropy(X, Lf @ problem.reference.op @ Lf)
    _, rel = _dual_parts(problem, sol.mu, sol.nu, sol.w, sol.F_R)
    ident = abs(primal - rel) if np.isfinite(primal) else np.inf
    Pi = P @ P.conj().T
    yres = float(np.linalg.norm(Pi @ sol.Y_BR @ Pi))
    nu_min = float(np.min(sol.nu)) if len(sol.nu) else 0.0
    return KktReport(exp_res, tp, cons, gmin, slack, wres, float(ident), yres, nu_min)


def strict_feasibility_hint(problem):
    """Heuristic strict-feasibility test.

    Finds the Hermitian operator closest to the completely depolarizing Choi
    matrix within the affine space of the equality and trace-preserving
    constraints, and returns its smallest eigenvalue (positive means a
    strictly feasible point was found).
    """
    d_a, d_b = problem.dim_a, problem.dim_b
    d = d_a * d_b
    basis = hermitian_basis(d)
    rows, rhs = [], []
    for C, q in problem.equality:
        rows.append([np.trace(C @ B).real for B in basis]); rhs.append(q)
    for P in hermitian_basis(d_a):
        T = np.kron(np.eye(d_b), P)
        rows.append([np.trace(T @ B).real for B in basis]); rhs.append(np.trace(P).real)
    A = np.array(rows)
    x0 = np.array([np.trace(B).real / d_b for B in basis])
    dx = np.linalg.lstsq(A, np.array(rhs) - A @ x0, rcond=None)[0]
    x = x0 + dx
    if np.linalg.norm(A @ x - np.array(rhs)) > 1e-8:
        return -np.inf
    N = sum(c * B for c, B in zip(x, basis))
    return float(np.linalg.eigvalsh(qcore.hermitize(N))[0])


# ---------------------------------------------------------------------------
# symmetries


def _pinch(X, d_b, d_a, which):
    T = X.reshape(d_b, d_a, d_b, d_a)
    out = np.zeros_like(T)
    if which == "R":
        for k in range(d_a):
            out[:, k, :, k] = T[:, k, :, k]
    else:
        for k in range(d_b):
            out[k, :, k, :] = T[k, :, k, :]
    return out.reshape(X.shape)


def _bell_pinch(X, d):
    from .exemplars import bell_projectors

    return sum(P @ X @ P for P in bell_projectors(d))


def _affine_invariant(problem, transform, tol):
    """Whether every ``T(C^j)`` lies in the affine span of the constraints.

    Checks ``T(C^j) = sum_k a_jk C^k + 1 (x) Y_j`` with
    ``q_j = sum_k a_jk q_k + tr Y_j``, which leaves the feasible set invariant.
    """
    d_a, d_b = problem.dim_a, problem.dim_b
    if not problem.equality:
        return True
    cols = [C.ravel() for C, _ in problem.equality]
    qs = [q for _, q in problem.equality]
    for P in hermitian_basis(d_a):
        cols.append(np.kron(np.eye(d_b), P).ravel())
        qs.append(np.trace(P).real)
    A = np.array(cols).T
    A_ri = np.vstack([A.real, A.imag])
    for C, q in problem.equality:
        t = transform(C).ravel()
        coef = np.linalg.lstsq(A_ri, np.concatenate([t.real, t.imag]), rcond=None)[0]
        if np.linalg.norm(A @ coef - t) > tol * max(1.0, np.linalg.norm(t)):
            return False
        if abs(coef @ np.array(qs) - q) > tol * max(1.0, abs(q)):
            return False
    return True


def symmetry_reduce(problem, tol=1e-10):
    """Detect symmetries from a fixed catalogue.

    The catalogue is canonical-basis dephasing on R, dephasing on B, and
    Bell-basis pinching (for ``d_A = d_B``). A symmetry is reported when every
    constraint operator is invariant, or (for equality constraints) when the
    transformed constraints stay in the affine span of the constraint set.
    Inequality, quadratic and reference terms must be invariant one by one.

    Returns:
        dict: flags ``dephasing_R``, ``dephasing_B``, ``bell`` and
        ``bell_input`` (Bell symmetry usable to fix ``phi = I/d``).
    """
    d_a, d_b = problem.dim_a, problem.dim_b
    transforms = {
        "dephasing_R": lambda X: _pinch(X, d_b, d_a, "R"),
        "dephasing_B": lambda X: _pinch(X, d_b, d_a, "B"),
    }
    if d_a == d_b:
        transforms["bell"] = lambda X: _bell_pinch(X, d_a)
    ops_other = [D for D, _ in problem.inequality] + [E for E, _, _ in problem.quadratic]
    if problem.reference is not None:
        ops_other.append(problem.reference.op)
    report = {}
    for name, T in transforms.items():
        others = all(np.linalg.norm(T(X) - X) <= tol * max(1.0, np.linalg.norm(X)) for X in ops_other)
        per_op = all(np.linalg.norm(T(C) - C) <= tol * max(1.0, np.linalg.norm(C)) for C, _ in problem.equality)
        report[name] = bool(others and (per_op or _affine_invariant(problem, T, 1e-9)))
    report.setdefault("bell", False)
    report["bell_input"] = report["bell"]
    return report


# ---------------------------------------------------------------------------
# estimator interface


class ThermalChannelSolver(BaseEstimator, TransformerMixin):
    """Estimator wrapper: ``fit(problem)`` solves, ``transform(states)`` applies the channel.

    Args:
        fixed_input (ndarray): solve at this input instead of optimizing ``phi``.
        tol (float): KKT acceptance tolerance.
        n_starts (int): multi-start count of the outer search.
        seed (int): seed for random starts.
    """

    def __init__(self, fixed_input=None, tol=1e-6, n_starts=8, seed=0):
        self.fixed_input = fixed_input
        self.tol = tol
        self.n_starts = n_starts
        self.seed = seed

    def fit(self, X, y=None):
        if not isinstance(X, MaxEntProblem):
            raise TypeError("fit expects a MaxEntProblem")
        opts = SolverOptions(tol=self.tol, n_starts=self.n_starts, seed=self.seed)
        if self.fixed_input is None:
            self.solution_ = solve_thermal_channel(X, opts)
        else:
            self.solution_ = solve_fixed_input(X, self.fixed_input, opts)
        self.choi_ = self.solution_.choi
        self.mu_ = self.solution_.mu
        self.F_R_ = self.solution_.F_R
        return self

    def transform(self, X):
        check_is_fitted(self, "choi_")
        X = np.asarray(X, dtype=complex)
        if X.ndim == 2:
            return qcore.apply_channel(self.choi_, X)
        return np.array([qcore.apply_channel(self.choi_, x) for x in X])

    def score(self, X=None, y=None):
        """Attained objective value (entropy for plain max-entropy problems)."""
        check_is_fitted(self, "choi_")
        s = self.solution_
        return s.entropy if s.entropy is not None else -s.achieved


# ---------------------------------------------------------------------------
# JSON exchange


def problem_to_json(problem, phi=None):
    out = {
        "dimA": problem.dim_a,
        "dimB": problem.dim_b,
        "equality": [{"C": qcore.matrix_to_json(C), "q": q} for C, q in problem.equality],
        "inequality": [{"D": qcore.matrix_to_json(D), "r": r} for D, r in problem.inequality],
        "quadratic": [{"E": qcore.matrix_to_json(E), "s": s, "eta": eta} for E, s, eta in problem.quadratic],
        "reference": None if problem.reference is None else qcore.choi_to_json(problem.reference),
    }
    if phi is not None:
        out["phi"] = qcore.matrix_to_json(phi)
    return out


def problem_from_json(obj):
    """Parse a problem file; returns ``(problem, phi)`` with ``phi`` None unless fixed."""
    try:
        m = qcore.matrix_from_json
        ref = obj.get("reference")
        problem = MaxEntProblem(
            int(obj["dimA"]), int(obj["dimB"]),
            equality=[(m(c["C"]), c["q"]) for c in obj.get("equality", [])],
            inequality=[(m(c["D"]), c["r"]) for c in obj.get("inequality", [])],
            quadratic=[(m(c["E"]), c["s"], c["eta"]) for c in obj.get("quadratic", [])],
            reference=None if ref is None else qcore.choi_from_json(ref))
        phi = m(obj["phi"]) if obj.get("phi") is not None else None
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValueError(f"malformed problem file: {exc!r}") from exc
    return problem, phi


def _floats(x):
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


def solution_to_json(sol):
    m = qcore.matrix_to_json
    return {
        "choi": qcore.choi_to_json(sol.choi),
        "mu": _floats(sol.mu), "nu": _floats(sol.nu), "w": _floats(sol.w),
        "F_R": m(sol.F_R), "S_BR": m(sol.S_BR), "Y_BR": m(sol.Y_BR), "G_BR": m(sol.G_BR),
        "phi": m(sol.phi.phi),
        "achieved": float(sol.achieved),
        "entropy": None if sol.entropy is None else float(sol.entropy),
        "degenerate_input": bool(sol.degenerate_input),
        "converged": bool(sol.converged),
        "iterations": int(sol.iterations),
        "phi_residual": None if sol.phi_residual is None else float(sol.phi_residual),
        "residuals": None if sol.residuals is None else sol.residuals.to_dict(),
    }


def solution_from_json(obj):
    m = qcore.matrix_from_json
    try:
        res = obj.get("residuals")
        return ThermalSolution(
            choi=qcore.choi_from_json(obj["choi"]),
            mu=np.array(obj["mu"], dtype=float), nu=np.array(obj["nu"], dtype=float),
            w=np.array(obj["w"], dtype=float),
            F_R=m(obj["F_R"]), S_BR=m(obj["S_BR"]), Y_BR=m(obj["Y_BR"]), G_BR=m(obj["G_BR"]),
            phi=InputState(m(obj["phi"])), achieved=obj["achieved"],
            residuals=None if res is None else KktReport(**res),
            entropy=obj.get("entropy"), degenerate_input=obj.get("degenerate_input", False),
            converged=obj.get("converged", True), iterations=obj.get("iterations", 0),
            phi_residual=obj.get("phi_residual"))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed solution file: {exc!r}") from exc
