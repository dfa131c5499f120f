"""Channel entropies, channel relative entropy, thermodynamic capacity and diamond distance.

All optimizations over input states use the square-root parameterization
``phi = L L^dagger / tr(L L^dagger)`` with ``L`` an unconstrained complex
matrix, so positivity and normalization hold by construction.
"""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import qcore
from .qcore import InputState, SUPPORT_TOL

FD_STEP = 1e-6


@dataclass
class EntropyReport:
    """Result of an optimization over input states.

    Attributes:
        value (float): optimal value in nats (``inf`` allowed).
        optimizer (InputState): optimal ``phi_R`` found (advisory).
        stationarity_residual (float): Frobenius norm of the optimality residual.
        iterations (int): total optimizer iterations over all starts.
        converged (bool): whether the residual met the tolerance.
    """

    value: float
    optimizer: InputState
    stationarity_residual: float
    iterations: int
    converged: bool


@dataclass
class DiamondReport:
    value: float
    choi_trace_distance: float
    optimizer: InputState
    stationarity_residual: float
    converged: bool


# ---------------------------------------------------------------------------
# parameterized search over input states


def params_to_state(x, d, restrict="full"):
    if restrict == "diagonal":
        p = np.asarray(x, dtype=float) ** 2
        s = p.sum()
        if s <= 0:
            return qcore.maximally_mixed(d)
        return np.diag(p / s).astype(complex)
    x = np.asarray(x, dtype=float)
    L = (x[: d * d] + 1j * x[d * d :]).reshape(d, d)
    P = L @ L.conj().T
    t = np.trace(P).real
    if t <= 0:
        return qcore.maximally_mixed(d)
    return qcore.hermitize(P / t)


def state_to_params(phi, restrict="full"):
    phi = qcore.as_matrix(phi)
    if restrict == "diagonal":
        return np.sqrt(np.clip(np.real(np.diag(phi)), 0, None))
    L = qcore.psd_sqrt(phi)
    return np.concatenate([L.real.ravel(), L.imag.ravel()])


def central_gradient(f, x, step=FD_STEP):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def default_starts(d, n_starts, seed, restrict="full"):
    """Maximally mixed, then near-pure basis states, then random states."""
    starts = [qcore.maximally_mixed(d)]
    for k in range(d):
        # exactly pure states are stationary points of the L-parameterization
        starts.append(0.9 * qcore.proj(qcore.ket(k, d)) + 0.1 * qcore.maximally_mixed(d))
    rngs = qcore.spawn_rngs(seed, max(n_starts, 1))
    k = 0
    while len(starts) < n_starts:
        rho = qcore.random_density(rngs[k], d)
        if restrict == "diagonal":
            rho = np.diag(np.diag(rho))
        starts.append(rho)
        k += 1
    return starts[: max(n_starts, 1)]


def optimize_over_inputs(fn, d, maximize=False, n_starts=8, seed=0, restrict="full",
                         starts=None, gtol=1e-9, maxiter=400):
    """Optimize ``fn(phi)`` over density operators on ``C^d``.

    Args:
        fn (callable): objective taking a density matrix.
        d (int): dimension.
        maximize (bool): maximize instead of minimize.
        n_starts (int): number of multi-starts.
        seed: seed for random starts.
        restrict (str): ``"full"``, ``"diagonal"`` or ``"fixed"`` (only ``I/d``).
        starts (list): explicit starting states, used instead of the defaults.

    Returns:
        tuple: ``(phi, value, iterations, success)``. Ties are broken by the
        lowest start index.
    """
    sign = -1.0 if maximize else 1.0
    if restrict == "fixed":
        phi = qcore.maximally_mixed(d)
        return phi, fn(phi), 0, True
    if starts is None:
        starts = default_starts(d, n_starts, seed, restrict)

    def run(phi0):
        obj = lambda x: sign * fn(params_to_state(x, d, restrict))
        x0 = state_to_params(phi0, restrict)
        res = scipy.optimize.minimize(obj, x0, jac=lambda x: central_gradient(obj, x), method="BFGS",
                                      options={"gtol": gtol, "maxiter": maxiter})
        return params_to_state(res.x, d, restrict), sign * res.fun, res.nit, bool(res.success)

    results = qcore.parallel_map(run, starts)
    best = 0
    for i, r in enumerate(results):
        if sign * r[1] < sign * results[best][1] - 1e-12:
            best = i
    phi, value, _, success = results[best]
    return phi, value, sum(r[2] for r in results), success


# ---------------------------------------------------------------------------
# channel entropies


def channel_entropy_at_input(N, phi):
    """``S_phi(N) = S(B|R)`` of ``N(phi_AR)``; equals ``-D(N(phi) || 1_B (x) phi_R)``."""
    phi = qcore.input_state(phi)
    out = qcore.output_on_purification(N, phi)
    return qcore.von_neumann_entropy(out) - qcore.von_neumann_entropy(phi.phi)


def stationarity_residual(N, phi, support_tol=1e-8):
    """Residual of ``log phi_A - hatN^dagger[log hatN(phi_A)] ~ Pi_A``.

    ``phi_A = phi_R^T`` is the input on A and ``hatN`` a complementary
    channel of ``N``. The multiple of ``Pi_A`` is fitted, so the return value is
    the Frobenius norm of the traceless part on the support of ``phi_A``.
    """
    phi_a = qcore.input_state(phi).phi.T
    comp = qcore.complement_channel(N)
    out = qcore.apply_channel(comp, phi_a)
    w, v = qcore.eigh(phi_a)
    vs = v[:, w > support_tol]
    R = qcore.mat_fn_hermitian(phi_a, "log", support_tol) - qcore.adjoint_channel(
        comp, qcore.mat_fn_hermitian(out, "log", 1e-14))
    Rs = vs.conj().T @ R @ vs
    lam = np.trace(Rs).real / Rs.shape[0]
    return float(np.linalg.norm(Rs - lam * np.eye(Rs.shape[0])))


def channel_entropy(N, n_starts=8, seed=0, tol=1e-5, restrict="full"):
    """Channel entropy ``S(N) = min_phi S_phi(N)``.

    :param N: channel Choi matrix
    :param n_starts: multi-start count
    :param tol: stationarity tolerance for the ``converged`` flag
    :return: EntropyReport
    """
    phi, value, nit, _ = optimize_over_inputs(lambda p: channel_entropy_at_input(N, p), N.dim_r,
                                              n_starts=n_starts, seed=seed, restrict=restrict)
    res = stationarity_residual(N, phi)
    return EntropyReport(value, InputState(phi), res, nit, res <= tol)


def channel_relative_entropy(N, M, phi=None, n_starts=8, seed=0, tol=1e-5):
    """Channel relative entropy.

    With ``phi`` given, returns ``D(N(phi_AR) || M(phi_AR))`` as a float.
    Without, returns an EntropyReport for ``max_phi`` of that quantity; the
    value is ``inf`` when the support of ``N`` is not contained in that of ``M``.
    """
    if N.dim_r != M.dim_r or N.dim_b != M.dim_b:
        raise qcore.DimMismatch("channels must have equal dimensions")
    if phi is not None:
        phi = qcore.input_state(phi)
        return qcore.relative_entropy(qcore.output_on_purification(N, phi),
                                      qcore.output_on_purification(M, phi))
    mixed = InputState(qcore.maximally_mixed(N.dim_r))
    if not np.isfinite(qcore.relative_entropy(N.op, M.op)):
        return EntropyReport(np.inf, mixed, 0.0, 0, True)

    def f(p):
        return qcore.relative_entropy(qcore.output_on_purification(N, p), qcore.output_on_purification(M, p))

    phi, value, nit, ok = optimize_over_inputs(f, N.dim_r, maximize=True, n_starts=n_starts, seed=seed)
    x = state_to_params(phi)
    res = float(np.linalg.norm(central_gradient(lambda y: f(params_to_state(y, N.dim_r)), x)))
    return EntropyReport(value, InputState(phi), res, nit, res <= tol)


def thermodynamic_capacity(N, n_starts=8, seed=0, tol=1e-5):
    """``T(N) = max_sigma [S(sigma) - S(N(sigma))]`` over inputs on A."""

    def f(sigma):
        return qcore.von_neumann_entropy(sigma) - qcore.von_neumann_entropy(qcore.apply_channel(N, sigma))

    sigma, value, nit, _ = optimize_over_inputs(f, N.dim_r, maximize=True, n_starts=n_starts, seed=seed)
    x = state_to_params(sigma)
    res = float(np.linalg.norm(central_gradient(lambda y: f(params_to_state(y, N.dim_r)), x)))
    return EntropyReport(value, InputState(sigma), res, nit, res <= tol)


def diamond_distance(N, M, n_starts=8, seed=0, tol=1e-4):
    """Half the diamond norm of ``N - M`` as a certified lower bound.

    The maximum over pure inputs ``|phi>_AR`` reduces, by local-unitary
    invariance of the trace norm, to a search over ``phi_R``.

    Returns:
        DiamondReport: value, Choi-state trace distance and optimizer.
    """
    if N.dim_r != M.dim_r or N.dim_b != M.dim_b:
        raise qcore.DimMismatch("channels must have equal dimensions")
    diff = qcore.choi(N.op - M.op, N.dim_b, N.dim_r)

    def f(p):
        return 0.5 * qcore.trace_norm(qcore.output_on_purification(diff, p))

    phi, value, _, _ = optimize_over_inputs(f, N.dim_r, maximize=True, n_starts=n_starts, seed=seed)
    x = state_to_params(phi)
    res = float(np.linalg.norm(central_gradient(lambda y: f(params_to_state(y, N.dim_r)), x)))
    ctd = qcore.trace_distance(N.state(), M.state())
    return DiamondReport(max(value, ctd), ctd, InputState(phi), res, res <= tol)
