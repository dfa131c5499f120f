"""Closed-form thermal channels, classical and Pauli reductions, passivity probe.

These constructions are independent of the dual solver in ``maxent`` and
serve as its oracles.
"""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import qcore
from .errors import EnergyOutOfRange, Infeasible
from .qcore import choi

BETA_CAP = 700.0
CLUSTER_TOL = 1e-8


@dataclass(frozen=True)
class GibbsSpec:
    H: np.ndarray
    beta: float
    Z: float

    @property
    def state(self):
        return gibbs(self.H, self.beta)


def _spread(w):
    return float(w[-1] - w[0])


def gibbs(H, beta):
    """Gibbs state ``exp(-beta H)/Z``; ``beta = +-inf`` gives the ground/top eigenprojector state."""
    H = qcore.check_hermitian(H, tol=1e-10)
    w, v = qcore.eigh(H)
    if np.isinf(beta):
        target = w[0] if beta > 0 else w[-1]
        p = (np.abs(w - target) <= CLUSTER_TOL * max(1.0, abs(target))).astype(float)
    else:
        shift = w[0] if beta >= 0 else w[-1]
        p = np.exp(-beta * (w - shift))
    p = p / p.sum()
    return qcore.hermitize((v * p) @ v.conj().T)


def gibbs_spec(H, beta):
    w = np.linalg.eigvalsh(qcore.hermitize(qcore.as_matrix(H)))
    Z = float(np.sum(np.exp(-beta * w))) if np.isfinite(beta) else float("nan")
    return GibbsSpec(qcore.as_matrix(H), beta, Z)


def _mean_energy(w, beta):
    shift = w[0] if beta >= 0 else w[-1]
    p = np.exp(-beta * (w - shift))
    return float(p @ w / p.sum())


def beta_for_energy(H, E, tol=1e-9):
    """Inverse temperature with ``tr(gamma_beta H) = E``.

    Args:
        H (ndarray): Hamiltonian.
        E (float): target energy within the spectral range.
        tol (float): absolute tolerance on the energy.

    Returns:
        float: ``beta``, or ``+inf``/``-inf`` at the bottom/top of the spectrum.
    """
    w = np.linalg.eigvalsh(qcore.hermitize(qcore.check_hermitian(H, tol=1e-10)))
    lo, hi = w[0], w[-1]
    if E < lo - tol or E > hi + tol:
        raise EnergyOutOfRange(f"energy {E} outside [{lo}, {hi}]")
    if _spread(w) <= CLUSTER_TOL:
        return 0.0
    if E <= lo + tol * 1e-3:
        return np.inf
    if E >= hi - tol * 1e-3:
        return -np.inf
    cap = BETA_CAP / _spread(w)
    f = lambda b: _mean_energy(w, b) - E
    if f(cap) > 0:
        return np.inf
    if f(-cap) < 0:
        return -np.inf
    # the mean energy is monotone decreasing in beta; bisection-type root finding
    return float(scipy.optimize.brentq(f, -cap, cap, xtol=1e-14, rtol=1e-15, maxiter=500))


def energy_eigenspaces(H, tol=CLUSTER_TOL):
    """Cluster the spectrum of ``H``; returns a list of ``(energy, projector)``."""
    w, v = qcore.eigh(H)
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > tol * max(1.0, abs(w[i - 1])):
            vs = v[:, start:i]
            groups.append((float(np.mean(w[start:i])), vs @ vs.conj().T))
            start = i
    return groups


# ---------------------------------------------------------------------------
# thermal exemplars


def replacer_thermal(H_B, q, dim_r=None):
    """Replacer channel ``rho -> tr(rho) gamma_B`` with ``tr(gamma_B H_B) = q``."""
    H_B = qcore.as_matrix(H_B)
    dim_r = H_B.shape[0] if dim_r is None else dim_r
    gamma = gibbs(H_B, beta_for_energy(H_B, q))
    return choi(np.kron(gamma, np.eye(dim_r)), H_B.shape[0], dim_r)


def replacer_constraints(H_B, q, dim_r=None):
    """Constraint ``tr[(H_B (x) 1/d_R) N] = q``, the energy of the output for the mixed input."""
    H_B = qcore.as_matrix(H_B)
    dim_r = H_B.shape[0] if dim_r is None else dim_r
    return [(np.kron(H_B, np.eye(dim_r) / dim_r), q)]


def strict_energy_thermal(H):
    """Thermal channel under strict energy conservation.

    Returns:
        tuple: Choi matrix ``sum_E Pi_E/tr(Pi_E) (x) Pi_E^T`` and entropy
        ``min_E log tr(Pi_E)``.
    """
    H = qcore.as_matrix(H)
    d = H.shape[0]
    op = np.zeros((d * d, d * d), dtype=complex)
    dims = []
    for _, P in energy_eigenspaces(H):
        k = np.trace(P).real
        dims.append(k)
        op += np.kron(P / k, P.T)
    return choi(op, d, d), float(np.log(min(dims)))


def avg_energy_thermal(H):
    """Thermal channel under average energy conservation (full-rank limit).

    The channel measures in the energy eigenbasis and prepares, for outcome
    ``e_l``, the Gibbs state with mean energy ``e_l``.

    Returns:
        tuple: Choi matrix and entropy ``min_l S(gamma_{beta_l})``.
    """
    H = qcore.as_matrix(H)
    d = H.shape[0]
    w, v = qcore.eigh(H)
    op = np.zeros((d * d, d * d), dtype=complex)
    ents = []
    for l in range(d):
        g = gibbs(H, beta_for_energy(H, w[l]))
        ents.append(qcore.von_neumann_entropy(g))
        op += np.kron(g, qcore.proj(v[:, l]).T)
    return choi(op, d, d), float(min(ents))


def avg_energy_constraints(H):
    """Constraints ``tr[H N(rho)] = tr[H rho]`` for a spanning set of states.

    The set contains the energy eigenstates and the superpositions
    ``(e_k + e_l)/sqrt2`` and ``(e_k + i e_l)/sqrt2``. Each state enters as
    ``C = H (x) rho^T`` with ``q = tr(H rho)``.
    """
    H = qcore.as_matrix(H)
    d = H.shape[0]
    _, v = qcore.eigh(H)
    states = [v[:, k] for k in range(d)]
    for k in range(d):
        for l in range(k + 1, d):
            states.append((v[:, k] + v[:, l]) / np.sqrt(2))
            states.append((v[:, k] + 1j * v[:, l]) / np.sqrt(2))
    out = []
    for s in states:
        rho = qcore.proj(s)
        out.append((np.kron(H, rho.T), float(np.trace(H @ rho).real)))
    return out


# ---------------------------------------------------------------------------
# Pauli (Weyl) covariant and classical reductions


def weyl(z, x, d):
    """Discrete Weyl operator ``Z^z X^x``."""
    omega = np.exp(2j * np.pi / d)
    Z = np.diag(omega ** np.arange(d))
    X = np.roll(np.eye(d), 1, axis=0)  # X|k> = |k+1>
    return np.linalg.matrix_power(Z, z) @ np.linalg.matrix_power(X, x)


def bell_vectors(d):
    """Normalized Bell vectors ``(W^{z,x} (x) 1)|Phi>/sqrt(d)``, ordered ``(z, x)`` z-major."""
    phi = qcore.max_entangled(d) / np.sqrt(d)
    return [np.kron(weyl(z, x, d), np.eye(d)) @ phi for z in range(d) for x in range(d)]


def bell_projectors(d):
    return [qcore.proj(b) for b in bell_vectors(d)]


def bell_constraint_operator(c, d):
    """``C = sum c_{zx} P_{zx} / d`` so that ``tr[C N] = sum c_{zx} p_{zx}`` for Pauli channels."""
    c = np.asarray(c, dtype=float).reshape(-1)
    return sum(ci * P for ci, P in zip(c, bell_projectors(d))) / d


def pauli_choi(p, d=None):
    """Choi matrix of ``rho -> sum p_{zx} W rho W^dagger``."""
    p = np.asarray(p, dtype=float).reshape(-1)
    d = int(round(np.sqrt(p.size))) if d is None else d
    return choi(d * sum(pk * P for pk, P in zip(p, bell_projectors(d))), d, d)


def bell_weights(N):
    """``p_{zx} = tr[N Phi^{zx}]/d^2`` with unnormalized Bell projectors."""
    d = N.dim_r
    return np.array([np.trace(N.op @ P).real / d for P in bell_projectors(d)])


def off_bell_weight(N):
    """Frobenius weight of the Choi matrix outside the Bell-diagonal part."""
    d = N.dim_r
    B = np.array(bell_vectors(d)).T
    M = B.conj().T @ N.op @ B
    return float(np.linalg.norm(M - np.diag(np.diag(M))))


def _newton_convex(fun, x0, tol=1e-13, max_iter=200):
    """Damped Newton for a smooth convex function ``fun -> (f, grad, hess)``."""
    x = np.array(x0, dtype=float)
    for _ in range(max_iter):
        f, g, H = fun(x)
        if np.max(np.abs(g), initial=0.0) <= tol:
            return x, True
        step = -np.linalg.lstsq(H, g, rcond=1e-14)[0]
        if g @ step >= 0:
            step = -g
        t = 1.0
        while t > 1e-12:
            if fun(x + t * step)[0] <= f + 1e-4 * t * (g @ step) + 1e-15 * max(1.0, abs(f)):
                break
            t *= 0.5
        if t <= 1e-12:
            return x, np.max(np.abs(g)) <= 1e-8
        x = x + t * step
    return x, np.max(np.abs(fun(x)[1]), initial=0.0) <= 1e-8


def classical_maxent(c, q):
    """Maximum-entropy distribution with ``sum_k c[j,k] p_k = q_j``.

    :param c: array ``(J, K)`` of constraint coefficients
    :param q: array ``(J,)`` of targets
    :return: probabilities ``p`` of length ``K``
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    q = np.asarray(q, dtype=float).reshape(-1)
    if c.shape[0] == 0 or c.size == 0:
        K = c.shape[1]
        return np.full(K, 1.0 / K)

    def fun(lam):
        a = -lam @ c
        m = a.max()
        e = np.exp(a - m)
        Z = e.sum()
        p = e / Z
        f = m + np.log(Z) + lam @ q
        g = q - c @ p
        H = (c * p) @ c.T - np.outer(c @ p, c @ p)
        return f, g, H

    lam, ok = _newton_convex(fun, np.zeros(c.shape[0]))
    a = -lam @ c
    p = np.exp(a - a.max())
    p /= p.sum()
    if not ok or np.max(np.abs(c @ p - q)) > 1e-8:
        raise Infeasible("classical constraints cannot be met")
    return p


def pauli_maxent(d, bell_constraints):
    """Pauli-covariant thermal channel.

    Args:
        d (int): dimension.
        bell_constraints (list): pairs ``(c, q)`` with ``c`` of shape
            ``(d, d)`` indexed ``[z, x]`` meaning ``sum c_{zx} p_{zx} = q``.

    Returns:
        tuple: distribution ``p`` (length ``d^2``, z-major) and Choi matrix.
    """
    if bell_constraints:
        c = np.array([np.asarray(ci, dtype=float).reshape(-1) for ci, _ in bell_constraints])
        q = np.array([qi for _, qi in bell_constraints])
    else:
        c, q = np.zeros((0, d * d)), np.zeros(0)
    p = classical_maxent(c, q)
    return p, pauli_choi(p, d)


def classical_choi(T):
    T = np.asarray(T, dtype=float)
    d_b, d_a = T.shape
    return choi(np.diag(T.reshape(-1)).astype(complex), d_b, d_a)


def classical_maxent_fixed_input(c, q, p):
    """Fixed-input thermal stochastic matrix for diagonal constraints.

    Columns are ``T_{k|l} = exp(p_l^{-1} sum_j mu_j c^j_{kl}) / Z_l`` with
    ``mu`` found by Newton's method so that ``sum_{kl} c^j_{kl} T_{k|l} = q_j``.

    Args:
        c (ndarray): shape ``(J, d_B, d_A)``.
        q (ndarray): shape ``(J,)``.
        p (ndarray): input distribution, strictly positive.

    Returns:
        ndarray: column-stochastic matrix ``T[k, l]``.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ValueError("input distribution must be strictly positive")
    c = np.asarray(c, dtype=float)
    q = np.asarray(q, dtype=float).reshape(-1)
    J = c.shape[0]

    def columns(mu):
        a = np.tensordot(mu, c, axes=1) / p[None, :] if J else np.zeros(c.shape[1:])
        a = a - a.max(axis=0, keepdims=True)
        e = np.exp(a)
        return e / e.sum(axis=0, keepdims=True)

    if J == 0:
        d_b = c.shape[1] if c.ndim == 3 else len(p)
        return np.full((d_b, len(p)), 1.0 / d_b)

    def fun(mu):
        a = np.tensordot(mu, c, axes=1) / p[None, :]
        m = a.max(axis=0)
        logZ = m + np.log(np.exp(a - m).sum(axis=0))
        T = columns(mu)
        f = float(p @ logZ - mu @ q)
        g = np.einsum("jkl,kl->j", c, T) - q
        # Hessian: sum_l p_l^{-1} Cov_{T_l}(c_i, c_j)
        mean = np.einsum("jkl,kl->jl", c, T)
        H = np.einsum("ikl,jkl,kl,l->ij", c, c, T, 1 / p) - np.einsum("il,jl,l->ij", mean, mean, 1 / p)
        return f, g, H

    mu, ok = _newton_convex(fun, np.zeros(J))
    T = columns(mu)
    if np.max(np.abs(np.einsum("jkl,kl->j", c, T) - q)) > 1e-8:
        raise Infeasible("classical constraints cannot be met")
    return T


def classical_channel_entropy(T):
    """Entropy of a stochastic map: ``min_l H(T[:, l])``."""
    T = np.asarray(T, dtype=float)
    return float(min(qcore.shannon_entropy(T[:, l]) for l in range(T.shape[1])))


# ---------------------------------------------------------------------------
# passivity


def passivity_probe(sol, problem, trials=500, seed=0, tol=1e-7):
    """Search for unitaries ``U_A, U_B`` lowering the first constraint value.

    A witness is a pair for which ``U_B o T o U_A`` has
    ``tr[C^1 T'] < q_1 - tol`` while ``tr[C^j T'] <= q_j + tol`` for the
    other constraints.

    Returns:
        dict: ``passed`` flag and, on failure, the witness pair.
    """
    N = sol.choi if hasattr(sol, "choi") else sol
    d_a, d_b = problem.dim_a, problem.dim_b
    cons = problem.equality
    if not cons or trials <= 0:
        return {"passed": True, "witness": None, "trials": max(trials, 0)}
    rng = qcore.make_rng(seed)
    C1, q1 = cons[0]
    for t in range(trials):
        Ua = qcore.random_unitary(rng, d_a)
        Ub = qcore.random_unitary(rng, d_b)
        K = np.kron(Ub, Ua.T)
        Np = K @ N.op @ K.conj().T
        if np.trace(C1 @ Np).real < q1 - tol and all(np.trace(C @ Np).real <= q + tol for C, q in cons[1:]):
            return {"passed": False, "witness": (Ua, Ub), "trials": t + 1}
    return {"passed": True, "witness": None, "trials": trials}
