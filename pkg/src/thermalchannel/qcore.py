"""Dense Hermitian linear algebra, states, channels and entropy primitives.

Conventions used throughout the package:

* Choi matrices are unnormalized, ``N_BR = (N (x) id)(Phi)`` with
  ``|Phi> = sum_k |k>|k>``, stored with B as the slow tensor index.
* A channel acts as ``N(rho) = tr_R[N_BR (1_B (x) rho^T)]``.
* Logarithms are natural, so every entropy is in nats.
"""

import concurrent.futures
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimMismatch, NegativeSpectrum, NonHermitian, SingularMarginal

HERMITIAN_TOL = 1e-12
SUPPORT_TOL = 1e-9
STATE_TOL = 1e-10


# ---------------------------------------------------------------------------
# validation and plumbing


def as_matrix(X):
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {X.shape}")
    return X


def check_hermitian(X, tol=HERMITIAN_TOL):
    """Return ``X`` as a complex array after checking ``X = X^dagger``.

    The tolerance is absolute for matrices of unit scale and grows with the
    largest entry, so that large operators are not rejected for rounding.
    """
    X = as_matrix(X)
    scale = max(1.0, float(np.max(np.abs(X)))) if X.size else 1.0
    if X.size and np.max(np.abs(X - X.conj().T)) > tol * scale:
        raise NonHermitian("matrix is not Hermitian")
    return X


def hermitize(X):
    return 0.5 * (X + X.conj().T)


def eigh(X):
    """Eigendecomposition of the Hermitian part of ``X``."""
    return np.linalg.eigh(hermitize(as_matrix(X)))


def mat_fn_hermitian(H, fn, support_tol=SUPPORT_TOL):
    """Apply a scalar function to the spectrum of a Hermitian matrix.

    Args:
        H (ndarray): Hermitian matrix.
        fn (str or callable): one of ``"exp"``, ``"log"`` (log on the
            support), ``"sqrt"``, ``"invsqrt"`` (inverse square root on the
            support), or a vectorized callable.
        support_tol (float): eigenvalues below this are treated as kernel.

    Returns:
        ndarray: ``f(H)``.
    """
    H = check_hermitian(H, tol=1e-10)
    w, v = eigh(H)
    if fn == "exp":
        fw = np.exp(w)
    elif fn in ("log", "sqrt", "invsqrt"):
        if w.size and w[0] < -support_tol:
            raise NegativeSpectrum(f"eigenvalue {w[0]:.3e} below -{support_tol:g}")
        on = w > support_tol
        fw = np.zeros_like(w)
        if fn == "log":
            fw[on] = np.log(w[on])
        elif fn == "sqrt":
            fw[on] = np.sqrt(w[on])
        else:
            fw[on] = 1.0 / np.sqrt(w[on])
    elif callable(fn):
        fw = fn(w)
    else:
        raise ValueError(f"unknown function tag {fn!r}")
    return (v * fw) @ v.conj().T


def psd_sqrt(X, tol=SUPPORT_TOL):
    """Square root of a PSD matrix; eigenvalues in ``[-tol, 0]`` are clipped to zero."""
    w, v = eigh(X)
    if w.size and w[0] < -tol:
        raise NegativeSpectrum(f"eigenvalue {w[0]:.3e} below -{tol:g}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def support_projector(X, support_tol=SUPPORT_TOL):
    w, v = eigh(X)
    vs = v[:, w > support_tol]
    return vs @ vs.conj().T


def _split_dims(X, dim_b, dim_r):
    X = as_matrix(X)
    if X.shape[0] != dim_b * dim_r:
        raise DimMismatch(f"dimension {X.shape[0]} != {dim_b}*{dim_r}")
    return X.reshape(dim_b, dim_r, dim_b, dim_r)


def partial_trace(X, dim_b, dim_r, keep="R"):
    """Partial trace of an operator on ``B (x) R`` (B slow index).

    :param X: operator of size ``dim_b*dim_r``
    :param keep: ``"R"`` traces out B, ``"B"`` traces out R
    """
    T = _split_dims(X, dim_b, dim_r)
    if keep == "R":
        return np.einsum("iaib->ab", T)
    if keep == "B":
        return np.einsum("aibi->ab", T)
    raise ValueError("keep must be 'B' or 'R'")


def kron_br(XB, YR):
    return np.kron(as_matrix(XB), as_matrix(YR))


def trace_norm(X):
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(as_matrix(X))))))


def random_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def make_rng(seed):
    """Counter-based generator (Philox) for an int seed or SeedSequence."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(random_seed_sequence(seed)))


def spawn_rngs(seed, n):
    """Independent, reproducible substreams of ``seed``."""
    return [np.random.Generator(np.random.Philox(s)) for s in random_seed_sequence(seed).spawn(n)]


def max_workers():
    try:
        return max(1, int(os.environ.get("THERMAL_CHANNEL_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Map ``fn`` over ``items`` keeping input order.

    Concurrency is capped by ``THERMAL_CHANNEL_THREADS`` (default 1); results
    do not depend on the schedule because every item is a pure function call.
    """
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# states and channels


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi matrix ``N_BR`` of a channel ``A -> B`` with ``dim_r = d_A``."""

    op: np.ndarray
    dim_b: int
    dim_r: int

    def __post_init__(self):
        op = as_matrix(self.op)
        if op.shape[0] != self.dim_b * self.dim_r:
            raise DimMismatch(f"Choi of size {op.shape[0]} is not {self.dim_b}x{self.dim_r}")
        op = hermitize(check_hermitian(op, tol=1e-9))
        op.setflags(write=False)
        object.__setattr__(self, "op", op)

    @property
    def dim(self):
        return self.dim_b * self.dim_r

    def tp_residual(self):
        return float(np.linalg.norm(partial_trace(self.op, self.dim_b, self.dim_r) - np.eye(self.dim_r)))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.op)[0])

    def is_valid(self, tol=STATE_TOL):
        return self.min_eigenvalue() >= -tol and self.tp_residual() <= tol

    def state(self):
        """Normalized Choi state ``N_BR / d_R``."""
        return self.op / self.dim_r


def choi(op, dim_b, dim_r=None):
    op = as_matrix(op)
    if dim_r is None:
        dim_r = op.shape[0] // dim_b
    return ChoiMatrix(op, int(dim_b), int(dim_r))


def check_density(rho, tol=STATE_TOL):
    rho = check_hermitian(rho, tol=1e-10)
    w = np.linalg.eigvalsh(rho)
    if w[0] < -tol:
        raise NegativeSpectrum(f"state has eigenvalue {w[0]:.3e}")
    if abs(np.trace(rho).real - 1) > tol:
        raise ValueError(f"state has trace {np.trace(rho).real:.12f}")
    return hermitize(rho)


@dataclass(frozen=True)
class InputState:
    """Input ``phi_R`` with purification ``|phi>_AR = (1 (x) phi_R^{1/2}) |Phi>``."""

    phi: np.ndarray

    def __post_init__(self):
        phi = check_density(self.phi, tol=1e-9)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self):
        return self.phi.shape[0]

    @property
    def sqrt(self):
        return psd_sqrt(self.phi)

    @property
    def purification(self):
        # vector on A (x) R, amplitude [a, r] = (phi^{1/2})[r, a]
        return self.sqrt.T.reshape(-1)

    def rank(self, tol=1e-6):
        return int(np.sum(np.linalg.eigvalsh(self.phi) > tol))


def input_state(phi):
    if isinstance(phi, InputState):
        return phi
    return InputState(as_matrix(phi))


def maximally_mixed(d):
    return np.eye(d, dtype=complex) / d


def ket(index, d):
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def proj(v):
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def max_entangled(d):
    """Unnormalized ``|Phi> = sum_k |k>|k>``."""
    return np.eye(d, dtype=complex).reshape(-1)


def identity_choi(d):
    return choi(proj(max_entangled(d)), d, d)


def depolarizing_choi_full(d_b, d_r):
    """Completely depolarizing channel ``rho -> tr(rho) 1/d_B``."""
    return choi(np.eye(d_b * d_r) / d_b, d_b, d_r)


def choi_from_kraus(kraus, dim_a=None):
    kraus = [np.asarray(K, dtype=complex) for K in kraus]
    d_b, d_a = kraus[0].shape
    op = np.zeros((d_b * d_a, d_b * d_a), dtype=complex)
    for K in kraus:
        v = K.reshape(-1)  # amplitude [b, a] = K[b, a]
        op += np.outer(v, v.conj())
    return choi(op, d_b, d_a)


def kraus_from_choi(N, support_tol=SUPPORT_TOL):
    """Kraus operators from the eigendecomposition of the Choi matrix."""
    w, v = eigh(N.op)
    keep = w > support_tol * max(1.0, float(w[-1]))
    return [np.sqrt(wk) * v[:, k].reshape(N.dim_b, N.dim_r) for k, wk in zip(np.flatnonzero(keep), w[keep])]


def apply_channel(N, rho):
    """Apply the channel to ``rho`` on A, or on ``A (x) R'`` (N (x) id).

    Args:
        N (ChoiMatrix): channel.
        rho (ndarray): operator on A, or on A (x) R' with A the slow index.

    Returns:
        ndarray: output operator on B (or B (x) R').
    """
    rho = as_matrix(rho)
    d_a = N.dim_r
    if rho.shape[0] % d_a:
        raise DimMismatch(f"input of size {rho.shape[0]} does not factor through d_A={d_a}")
    d_extra = rho.shape[0] // d_a
    T = N.op.reshape(N.dim_b, d_a, N.dim_b, d_a)
    R = rho.reshape(d_a, d_extra, d_a, d_extra)
    out = np.einsum("xayb,asbt->xsyt", T, R)
    return out.reshape(N.dim_b * d_extra, N.dim_b * d_extra)


def adjoint_channel(N, X):
    """Heisenberg-picture map with ``tr[X N(rho)] = tr[N^dagger(X) rho]``."""
    X = as_matrix(X)
    if X.shape[0] != N.dim_b:
        raise DimMismatch("observable does not act on B")
    return partial_trace(np.kron(X, np.eye(N.dim_r)) @ N.op, N.dim_b, N.dim_r, keep="R").T


def output_on_purification(N, phi):
    """``N(phi_AR) = (1 (x) phi^{1/2}) N_BR (1 (x) phi^{1/2})``."""
    L = np.kron(np.eye(N.dim_b), input_state(phi).sqrt)
    return hermitize(L @ N.op @ L)


def compose(N, M):
    """Choi matrix of ``N o M`` (apply M first)."""
    if M.dim_b != N.dim_r:
        raise DimMismatch("output of the first channel does not match input of the second")
    d_a = M.dim_r
    op = np.zeros((N.dim_b * d_a, N.dim_b * d_a), dtype=complex)
    for i in range(d_a):
        for j in range(d_a):
            eij = np.zeros((d_a, d_a), dtype=complex)
            eij[i, j] = 1.0
            blk = apply_channel(N, apply_channel(M, eij))
            op += np.kron(blk, eij)
    return choi(op, N.dim_b, d_a)


def unitary_choi(U):
    return choi_from_kraus([U])


def complement_channel(N, support_tol=SUPPORT_TOL):
    """Choi matrix of a complementary channel ``A -> E`` with ``d_E = rank N``.

    The Stinespring isometry ``V|a> = sum_k K_k|a> (x) |k>`` is built from the
    Kraus operators of the Choi eigendecomposition; the complement keeps E.
    """
    K = np.array(kraus_from_choi(N, support_tol))  # (r, d_B, d_A)
    # hatN[k, a, l, a'] = sum_b K_k[b, a] conj(K_l[b, a'])
    op = np.einsum("kba,lbc->kalc", K, K.conj())
    r, d_a = K.shape[0], N.dim_r
    return choi(op.reshape(r * d_a, r * d_a), r, d_a)


def stinespring(N, support_tol=SUPPORT_TOL):
    """Isometry ``V: A -> B (x) E`` (B slow index)."""
    K = np.array(kraus_from_choi(N, support_tol))
    r, d_b, d_a = K.shape
    return np.transpose(K, (1, 0, 2)).reshape(d_b * r, d_a)


# ---------------------------------------------------------------------------
# entropies and distances


def _spectrum(rho):
    return np.clip(np.linalg.eigvalsh(hermitize(as_matrix(rho))), 0.0, None)


def shannon_entropy(p):
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rho):
    """``S(rho) = -tr rho log rho`` in nats."""
    return shannon_entropy(_spectrum(rho))


def relative_entropy(rho, gamma, support_tol=SUPPORT_TOL):
    """Umegaki relative entropy ``tr rho (log rho - log gamma)``.

    ``rho`` and ``gamma`` may be unnormalized PSD operators. Returns ``inf``
    when the weight of ``rho`` on the kernel of ``gamma`` exceeds
    ``support_tol``.
    """
    rho = hermitize(as_matrix(rho))
    gamma = hermitize(as_matrix(gamma))
    wg, vg = np.linalg.eigh(gamma)
    ker = vg[:, wg <= support_tol]
    if ker.shape[1] and np.real(np.trace(ker.conj().T @ rho @ ker)) > support_tol:
        return np.inf
    wr, vr = np.linalg.eigh(rho)
    wr = np.clip(wr, 0.0, None)
    on = wr > 0
    first = float(np.sum(wr[on] * np.log(wr[on])))
    on_g = wg > support_tol
    log_g = (vg[:, on_g] * np.log(wg[on_g])) @ vg[:, on_g].conj().T
    second = float(np.real(np.trace(rho @ log_g)))
    return first - second


def conditional_entropy(rho_br, dim_b, dim_r):
    """``S(B|R) = S(BR) - S(R)``."""
    return von_neumann_entropy(rho_br) - von_neumann_entropy(partial_trace(rho_br, dim_b, dim_r, keep="R"))


def fidelity(rho, sigma):
    """Root fidelity ``||sqrt(rho) sqrt(sigma)||_1``."""
    a = psd_sqrt(rho)
    b = psd_sqrt(sigma)
    return float(np.sum(scipy.linalg.svdvals(a @ b)))


def trace_distance(rho, sigma):
    return 0.5 * trace_norm(as_matrix(rho) - as_matrix(sigma))


def purified_distance(rho, sigma):
    F = min(1.0, fidelity(rho, sigma))
    return float(np.sqrt(1.0 - F**2))


# ---------------------------------------------------------------------------
# random objects


def random_hermitian(rng, d, scale=1.0):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * hermitize(G) / np.sqrt(2)


def random_unitary(rng, d):
    G = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(G)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    G = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = G @ G.conj().T
    return hermitize(rho / np.trace(rho).real)


def random_channel(seed, d_a, d_b, max_tries=16):
    """Random channel: ``P = G G^dagger``, ``Q = tr_B P``, ``N = Q^{-1/2} P Q^{-1/2}``.

    ``G`` is a square complex Gaussian of size ``d_B d_A``. Singular marginals
    are resampled up to ``max_tries`` times.
    """
    if d_a < 1 or d_b < 1:
        raise DimMismatch("dimensions must be positive")
    rng = make_rng(seed)
    d = d_a * d_b
    for _ in range(max_tries):
        G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        P = G @ G.conj().T
        Q = partial_trace(P, d_b, d_a)
        if np.linalg.eigvalsh(Q)[0] < 1e-12:
            continue
        Qm = np.kron(np.eye(d_b), mat_fn_hermitian(Q, "invsqrt"))
        return choi(hermitize(Qm @ P @ Qm), d_b, d_a)
    raise SingularMarginal(f"marginal singular after {max_tries} draws")


# ---------------------------------------------------------------------------
# JSON exchange format


def matrix_to_json(X):
    X = as_matrix(X)
    return {
        "dim": int(X.shape[0]),
        "rows": [[[float(z.real), float(z.imag)] for z in row] for row in X],
    }


def matrix_from_json(obj):
    try:
        rows = obj["rows"]
        X = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix object: {exc}") from exc
    if X.ndim != 2 or X.shape[0] != X.shape[1] or X.shape[0] != int(obj.get("dim", X.shape[0])):
        raise DimMismatch("matrix rows do not match the declared dim")
    return X


def choi_to_json(N):
    out = matrix_to_json(N.op)
    out.update(dimB=N.dim_b, dimR=N.dim_r)
    return out


def choi_from_json(obj):
    X = matrix_from_json(obj)
    try:
        return choi(X, int(obj["dimB"]), int(obj["dimR"]))
    except KeyError as exc:
        raise ValueError(f"Choi object missing {exc}") from exc
