"""Small-n Schur-Weyl machinery and microcanonical error-bound arithmetic.

Young diagrams are plain tuples of positive, weakly decreasing row lengths.
Operators on ``(C^d)^{(x) n}`` use the natural tensor ordering of the copies.
"""

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qcore
from .errors import ParamOutOfRange, ScaleExceeded

MAX_N = 6
MAX_D = 4
MAX_OPERATOR_DIM = 4096

C_PRIME = 1.0 / (2 * 5 ** 8)


def _check_scale(n, d=None):
    if n < 0 or (d is not None and d < 1):
        raise ValueError("n must be non-negative and d positive")
    if n > MAX_N or (d is not None and d > MAX_D):
        raise ScaleExceeded(f"n={n}, d={d} exceeds the supported range n <= {MAX_N}, d <= {MAX_D}")


def young_diagram(rows):
    """Normalize ``rows`` to a Young diagram tuple (zero rows dropped)."""
    rows = tuple(int(r) for r in rows if int(r) != 0)
    if any(r < 0 for r in rows) or any(a < b for a, b in zip(rows, rows[1:])):
        raise ValueError(f"not a Young diagram: {rows}")
    return rows


@lru_cache(maxsize=None)
def partitions(n, max_part=None):
    """All partitions of ``n`` in reverse lexicographic order."""
    max_part = n if max_part is None else max_part
    if n == 0:
        return ((),)
    out = []
    for k in range(min(n, max_part), 0, -1):
        out.extend((k,) + rest for rest in partitions(n - k, k))
    return tuple(out)


def young_diagrams(d, n):
    """Young diagrams with ``n`` boxes and at most ``d`` rows."""
    _check_scale(n, d)
    return [lam for lam in partitions(n) if len(lam) <= d]


def dim_P(lam):
    """Dimension of the symmetric-group irrep, by the hook-length formula."""
    lam = young_diagram(lam)
    n = sum(lam)
    _check_scale(n)
    conj = [sum(1 for r in lam if r > j) for j in range(lam[0])] if lam else []
    hooks = 1
    for i, r in enumerate(lam):
        for j in range(r):
            hooks *= (r - j - 1) + (conj[j] - i - 1) + 1
    return math.factorial(n) // hooks


def dim_Q(lam, d):
    """Dimension of the unitary-group irrep, by the Weyl dimension formula."""
    lam = young_diagram(lam)
    _check_scale(sum(lam), d)
    if len(lam) > d:
        return 0
    rows = list(lam) + [0] * (d - len(lam))
    num, den = 1, 1
    for i in range(d):
        for j in range(i + 1, d):
            num *= rows[i] - rows[j] + j - i
            den *= j - i
    return num // den


def sym_dim(n, d):
    """Dimension ``binom(n + d - 1, n)`` of the symmetric subspace."""
    if n > MAX_N:
        raise ScaleExceeded(f"n={n} exceeds {MAX_N}")
    return math.comb(n + d - 1, n)


# ---------------------------------------------------------------------------
# characters


@lru_cache(maxsize=None)
def character(lam, mu):
    """Irreducible character ``chi^lam`` on the class of cycle type ``mu``.

    Murnaghan-Nakayama rule on beta-sets: removing a rim hook of length ``k``
    moves a bead from ``b`` to ``b - k``, with sign given by the parity of the
    beads jumped over.
    """
    lam, mu = tuple(lam), tuple(mu)
    if sum(lam) != sum(mu):
        raise ValueError("lam and mu must partition the same n")
    if not mu:
        return 1
    k, rest = mu[0], mu[1:]
    L = len(lam)
    beta = [lam[i] + L - 1 - i for i in range(L)]
    beads = set(beta)
    total = 0
    for b in beta:
        t = b - k
        if t < 0 or t in beads:
            continue
        sign = (-1) ** sum(1 for c in beta if t < c < b)
        new = sorted((beads - {b}) | {t}, reverse=True)
        shape = young_diagram(new[i] - (L - 1 - i) for i in range(L))
        total += sign * character(shape, rest)
    return total


def cycle_type(perm):
    seen, out = set(), []
    for i in range(len(perm)):
        if i in seen:
            continue
        j, length = i, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        out.append(length)
    return tuple(sorted(out, reverse=True))


def _perm_indices(perm, dims):
    """Index map of the operator permuting tensor factors of ``dims`` by ``perm``."""
    D = int(np.prod(dims))
    return np.arange(D).reshape(dims).transpose(perm).ravel()


def _class_sum(coef, dims, groups):
    """``sum_pi coef(pi) U(pi)`` with ``U`` permuting the factor ``groups`` jointly.

    ``groups`` lists, per copy, the tensor factors moved together.
    """
    n = len(groups)
    D = int(np.prod(dims))
    if D > MAX_OPERATOR_DIM:
        raise ScaleExceeded(f"operator dimension {D} exceeds {MAX_OPERATOR_DIM}")
    out = np.zeros((D, D))
    rows = np.arange(D)
    for pi in itertools.permutations(range(n)):
        c = coef(pi)
        if c == 0:
            continue
        axes = list(range(len(dims)))
        for k in range(n):
            for src, dst in zip(groups[pi[k]], groups[k]):
                axes[dst] = src
        out[rows, _perm_indices(axes, dims)] += c
    return out


def permutation_operator(perm, d):
    """``U(pi)`` on ``(C^d)^{(x) n}``; copy ``k`` goes to slot ``perm[k]``."""
    n = len(perm)
    D = d ** n
    U = np.zeros((D, D))
    U[np.arange(D), _perm_indices(list(perm), [d] * n)] = 1.0
    return U


def _projector(lam, dims, groups):
    n = len(groups)
    lam = young_diagram(lam)
    scale = dim_P(lam) / math.factorial(n)
    return _class_sum(lambda pi: scale * character(lam, cycle_type(pi)), dims, groups)


def schur_projector(lam, d, n):
    """Isotypic projector ``(d_P / n!) sum_pi chi^lam(pi) U(pi)``.

    Args:
        lam: Young diagram with ``n`` boxes (may have more than ``d`` rows,
            in which case the projector vanishes).
        d (int): local dimension.
        n (int): number of copies.

    Returns:
        ndarray: real symmetric ``d^n x d^n`` projector.
    """
    lam = young_diagram(lam)
    if sum(lam) != n:
        raise ValueError("lam must have n boxes")
    _check_scale(n, d)
    return _projector(lam, [d] * n, [[k] for k in range(n)])


def symmetric_projector(d, n):
    return schur_projector((n,), d, n) if n > 0 else np.ones((1, 1))


def projector_residuals(d, n):
    """Max idempotence, orthogonality and completeness residuals (Frobenius)."""
    lams = partitions(n)
    P = {lam: schur_projector(lam, d, n) for lam in lams}
    idem = max(np.linalg.norm(p @ p - p) for p in P.values())
    herm = max(np.linalg.norm(p - p.T) for p in P.values())
    orth = max((np.linalg.norm(P[a] @ P[b]) for a, b in itertools.combinations(lams, 2)), default=0.0)
    comp = np.linalg.norm(sum(P.values()) - np.eye(d ** n))
    trace = max(abs(np.trace(P[lam]) - dim_P(lam) * dim_Q(lam, d)) for lam in lams)
    return {"idempotence": float(idem), "hermiticity": float(herm), "orthogonality": float(orth),
            "completeness": float(comp), "trace": float(trace)}


# ---------------------------------------------------------------------------
# de Finetti state and block compatibility


@dataclass
class DeFinettiReport:
    """Both constructions of the de Finetti state and their Frobenius gap."""

    from_blocks: np.ndarray
    from_symmetric: np.ndarray
    gap: float


def definetti_state(d, n):
    """De Finetti state ``zeta_{R^n}`` built two independent ways.

    (a) block formula ``sum_lam d_Q / d_P Pi^lam / d_Sym(n, d^2)``;
    (b) ``tr_{A^n}[Pi^Sym_{(AR)^n}] / d_Sym(n, d^2)`` with ``A ~ R``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n * math.log2(d) > 8 + 1e-12:
        raise ScaleExceeded("de Finetti construction is limited to 8 qubit-equivalents")
    ds = sym_dim(n, d * d)
    a = sum(dim_Q(lam, d) / dim_P(lam) * schur_projector(lam, d, n) for lam in young_diagrams(d, n)) / ds
    # factors ordered (A_1, R_1, ..., A_n, R_n)
    sym = _class_sum(lambda pi: 1.0 / math.factorial(n), [d] * (2 * n),
                     [[2 * k, 2 * k + 1] for k in range(n)])
    t = sym.reshape([d] * (4 * n))
    for k in range(n):
        # trace A_k: axes shrink by one pair after each contraction
        nk = 2 * n - k
        t = np.trace(t, axis1=k, axis2=k + nk)
    b = t.reshape(d ** n, d ** n) / ds
    return DeFinettiReport(a, b, float(np.linalg.norm(a - b)))


def verify_block_compat(n, dA, dB):
    """Max over ``lam`` of ``|| Pi^lam_{A^n} Pi^Sym_{(AB)^n} - Pi^lam_{B^n} Pi^Sym_{(AB)^n} ||``."""
    if (dA * dB) ** n > 256:
        raise ScaleExceeded("(dA dB)^n must not exceed 256")
    if n <= 1:
        return 0.0
    dims = [dA, dB] * n
    sym = _class_sum(lambda pi: 1.0 / math.factorial(n), dims, [[2 * k, 2 * k + 1] for k in range(n)])
    res = 0.0
    for lam in partitions(n):
        pa = _projector(lam, dims, [[2 * k] for k in range(n)])
        pb = _projector(lam, dims, [[2 * k + 1] for k in range(n)])
        res = max(res, float(np.linalg.norm(pa @ sym - pb @ sym)))
    return res


# ---------------------------------------------------------------------------
# pretty good measurement completeness


def bloch_ball_average(n, k):
    """Midpoint rule for ``E[sigma^{(x) n}]`` under the flat Bloch-ball measure.

    ``k`` midpoints per spherical coordinate (radius weighted by ``3 r^2``).
    """
    h = 1.0 / k
    r = (np.arange(k) + 0.5) * h
    u = -1 + (np.arange(k) + 0.5) * 2 * h
    ph = (np.arange(k) + 0.5) * 2 * np.pi * h
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]
    out = np.zeros((2 ** n, 2 ** n), dtype=complex)
    wsum = 0.0
    for ri, ui, pi in itertools.product(r, u, ph):
        s = np.sqrt(1 - ui * ui)
        vec = ri * np.array([s * np.cos(pi), s * np.sin(pi), ui])
        sigma = 0.5 * (np.eye(2) + sum(v * p for v, p in zip(vec, paulis)))
        w = ri * ri
        term = sigma
        for _ in range(n - 1):
            term = np.kron(term, sigma)
        out += w * term
        wsum += w
    return out / wsum


def pgm_completeness(n=2, grids=(2, 4, 8, 16)):
    """Residual of ``int d sigma R^dagger R = 1`` for qubits at increasing grids.

    Returns:
        list of ``(k, residual)`` with the Frobenius residual of
        ``zeta^{-1/2} Q_k zeta^{-1/2} - 1``.
    """
    zeta = definetti_state(2, n).from_blocks
    zi = qcore.mat_fn_hermitian(zeta, "invsqrt")
    out = []
    for k in grids:
        Q = bloch_ball_average(n, k)
        out.append((k, float(np.linalg.norm(zi @ Q @ zi - np.eye(2 ** n)))))
    return out


# ---------------------------------------------------------------------------
# microcanonical bound arithmetic


@dataclass
class MicroParams:
    """Tolerance parameters of an approximate microcanonical channel operator.

    Attributes:
        n, J: copies and number of constraints.
        eta, eta_p: window half-widths with ``0 < eta_p < eta < c_min``.
        eps, delta, delta_p, eps_p: error levels in ``(0, 1]``.
        y, y_p, nu, nu_p: lower bounds ``sigma_R >= y 1`` and their widening factors.
        c_min, c_max: smallest and largest constraint operator norm.
        d_R: optional reference dimension, enables the ``y < 1/(nu d_R)`` check.
        extra: exponents recorded by ``parameter_regime``.
    """

    n: int
    J: int
    eta: float
    eta_p: float
    eps: float
    delta: float
    delta_p: float
    eps_p: float
    y: float
    y_p: float
    nu: float
    nu_p: float
    c_min: float
    c_max: float
    d_R: int = None
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.n < 1 or self.J < 1:
            raise ParamOutOfRange("n and J must be positive")
        if not 0 < self.c_min <= self.c_max:
            raise ParamOutOfRange("need 0 < c_min <= c_max")
        if not 0 < self.eta_p < self.eta < self.c_min:
            raise ParamOutOfRange("need 0 < eta' < eta < c_min")
        for name in ("eps", "delta", "delta_p", "eps_p"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ParamOutOfRange(f"{name} must lie in (0, 1]")
        if not (self.nu > 1 and self.nu_p > 1):
            raise ParamOutOfRange("nu and nu' must exceed 1")
        nu_min = 1 + (self.eta - self.eta_p) / (4 * self.c_max)
        if self.nu < nu_min or self.nu_p < nu_min:
            raise ParamOutOfRange("nu, nu' must be at least 1 + (eta - eta')/(4 c_max)")
        if not (0 < self.y < 1 and 0 < self.y_p < 1):
            raise ParamOutOfRange("y and y' must lie in (0, 1)")
        if self.d_R is not None and not (self.y < 1 / (self.nu * self.d_R) and self.y_p < 1 / (self.nu_p * self.d_R)):
            raise ParamOutOfRange("need y < 1/(nu d_R) and y' < 1/(nu' d_R)")
        return self


@dataclass
class MicroBounds:
    """Exponential factors of the two error bounds.

    ``prefactor_known`` is always False: the polynomial prefactor is not
    specified, so the bounds are reported with the prefactor set to one.
    """

    bound_a: float
    bound_b: float
    hoeffding_ok: bool
    exponent_a: float
    exponent_b: float
    prefactor_known: bool = False

    def __iter__(self):
        return iter((self.bound_a, self.bound_b, self.hoeffding_ok))


def _rate(n, y, level, gap, c_max):
    # n y^8 min(-log(level)/(n y^8), c' gap^8 / c_max^8) = min(-log level, n y^8 c' ...)
    return min(-math.log(level), n * y ** 8 * C_PRIME * gap ** 8 / c_max ** 8)


def hoeffding_condition(n, eta_p, y_p, delta_p, c_max):
    """``2 c_max^2 log(2/delta') <= n eta'^2 y'^2``, boundary inclusive up to rounding."""
    lhs = 2 * c_max ** 2 * math.log(2 / delta_p)
    rhs = n * eta_p ** 2 * y_p ** 2
    return lhs <= rhs or math.isclose(lhs, rhs, rel_tol=1e-12)


def micro_bounds(p: MicroParams):
    """Exponential factors of the two microcanonical error bounds.

    Returns:
        MicroBounds: unpacks as ``(bound_a, bound_b, hoeffding_ok)``.
    """
    p.validate()
    gap = p.eta - p.eta_p
    ea = _rate(p.n, p.y, p.eps, gap, p.c_max)
    eb = _rate(p.n, p.y_p, p.delta_p, gap, p.c_max)
    ok = hoeffding_condition(p.n, p.eta_p, p.y_p, p.delta_p, p.c_max)
    return MicroBounds(math.exp(-ea), math.exp(-eb), ok, ea, eb)


def parameter_regime(n, gamma, beta1, beta2, c_min, c_max, d_R=None):
    """Parameters ``y = n^-beta1``, ``y' = n^-beta2``, ``eta = c_min n^-gamma``, ``eta' = eta/2``.

    Uses ``alpha1 = 1 - 17 gamma`` and ``alpha2 = 1 - 5 gamma``. The
    polynomial prefactors of ``delta`` and ``eps'`` are set to one; the
    finite-n exponents are stored in ``extra``.
    """
    if n < 2:
        raise ParamOutOfRange("n must be at least 2")
    if min(gamma, beta1, beta2) <= 0 or gamma + beta1 >= 1 / 8 or gamma + beta2 >= 1 / 8:
        raise ParamOutOfRange("need gamma, beta > 0 and gamma + beta < 1/8")
    if not 0 < c_min <= c_max:
        raise ParamOutOfRange("need 0 < c_min <= c_max")
    alpha1 = 1 - 17 * gamma
    alpha2 = 1 - 5 * gamma
    c2 = (c_min / c_max) ** 8 / (2 * 10 ** 8)
    ln = math.log(n)
    e_delta = min(alpha1, 1 - 8 * beta1 - 8 * gamma + math.log(c2) / ln)
    e_eps_p = min(alpha2, 1 - 8 * beta2 - 8 * gamma + math.log(c2) / ln)
    eta = c_min * n ** (-gamma)
    p = MicroParams(n=n, J=1, eta=eta, eta_p=eta / 2, eps=math.exp(-n ** alpha1),
                    delta=min(1.0, math.exp(-n ** e_delta)), delta_p=math.exp(-n ** alpha2),
                    eps_p=min(1.0, math.exp(-n ** e_eps_p)), y=n ** (-beta1), y_p=n ** (-beta2),
                    nu=1.5, nu_p=1.5, c_min=c_min, c_max=c_max, d_R=d_R,
                    extra={"alpha1": alpha1, "alpha2": alpha2, "delta_exponent": e_delta,
                           "eps_p_exponent": e_eps_p, "c_pp": c2, "prefactor_known": False})
    return p


def identity_report(n, d):
    """Per-identity residuals for the CLI report."""
    rep = {"n": n, "d": d}
    rep["dimension_sum"] = int(sum(dim_P(l) * dim_Q(l, d) for l in young_diagrams(d, n)) - d ** n)
    rep["character_regular"] = int(sum(character(l, (1,) * n) ** 2 for l in partitions(n)) - math.factorial(n))
    rep.update({f"projector_{k}": v for k, v in projector_residuals(d, n).items()})
    if n * math.log2(d) <= 8:
        rep["definetti_gap"] = definetti_state(d, n).gap
    if (d * d) ** n <= 256:
        rep["block_compat"] = verify_block_compat(n, d, d)
    return rep
