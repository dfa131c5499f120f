"""Online minimum-relative-entropy channel learning with simulated shot noise."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import entropy, maxent, qcore
from .errors import NotConverged, ParamOutOfRange, ThermalChannelError

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
GUARD_EPS = 1e-10


# ---------------------------------------------------------------------------
# channel zoo


def depolarizing_choi(p):
    """``D_p(rho) = (1-p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)``."""
    if not 0 <= p <= 1:
        raise ParamOutOfRange(f"depolarizing parameter {p} outside [0, 1]")
    kraus = [np.sqrt(1 - p) * np.eye(2)] + [np.sqrt(p / 3) * P for P in (PAULI_X, PAULI_Y, PAULI_Z)]
    return qcore.choi_from_kraus(kraus)


def amplitude_damping_choi(gamma):
    if not 0 <= gamma <= 1:
        raise ParamOutOfRange(f"damping parameter {gamma} outside [0, 1]")
    K1 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex)
    K2 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    return qcore.choi_from_kraus([K1, K2])


def completely_depolarizing_choi(d=2):
    return qcore.depolarizing_choi_full(d, d)


STABILIZER_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


@dataclass(frozen=True)
class ObservableSpec:
    """Channel observable, either ``P_B (x) rho_R`` or a general ``E_BR``.

    ``key`` identifies the running-average bucket.
    """

    key: str
    P_B: np.ndarray = None
    rho_R: np.ndarray = None
    E: np.ndarray = None

    @property
    def factored(self):
        return self.P_B is not None

    @property
    def operator(self):
        if self.factored:
            return np.kron(self.P_B, self.rho_R)
        return self.E


def factored_observable(P_B, rho_R, key):
    P_B = qcore.check_hermitian(P_B, tol=1e-10)
    rho_R = qcore.check_density(rho_R)
    return ObservableSpec(key=key, P_B=P_B, rho_R=rho_R)


def general_observable(E, key):
    return ObservableSpec(key=key, E=qcore.check_hermitian(E, tol=1e-10))


def stabilizer_pauli_ensemble():
    """18 observables: non-identity Paulis times single-qubit stabilizer states."""
    out = []
    for pname, P in (("X", PAULI_X), ("Y", PAULI_Y), ("Z", PAULI_Z)):
        for sname, v in STABILIZER_STATES.items():
            out.append(factored_observable(P, qcore.proj(v), f"{pname}|{sname}"))
    return out


def expectation(N, obs):
    """Exact ``tr[E N]`` on the Choi matrix."""
    return float(np.trace(obs.operator @ N.op).real)


# ---------------------------------------------------------------------------
# measurement simulation


def simulate_expectation(truth, obs, shots, seed):
    """Shot-noise estimate of ``tr[E N]``.

    Factored observables prepare ``rho_R^T`` on A, apply the channel and
    sample eigenvalues of ``P_B`` with Born probabilities. General
    observables use a Gaussian with standard deviation ``||E|| / sqrt(shots)``.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    rng = qcore.make_rng(seed)
    if obs.factored:
        out = qcore.apply_channel(truth, obs.rho_R.T)
        w, v = qcore.eigh(obs.P_B)
        probs = np.clip(np.real(np.einsum("ki,kl,li->i", v.conj(), out, v)), 0, None)
        probs = probs / probs.sum()
        counts = rng.multinomial(int(shots), probs)
        return float(counts @ w / shots)
    mean = expectation(truth, obs)
    return float(mean + rng.normal() * np.linalg.norm(obs.E, 2) / np.sqrt(shots))


def running_average(prev_s, count_prev, new_hat):
    """Incremental mean after one more sample."""
    n = count_prev + 1
    return ((n - 1) * prev_s + new_hat) / n


# ---------------------------------------------------------------------------
# learning update


def _guard(M):
    if M.min_eigenvalue() < GUARD_EPS:
        dep = np.eye(M.dim) / M.dim_b
        return qcore.choi((1 - GUARD_EPS) * M.op + GUARD_EPS * dep, M.dim_b, M.dim_r)
    return M


LEARN_OPTS = maxent.SolverOptions(tol=1e-6, inner_tol=1e-12, max_iter=100, n_starts=1, use_symmetry=False,
                                  outer_eps=1e-4, outer_gtol=1e-6, outer_maxiter=20)


def learn_step(M_t, obs, s_t, eta, phi0=None, opts=None, return_phi=False):
    """One update ``argmin_N D(N || M_t) + eta (s_t - tr[E N])^2``.

    The channel relative entropy is a maximum over inputs, so by the
    minimax interchange the update maximizes the fixed-input optimum over
    ``phi`` (started from ``phi0``) and returns the fixed-input solution
    there.

    Args:
        M_t (ChoiMatrix): current guess.
        obs (ObservableSpec): observable ``E``.
        s_t (float): current estimate of ``tr[E N]``.
        eta (float): learning rate, positive.
        phi0 (ndarray): warm start for the input state.

    Returns:
        ChoiMatrix (and the optimal ``phi`` when ``return_phi``).
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    opts = opts or LEARN_OPTS
    M = _guard(M_t)
    problem = maxent.MaxEntProblem(M.dim_r, M.dim_b, quadratic=[(obs.operator, s_t, eta)], reference=M)
    d = M.dim_r
    phi0 = qcore.maximally_mixed(d) if phi0 is None else phi0
    phi, _, _ = maxent.maximize_over_inputs(problem, opts, starts=[phi0], restrict="full")
    # solve at the same regularized input the outer search used: at a pure phi
    # the minimizer is not unique and a vanishing mixing picks an arbitrary one
    eps = max(opts.outer_eps, 1e-9)
    phi = (1 - eps) * phi + eps * np.eye(d) / d
    sol = maxent.solve_fixed_input(problem, phi, opts, raise_errors=False)
    if not sol.converged:
        raise NotConverged("learning update did not converge", best=sol)
    N = qcore.choi(sol.choi.op, M.dim_b, M.dim_r)
    return (N, phi) if return_phi else N


# ---------------------------------------------------------------------------
# experiment driver


TRACE_HEADER = ["t", "obs_key", "s_hat", "s_avg", "choi_td", "diamond", "rel_ent"]


@dataclass
class LearningTrace:
    records: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    final: object = None

    def column(self, name):
        return np.array([r[name] for r in self.records], dtype=float)

    def to_csv(self, fh=None):
        """Write the CSV (``inf`` for infinite values); returns the text if ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(TRACE_HEADER)
        for r in self.records:
            wr.writerow([_fmt(r[k]) for k in TRACE_HEADER])
        return buf.getvalue() if fh is None else None


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def choi_trace_distance(N, M):
    """Trace distance of the normalized Choi states."""
    return qcore.trace_distance(N.state(), M.state())


def run_learning(truth, ensemble, T, eta, shots, seed, rel_ent=False, diamond=False, diamond_every=1):
    """Run the online learning algorithm against simulated measurements.

    Args:
        truth (ChoiMatrix): channel generating the data.
        ensemble (list): ObservableSpec choices, drawn uniformly.
        T (int): number of iterations.
        eta (float): learning rate.
        shots (int): channel uses per estimate.
        seed (int): seed for observable choice and shot noise.
        rel_ent (bool): record ``D(M_t || truth)`` (maximized over inputs).
        diamond (bool): record the diamond distance every ``diamond_every`` steps.

    Returns:
        LearningTrace
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    ss = qcore.random_seed_sequence(seed)
    choice_seed, shot_seed = ss.spawn(2)
    choose = qcore.make_rng(choice_seed)
    shot_seeds = shot_seed.spawn(T)
    M = completely_depolarizing_choi(truth.dim_b) if truth.dim_b == truth.dim_r else \
        qcore.depolarizing_choi_full(truth.dim_b, truth.dim_r)
    sums, counts = {}, {}
    phi = None
    trace = LearningTrace(config={"eta": eta, "shots": shots, "T": T, "seed": seed})
    for t in range(1, T + 1):
        obs = ensemble[int(choose.integers(len(ensemble)))]
        s_hat = simulate_expectation(truth, obs, shots, shot_seeds[t - 1])
        n = counts.get(obs.key, 0)
        s_avg = running_average(sums.get(obs.key, 0.0), n, s_hat)
        sums[obs.key], counts[obs.key] = s_avg, n + 1
        status = "ok"
        try:
            M, phi = learn_step(M, obs, s_avg, eta, phi0=phi, return_phi=True)
        except ThermalChannelError:
            status = "not_converged"
        rec = {"t": t, "obs_key": obs.key, "s_hat": s_hat, "s_avg": s_avg,
               "choi_td": choi_trace_distance(M, truth), "diamond": float("nan"), "rel_ent": float("nan"),
               "status": status}
        if diamond and (t % diamond_every == 0 or t == T):
            rec["diamond"] = entropy.diamond_distance(M, truth, n_starts=2, seed=t).value
        if rel_ent:
            rec["rel_ent"] = entropy.channel_relative_entropy(M, truth, n_starts=2, seed=t).value
        trace.records.append(rec)
    trace.final = M
    return trace


def smoothed(x, window=20):
    """Trailing moving average (shorter window at the start)."""
    x = np.asarray(x, dtype=float)
    c = np.cumsum(np.insert(x, 0, 0.0))
    out = np.empty_like(x)
    for i in range(len(x)):
        lo = max(0, i + 1 - window)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out


class OnlineChannelLearner(BaseEstimator, TransformerMixin):
    """Estimator form of the learning algorithm.

    ``partial_fit(obs, s_hat)`` consumes one estimate; ``fit`` consumes a
    sequence of ``(obs, s_hat)`` pairs; ``transform`` applies the current
    channel guess to states.
    """

    def __init__(self, eta=0.15, dim=2):
        self.eta = eta
        self.dim = dim

    def _init(self):
        self.choi_ = completely_depolarizing_choi(self.dim)
        self.sums_, self.counts_ = {}, {}
        self.phi_ = None
        self.n_updates_ = 0

    def partial_fit(self, obs, s_hat):
        if not hasattr(self, "choi_"):
            self._init()
        n = self.counts_.get(obs.key, 0)
        s = running_average(self.sums_.get(obs.key, 0.0), n, s_hat)
        self.sums_[obs.key], self.counts_[obs.key] = s, n + 1
        self.choi_, self.phi_ = learn_step(self.choi_, obs, s, self.eta, phi0=self.phi_, return_phi=True)
        self.n_updates_ += 1
        return self

    def fit(self, X, y=None):
        self._init()
        for obs, s_hat in X:
            self.partial_fit(obs, s_hat)
        return self

    def transform(self, X):
        check_is_fitted(self, "choi_")
        X = np.asarray(X, dtype=complex)
        if X.ndim == 2:
            return qcore.apply_channel(self.choi_, X)
        return np.array([qcore.apply_channel(self.choi_, x) for x in X])
