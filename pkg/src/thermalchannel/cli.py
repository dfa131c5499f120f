"""Command-line interface: ``solve``, ``learn``, ``verify`` and ``schurweyl``.

Exit codes: 0 when every requested check passes, 1 on a failed check or a
solver error, 2 on malformed input. Errors are written to stderr as one
JSON object per line.
"""

import argparse
import json
import sys

import numpy as np

from . import entropy, exemplars, learn, maxent, qcore, schurweyl
from .errors import ThermalChannelError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_error(name, message, **extra):
    rec = {"error": name, "message": message}
    rec.update(extra)
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# truth channel mini-language


def parse_truth(text):
    """``name[:param]`` for the channel zoo, or ``@file.json`` for a Choi file.

    Names: ``depolarizing:p``, ``amplitude-damping:gamma``,
    ``completely-depolarizing[:d]``, ``identity[:d]``, ``random:seed``.
    """
    if text.startswith("@"):
        try:
            return qcore.choi_from_json(_read_json(text[1:]))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    name, _, arg = text.partition(":")
    try:
        if name == "depolarizing":
            return learn.depolarizing_choi(float(arg))
        if name == "amplitude-damping":
            return learn.amplitude_damping_choi(float(arg))
        if name == "completely-depolarizing":
            return learn.completely_depolarizing_choi(int(arg) if arg else 2)
        if name == "identity":
            return qcore.identity_choi(int(arg) if arg else 2)
        if name == "random":
            return qcore.random_channel(int(arg) if arg else 0, 2, 2)
    except ValueError as exc:
        raise UsageError(f"bad truth parameter in {text!r}: {exc}") from exc
    raise UsageError(f"unknown truth channel {text!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args):
    problem, phi = maxent.problem_from_json(_read_json(args.problem))
    opts = maxent.SolverOptions(tol=args.tol, seed=args.seed, n_starts=args.n_starts,
                                reg_eps=tuple(args.reg_eps) if args.reg_eps else maxent.SolverOptions.reg_eps,
                                regularize=not args.no_regularize)
    try:
        if args.fixed_input:
            if phi is None:
                raise UsageError("--fixed-input needs a 'phi' entry in the problem file")
            sol = maxent.solve_fixed_input(problem, phi, opts)
        else:
            sol = maxent.solve_thermal_channel(problem, opts)
    except ThermalChannelError as exc:
        rec = exc.record()
        best = getattr(exc, "best", None)
        if best is not None and best.residuals is not None:
            rec["residuals"] = best.residuals.to_dict()
        sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")
        return EXIT_FAIL
    _write(args.output, _dumps(maxent.solution_to_json(sol)))
    ok = sol.residuals.ok(args.tol)
    if not ok:
        _emit_error("KktCheckFailed", "certificate residuals exceed tolerance",
                    max_residual=sol.residuals.max_residual())
    return EXIT_OK if ok else EXIT_FAIL


def cmd_learn(args):
    truth = parse_truth(args.truth)
    if truth.dim_b != 2 or truth.dim_r != 2:
        raise UsageError("the stabilizer ensemble needs a qubit channel")
    trace = learn.run_learning(truth, learn.stabilizer_pauli_ensemble(), args.T, args.eta, args.shots,
                               args.seed, rel_ent=not args.no_rel_ent, diamond=args.diamond,
                               diamond_every=args.diamond_every)
    _write(args.output, trace.to_csv())
    failed = [r["t"] for r in trace.records if r["status"] != "ok"]
    if failed:
        _emit_error("NotConverged", "learning updates kept the previous guess", steps=failed)
    return EXIT_OK


def _verify_items():
    """Exemplar-oracle checks, each returning ``(name, error, tolerance)``."""

    def unconstrained():
        sol = maxent.solve_thermal_channel(maxent.MaxEntProblem(2, 2))
        err = max(np.linalg.norm(sol.choi.op - np.eye(4) / 2), abs(sol.entropy - np.log(2)))
        return "unconstrained", err, 1e-6

    def replacer():
        H = np.diag([0.0, 1.0])
        ex = exemplars.replacer_thermal(H, 0.3)
        sol = maxent.solve_thermal_channel(maxent.MaxEntProblem(2, 2, equality=exemplars.replacer_constraints(H, 0.3)))
        return "replacer", np.linalg.norm(sol.choi.op - ex.op), 1e-4

    def strict_energy():
        H = np.diag([0.0, 1.0, 1.0])
        ex, s = exemplars.strict_energy_thermal(H)
        cons = [(np.kron(P, P.T), np.trace(P).real) for _, P in exemplars.energy_eigenspaces(H)]
        sol = maxent.solve_fixed_input(maxent.MaxEntProblem(3, 3, equality=cons), np.eye(3) / 3)
        return "strict-energy(phi=I/d)", np.linalg.norm(sol.choi.op - ex.op), 1e-4

    def pauli():
        rng = qcore.make_rng(7)
        c = rng.normal(size=(2, 2))
        p0 = rng.dirichlet(np.ones(4))
        q = float(c.ravel() @ p0)
        p, ex = exemplars.pauli_maxent(2, [(c, q)])
        C = exemplars.bell_constraint_operator(c, 2)
        sol = maxent.solve_thermal_channel(maxent.MaxEntProblem(2, 2, equality=[(C, q)]))
        return "pauli-classical", np.linalg.norm(sol.choi.op - ex.op), 1e-6

    def pauli_entropy():
        p = np.array([0.55, 0.25, 0.15, 0.05])
        N = exemplars.pauli_choi(p, 2)
        rep = entropy.channel_entropy(N, n_starts=3)
        # S(B|R) at the maximally entangled input: H(p) - log d
        return "pauli-channel-entropy", abs(rep.value - qcore.shannon_entropy(p) + np.log(2)), 1e-8

    def classical_fixed():
        c = np.array([[[0.0, 1.0], [1.0, 0.0]]])
        p = np.array([0.3, 0.7])
        T = exemplars.classical_maxent_fixed_input(c, [0.4], p)
        C = np.diag(c[0].reshape(-1)).astype(complex)
        sol = maxent.solve_fixed_input(maxent.MaxEntProblem(2, 2, equality=[(C, 0.4)]), np.diag(p))
        return "classical-fixed-input", np.linalg.norm(sol.choi.op - exemplars.classical_choi(T).op), 1e-6

    def dims():
        err = max(abs(sum(schurweyl.dim_P(l) * schurweyl.dim_Q(l, d) for l in schurweyl.young_diagrams(d, n)) - d ** n)
                  for n in range(1, 7) for d in range(1, 5))
        return "schur-weyl-dimensions", float(err), 0.0

    return [unconstrained, replacer, strict_energy, pauli, pauli_entropy, classical_fixed, dims]


def _run_item(item):
    try:
        name, err, tol = item()
        return name, float(err), tol, None
    except ThermalChannelError as exc:
        return item.__name__, float("nan"), None, exc.record()


def cmd_verify(args):
    results = qcore.parallel_map(_run_item, _verify_items())
    lines, ok_all = [], True
    for name, err, tol, rec in results:
        ok = rec is None and err <= tol
        ok_all &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name:<26s} error={err:.3e} tol={tol if tol is not None else 'n/a'}")
        if rec is not None:
            _emit_error(rec["error"], rec["message"], item=name)
    _write(args.output, "\n".join(lines) + "\n")
    return EXIT_OK if ok_all else EXIT_FAIL


def cmd_schurweyl(args):
    rep = schurweyl.identity_report(args.n, args.d)
    exact = ("dimension_sum", "character_regular")
    ok = all(rep[k] == 0 for k in exact)
    ok &= all(v <= args.tol for k, v in rep.items() if k not in exact + ("n", "d"))
    rep["pass"] = bool(ok)
    _write(args.output, _dumps(rep))
    if not ok:
        _emit_error("IdentityCheckFailed", "a Schur-Weyl identity residual exceeds the tolerance")
    return EXIT_OK if ok else EXIT_FAIL


def _seed(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return v


def build_parser():
    p = _Parser(prog="thermal-channel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a thermal channel problem file")
    s.add_argument("problem")
    s.add_argument("-o", "--output")
    s.add_argument("--fixed-input", action="store_true", help="solve at the 'phi' given in the file")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--n-starts", type=int, default=8)
    s.add_argument("--reg-eps", type=float, nargs="+")
    s.add_argument("--no-regularize", action="store_true")
    s.set_defaults(func=cmd_solve)

    l = sub.add_parser("learn", help="run the online learning experiment")
    l.add_argument("--truth", required=True)
    l.add_argument("--eta", type=float, default=0.15)
    l.add_argument("--shots", type=int, default=10000)
    l.add_argument("-T", type=int, default=300)
    l.add_argument("--seed", type=_seed, default=0)
    l.add_argument("--diamond", action="store_true")
    l.add_argument("--diamond-every", type=int, default=1)
    l.add_argument("--no-rel-ent", action="store_true")
    l.add_argument("-o", "--output")
    l.set_defaults(func=cmd_learn)

    v = sub.add_parser("verify", help="run the exemplar-oracle suite")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("schurweyl", help="Schur-Weyl identity residuals")
    w.add_argument("--n", type=int, required=True)
    w.add_argument("--d", type=int, default=2)
    w.add_argument("--tol", type=float, default=1e-10)
    w.add_argument("-o", "--output")
    w.set_defaults(func=cmd_schurweyl)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "T", 1) < 1:
            raise UsageError("-T must be at least 1")
        if getattr(args, "shots", 1) < 1:
            raise UsageError("--shots must be at least 1")
        return args.func(args)
    except UsageError as exc:
        _emit_error("UsageError", str(exc))
        return EXIT_USAGE
    except ValueError as exc:
        # malformed files and out-of-range parameters
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_USAGE
    except ThermalChannelError as exc:
        sys.stderr.write(json.dumps(exc.record(), sort_keys=True) + "\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
