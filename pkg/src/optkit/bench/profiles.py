"""Performance and data profiles over a (solver, problem) cost table."""

import csv

import numpy as np
from dataclasses import dataclass, field


@dataclass
class ProfileTable:
    """Per-(solver, problem) outcomes of a benchmark suite.

    ``time`` holds wall-clock seconds and ``evals`` objective-evaluation
    counts; both are +inf where ``solved`` is False.  ``dims`` holds each
    problem's variable count (used by the data profile normalization).
    """

    solvers: list
    problems: list
    solved: np.ndarray
    time: np.ndarray
    evals: np.ndarray
    dims: list
    runs: list = field(default_factory=list)   # per-run summary dicts

    def cost(self, kind):
        if kind == "time":
            return self.time
        if kind == "evals":
            return self.evals
        raise ValueError(f"unknown cost kind {kind!r}")


def _step_function(ratios, n_problems):
    """Sorted breakpoints (tau, fraction solved within tau) for one solver."""
    finite = np.sort(ratios[np.isfinite(ratios)])
    taus, fractions = [], []
    for tau in finite:
        if taus and tau == taus[-1]:
            fractions[-1] += 1.0 / n_problems
        else:
            taus.append(float(tau))
            fractions.append((fractions[-1] if fractions else 0.0) + 1.0 / n_problems)
    return np.array(taus), np.array(fractions)


@dataclass
class Profile:
    """Step functions rho_s(tau) per solver, as sorted breakpoints."""

    kind: str
    solvers: list
    breakpoints: dict    # solver -> (taus, fractions)

    def value(self, solver, tau):
        taus, fractions = self.breakpoints[solver]
        idx = np.searchsorted(taus, tau, side="right")
        return float(fractions[idx - 1]) if idx else 0.0

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["solver", "breakpoint", "fraction"])
            for solver in self.solvers:
                taus, fractions = self.breakpoints[solver]
                for tau, frac in zip(taus, fractions):
                    writer.writerow([solver, f"{tau:.17g}", f"{frac:.17g}"])
        return path


def performance_profile(table, cost="time"):
    """Dolan-More performance profile: rho_s(tau) = fraction of problems the
    solver finished within a factor tau of the best solver's cost."""
    costs = table.cost(cost)
    n_solvers, n_problems = costs.shape
    if n_problems == 0:
        raise ValueError("profile table has no problems")
    ratios = np.full_like(costs, np.inf)
    for p in range(n_problems):
        solved = table.solved[:, p]
        if not np.any(solved):
            continue  # unsolved by all: every ratio stays +inf
        best = np.min(costs[solved, p])
        if best <= 0.0:
            best = np.finfo(float).tiny
        ratios[solved, p] = costs[solved, p] / best
    breakpoints = {s: _step_function(ratios[i], n_problems)
                   for i, s in enumerate(table.solvers)}
    return Profile(kind="performance", solvers=list(table.solvers), breakpoints=breakpoints)


def data_profile(table):
    """More-Wild data profile: fraction solved within kappa*(n_p + 1) objective
    evaluations, per solver."""
    costs = table.cost("evals")
    n_solvers, n_problems = costs.shape
    if n_problems == 0:
        raise ValueError("profile table has no problems")
    ratios = np.full_like(costs, np.inf, dtype=float)
    for p in range(n_problems):
        scale = float(table.dims[p] + 1)
        solved = table.solved[:, p]
        ratios[solved, p] = costs[solved, p] / scale
    breakpoints = {s: _step_function(ratios[i], n_problems)
                   for i, s in enumerate(table.solvers)}
    return Profile(kind="data", solvers=list(table.solvers), breakpoints=breakpoints)


def write_suite_csv(table, path):
    """Per-run summary CSV: one row per (solver, problem)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["solver", "problem", "solved", "time_s", "n_obj",
                         "n_grad", "f_star", "optimality"])
        for run in table.runs:
            writer.writerow([
                run["solver"], run["problem"], run["solved"],
                f"{run['time_s']:.17g}", run["n_obj"], run["n_grad"],
                "" if run["f_star"] is None else f"{run['f_star']:.17g}",
                "" if run["optimality"] is None else f"{run['optimality']:.17g}",
            ])
    return path
