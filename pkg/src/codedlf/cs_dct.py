"""LASSO reconstruction in the 5D-DCT basis via OWL-QN.

Solves

    min_alpha  || l_star - m * synth(alpha) ||_2^2 + lam * ||alpha||_1

with the orthant-wise limited-memory quasi-Newton method of Andrew & Gao
(2007): an L-BFGS direction built from gradients of the smooth term,
steered by the pseudo-gradient of the l1 objective, with every step
projected onto the orthant chosen at the start of the step so coordinate
signs never flip mid-step.  The line search backtracks until the full
objective satisfies an Armijo decrease along the projected step, which
makes the recorded objective sequence non-increasing by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import coding, transforms
from .tensor import as_tensor5


@dataclass
class OwlqnOptions:
    """Solver knobs; lam is the l1 coupling and is never defaulted."""

    lam: float
    max_iters: int = 500
    memory: int = 10
    grad_tol: float | None = None  # None: 1e-5 * sqrt(problem size)
    c1: float = 1e-4
    backtrack: float = 0.5
    max_linesearch: int = 50

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.grad_tol is not None and self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if not (0 < self.c1 < 1) or not (0 < self.backtrack < 1):
            raise ValueError("invalid line-search parameters")


@dataclass
class SolveReport:
    iterations: int
    objectives: list[float] = field(default_factory=list)
    final_objective: float = float("nan")
    termination: str = "max_iters"


def _pseudo_gradient(x: np.ndarray, g: np.ndarray, lam: float) -> np.ndarray:
    """Pseudo-gradient of f(x) + lam*||x||_1 (zero inside the subdifferential)."""
    if lam == 0.0:
        return g.copy()
    pg = np.where(x > 0, g + lam, np.where(x < 0, g - lam, 0.0))
    at_zero = x == 0
    right = g + lam
    left = g - lam
    pg = np.where(at_zero & (right < 0), right, pg)
    pg = np.where(at_zero & (left > 0), left, pg)
    return pg


def _two_loop(pg: np.ndarray, history: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Standard L-BFGS two-loop recursion; returns the ascent direction H*pg."""
    q = pg.copy()
    alphas = []
    for s, y in reversed(history):
        rho = 1.0 / float(np.vdot(y, s))
        a = rho * float(np.vdot(s, q))
        q -= a * y
        alphas.append((a, rho))
    if history:
        s, y = history[-1]
        q *= float(np.vdot(s, y)) / float(np.vdot(y, y))
    for (a, rho), (s, y) in zip(reversed(alphas), history):
        b = rho * float(np.vdot(y, q))
        q += (a - b) * s
    return q


def owlqn_reconstruct(
    l_star_p: np.ndarray,
    m: np.ndarray,
    opts: OwlqnOptions,
    _iterate_hook=None,
) -> tuple[np.ndarray, SolveReport]:
    """Reconstruct a light field from its projected coded measurement.

    l_star_p is the (U, V, S, T, 1) projected measurement, m the one-hot
    coding mask.  Returns the synthesized (U, V, S, T, C) float32 estimate
    and a report with the per-iteration objective values.  Line-search
    failure terminates the solve with a report entry, never an exception.
    """
    l_star_p = as_tensor5(l_star_p, "projected measurement")
    l_star = coding.lift(l_star_p, m).astype(np.float64)
    mb = np.asarray(m, dtype=np.float64)[None, None]
    lam = float(opts.lam)

    # analysis(m * l_star) is constant across iterations; l_star is already
    # coded, so m * l_star == l_star.
    b = transforms.dct5_forward(l_star)
    x = b.copy()  # warm start consistent with the measurement

    n = x.size
    tol = opts.grad_tol if opts.grad_tol is not None else 1e-5 * np.sqrt(n)

    def smooth_grad(xx: np.ndarray) -> tuple[float, np.ndarray]:
        masked = mb * transforms.dct5_inverse(xx)
        resid = masked - l_star
        f = float(np.vdot(resid, resid).real)
        g = 2.0 * (transforms.dct5_forward(masked) - b)
        return f, g

    def full_objective(xx: np.ndarray) -> float:
        resid = mb * transforms.dct5_inverse(xx) - l_star
        return float(np.vdot(resid, resid).real) + lam * float(np.abs(xx).sum())

    f, g = smooth_grad(x)
    obj = f + lam * float(np.abs(x).sum())
    report = SolveReport(iterations=0, objectives=[obj])
    history: list[tuple[np.ndarray, np.ndarray]] = []

    for it in range(opts.max_iters):
        pg = _pseudo_gradient(x, g, lam)
        if float(np.abs(pg).max()) <= tol:
            report.termination = "converged"
            break

        d = -_two_loop(pg, history)
        # Constrain the direction to the descent orthant of the pseudo-gradient.
        d[d * (-pg) <= 0] = 0.0
        if float(np.vdot(pg, d)) >= 0:
            d = -pg
        xi = np.where(x != 0, np.sign(x), np.sign(-pg))

        step = 1.0 if history else 1.0 / max(float(np.linalg.norm(pg)), 1e-30)
        accepted = False
        for _ in range(opts.max_linesearch):
            x_new = x + step * d
            x_new[np.sign(x_new) != xi] = 0.0
            dx = x_new - x
            decrease = float(np.vdot(pg, dx))
            if decrease < 0:
                obj_new = full_objective(x_new)
                if obj_new <= obj + opts.c1 * decrease:
                    accepted = True
                    break
            step *= opts.backtrack
        if not accepted:
            report.termination = "line_search_failed"
            break

        f_new, g_new = smooth_grad(x_new)
        s = x_new - x
        y = g_new - g
        if float(np.vdot(s, y)) > 1e-12:
            history.append((s, y))
            if len(history) > opts.memory:
                history.pop(0)
        x, g, obj = x_new, g_new, obj_new
        report.iterations = it + 1
        report.objectives.append(obj)
        if _iterate_hook is not None:
            _iterate_hook(x)
    else:
        report.termination = "max_iters"

    report.final_objective = obj
    rec = transforms.dct5_inverse(x).astype(np.float32)
    return rec, report
