"""Short-recurrence drivers for multiterm matrix equations.

Two methods share one loop. Both update the iterate by a projected step
``X -> X + P_l @ alpha @ P_r.T`` whose coefficient minimizes the Frobenius
residual norm over the current direction pair:

* ``ss_mr`` takes the (preconditioned) residual itself as the next
  direction pair;
* ``ss_gcr1`` additionally recombines the previous pair with a matrix
  coefficient ``beta`` that makes consecutive operator images orthogonal.

All iterates stay in low-rank factored form with truncation after every
update, and the stopping test uses a sketched estimate of the residual
norm when the problem is large.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lowrank import LowRankMatrix, TruncationConfig, factored_sum, truncate
from .operator import MultitermEquation, residual_factored
from .precond import PreconditionerSpec, build_preconditioner
from .reduced import InnerSolveConfig, ReducedSystem, alpha_rhs, beta_rhs, build_reduced, solve_reduced
from .sketch import SketchPolicy, sketched_residual_truncate

#: Relative stagnation threshold on the step coefficient.
STALL_RTOL = 1e-16


@dataclass(frozen=True)
class SolverConfig:
    """Everything a solve needs besides the equation itself."""

    method: str = "ss_gcr1"
    tol: float = 1e-6
    maxit: int = 50
    truncation: TruncationConfig = field(default_factory=TruncationConfig)
    inner: InnerSolveConfig = field(default_factory=InnerSolveConfig)
    sketch_seed: int = 0
    preconditioner: PreconditionerSpec = field(default_factory=PreconditionerSpec.none)

    def __post_init__(self):
        if self.method not in ("ss_mr", "ss_gcr1"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.maxit < 1:
            raise ValueError("maxit must be at least 1")


@dataclass
class SolveReport:
    """Per-solve diagnostics mirroring the usual benchmark columns.

    ``residual_estimates`` and ``ranks`` carry one entry for the initial
    state plus one per iteration (``iterations + 1`` in total); the rank
    triples are ``(rank X, rank R, rank P)``. ``inner_pcg_iters`` has one
    entry per iteration: ``(min, max)`` over that iteration's projected
    solves when the iterative path ran, else ``None``. Estimates are not
    guaranteed monotone once truncation is active.
    """

    method: str
    status: str = "maxit_reached"
    iterations: int = 0
    residual_estimates: list[float] = field(default_factory=list)
    ranks: list[tuple[int, int, int]] = field(default_factory=list)
    inner_pcg_iters: list[tuple[int, int] | None] = field(default_factory=list)
    wall_times: dict[str, float] = field(default_factory=dict)
    rhs_norm: float = 0.0
    sketch_mode: str = "exact"
    true_final_residual: float | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def final_rank(self) -> int:
        return self.ranks[-1][0] if self.ranks else 0

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "status": self.status,
            "iterations": self.iterations,
            "residual_estimates": self.residual_estimates,
            "ranks": [list(r) for r in self.ranks],
            "inner_pcg_iters": [list(t) if t is not None else None
                                for t in self.inner_pcg_iters],
            "wall_times": self.wall_times,
            "rhs_norm": self.rhs_norm,
            "sketch_mode": self.sketch_mode,
            "true_final_residual": self.true_final_residual,
            "final_rank": self.final_rank,
        }


@dataclass(frozen=True)
class IterationInfo:
    """Snapshot handed to a solve callback at the end of each iteration."""

    k: int
    X: LowRankMatrix
    R: LowRankMatrix
    P: LowRankMatrix
    alpha: np.ndarray
    residual_estimate: float
    Z: LowRankMatrix | None = None
    P_next: LowRankMatrix | None = None
    beta: np.ndarray | None = None


class _Timer:
    def __init__(self, times: dict, key: str):
        self._times = times
        self._key = key

    def __enter__(self):
        self._start = time.perf_counter()

    def __exit__(self, *exc):
        self._times[self._key] = self._times.get(self._key, 0.0) + (
            time.perf_counter() - self._start
        )


def true_residual(eq: MultitermEquation, x: LowRankMatrix) -> float:
    """Exact relative residual ``||C D.T - L(X)||_F / ||C D.T||_F``.

    Evaluated on the factored residual: skinny QR of both tall factors
    reduces the norm to that of a small core product, which stays accurate
    down to machine precision even when the residual is tiny (a Gram-trace
    evaluation would lose half the digits to cancellation). A zero
    right-hand side yields the absolute residual norm.
    """
    norm = residual_factored(eq, x).norm_fro()
    rhs = eq.rhs_norm()
    return norm / rhs if rhs > 0 else norm


def _pcg_entry(infos: list[dict]) -> tuple[int, int] | None:
    iters = [i["pcg_iters"] for i in infos if i.get("pcg_iters") is not None]
    if not iters:
        return None
    return (min(iters), max(iters))


def solve(
    eq: MultitermEquation,
    cfg: SolverConfig,
    x0: LowRankMatrix | None = None,
    callback=None,
    compute_true_residual: bool = False,
) -> tuple[LowRankMatrix, SolveReport]:
    """Run the selected short recurrence on ``eq``.

    Parameters
    ----------
    eq : MultitermEquation
    cfg : SolverConfig
    x0 : LowRankMatrix, optional
        Initial guess; defaults to zero, for which the initial residual is
        exactly the factored right-hand side.
    callback : callable, optional
        Called with an :class:`IterationInfo` at the end of every
        iteration; useful for convergence studies.
    compute_true_residual : bool
        Recompute the exact relative residual of the returned iterate
        (one tall QR per side; off by default for large problems).

    Returns
    -------
    x : LowRankMatrix
    report : SolveReport

    Notes
    -----
    The loop stops once the sketched residual-norm estimate falls below
    ``cfg.tol * ||C D.T||_F`` or after ``cfg.maxit`` iterations, whichever
    comes first; inner-solve trouble is reported through warnings but
    never aborts the iteration. If a step coefficient vanishes relative to
    the accumulated core, the direction is redrawn once from the
    un-preconditioned residual before giving up.
    """
    times: dict[str, float] = {}
    t_start = time.perf_counter()
    report = SolveReport(method=cfg.method)

    x = x0 if x0 is not None else LowRankMatrix.zeros(eq.n_A, eq.n_B)
    rhs_norm = eq.rhs_norm()
    report.rhs_norm = rhs_norm

    policy = SketchPolicy.from_dimensions(
        eq.n_A, eq.n_B, eq.p, eq.q, cfg.truncation.maxrank
    )
    report.sketch_mode = policy.mode
    s_a, s_b = policy.operators(eq.n_A, eq.n_B, cfg.sketch_seed)

    with _Timer(times, "precondition"):
        precond = build_preconditioner(eq, cfg.preconditioner)
    needs_z_truncation = cfg.preconditioner.kind == "two_term_adi"

    with _Timer(times, "sketch"):
        r, estimate = sketched_residual_truncate(eq, x, s_a, s_b, cfg.truncation)
    with _Timer(times, "precondition"):
        z = precond.apply(r)
    if needs_z_truncation:
        with _Timer(times, "truncation"):
            z = truncate(z, cfg.truncation)
    with _Timer(times, "truncation"):
        p = truncate(z, cfg.truncation)

    report.residual_estimates.append(estimate)
    report.ranks.append((x.rank, r.rank, p.rank))

    if estimate <= cfg.tol * rhs_norm:
        report.status = "converged"
        report.wall_times = times | {"total": time.perf_counter() - t_start}
        if compute_true_residual:
            report.true_final_residual = true_residual(eq, x)
        return x, report

    redrawn = False
    for k in range(cfg.maxit):
        infos: list[dict] = []

        with _Timer(times, "reduced"):
            sys = build_reduced(eq, p.left, p.right)
            sys.rhs = alpha_rhs(eq, p.left, p.right, r)
            alpha, info = solve_reduced(sys, cfg.inner)
        infos.append(info)

        core_scale = float(np.linalg.norm(x.core)) if not x.is_zero else 0.0
        if np.linalg.norm(alpha) <= STALL_RTOL * core_scale:
            if redrawn:
                warnings.warn(
                    "step coefficient vanished twice; stopping early",
                    RuntimeWarning,
                )
                break
            redrawn = True
            warnings.warn(
                "step coefficient vanished; redrawing the direction from "
                "the un-preconditioned residual",
                RuntimeWarning,
            )
            with _Timer(times, "truncation"):
                p = truncate(r, cfg.truncation)
            continue

        with _Timer(times, "truncation"):
            x = truncate(factored_sum(x, p, alpha), cfg.truncation)

        with _Timer(times, "sketch"):
            r, estimate = sketched_residual_truncate(eq, x, s_a, s_b, cfg.truncation)
        report.residual_estimates.append(estimate)
        report.iterations = k + 1

        if estimate <= cfg.tol * rhs_norm:
            report.status = "converged"
            report.ranks.append((x.rank, r.rank, p.rank))
            report.inner_pcg_iters.append(_pcg_entry(infos))
            if callback is not None:
                callback(IterationInfo(
                    k=k, X=x, R=r, P=p, alpha=alpha, residual_estimate=estimate,
                ))
            break

        with _Timer(times, "precondition"):
            z = precond.apply(r)
        if needs_z_truncation:
            with _Timer(times, "truncation"):
                z = truncate(z, cfg.truncation)

        beta = None
        if cfg.method == "ss_gcr1":
            with _Timer(times, "reduced"):
                sys.rhs = beta_rhs(eq, p.left, p.right, z)
                beta, info = solve_reduced(sys, cfg.inner)
            infos.append(info)
            with _Timer(times, "truncation"):
                p_next = truncate(factored_sum(z, p, beta), cfg.truncation)
        else:
            with _Timer(times, "truncation"):
                p_next = truncate(z, cfg.truncation)

        report.ranks.append((x.rank, r.rank, p_next.rank))
        report.inner_pcg_iters.append(_pcg_entry(infos))
        if callback is not None:
            callback(IterationInfo(
                k=k, X=x, R=r, P=p, alpha=alpha, residual_estimate=estimate,
                Z=z, P_next=p_next, beta=beta,
            ))
        p = p_next

    report.wall_times = times | {"total": time.perf_counter() - t_start}
    if compute_true_residual:
        report.true_final_residual = true_residual(eq, x)
    return x, report
