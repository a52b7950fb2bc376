"""Newton iteration, finite-difference Jacobians and Euler time steppers.

The steppers are written against a small duck-typed *problem* interface:

``pack(state) -> x`` / ``unpack(x, like) -> state``
    Map a state to the full unknown vector of an implicit step and back.
``step_residual(x, x_old, dt) -> r``
    Backward-Euler residual; square in ``x``.
``sparsity() -> scipy.sparse matrix or None``
    Structural nonzeros of ``d r / d x`` (optional).
``rhs(state) -> v`` and ``advance(state, v, dt, cfg) -> state``
    Explicit path: velocities on interior nodes, then the update followed by
    re-solving ghost / junction closures.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg as spla

_SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


@dataclass(frozen=True)
class NewtonConfig:
    """Controls for :func:`newton_solve`.

    ``fd_eps`` is the relative finite-difference step; ``None`` uses
    ``sqrt(machine eps)``.  Steps that produce a non-finite residual are
    always halved.  ``line_search`` adds Armijo backtracking on ``|r|_2^2``;
    it is off by default because rows of very different scale make that
    merit misleading.

    Stiff residuals with ``dt / h^4`` scaling have a roundoff floor above
    ``tol``.  An iterate within ``1e4 * tol`` is therefore also accepted
    once the update drops below ``xtol * max(1, max|x|)`` or the residual
    stops halving.
    """

    tol: float = 1e-10
    xtol: float = 1e-13
    max_iter: int = 30
    fd_eps: float | None = None
    line_search: bool = False
    condition_estimate: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class StepReport:
    iterations: int
    residual: float
    history: list = field(default_factory=list)
    condition: float | None = None
    dt: float | None = None


class NewtonError(RuntimeError):
    """Newton did not converge; carries the last iterate and residual history."""

    def __init__(self, msg, x=None, history=None):
        super().__init__(msg)
        self.x = x
        self.history = list(history or [])


class SingularJacobianError(NewtonError):
    pass


# --------------------------------------------------------------- Jacobians

def color_columns(pattern) -> np.ndarray:
    """Greedy column grouping: columns in a group share no nonzero row."""
    P = sps.csc_matrix(pattern, dtype=bool)
    n_rows, n_cols = P.shape
    groups = np.empty(n_cols, dtype=int)
    used: list[np.ndarray] = []
    for j in range(n_cols):
        rows = P.indices[P.indptr[j]:P.indptr[j + 1]]
        for g, mask in enumerate(used):
            if not mask[rows].any():
                mask[rows] = True
                groups[j] = g
                break
        else:
            mask = np.zeros(n_rows, dtype=bool)
            mask[rows] = True
            used.append(mask)
            groups[j] = len(used) - 1
    return groups


def _steps(x, fd_eps):
    rel = _SQRT_EPS if fd_eps is None else fd_eps
    return rel * np.maximum(1.0, np.abs(x))


def _check_finite(J, where):
    data = J.data if sps.issparse(J) else J
    if not np.all(np.isfinite(data)):
        if sps.issparse(J):
            coo = J.tocoo()
            bad = np.flatnonzero(~np.isfinite(coo.data))
            idx = list(zip(coo.row[bad].tolist(), coo.col[bad].tolist()))
        else:
            idx = [tuple(ij) for ij in np.argwhere(~np.isfinite(J)).tolist()]
        raise ValueError(f"non-finite Jacobian entries in {where} at (row, col) {idx[:10]}")


def fd_jacobian(fun, x, fd_eps=None, sparsity=None, f0=None, groups=None):
    """Forward-difference Jacobian of ``fun`` at ``x``.

    With a ``sparsity`` pattern the columns are perturbed in structurally
    independent groups and a CSC matrix is returned; otherwise the result is
    a dense array.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x) if f0 is None else f0, dtype=float)
    if not np.all(np.isfinite(f0)):
        raise ValueError("residual is not finite at the base point")
    dx = _steps(x, fd_eps)
    if sparsity is None:
        J = np.empty((f0.size, x.size))
        for j in range(x.size):
            xp = x.copy()
            xp[j] += dx[j]
            J[:, j] = (fun(xp) - f0) / dx[j]
        _check_finite(J, "dense Jacobian")
        return J
    P = sps.coo_matrix(sparsity, dtype=bool)
    if groups is None:
        groups = color_columns(P)
    n_groups = int(groups.max()) + 1
    DF = np.empty((f0.size, n_groups))
    for g in range(n_groups):
        cols = groups == g
        xp = x.copy()
        xp[cols] += dx[cols]
        DF[:, g] = fun(xp) - f0
    vals = DF[P.row, groups[P.col]] / dx[P.col]
    J = sps.csc_matrix((vals, (P.row, P.col)), shape=(f0.size, x.size))
    _check_finite(J, "sparse Jacobian")
    return J


def _factor(J):
    try:
        if sps.issparse(J):
            lu = spla.splu(sps.csc_matrix(J))
            return lu.solve
        lu = scipy.linalg.lu_factor(J, check_finite=False)
        if np.any(np.diag(lu[0]) == 0.0):
            raise np.linalg.LinAlgError("exactly singular")
        return lambda b: scipy.linalg.lu_solve(lu, b, check_finite=False)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise SingularJacobianError(f"singular Jacobian: {exc}") from exc


def condition_estimate(J) -> float:
    A = J.toarray() if sps.issparse(J) else J
    return float(np.linalg.cond(A))


def newton_solve(fun, x0, cfg: NewtonConfig = NewtonConfig(), jac=None, sparsity=None,
                 groups=None):
    """Solve ``fun(x) = 0``; converged when ``max|fun(x)| <= cfg.tol``.

    Returns ``(x, StepReport)``.  ``jac(x)`` may supply an analytic Jacobian;
    otherwise :func:`fd_jacobian` is used (grouped if ``sparsity`` is given).
    """
    x = np.array(x0, dtype=float)
    f = np.asarray(fun(x), dtype=float)
    if f.shape[0] != x.shape[0]:
        raise ValueError(f"system is not square: {f.shape[0]} residuals, {x.shape[0]} unknowns")
    if sparsity is not None and groups is None:
        groups = color_columns(sparsity)
    history = []
    cond = None
    small_step = False
    for it in range(cfg.max_iter + 1):
        if not np.all(np.isfinite(f)):
            raise NewtonError(f"non-finite residual at iteration {it}", x, history)
        rn = float(np.max(np.abs(f)))
        history.append(rn)
        stalled = len(history) > 3 and rn > 0.5 * min(history[-4:-1])
        if rn <= cfg.tol or ((small_step or stalled) and rn <= 1e4 * cfg.tol):
            return x, StepReport(it, rn, history, cond)
        if it == cfg.max_iter:
            break
        J = jac(x) if jac is not None else fd_jacobian(fun, x, cfg.fd_eps, sparsity, f, groups)
        if cfg.condition_estimate and cond is None:
            cond = condition_estimate(J)
        try:
            solve = _factor(J)
        except SingularJacobianError as exc:
            raise SingularJacobianError(str(exc), x, history) from exc
        dx = solve(-f)
        if not np.all(np.isfinite(dx)):
            raise SingularJacobianError("Newton update is not finite", x, history)
        lam = 1.0
        merit = float(f @ f)
        while True:
            xn = x + lam * dx
            fn = np.asarray(fun(xn), dtype=float)
            ok = bool(np.all(np.isfinite(fn)))
            if ok and cfg.line_search:
                ok = float(fn @ fn) <= (1.0 - 1e-4 * lam) * merit
            if ok or lam < 1e-4:
                break
            lam *= 0.5
        small_step = bool(np.max(np.abs(lam * dx)) <= cfg.xtol * max(1.0, np.max(np.abs(x))))
        x, f = xn, fn
    raise NewtonError(
        f"Newton did not converge in {cfg.max_iter} iterations (residual {history[-1]:.3e})",
        x, history,
    )


def newton_with_fallback(fun, x0, cfg: NewtonConfig = NewtonConfig(), **kw):
    """Full Newton first; on failure retry once with Armijo backtracking.

    Full steps are fastest from consistent data, but from data far from the
    junction angle (large m, flat start) they overshoot into degenerate
    configurations that backtracking avoids.
    """
    try:
        return newton_solve(fun, x0, cfg, **kw)
    except NewtonError:
        if cfg.line_search:
            raise
        return newton_solve(fun, x0, replace(cfg, line_search=True, max_iter=max(cfg.max_iter, 60)), **kw)


# ------------------------------------------------------------ time steppers

def forward_euler_step(problem, state, dt, cfg: NewtonConfig = NewtonConfig()):
    """``X <- X + dt F(X)`` on interior nodes, then re-close ghosts and junction."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return state
    return problem.advance(state, problem.rhs(state), dt, cfg)


def backward_euler_step(problem, state, dt, cfg: NewtonConfig = NewtonConfig()):
    """Solve ``X^{n+1} - dt F(X^{n+1}) - X^n = 0`` with all closures as unknowns."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if hasattr(problem, "bind"):
        problem.bind(state)
    x_old = problem.pack(state)
    x0 = problem.predict(state) if hasattr(problem, "predict") else x_old
    fun = lambda x: problem.step_residual(x, x_old, dt)  # noqa: E731
    x, rep = newton_with_fallback(fun, x0, cfg, sparsity=problem.sparsity(),
                                  groups=getattr(problem, "groups", lambda: None)())
    rep.dt = dt
    return problem.unpack(x, state, dt), rep


class RunLog:
    """Append-only JSONL log of step reports: ``{step, t, iters, resid, dt}``."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.records: list[dict] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def append(self, step: int, t: float, report: StepReport | None, dt: float):
        rec = {
            "step": step,
            "t": t,
            "iters": None if report is None else report.iterations,
            "resid": None if report is None else report.residual,
            "dt": dt,
        }
        self.records.append(rec)
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(json.dumps(rec) + "\n")


def report_dict(report: StepReport) -> dict:
    return asdict(report)
