"""Adaptive time integration of the mean-field equations and steady states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from pumpep.core import (
    MeanFieldState,
    ModelParams,
    derive_rates,
    gamma_sigma,
    residual_norm,
    rhs_array,
    rhs_jacobian,
)
from pumpep.errors import StepUnderflowError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
# continuous extension: y(t + th) = y + h * K.T @ (_P @ [th, th^2, th^3, th^4])
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

MIN_STEP = 1e-18


@dataclass(frozen=True)
class StepControl:
    rtol: float = 1e-10
    atol: float = 1e-18
    h0: float | None = None
    max_steps: int = 5_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    params: ModelParams
    n_steps: int = 0
    n_rejected: int = 0

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> MeanFieldState:
        return MeanFieldState.from_array(self.states[i])

    @property
    def final(self) -> MeanFieldState:
        return self.state(-1)


def _initial_step(f, t0, y0, f0, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    d2 = np.sqrt(np.mean(((f(t0 + h0, y1) - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_end: float,
    ctrl: StepControl = StepControl(),
    t_eval: Sequence[float] | None = None,
    t0: float = 0.0,
):
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t_end``.

    Returns ``(times, states, n_accepted, n_rejected)``. With ``t_eval`` the
    solution is sampled there by the method's fourth-order continuous
    extension; otherwise every accepted step is recorded.
    """
    if not t_end > t0:
        raise ValueError("t_end must exceed the start time")
    y = np.array(y0, dtype=float)
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > t_end:
            raise ValueError("t_eval must be strictly increasing inside [t0, t_end]")
    out_t = [t0]
    out_y = [y.copy()]
    next_eval = 0
    if t_eval is not None and t_eval[0] == t0:
        next_eval = 1

    rtol, atol = ctrl.rtol, ctrl.atol
    K = np.empty((7, y.size))
    K[0] = f(t0, y)
    h = ctrl.h0 or _initial_step(f, t0, y, K[0], rtol, atol)
    t = t0
    err_prev = 1e-4
    n_acc = n_rej = 0
    while t < t_end:
        if n_acc + n_rej >= ctrl.max_steps:
            raise RuntimeError(f"step budget exhausted at t={t:.6e}")
        if h < MIN_STEP:
            raise StepUnderflowError(t, h)
        last = t + h >= t_end
        if last:
            h = t_end - t
        for i in range(1, 7):
            K[i] = f(t + _C[i] * h, y + h * (np.dot(_A[i], K[:i])))
        y_new = y + h * (_B @ K)
        err_vec = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t_new = t_end if last else t + h
            if t_eval is not None:
                while next_eval < len(t_eval) and t_eval[next_eval] <= t_new:
                    theta = (t_eval[next_eval] - t) / h
                    q = _P @ np.array([theta, theta**2, theta**3, theta**4])
                    out_t.append(float(t_eval[next_eval]))
                    out_y.append(y + h * (q @ K))
                    next_eval += 1
            else:
                out_t.append(t_new)
                out_y.append(y_new.copy())
            t, y = t_new, y_new
            K[0] = K[6]
            n_acc += 1
            # PI controller (Gustafsson)
            fac = 0.9 * max(err, 1e-10) ** -0.17 * err_prev**0.04
            h *= min(10.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
        else:
            n_rej += 1
            h *= max(0.2, 0.9 * err**-0.2)
    if not np.all(np.isfinite(out_y[-1])):
        raise FloatingPointError("integration produced non-finite state")
    return np.array(out_t), np.array(out_y), n_acc, n_rej


def integrate(
    p: ModelParams,
    x0,
    t_end: float,
    ctrl: StepControl = StepControl(),
    t_eval: Sequence[float] | None = None,
) -> Trajectory:
    times, states, n_acc, n_rej = dopri5(rhs_array(p), x0, t_end, ctrl, t_eval)
    return Trajectory(times, states, p, n_acc, n_rej)


def default_initial_state(p: ModelParams, seed: float = 1e-9) -> MeanFieldState:
    """(0, D0, seed, 0): field-free inversion plus a small energy-flow seed."""
    return MeanFieldState(0.0, derive_rates(p).d0, seed, 0.0)


def default_horizon(p: ModelParams) -> float:
    """100 times the slowest positive relaxation time."""
    rates = [
        2 * p.gamma_a,
        p.gamma_P + p.gamma_D,
        gamma_sigma(p),
        2 * gamma_sigma(p) + p.gamma_cor,
    ]
    positive = [r for r in rates if r > 0]
    return 100.0 / min(positive) if positive else 1e6


@dataclass(frozen=True)
class SteadyReport:
    state: MeanFieldState
    converged: bool
    residual: float
    elapsed_time: float
    tolerance: float
    polished: bool = False


def newton_polish(p: ModelParams, x, tol: float | None = None, max_iter: int = 30):
    """Newton iteration on the full four-equation system.

    Returns ``(x, residual)`` or ``None`` if the iteration stalls or the
    Jacobian is singular.
    """
    x = np.array(x, dtype=float)
    f = rhs_array(p)
    for _ in range(max_iter):
        r = f(0.0, x)
        res = float(np.linalg.norm(r))
        thr = tol if tol is not None else 1e-12 * max(1.0, float(np.linalg.norm(x)))
        if res < thr:
            return x, res
        try:
            dx = np.linalg.solve(rhs_jacobian(p, x), -r)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dx)):
            return None
        x = x + dx
    r = float(np.linalg.norm(f(0.0, x)))
    thr = tol if tol is not None else 1e-12 * max(1.0, float(np.linalg.norm(x)))
    return (x, r) if r < thr else None


def _is_attracting(p: ModelParams, x) -> bool:
    return bool(np.all(np.linalg.eigvals(rhs_jacobian(p, x)).real < 0))


def steady_state(
    p: ModelParams,
    x0=None,
    horizon: float | None = None,
    ctrl: StepControl = StepControl(),
    polish: bool = True,
    chunks: int = 200,
) -> SteadyReport:
    """Integrate towards the attracting fixed point reached from ``x0``.

    Integration proceeds in ``chunks`` equal slices of the horizon. After each
    slice the residual of the autonomous right-hand side is checked; with
    ``polish`` a Newton solve is attempted from the current point and accepted
    only if it lands on a linearly stable fixed point close to the trajectory.
    Non-convergence is reported through the ``converged`` flag.
    """
    x = np.array(default_initial_state(p) if x0 is None else x0, dtype=float)
    horizon = default_horizon(p) if horizon is None else float(horizon)
    f = rhs_array(p)
    t = 0.0
    step = horizon / chunks
    h = ctrl.h0

    def tol_for(v):
        return 1e-12 * max(1.0, float(np.linalg.norm(v)))

    res = float(np.linalg.norm(f(0.0, x)))
    while True:
        if res < tol_for(x):
            return SteadyReport(MeanFieldState.from_array(x), True, res, t, tol_for(x))
        if polish:
            got = newton_polish(p, x)
            if got is not None:
                xp, rp = got
                scale = np.maximum(np.abs(x), np.abs(xp))
                close = np.all(np.abs(xp - x) <= 0.05 * scale + 1e-10)
                if close and _is_attracting(p, xp):
                    return SteadyReport(
                        MeanFieldState.from_array(xp), True, rp, t, tol_for(xp), polished=True
                    )
        if t >= horizon:
            return SteadyReport(MeanFieldState.from_array(x), False, res, t, tol_for(x))
        seg = min(step, horizon - t)
        ts, ys, _, _ = dopri5(f, x, t + seg, StepControl(ctrl.rtol, ctrl.atol, h, ctrl.max_steps), t0=t)
        if len(ts) > 2:
            h = min(ts[-2] - ts[-3], seg)
        t, x = float(ts[-1]), ys[-1]
        res = float(np.linalg.norm(f(0.0, x)))


@dataclass(frozen=True)
class DstRow:
    pump_ratio: float
    d_st: float
    d0: float
    converged: bool
    residual: float


def dst_curve(p: ModelParams, pump_ratios: Sequence[float], **steady_kwargs) -> list[DstRow]:
    """Stationary inversion with the field present versus the field-free value,
    one steady-state solve per pump ratio gamma_P / gamma_D."""
    rows = []
    for ratio in pump_ratios:
        if ratio < 0:
            raise ValueError(f"pump ratio must be >= 0, got {ratio!r}")
        q = p.updated(gamma_P=ratio * p.gamma_D)
        d0 = derive_rates(q).d0
        rep = steady_state(q, **steady_kwargs)
        rows.append(DstRow(float(ratio), rep.state.d, d0, rep.converged, rep.residual))
    return rows


def final_residual(traj: Trajectory) -> float:
    return residual_norm(traj.params, traj.final)
