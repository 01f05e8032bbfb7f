"""Explicit Runge-Kutta integration of complex state vectors.

``integrate_batch`` advances B independent trajectories in lockstep: every
row keeps its own time, step size and error controller, so a row's
trajectory does not depend on which other rows share the batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

DIVERGENCE_LIMIT = 1e6

OK = "ok"
DIVERGED = "diverged"
MAX_STEPS = "max_steps"
UNDERFLOW = "underflow"


class IntegrationError(RuntimeError):
    pass


class DivergenceError(IntegrationError):
    pass


class StepLimitError(IntegrationError):
    pass


class StepUnderflowError(IntegrationError):
    pass


_ERRORS = {DIVERGED: DivergenceError, MAX_STEPS: StepLimitError, UNDERFLOW: StepUnderflowError}


@dataclass(frozen=True)
class IntegratorConfig:
    method: Literal["rk45", "rk4"] = "rk45"
    abs_tol: float = 1e-6
    rel_tol: float = 1e-6
    initial_step: float = 1e-2
    max_step: float = np.inf
    fixed_step: float = 1e-2
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (self.initial_step > 0 and self.max_step > 0 and self.fixed_step > 0 and self.max_steps > 0):
            raise ValueError("step sizes and step limit must be positive")


@dataclass
class BatchResult:
    t: np.ndarray         # (B,) final times
    z: np.ndarray         # (B, n) final states
    steps: np.ndarray     # (B,) accepted steps
    rejected: np.ndarray  # (B,) rejected steps
    status: np.ndarray    # (B,) status strings


@dataclass
class OscillatorState:
    z: np.ndarray
    t: float


@dataclass
class IntegrationResult:
    state: OscillatorState
    steps: int
    rejected: int


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
# fifth-order weights minus embedded fourth-order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# step-size controller (Hairer, Norsett & Wanner DOPRI5 defaults)
_SAFE = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA


def _dopri_step(rhs, t, y, h, k1):
    ks = [k1]
    hc = h[:, None]
    for s in range(1, 7):
        acc = y.copy()
        for j, a in enumerate(_A[s]):
            if a:
                acc = acc + hc * (a * ks[j])
        ks.append(rhs(t + _C[s] * h, acc))
    y_new = y
    for j, b in enumerate(_A[6]):
        if b:
            y_new = y_new + hc * (b * ks[j])
    # ks[6] is evaluated at y_new (the FSAL stage)
    err = hc * sum(e * k for e, k in zip(_E, ks) if e)
    return y_new, ks[6], err


def _rk4_step(rhs, t, y, h):
    hc = h[:, None]
    k1 = rhs(t, y)
    k2 = rhs(t + h / 2, y + hc / 2 * k1)
    k3 = rhs(t + h / 2, y + hc / 2 * k2)
    k4 = rhs(t + h, y + hc * k3)
    return y + hc / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_batch(rhs: Callable, z0, t_span: tuple[float, float], config: IntegratorConfig = IntegratorConfig(),
                    observer: Callable | None = None) -> BatchResult:
    """Integrate ``dz/dt = rhs(t, z)`` for every row of ``z0`` over ``t_span``.

    ``rhs`` receives a time vector ``(b,)`` and states ``(b, n)`` for the
    rows currently being advanced. ``observer(t, z, rows)`` is called once
    with the initial states and then after every batch of accepted steps,
    with ``rows`` indexing into the batch.

    Rows whose state exceeds 1e6 in modulus (or turns non-finite), exceed
    ``max_steps``, or need a step below 1e-12 stop early and report that in
    ``status``.
    """
    # overflow is detected and reported per row, so numpy need not warn
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate_batch(rhs, z0, t_span, config, observer)


def _integrate_batch(rhs, z0, t_span, config, observer):
    y = np.array(z0, dtype=complex, ndmin=2, copy=True)
    b, _ = y.shape
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    t = np.full(b, t0)
    steps = np.zeros(b, dtype=np.int64)
    rejected = np.zeros(b, dtype=np.int64)
    status = np.full(b, OK, dtype=object)
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state is not finite")
    all_rows = np.arange(b)
    if observer is not None:
        observer(t.copy(), y.copy(), all_rows)

    active = np.ones(b, dtype=bool)
    if config.method == "rk4":
        n_steps = int(np.ceil((t1 - t0) / config.fixed_step - 1e-9))
        if n_steps > config.max_steps:
            status[:] = MAX_STEPS
            return BatchResult(t, y, steps, rejected, status)
        for i in range(n_steps):
            rows = all_rows[active]
            if rows.size == 0:
                break
            ta = np.full(rows.size, t0 + i * config.fixed_step)
            tb = t1 if i == n_steps - 1 else t0 + (i + 1) * config.fixed_step
            y_new = _rk4_step(rhs, ta, y[rows], tb - ta)
            bad = ~np.all(np.isfinite(y_new) & (np.abs(y_new) <= DIVERGENCE_LIMIT), axis=-1)
            if bad.any():
                status[rows[bad]] = DIVERGED
                active[rows[bad]] = False
            good = rows[~bad]
            y[good] = y_new[~bad]
            t[good] = tb
            steps[good] += 1
            if observer is not None and good.size:
                observer(t[good].copy(), y[good].copy(), good)
        return BatchResult(t, y, steps, rejected, status)

    h = np.full(b, min(config.initial_step, config.max_step, t1 - t0))
    err_old = np.full(b, 1e-4)
    k1 = rhs(t, y)
    while True:
        rows = all_rows[active]
        if rows.size == 0:
            break
        ta, ya, k1a = t[rows], y[rows], k1[rows]
        remaining = t1 - ta
        ha = np.minimum(h[rows], remaining)
        last = ha >= remaining * (1 - 1e-12)
        ha = np.where(last, remaining, ha)

        y_new, k_new, err_vec = _dopri_step(rhs, ta, ya, ha, k1a)
        scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(ya), np.abs(y_new))
        err = np.sqrt(np.mean((np.abs(err_vec) / scale) ** 2, axis=-1))

        finite = np.isfinite(err) & np.all(np.isfinite(y_new), axis=-1)
        accept = finite & (err <= 1.0)
        diverged = accept & (np.max(np.abs(np.where(np.isfinite(y_new), y_new, 0)), axis=-1) > DIVERGENCE_LIMIT)
        accept &= ~diverged

        err_safe = np.where(finite, np.maximum(err, 1e-10), 1e10)
        fac11 = err_safe ** _EXPO
        fac = np.clip(fac11 / err_old[rows] ** _BETA / _SAFE, 1 / _FAC_MAX, 1 / _FAC_MIN)
        h_acc = np.minimum(ha / fac, config.max_step)
        h_rej = ha / np.minimum(1 / _FAC_MIN, fac11 / _SAFE)

        acc_rows = rows[accept]
        t[acc_rows] = np.where(last[accept], t1, ta[accept] + ha[accept])
        y[acc_rows] = y_new[accept]
        k1[acc_rows] = k_new[accept]
        steps[acc_rows] += 1
        err_old[acc_rows] = err_safe[accept]
        h[acc_rows] = h_acc[accept]
        rej = ~accept & ~diverged
        rejected[rows[rej]] += 1
        h[rows[rej]] = np.where(finite[rej], h_rej[rej], ha[rej] * _FAC_MIN)

        if observer is not None and acc_rows.size:
            observer(t[acc_rows].copy(), y[acc_rows].copy(), acc_rows)

        status[rows[diverged]] = DIVERGED
        done = acc_rows[last[accept]]
        too_many = rows[(steps[rows] + rejected[rows]) >= config.max_steps]
        tiny = rows[h[rows] < 1e-12 * np.maximum(1.0, np.abs(t[rows]))]
        status[too_many] = np.where(status[too_many] == OK, MAX_STEPS, status[too_many])
        status[tiny] = np.where(status[tiny] == OK, UNDERFLOW, status[tiny])
        active[rows[diverged]] = False
        active[done] = False
        active[too_many] = False
        active[tiny] = False
        # a row that finished on this step is not limited by the counters
        status[done] = np.where(status[done] == DIVERGED, DIVERGED, OK)
    return BatchResult(t, y, steps, rejected, status)


def integrate(rhs: Callable, z0, t_span: tuple[float, float], config: IntegratorConfig = IntegratorConfig(),
              observer: Callable | None = None) -> IntegrationResult:
    """Single-trajectory wrapper: ``rhs(t, z)`` and ``observer(t, z)`` see scalars and 1-D states.

    Raises :class:`DivergenceError`, :class:`StepLimitError` or
    :class:`StepUnderflowError` when the trajectory cannot be completed.
    """
    z0 = np.asarray(z0, dtype=complex)
    if z0.ndim != 1:
        raise ValueError("integrate expects a 1-D state; use integrate_batch for batches")

    def batch_rhs(t, z):
        return np.stack([rhs(float(ti), zi) for ti, zi in zip(t, z)])

    obs = None
    if observer is not None:
        def obs(t, z, rows):
            observer(float(t[0]), z[0])

    res = integrate_batch(batch_rhs, z0[None, :], t_span, config, obs)
    st = res.status[0]
    if st != OK:
        raise _ERRORS[st](f"integration stopped at t={res.t[0]:.6g}: {st}")
    return IntegrationResult(OscillatorState(res.z[0], float(res.t[0])), int(res.steps[0]), int(res.rejected[0]))
