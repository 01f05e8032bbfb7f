"""Coupled Hopf oscillators with energy-gradient coupling and injection locking.

Each oscillator obeys

    dz/dt = (lam + i omega) z - rho z |z|^2 - r dE/dz (g(z)) + q(t) conj(z)

where ``g`` optionally normalises every oscillator to unit modulus and
``q(t)`` ramps linearly from 0 to ``q_max`` over ``t_end``. Time is in
cycles. ``rho`` is stored as a magnitude and always applied with the
saturating sign, so the uncoupled limit cycle has radius ``sqrt(lam/rho)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

NORM_EPS = 1e-12


@dataclass(frozen=True)
class OscillatorParams:
    lam: float = 1.0
    rho: float = 1.0
    omega: float = 0.0
    coupling: float = 1.0
    q_max: float = 1.0
    t_end: float = 10.0
    normalize: bool = True
    exponent: int = 1

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.rho != 0:
            raise ValueError("rho must be nonzero")
        if self.q_max < 0 or self.coupling < 0:
            raise ValueError("q_max and coupling must be non-negative")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.exponent not in (1, 2):
            raise ValueError("exponent must be 1 or 2")

    def replace(self, **changes) -> "OscillatorParams":
        return dataclasses.replace(self, **changes)

    @property
    def amplitude(self) -> float:
        """Radius of the uncoupled, unlocked limit cycle."""
        return float(np.sqrt(self.lam / abs(self.rho)))


def hopf_rhs(z, params: OscillatorParams):
    z = np.asarray(z)
    return (params.lam + 1j * params.omega) * z - abs(params.rho) * z * (z.real ** 2 + z.imag ** 2)


def shil_term(z):
    return np.conj(z)


def schedule_q(t, params: OscillatorParams):
    """Linear ramp ``q_max * t / t_end``, held at ``q_max`` after ``t_end``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    out = params.q_max * np.minimum(t, params.t_end) / params.t_end
    return float(out) if out.ndim == 0 else out


def normalize_amplitude(z):
    """``z / |z|`` elementwise, with 0 where ``|z| < 1e-12``."""
    z = np.asarray(z)
    mag = np.abs(z)
    small = mag < NORM_EPS
    return np.where(small, 0, z / np.where(small, 1, mag))


def system_rhs(t, z, provider, params: OscillatorParams):
    """Full vector field for states ``z`` of shape ``(n,)`` or ``(b, n)``.

    ``t`` is a scalar or a ``(b,)`` vector of per-row times. ``provider`` is
    anything with ``num_spins`` and ``gradient(z)``: a higher-order energy
    or a quadratic model.
    """
    z = np.asarray(z)
    if z.shape[-1] != provider.num_spins:
        raise ValueError(f"state has {z.shape[-1]} oscillators but provider has {provider.num_spins} spins")
    arg = normalize_amplitude(z) if params.normalize else z
    q = schedule_q(t, params)
    if np.ndim(q):
        q = np.asarray(q)[:, None]
    out = hopf_rhs(z, params) + q * shil_term(z)
    if params.coupling:
        out = out - params.coupling * provider.gradient(arg)
    return out


def make_rhs(provider, params: OscillatorParams):
    def rhs(t, z):
        return system_rhs(t, z, provider, params)
    return rhs
