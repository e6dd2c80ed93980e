"""Parameters, phase-space state and the semiclassical vector field.

The model couples a collective spin of length N/2 (two-level atoms), one
cavity mode a = a1 + i*a2 and one mechanical mode b = b1 + i*b2.  In real
variables the equations of motion read

    dSx/dt = -(omega_a + U|a|^2) Sy
    dSy/dt =  (omega_a + U|a|^2) Sx - 4 g a1 Sz
    dSz/dt =  4 g a1 Sy
    da/dt  = -[kappa + i(omega + U Sz + 2 delta0 b1)] a - 2 i g Sx
    db/dt  = -i omega_m b - i delta0 |a|^2 - i eta_p - Gamma_m b

All frequencies and rates are in MHz understood as rad/us, so time is in
microseconds.  eta_p = 0 recovers the unpumped mirror equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import rhs_kernel

# component order used by every array-valued state in the package
SX, SY, SZ, A_RE, A_IM, B_RE, B_IM = range(7)

STATE_DIM = 7


class NonFiniteStateError(ValueError):
    """A state with NaN or infinite components was passed to the model."""


@dataclass(frozen=True)
class SystemParams:
    """Model constants.  Couplings are per atom; see ``from_aggregate`` for
    the (uN, lambda) parametrization used in the phase diagrams."""

    omega_a: float          # atomic transition frequency
    omega: float            # effective cavity frequency (swept axis)
    omega_m: float          # mirror frequency
    kappa: float            # cavity decay rate
    gamma_m: float          # mirror damping
    g: float                # single-atom matter-light coupling
    u: float                # single-atom back-action (either sign)
    delta0: float = 0.05    # single-photon optomechanical coupling
    eta_p: float = 0.0      # mechanical pump strength (0 disables)
    n_atoms: float = 1.0e6  # atom number N

    def __post_init__(self):
        for name in ("omega_a", "omega_m", "kappa", "gamma_m"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.n_atoms < 2:
            raise ValueError(f"n_atoms must be >= 2, got {self.n_atoms}")
        if self.eta_p < 0.0:
            raise ValueError(f"eta_p must be >= 0, got {self.eta_p}")
        if self.g < 0.0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.delta0 < 0.0:
            raise ValueError(f"delta0 must be >= 0, got {self.delta0}")
        for name in ("omega_a", "omega", "omega_m", "kappa", "gamma_m", "g",
                     "u", "delta0", "eta_p", "n_atoms"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def from_aggregate(cls, *, uN: float, lam: float, n_atoms: float = 1.0e6,
                       **kwargs) -> "SystemParams":
        """Build from the aggregate couplings uN = u*N and lam = g*sqrt(N)."""
        return cls(g=lam / math.sqrt(n_atoms), u=uN / n_atoms,
                   n_atoms=n_atoms, **kwargs)

    @property
    def lam(self) -> float:
        """Collective coupling g*sqrt(N)."""
        return self.g * math.sqrt(self.n_atoms)

    @property
    def uN(self) -> float:
        """Aggregate back-action u*N."""
        return self.u * self.n_atoms

    @property
    def spin_length(self) -> float:
        return self.n_atoms / 2.0

    def c_array(self) -> np.ndarray:
        """Coefficient vector consumed by the compiled kernels."""
        return np.array([self.omega_a, self.omega, self.omega_m, self.kappa,
                         self.gamma_m, self.g, self.u, self.delta0,
                         self.eta_p], dtype=np.float64)

    def replace(self, **kwargs) -> "SystemParams":
        from dataclasses import replace as _replace
        return _replace(self, **kwargs)


@dataclass(frozen=True)
class State:
    """A point of the 7-dimensional real phase space."""

    sx: float
    sy: float
    sz: float
    a_re: float
    a_im: float
    b_re: float
    b_im: float

    @classmethod
    def from_array(cls, y) -> "State":
        y = np.asarray(y, dtype=float)
        if y.shape != (STATE_DIM,):
            raise ValueError(f"state array must have shape (7,), got {y.shape}")
        return cls(*(float(v) for v in y))

    def as_array(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz, self.a_re, self.a_im,
                         self.b_re, self.b_im], dtype=np.float64)

    @property
    def photon_n(self) -> float:
        return self.a_re ** 2 + self.a_im ** 2

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_array())


def normal_state(p: SystemParams, tip: float = 0.0, inverted: bool = False,
                 with_mirror: bool = True) -> State:
    """Normal (all spins down) or inverted state, optionally tipped.

    ``tip`` sets sx = tip*N/2 with sz adjusted to keep |S| = N/2 exactly,
    which is how evolutions "from the normal state" are seeded.  With a
    pump the mirror starts at its displaced equilibrium unless
    ``with_mirror`` is false.
    """
    s = p.spin_length
    sx = tip * s
    if abs(sx) > s:
        raise ValueError("tip magnitude must be <= 1")
    sz = math.sqrt(s * s - sx * sx)
    if not inverted:
        sz = -sz
    b1 = b2 = 0.0
    if with_mirror and p.eta_p > 0.0:
        den = p.gamma_m ** 2 + p.omega_m ** 2
        b1 = -p.eta_p * p.omega_m / den
        b2 = -p.eta_p * p.gamma_m / den
    return State(sx, 0.0, sz, 0.0, 0.0, b1, b2)


def spin_norm_sq(s: State) -> float:
    """Squared spin length sx^2 + sy^2 + sz^2."""
    return s.sx ** 2 + s.sy ** 2 + s.sz ** 2


def rhs(p: SystemParams, s: State) -> np.ndarray:
    """Time derivative of the state, as a length-7 array (component order
    SX, SY, SZ, A_RE, A_IM, B_RE, B_IM).  Pure function."""
    y = s.as_array() if isinstance(s, State) else np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError("rhs called with non-finite state "
                                  "(upstream integrator blow-up?)")
    out = np.empty(STATE_DIM)
    rhs_kernel(y, p.c_array(), out)
    return out


def jacobian(p: SystemParams, s: State) -> np.ndarray:
    """Analytic 7x7 Jacobian of ``rhs`` at ``s``."""
    y = s.as_array() if isinstance(s, State) else np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError("jacobian called with non-finite state")
    sx, sy, sz, a1, a2, b1, b2 = y
    n = a1 * a1 + a2 * a2
    wt = p.omega_a + p.u * n
    phi = p.omega + p.u * sz + 2.0 * p.delta0 * b1
    g, u, d0 = p.g, p.u, p.delta0
    J = np.zeros((STATE_DIM, STATE_DIM))
    J[SX, SY] = -wt
    J[SX, A_RE] = -2.0 * u * a1 * sy
    J[SX, A_IM] = -2.0 * u * a2 * sy
    J[SY, SX] = wt
    J[SY, SZ] = -4.0 * g * a1
    J[SY, A_RE] = 2.0 * u * a1 * sx - 4.0 * g * sz
    J[SY, A_IM] = 2.0 * u * a2 * sx
    J[SZ, SY] = 4.0 * g * a1
    J[SZ, A_RE] = 4.0 * g * sy
    J[A_RE, SZ] = u * a2
    J[A_RE, A_RE] = -p.kappa
    J[A_RE, A_IM] = phi
    J[A_RE, B_RE] = 2.0 * d0 * a2
    J[A_IM, SX] = -2.0 * g
    J[A_IM, SZ] = -u * a1
    J[A_IM, A_RE] = -phi
    J[A_IM, A_IM] = -p.kappa
    J[A_IM, B_RE] = -2.0 * d0 * a1
    J[B_RE, B_RE] = -p.gamma_m
    J[B_RE, B_IM] = p.omega_m
    J[B_IM, A_RE] = -2.0 * d0 * a1
    J[B_IM, A_IM] = -2.0 * d0 * a2
    J[B_IM, B_RE] = -p.omega_m
    J[B_IM, B_IM] = -p.gamma_m
    return J
