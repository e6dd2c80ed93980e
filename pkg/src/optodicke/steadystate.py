"""Steady states: closed forms, root enumeration, Newton polish, stability.

Setting the time derivatives to zero and splitting real/imaginary parts
gives the steady-state system

    (omega_a + U n) Sy = 0
    (omega_a + U n) Sx - 4 g a1 Sz = 0
    -kappa a1 + chi a2 = 0
     kappa a2 + chi a1 + 2 g Sx = 0
     b = -i (delta0 n + eta_p) / (Gamma_m + i omega_m)

with n = |a|^2 and chi = omega + U Sz + 2 delta0 b1.  The first equation
splits the superradiant solutions into two families: Sy = 0 (type A) and
omega_a + U n = 0 (type B, requires U < 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (A_IM, A_RE, B_IM, B_RE, STATE_DIM, SX, SY, SZ, State,
                    SystemParams, jacobian, rhs, spin_norm_sq)

EPS_STAB = 1e-6    # margin separating stable/unstable real parts
EPS_ZERO = 1e-6    # width of the structurally-neutral eigenvalue window

BRANCH_TAGS = ("N", "I", "SRA_N", "SRA_I", "SRB", "other")


class NotAFixedPointError(ValueError):
    """assess_stability was handed a state that does not satisfy rhs = 0."""


@dataclass(frozen=True)
class FixedPoint:
    state: State
    residual_norm: float
    jac_eigen: np.ndarray          # 7 complex eigenvalues
    stability: str                 # stable | unstable | marginal
    branch_tag: str

    def to_dict(self) -> dict:
        return {
            "state": list(self.state.as_array()),
            "residual_norm": self.residual_norm,
            "eigenvalues": [{"re": float(e.real), "im": float(e.imag)}
                            for e in self.jac_eigen],
            "verdict": self.stability,
            "branch": self.branch_tag,
        }


@dataclass(frozen=True)
class SrbQuantities:
    photon_n: float
    sx2: float
    sz2: float
    b1: float
    b2: float
    exists: bool
    reason: Optional[str] = None


def mirror_steady(p: SystemParams, photon_n: float) -> tuple[float, float]:
    """Mirror quadratures for a frozen cavity occupation:
    b = -i (delta0 n + eta_p) / (Gamma_m + i omega_m)."""
    if photon_n < 0:
        raise ValueError("photon_n must be >= 0")
    drive = p.delta0 * photon_n + p.eta_p
    den = p.gamma_m ** 2 + p.omega_m ** 2
    return (-drive * p.omega_m / den, -drive * p.gamma_m / den)


def srb_quantities(p: SystemParams) -> SrbQuantities:
    """Closed-form type-B quantities.

    photon_n = -omega_a/U; a is purely imaginary so Sx^2 follows from the
    kappa*a2 + 2 g Sx = 0 balance as Sx^2 = -kappa^2 omega_a / (4 g^2 U);
    Sz^2 = ((omega + 2 delta0 b1)/U)^2.  The branch exists when U < 0 and
    the spin normalization Sx^2 + Sz^2 <= (N/2)^2 can be met.
    """
    if p.u >= 0.0:
        reason = "U = 0: photon number -omega_a/U undefined" if p.u == 0.0 \
            else "U > 0: omega_a + U|a|^2 cannot vanish"
        return SrbQuantities(math.nan, math.nan, math.nan, math.nan,
                             math.nan, False, reason)
    photon_n = -p.omega_a / p.u
    b1, b2 = mirror_steady(p, photon_n)
    sz2 = ((p.omega + 2.0 * p.delta0 * b1) / p.u) ** 2
    if p.g == 0.0:
        return SrbQuantities(photon_n, math.inf, sz2, b1, b2, False,
                             "g = 0: no light-matter coupling")
    sx2 = -p.kappa ** 2 * p.omega_a / (4.0 * p.g ** 2 * p.u)
    exists = sx2 + sz2 <= p.spin_length ** 2
    reason = None if exists else "Sx^2 + Sz^2 exceeds (N/2)^2"
    return SrbQuantities(photon_n, sx2, sz2, b1, b2, exists, reason)


def srb_states(p: SystemParams) -> list[State]:
    """The four closed-form SRB phase-space points: the (Sx, a) mirror pair
    crossed with both signs of Sy.  Empty when the branch does not exist."""
    q = srb_quantities(p)
    if not q.exists:
        return []
    sx = math.sqrt(q.sx2)
    sz = -(p.omega + 2.0 * p.delta0 * q.b1) / p.u
    sy2 = p.spin_length ** 2 - q.sx2 - q.sz2
    sy = math.sqrt(max(0.0, sy2))
    a2 = -2.0 * p.g * sx / p.kappa
    out = []
    for s_sy in (+1.0, -1.0):
        for flip in (+1.0, -1.0):
            out.append(State(flip * sx, flip * s_sy * sy, sz,
                             0.0, flip * a2, q.b1, q.b2))
    return out


def sra_boundary(p: SystemParams, branch: str) -> Optional[float]:
    """Critical collective coupling lambda_c = g_c sqrt(N) for the type-A
    transition out of the normal (branch 'N') or inverted ('I') state.

    At zero photons the steady-state determinant reduces to
    omega_a (chi^2 + kappa^2) + 8 g^2 Sz chi = 0 with
    chi = omega + U Sz + 2 delta0 b1(photon_n = 0); a transition exists
    only when chi > 0 (N) respectively chi < 0 (I).
    """
    sz0 = _branch_sz(p, branch)
    b1, _ = mirror_steady(p, 0.0)
    chi = p.omega + p.u * sz0 + 2.0 * p.delta0 * b1
    if abs(chi) < 1e-9:
        return None  # boundary diverges at the window edge
    if branch == "N" and chi <= 0.0:
        return None
    if branch == "I" and chi >= 0.0:
        return None
    return math.sqrt(p.omega_a * (chi ** 2 + p.kappa ** 2) / (4.0 * abs(chi)))


def _branch_sz(p: SystemParams, branch: str) -> float:
    if branch == "N":
        return -p.spin_length
    if branch == "I":
        return p.spin_length
    raise ValueError(f"branch must be 'N' or 'I', got {branch!r}")


def trivial_states(p: SystemParams) -> list[State]:
    """The normal and inverted zero-photon states (mirror at its pump
    displacement); exact fixed points for any parameters."""
    b1, b2 = mirror_steady(p, 0.0)
    s = p.spin_length
    return [State(0.0, 0.0, -s, 0.0, 0.0, b1, b2),
            State(0.0, 0.0, +s, 0.0, 0.0, b1, b2)]


# --- type-A root enumeration -------------------------------------------------

def _photon_roots(sz: float, p: SystemParams) -> list[float]:
    """Cavity occupations consistent with the field/mirror balance at a
    given Sz on the Sy = 0 branch.  The balance
    n (kappa^2 + (A - B n)^2) = 4 g^2 (N^2/4 - Sz^2) is a cubic in n."""
    den = p.gamma_m ** 2 + p.omega_m ** 2
    c1 = 2.0 * p.delta0 * p.omega_m / den
    A = p.omega + p.u * sz - c1 * p.eta_p
    B = c1 * p.delta0
    sx2 = p.spin_length ** 2 - sz * sz
    C = 4.0 * p.g ** 2 * sx2
    if B == 0.0:
        return [C / (p.kappa ** 2 + A * A)]
    rts = np.roots([B * B, -2.0 * A * B, p.kappa ** 2 + A * A, -C])
    out = [float(r.real) for r in rts
           if abs(r.imag) < 1e-9 * max(1.0, abs(r.real)) and r.real >= 0.0]
    return sorted(out)


def _sra_condition(sz: float, nph: float, p: SystemParams) -> float:
    """Remaining steady condition on the Sy = 0 branch:
    (omega_a + U n)(chi^2 + kappa^2) + 8 g^2 Sz chi."""
    den = p.gamma_m ** 2 + p.omega_m ** 2
    c1 = 2.0 * p.delta0 * p.omega_m / den
    chi = p.omega + p.u * sz - c1 * (p.delta0 * nph + p.eta_p)
    wt = p.omega_a + p.u * nph
    return wt * (chi ** 2 + p.kappa ** 2) + 8.0 * p.g ** 2 * sz * chi


def _sra_state(sz: float, nph: float, p: SystemParams) -> State:
    b1, b2 = mirror_steady(p, nph)
    chi = p.omega + p.u * sz + 2.0 * p.delta0 * b1
    sx = math.sqrt(max(0.0, p.spin_length ** 2 - sz * sz))
    den = p.kappa ** 2 + chi ** 2
    a2 = -2.0 * p.g * p.kappa * sx / den
    a1 = chi * a2 / p.kappa
    return State(sx, 0.0, sz, a1, a2, b1, b2)


def find_sra_roots(p: SystemParams, n_theta: int = 721) -> list[State]:
    """Enumerate the nontrivial Sy = 0 fixed points (Sx > 0 representative).

    Scans Sz = (N/2) cos(theta) on a theta-uniform grid, dense near the
    poles where newborn roots sit, solves the photon cubic at each node and
    bisects sign changes of the steady condition along each photon branch.
    """
    if p.g == 0.0:
        return []
    s = p.spin_length
    th = np.linspace(0.0, math.pi, n_theta)[1:-1]
    szs = (s * np.cos(th))[::-1]
    pts = [(sz, n, _sra_condition(sz, n, p))
           for sz in szs for n in _photon_roots(sz, p)]
    raw = []
    for (s1, n1, g1), (s2, n2, g2) in zip(pts[:-1], pts[1:]):
        if s2 <= s1:
            continue
        if abs(n2 - n1) > 0.35 * max(1.0, n1, n2):
            continue  # different photon branches
        if g1 == 0.0 or g1 * g2 >= 0.0:
            continue
        lo, hi, glo = s1, s2, g1
        nlo, nhi = n1, n2
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            cands = _photon_roots(mid, p)
            if not cands:
                break
            nmid = min(cands, key=lambda x: abs(x - 0.5 * (nlo + nhi)))
            gm = _sra_condition(mid, nmid, p)
            if gm == 0.0:
                lo = hi = mid
                nlo = nhi = nmid
                break
            if (gm > 0.0) == (glo > 0.0):
                lo, glo, nlo = mid, gm, nmid
            else:
                hi, nhi = mid, nmid
        raw.append((0.5 * (lo + hi), 0.5 * (nlo + nhi)))
    return [_sra_state(sz, n, p) for sz, n in raw]


# --- Newton polish ------------------------------------------------------------

def refine_fixed_point(p: SystemParams, seed: State, tol: Optional[float] = None,
                       max_iter: int = 200) -> Optional[State]:
    """Damped Gauss-Newton on the steady-state system augmented with the
    spin-sphere constraint (the plain system is rank-deficient along the
    conserved spin norm).  Returns None when the iteration does not reach
    the residual tolerance."""
    n_atoms = p.n_atoms
    if tol is None:
        tol = 1e-9 * n_atoms
    y = seed.as_array() if isinstance(seed, State) else np.asarray(seed, float)
    y = y.copy()
    if not np.all(np.isfinite(y)):
        return None
    target = (n_atoms / 2.0) ** 2
    w = 1.0 / n_atoms

    def aug_res(v):
        r = np.empty(STATE_DIM + 1)
        r[:STATE_DIM] = rhs(p, State.from_array(v))
        r[STATE_DIM] = w * (v[0] ** 2 + v[1] ** 2 + v[2] ** 2 - target)
        return r

    F = aug_res(y)
    for _ in range(max_iter):
        if (np.linalg.norm(F[:STATE_DIM]) < tol
                and abs(F[STATE_DIM]) < tol):
            return State.from_array(y)
        J = np.zeros((STATE_DIM + 1, STATE_DIM))
        J[:STATE_DIM] = jacobian(p, State.from_array(y))
        J[STATE_DIM, :3] = 2.0 * w * y[:3]
        try:
            dy, *_ = np.linalg.lstsq(J, -F, rcond=None)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dy)):
            return None
        f0 = np.linalg.norm(F)
        step = 1.0
        for _ in range(30):
            y_new = y + step * dy
            F_new = aug_res(y_new)
            if np.all(np.isfinite(F_new)) and np.linalg.norm(F_new) < f0:
                break
            step *= 0.5
        else:
            return None
        y, F = y + step * dy, F_new
    if (np.linalg.norm(F[:STATE_DIM]) < tol and abs(F[STATE_DIM]) < tol):
        return State.from_array(y)
    return None


# --- stability ---------------------------------------------------------------

def assess_stability(p: SystemParams, fp: State, residual_tol: Optional[float] = None,
                     eps_stab: float = EPS_STAB, eps_zero: float = EPS_ZERO
                     ) -> tuple[np.ndarray, str]:
    """Jacobian spectrum and verdict at a fixed point.

    Spin-norm conservation forces one exactly-neutral eigenvalue whose
    eigenvector has a component along the sphere normal; that single mode
    is excluded from the verdict.  Stable means every remaining real part
    is below -eps_stab; a real part above +eps_stab means unstable; real
    parts inside the band make the point marginal.
    """
    y = fp.as_array() if isinstance(fp, State) else np.asarray(fp, float)
    if residual_tol is None:
        residual_tol = 1e-6 * p.n_atoms
    res = float(np.linalg.norm(rhs(p, State.from_array(y))))
    if res > residual_tol:
        raise NotAFixedPointError(
            f"residual {res:g} exceeds tolerance {residual_tol:g}")
    J = jacobian(p, State.from_array(y))
    eigvals, eigvecs = np.linalg.eig(J)
    order = np.argsort(-eigvals.real)
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    neutral = _neutral_mode_index(y, eigvals, eigvecs, eps_zero)
    re = eigvals.real
    keep = np.ones(len(eigvals), dtype=bool)
    if neutral is not None:
        keep[neutral] = False
    rest = re[keep]
    if np.all(rest < -eps_stab):
        verdict = "stable"
    elif np.any(rest > eps_stab):
        verdict = "unstable"
    else:
        verdict = "marginal"
    return eigvals, verdict


def _neutral_mode_index(y, eigvals, eigvecs, eps_zero) -> Optional[int]:
    """The structurally neutral mode: eigenvalue at (numerical) zero whose
    eigenvector leans most along the spin-sphere normal."""
    spin = y[:3]
    ns = np.linalg.norm(spin)
    cand = [i for i in range(len(eigvals)) if abs(eigvals[i]) < eps_zero]
    if not cand:
        return None
    if ns == 0.0:
        return min(cand, key=lambda i: abs(eigvals[i]))
    nhat = spin / ns
    def radial(i):
        v = eigvecs[:, i]
        nv = np.linalg.norm(v)
        return abs(np.dot(v[:3], nhat)) / nv if nv > 0 else 0.0
    return max(cand, key=radial)


def routh_hurwitz_diagnostic(p: SystemParams, fp: State) -> dict:
    """Characteristic-polynomial coefficients and Hurwitz leading minors at
    a fixed point (diagnostic only; the verdict uses eigenvalues)."""
    J = jacobian(p, fp)
    coeffs = np.poly(J)                     # mu^7 + c1 mu^6 + ... + c7
    n = len(coeffs) - 1
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * (j + 1) - (i + 1)
            if 0 <= k <= n:
                H[i, j] = coeffs[k]
    minors = [float(np.linalg.det(H[:k, :k])) for k in range(1, n + 1)]
    return {"char_poly": [float(c) for c in coeffs],
            "hurwitz_minors": minors}


# --- assembled fixed-point search ---------------------------------------------

def branch_tag(p: SystemParams, s: State) -> str:
    """Tag a fixed point: N/I (zero photons), SRB (Sy != 0), else SRA by
    the sign of Sz."""
    n_atoms = p.n_atoms
    if s.photon_n < 1e-9 * n_atoms and abs(abs(s.sz) - n_atoms / 2) < 1e-6 * n_atoms:
        return "N" if s.sz < 0 else "I"
    if abs(s.sy) > 1e-6 * n_atoms:
        return "SRB"
    if abs(s.sz) > 1e-12 * n_atoms or s.photon_n > 0:
        return "SRA_N" if s.sz < 0 else "SRA_I"
    return "other"


def find_fixed_points(p: SystemParams, seeds=None, tol: Optional[float] = None,
                      max_iter: int = 200) -> tuple[list[FixedPoint], dict]:
    """Polish every seed with the Newton solver, merge duplicates, tag and
    assess each solution.  The two trivial roots are always included.

    Returns (fixed_points, diagnostics); diverged seeds are dropped and
    counted in the diagnostics, they never abort the search.
    """
    if tol is None:
        tol = 1e-9 * p.n_atoms
    states: list[State] = []
    dropped = 0
    for seed in (seeds or []):
        fp = refine_fixed_point(p, seed, tol=tol, max_iter=max_iter)
        if fp is None:
            dropped += 1
            continue
        states.append(fp)
    states.extend(trivial_states(p))
    merged: list[State] = []
    for s in states:
        if any(np.linalg.norm(s.as_array() - t.as_array()) < 1e-6 * p.n_atoms
               for t in merged):
            continue
        merged.append(s)
    out = []
    for s in merged:
        res = float(np.linalg.norm(rhs(p, s)))
        if res > tol:
            dropped += 1
            continue
        eig, verdict = assess_stability(p, s, residual_tol=10.0 * tol)
        out.append(FixedPoint(s, res, eig, verdict, branch_tag(p, s)))
    out.sort(key=lambda f: (f.branch_tag, round(f.state.sz, 6),
                            round(f.state.sx, 6), round(f.state.sy, 6)))
    diagnostics = {"seeds": len(seeds or []), "dropped": dropped,
                   "found": len(out)}
    return out, diagnostics


def default_seeds(p: SystemParams, n_theta: int = 721) -> list[State]:
    """Trivial states, the closed-form SRB family and every enumerated
    Sy = 0 root with its (-Sx, -Sy, -a) mirror partner."""
    seeds = list(trivial_states(p))
    seeds.extend(srb_states(p))
    for s in find_sra_roots(p, n_theta=n_theta):
        seeds.append(s)
        seeds.append(State(-s.sx, -s.sy, s.sz, -s.a_re, -s.a_im,
                           s.b_re, s.b_im))
    return seeds


def all_fixed_points(p: SystemParams, n_theta: int = 721
                     ) -> tuple[list[FixedPoint], dict]:
    """find_fixed_points over the full default seed family."""
    return find_fixed_points(p, default_seeds(p, n_theta=n_theta))
