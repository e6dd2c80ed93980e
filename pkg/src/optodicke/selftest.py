"""Built-in invariant suite behind the ``selftest`` CLI command.

Each check returns a CheckResult with the measured value so regressions
are visible in the output, not just pass/fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .dynamics import IntegratorConfig, integrate
from .model import State, SystemParams, jacobian, normal_state, rhs
from .phases import ClassifyOptions, sweep
from .steadystate import (assess_stability, mirror_steady, refine_fixed_point,
                          sra_boundary, srb_states)

FIG2 = dict(omega_a=0.05, omega_m=1.0, kappa=8.1, gamma_m=0.05,
            delta0=0.05, n_atoms=1.0e6)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: str


def _params(omega, uN, lam, eta_p=0.0, **over):
    kw = dict(FIG2)
    kw.update(over)
    n = kw.pop("n_atoms")
    return SystemParams(omega=omega, g=lam / math.sqrt(n), u=uN / n,
                        eta_p=eta_p, n_atoms=n, **kw)


def check_spin_norm_drift(cfg: RunConfig) -> CheckResult:
    p = _params(0.0, -40.0, 0.55)
    s0 = normal_state(p, tip=1e-3)
    ic = IntegratorConfig(method="rk4", dt=cfg.selftest.dt, t_end=700.0,
                          sample_every=max(1, int(10.0 / cfg.selftest.dt)))
    try:
        tr = integrate(p, s0, ic)
    except Exception as exc:
        return CheckResult("spin_norm_drift", False, f"integration failed: {exc}")
    sn = (tr.states[:, :3] ** 2).sum(axis=1)
    drift = float(np.abs(sn - sn[0]).max() / sn[0])
    return CheckResult("spin_norm_drift", drift < 1e-8,
                       f"relative drift {drift:.3e} over 700 us "
                       f"(dt={cfg.selftest.dt:g})")


def check_rk4_order(cfg: RunConfig) -> CheckResult:
    # probe on a rapidly oscillating trajectory at 8x the configured step
    # so truncation error dominates roundoff
    p = _params(0.0, 40.0, 0.675)
    s0 = normal_state(p, tip=0.6)
    dt = 8.0 * cfg.selftest.dt

    def end_state(step):
        ic = IntegratorConfig(method="rk4", dt=step, t_end=100.0,
                              sample_every=max(1, int(round(100.0 / step))))
        return integrate(p, s0, ic).states[-1]

    try:
        ref = end_state(dt / 16.0)
        e1 = np.linalg.norm(end_state(dt) - ref)
        e2 = np.linalg.norm(end_state(dt / 2.0) - ref)
    except Exception as exc:
        return CheckResult("rk4_order", False, f"integration failed: {exc}")
    if e2 == 0.0 or e1 == 0.0:
        return CheckResult("rk4_order", False,
                           f"degenerate errors e1={e1:g} e2={e2:g}")
    order = math.log2(e1 / e2)
    return CheckResult("rk4_order", 3.7 <= order <= 4.3,
                       f"measured order {order:.3f} (e_dt={e1:.3e})")


def check_jacobian_fd(cfg: RunConfig) -> CheckResult:
    rng = np.random.default_rng(cfg.rng_seed)
    p = _params(3.0, -40.0, 0.7, eta_p=0.5)
    n = p.n_atoms
    worst = 0.0
    for _ in range(5):
        y = np.array([rng.uniform(-n / 2, n / 2), rng.uniform(-n / 2, n / 2),
                      rng.uniform(-n / 2, n / 2), rng.uniform(-50, 50),
                      rng.uniform(-50, 50), rng.uniform(-100, 100),
                      rng.uniform(-100, 100)])
        J = jacobian(p, State.from_array(y))
        scale = np.maximum(np.abs(y), 1.0)
        Jfd = np.empty_like(J)
        for j in range(7):
            h = 1e-6 * scale[j]
            yp = y.copy(); yp[j] += h
            ym = y.copy(); ym[j] -= h
            Jfd[:, j] = (rhs(p, State.from_array(yp))
                         - rhs(p, State.from_array(ym))) / (2 * h)
        fmax = max(1.0, float(np.abs(rhs(p, State.from_array(y))).max()))
        noise = 10.0 * np.finfo(float).eps * fmax / (2e-6 * scale)
        excess = (np.abs(J - Jfd) - noise[None, :]) / np.maximum(
            np.abs(Jfd), 1e-30)
        worst = max(worst, float(excess.max()))
    return CheckResult("jacobian_vs_fd", worst < 1e-5,
                       f"max relative deviation {worst:.3e}")


def ode_boundary_oracle(p_template: SystemParams, branch: str = "N",
                        t_end: float = 2000.0, dt: float = 2e-3,
                        rel_res: float = 2e-4) -> float:
    """Bisection on lambda for the superradiance onset: the perturbed
    normal/inverted state must push the photon number past 1e-6*N within
    t_end.  Independent of the closed-form boundary."""
    lam_ref = sra_boundary(p_template, branch)
    if lam_ref is None:
        raise ValueError("no transition at these parameters")
    n = p_template.n_atoms
    thr = 1e-6 * n

    def crosses(lam):
        p = p_template.replace(g=lam / math.sqrt(n))
        s0 = normal_state(p, tip=1e-3, inverted=branch == "I")
        ic = IntegratorConfig(method="rk4", dt=dt, t_end=t_end,
                              sample_every=200)
        tr = integrate(p, s0, ic)
        return bool(np.max(tr.photon_n) > thr)

    lo, hi = 0.8 * lam_ref, 1.3 * lam_ref
    if crosses(lo) or not crosses(hi):
        raise RuntimeError("oracle bracket does not straddle the onset")
    while (hi - lo) / lam_ref > rel_res:
        mid = 0.5 * (lo + hi)
        if crosses(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def check_boundary_oracle(cfg: RunConfig) -> CheckResult:
    rng = np.random.default_rng(cfg.rng_seed)
    worst = 0.0
    n_pts = cfg.selftest.oracle_points
    for _ in range(n_pts):
        uN = rng.uniform(-40.0, 0.0)
        eta = rng.uniform(0.0, 1.0)
        chi = rng.uniform(3.0, 18.0)
        den = FIG2["gamma_m"] ** 2 + FIG2["omega_m"] ** 2
        b1 = -eta * FIG2["omega_m"] / den
        omega = chi + uN / 2.0 - 2.0 * FIG2["delta0"] * b1
        p = _params(omega, uN, 1.0, eta_p=eta)
        lam_an = sra_boundary(p, "N")
        try:
            lam_ode = ode_boundary_oracle(p, "N", dt=cfg.selftest.oracle_dt)
        except RuntimeError as exc:
            return CheckResult("boundary_vs_ode_oracle", False, str(exc))
        worst = max(worst, abs(lam_ode - lam_an) / lam_an)
    return CheckResult("boundary_vs_ode_oracle", worst < 1e-3,
                       f"max relative gap {worst:.2e} over {n_pts} draws")


def check_pump_shift(cfg: RunConfig) -> CheckResult:
    worst = 0.0
    den = FIG2["gamma_m"] ** 2 + FIG2["omega_m"] ** 2
    shift = 2.0 * FIG2["delta0"] * 1.0 * FIG2["omega_m"] / den
    for omega in np.linspace(-25.0, 25.0, 41):
        pumped = sra_boundary(_params(omega, -20.0, 1.0, eta_p=1.0), "N")
        ref = sra_boundary(_params(omega - shift, -20.0, 1.0), "N")
        if (pumped is None) != (ref is None):
            return CheckResult("pump_shift_identity", False,
                               f"window mismatch at omega={omega}")
        if pumped is None:
            continue
        worst = max(worst, abs(pumped - ref) / ref)
    return CheckResult("pump_shift_identity", worst < 1e-10,
                       f"max relative gap {worst:.2e}")


def check_mirror_pair(cfg: RunConfig) -> CheckResult:
    p = _params(0.0, -40.0, 0.55)
    cands = [s for s in srb_states(p) if s.sx > 0 > s.sy]
    fp = refine_fixed_point(p, cands[0])
    if fp is None:
        return CheckResult("mirror_pair_symmetry", False, "no SRB fixed point")
    partner = State(-fp.sx, -fp.sy, fp.sz, -fp.a_re, -fp.a_im, fp.b_re, fp.b_im)
    res = float(np.linalg.norm(rhs(p, partner)))
    if res > 1e-9 * p.n_atoms:
        return CheckResult("mirror_pair_symmetry", False,
                           f"partner residual {res:.2e}")
    e1, _ = assess_stability(p, fp)
    e2, _ = assess_stability(p, partner)
    key = lambda z: (round(z.real, 9), round(z.imag, 9))
    gap = max(abs(a - b) for a, b in zip(sorted(e1, key=key),
                                         sorted(e2, key=key)))
    return CheckResult("mirror_pair_symmetry", gap < 1e-8,
                       f"max eigenvalue gap {gap:.2e}")


def check_sweep_determinism(cfg: RunConfig) -> CheckResult:
    p = _params(0.0, -40.0, 0.4)
    res = cfg.selftest.sweep_resolution
    opts = ClassifyOptions(dynamic_t_end=600.0)
    kw = dict(omega_range=(-6.0, 6.0), lambda_range=(0.2, 0.5),
              resolution=res, mode="hybrid", opts=opts)
    d1 = sweep(p, threads=1, **kw).to_json()
    d2 = sweep(p, threads=2, **kw).to_json()
    same = d1 == d2
    return CheckResult("sweep_determinism", same,
                       "byte-identical across 1 and 2 workers" if same
                       else "exports differ between worker counts")


ALL_CHECKS = [check_spin_norm_drift, check_rk4_order, check_jacobian_fd,
              check_boundary_oracle, check_pump_shift, check_mirror_pair,
              check_sweep_determinism]


def run_selftest(cfg: RunConfig) -> list[CheckResult]:
    return [chk(cfg) for chk in ALL_CHECKS]
