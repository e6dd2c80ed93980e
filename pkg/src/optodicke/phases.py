"""Phase classification, (omega, lambda) sweeps and boundary tracing.

Cell labels follow the region taxonomy of the phase portraits:

    N, I, N+I                 trivial zero-photon attractors
    SRA_N, SRA_I, TWO_SRA     type-A superradiant attractors by Sz branch
    SRB, SRB+N, SRB+I, SRB+N+I   type-B present (negative U only)
    PERSISTENT_OSC            no stable fixed point, limit-cycle dynamics
    ETA_SRA, ETA_SRB          superradiant only because of the mechanical pump

Analytic mode uses closed forms plus trivial-state spectra only; hybrid
additionally certifies nontrivial attractors with the Newton machinery and
falls back to integration where no stable fixed point is found; dynamic
mode integrates from perturbed seeds and inspects the reached attractors.
"""

from __future__ import annotations

import json
import math
import multiprocessing as mp
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import IntegratorConfig, detect_cycle, integrate
from .model import State, SystemParams, normal_state
from .steadystate import (FixedPoint, assess_stability, branch_tag,
                          find_sra_roots, mirror_steady, refine_fixed_point,
                          sra_boundary, srb_quantities, srb_states,
                          trivial_states)

LABELS = ("N", "I", "N+I", "SRA_N", "SRA_I", "TWO_SRA", "SRB", "SRB+N",
          "SRB+I", "SRB+N+I", "PERSISTENT_OSC", "ETA_SRA", "ETA_SRB")

_SRA_SET = frozenset({"SRA_N", "SRA_I", "TWO_SRA"})


@dataclass(frozen=True)
class ClassifyOptions:
    n_theta: int = 721           # Sz-grid resolution of the root enumeration
    seed_tip: float = 1e-3       # tip for "from normal/inverted" evolutions
    cycle_tip: float = 0.6       # large displacement used to reach cycles
    dynamic_t_end: float = 2000.0
    dynamic_dt: float = 2e-3
    cycle_window: float = 0.25
    sample_every: int = 200
    min_periods: int = 5         # classification runs tolerate short tails


@dataclass(frozen=True)
class CellClassification:
    label: str
    stable_fp_count: int
    srb_exists: bool
    oscillation: Optional[bool]   # None = not checked dynamically
    undecided: bool
    provenance: str               # analytic | dynamic | hybrid

    def to_dict(self) -> dict:
        return {"label": self.label, "stable_fp_count": self.stable_fp_count,
                "srb_exists": self.srb_exists, "oscillation": self.oscillation,
                "undecided": self.undecided, "provenance": self.provenance}


def _trivial_ok(p: SystemParams) -> tuple[bool, bool, int]:
    """(normal usable, inverted usable, certified-stable count).  A state
    counts for the label unless it is outright unstable; exactly marginal
    spectra (pure precession at g = 0) keep their region label."""
    ok = []
    n_stable = 0
    for s in trivial_states(p):
        _, verdict = assess_stability(p, s)
        ok.append(verdict != "unstable")
        if verdict == "stable":
            n_stable += 1
    return ok[0], ok[1], n_stable


def _compose(sra_n: bool, sra_i: bool, srb: bool, triv_n: bool,
             triv_i: bool) -> Optional[str]:
    if sra_n and sra_i:
        return "TWO_SRA"
    if sra_n:
        return "SRA_N"
    if sra_i:
        return "SRA_I"
    parts = []
    if srb:
        parts.append("SRB")
    if triv_n:
        parts.append("N")
    if triv_i:
        parts.append("I")
    return "+".join(parts) if parts else None


def _classify_analytic(p: SystemParams, opts: ClassifyOptions) -> CellClassification:
    triv_n, triv_i, n_stable = _trivial_ok(p)
    lam = p.lam
    lc_n = sra_boundary(p, "N")
    lc_i = sra_boundary(p, "I")
    sra_n = lc_n is not None and lam > lc_n
    sra_i = lc_i is not None and lam > lc_i
    srb = srb_quantities(p).exists
    label = _compose(sra_n, sra_i, srb, triv_n, triv_i)
    if label is None:
        return CellClassification("PERSISTENT_OSC", n_stable, srb, None,
                                  True, "analytic")
    undecided = label == "TWO_SRA"  # coexistence needs certification
    return CellClassification(label, n_stable, srb, None, undecided, "analytic")


def _certified_nontrivial(p: SystemParams, opts: ClassifyOptions):
    """Stability-certified Sy = 0 roots and SRB points."""
    sra_n = sra_i = False
    n_stable = 0
    for s in find_sra_roots(p, n_theta=opts.n_theta):
        refined = refine_fixed_point(p, s)
        if refined is None:
            continue
        try:
            _, verdict = assess_stability(p, refined)
        except Exception:
            continue
        if verdict == "stable":
            n_stable += 2  # the (-Sx, -Sy, -a) partner shares the spectrum
            if refined.sz < 0:
                sra_n = True
            else:
                sra_i = True
    srb_stable = False
    # the four SRB sign combinations form two mirror pairs with distinct
    # spectra; assess one representative of each pair
    for s in srb_states(p)[::2]:
        try:
            _, verdict = assess_stability(p, s)
        except Exception:
            continue
        if verdict == "stable":
            srb_stable = True
            n_stable += 2
    return sra_n, sra_i, srb_stable, n_stable


def _certify_cycle(p: SystemParams, opts: ClassifyOptions):
    """Integrate from a large displacement and look for a sustained cycle."""
    s0 = normal_state(p, tip=opts.cycle_tip)
    cfg = IntegratorConfig(method="rk4", dt=opts.dynamic_dt,
                           t_end=opts.dynamic_t_end,
                           sample_every=opts.sample_every)
    try:
        tr = integrate(p, s0, cfg)
        rep = detect_cycle(tr, window=opts.cycle_window,
                           min_periods=opts.min_periods)
    except Exception:
        return None, None
    if rep.verdict == "limit_cycle":
        return True, None
    if rep.verdict == "converged":
        fp = refine_fixed_point(p, tr.final_state())
        return False, fp
    return None, None


def _classify_hybrid(p: SystemParams, opts: ClassifyOptions) -> CellClassification:
    triv_n, triv_i, n_stable = _trivial_ok(p)
    lam = p.lam
    lc_n = sra_boundary(p, "N")
    lc_i = sra_boundary(p, "I")
    above_n = lc_n is not None and lam > lc_n
    above_i = lc_i is not None and lam > lc_i
    srbq = srb_quantities(p)
    need_roots = above_n or above_i or srbq.exists or not (triv_n and triv_i)
    sra_n = sra_i = False
    srb_stable = False
    if need_roots:
        sra_n, sra_i, srb_stable, extra = _certified_nontrivial(p, opts)
        n_stable += extra
    label = _compose(sra_n, sra_i, srbq.exists and srb_stable, triv_n, triv_i)
    if label is not None:
        return CellClassification(label, n_stable, srbq.exists, None, False,
                                  "hybrid")
    # nothing stable anywhere: certify the oscillation dynamically
    osc, fp = _certify_cycle(p, opts)
    if osc:
        return CellClassification("PERSISTENT_OSC", 0, srbq.exists, True,
                                  False, "hybrid")
    if fp is not None:
        try:
            _, verdict = assess_stability(p, fp)
        except Exception:
            verdict = "unstable"
        if verdict == "stable":
            tag = branch_tag(p, fp)
            label = {"N": "N", "I": "I", "SRA_N": "SRA_N", "SRA_I": "SRA_I",
                     "SRB": "SRB"}.get(tag, "PERSISTENT_OSC")
            return CellClassification(label, 1, srbq.exists, False, False,
                                      "hybrid")
    return CellClassification("PERSISTENT_OSC", 0, srbq.exists, None, True,
                              "hybrid")


def _classify_dynamic(p: SystemParams, opts: ClassifyOptions) -> CellClassification:
    cfg = IntegratorConfig(method="rk4", dt=opts.dynamic_dt,
                           t_end=opts.dynamic_t_end,
                           sample_every=opts.sample_every)
    seeds = [normal_state(p, tip=opts.seed_tip),
             normal_state(p, tip=opts.seed_tip, inverted=True)]
    seeds += srb_states(p)[::2]  # one seed per SRB mirror pair
    reached: list[State] = []
    any_cycle = False
    any_undecided = False
    srbq = srb_quantities(p)
    for s0 in seeds:
        try:
            tr = integrate(p, s0, cfg)
        except Exception:
            any_undecided = True
            continue
        fp = _attractor_of(p, tr)
        if fp is None:
            try:
                rep = detect_cycle(tr, window=opts.cycle_window,
                                   min_periods=opts.min_periods)
            except Exception:
                any_undecided = True
                continue
            if rep.verdict == "limit_cycle":
                any_cycle = True
                continue
            if rep.verdict == "converged":
                cand = refine_fixed_point(p, tr.final_state())
                if cand is not None:
                    try:
                        _, verdict = assess_stability(p, cand)
                    except Exception:
                        verdict = "unstable"
                    if verdict != "unstable":
                        fp = cand
            if fp is None:
                any_undecided = True
                continue
        if not any(np.linalg.norm(fp.as_array() - q.as_array())
                   < 1e-4 * p.n_atoms for q in reached):
            reached.append(fp)
    triv_n = triv_i = sra_n = sra_i = srb_part = False
    n_stable = 0
    for fp in reached:
        tag = branch_tag(p, fp)
        n_stable += 1
        triv_n |= tag == "N"
        triv_i |= tag == "I"
        sra_n |= tag == "SRA_N"
        sra_i |= tag == "SRA_I"
        srb_part |= tag == "SRB"
    label = _compose(sra_n, sra_i, srb_part, triv_n, triv_i)
    if label is None:
        if any_cycle:
            return CellClassification("PERSISTENT_OSC", 0, srbq.exists, True,
                                      False, "dynamic")
        return CellClassification("PERSISTENT_OSC", 0, srbq.exists, None,
                                  True, "dynamic")
    return CellClassification(label, n_stable, srbq.exists,
                              True if any_cycle else None,
                              any_undecided, "dynamic")


def _attractor_of(p: SystemParams, tr) -> Optional[State]:
    """Fixed point a trajectory has settled onto (or slowly spirals into):
    Newton from the tail mean, accepted when the late motion is bounded
    around it and not growing."""
    n_tail = max(8, tr.n_samples // 4)
    tail = tr.states[-n_tail:]
    for guess in (tail.mean(axis=0), tr.states[-1]):
        fp = refine_fixed_point(p, State.from_array(guess))
        if fp is None:
            continue
        y = fp.as_array()
        d = np.sqrt(((tail - y) ** 2).sum(axis=1))
        scale = max(np.linalg.norm(y), 1e-9)
        half = n_tail // 2
        # the 1.1 margin absorbs sampling aliasing of precession beats
        if d.max() < 0.25 * scale and d[half:].max() <= 1.1 * d[:half].max():
            try:
                _, verdict = assess_stability(p, fp)
            except Exception:
                continue
            if verdict != "unstable":
                return fp
    return None


def _sra_branches(label: str) -> frozenset:
    return {"SRA_N": frozenset({"N"}), "SRA_I": frozenset({"I"}),
            "TWO_SRA": frozenset({"N", "I"})}.get(label, frozenset())


def classify_point(p: SystemParams, mode: str = "hybrid",
                   opts: Optional[ClassifyOptions] = None) -> CellClassification:
    """Classify one parameter point into the region taxonomy.

    With a pump the point is also classified at eta_p = 0; a cell that is
    superradiant on a type-A branch (or holds the type-B state) only
    because of the pump is relabelled ETA_SRA / ETA_SRB.
    """
    opts = opts or ClassifyOptions()
    cell = _classify_one(p, mode, opts)
    if p.eta_p > 0.0:
        ref = _classify_one(p.replace(eta_p=0.0), mode, opts)
        if cell.label != ref.label:
            if _sra_branches(cell.label) > _sra_branches(ref.label):
                return replace_label(cell, "ETA_SRA")
            if "SRB" in cell.label and "SRB" not in ref.label:
                return replace_label(cell, "ETA_SRB")
    return cell


def replace_label(cell: CellClassification, label: str) -> CellClassification:
    return CellClassification(label, cell.stable_fp_count, cell.srb_exists,
                              cell.oscillation, cell.undecided,
                              cell.provenance)


def _classify_one(p, mode, opts) -> CellClassification:
    if mode == "analytic":
        return _classify_analytic(p, opts)
    if mode == "hybrid":
        return _classify_hybrid(p, opts)
    if mode == "dynamic":
        return _classify_dynamic(p, opts)
    raise ValueError(f"unknown mode {mode!r}")


# --- sweeps --------------------------------------------------------------------

@dataclass
class PhaseDiagram:
    omega_axis: np.ndarray
    lambda_axis: np.ndarray
    labels: list            # [i_lambda][j_omega] label codes
    diagnostics: list       # matching dicts
    params: dict            # base parameters minus the swept fields
    mode: str
    version: str = "1"

    def cell_area(self) -> float:
        dw = float(self.omega_axis[1] - self.omega_axis[0])
        dl = float(self.lambda_axis[1] - self.lambda_axis[0])
        return dw * dl

    def count(self, label: str) -> int:
        return sum(row.count(label) for row in self.labels)

    def to_json_dict(self) -> dict:
        return {"omega_axis": [float(v) for v in self.omega_axis],
                "lambda_axis": [float(v) for v in self.lambda_axis],
                "labels": self.labels,
                "diagnostics": self.diagnostics,
                "params": self.params,
                "mode": self.mode,
                "version": self.version}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "PhaseDiagram":
        d = json.loads(text)
        return cls(np.asarray(d["omega_axis"]), np.asarray(d["lambda_axis"]),
                   d["labels"], d["diagnostics"], d["params"], d["mode"],
                   d["version"])

    def write_label_csv(self, path) -> None:
        """Row-major matrix of label codes, one lambda row per line."""
        import csv as _csv
        with open(path, "w", newline="") as f:
            w = _csv.writer(f)
            w.writerow(["lambda\\omega"] + [repr(float(v))
                                            for v in self.omega_axis])
            for i, lam in enumerate(self.lambda_axis):
                w.writerow([repr(float(lam))] + self.labels[i])


_ROW_CTX: dict = {}


def _classify_row(i: int):
    p0: SystemParams = _ROW_CTX["params"]
    omegas = _ROW_CTX["omega_axis"]
    lam = float(_ROW_CTX["lambda_axis"][i])
    mode = _ROW_CTX["mode"]
    opts = _ROW_CTX["opts"]
    n = p0.n_atoms
    labels, diags = [], []
    for w in omegas:
        p = p0.replace(omega=float(w), g=lam / math.sqrt(n))
        try:
            cell = classify_point(p, mode, opts)
        except Exception as exc:  # never abort the sweep
            cell = CellClassification("PERSISTENT_OSC", 0, False, None, True,
                                      mode)
            diags.append({**cell.to_dict(), "error": str(exc)})
            labels.append(cell.label)
            continue
        labels.append(cell.label)
        diags.append(cell.to_dict())
    return labels, diags


def sweep(p_base: SystemParams, omega_range=(-40.0, 40.0),
          lambda_range=(0.0, 3.0), resolution=(101, 101),
          mode: str = "hybrid", threads: int = 1,
          opts: Optional[ClassifyOptions] = None) -> PhaseDiagram:
    """Classify a rectangular (omega, lambda) grid.

    Rows (fixed lambda) are independent work items; the merge is by row
    index so the output is identical for any worker count.
    """
    n_w, n_l = resolution
    if n_w < 2 or n_l < 2:
        raise ValueError("resolution must be >= 2 per axis")
    omega_axis = np.linspace(omega_range[0], omega_range[1], n_w)
    lambda_axis = np.linspace(lambda_range[0], lambda_range[1], n_l)
    opts = opts or ClassifyOptions()
    ctx = {"params": p_base, "omega_axis": omega_axis,
           "lambda_axis": lambda_axis, "mode": mode, "opts": opts}
    global _ROW_CTX
    old = _ROW_CTX
    _ROW_CTX = ctx
    try:
        if threads <= 1:
            rows = [_classify_row(i) for i in range(n_l)]
        else:
            with mp.get_context("fork").Pool(threads) as pool:
                rows = pool.map(_classify_row, range(n_l), chunksize=1)
    finally:
        _ROW_CTX = old
    labels = [r[0] for r in rows]
    diagnostics = [r[1] for r in rows]
    params = {k: v for k, v in p_base.__dict__.items()
              if k not in ("omega", "g")}
    return PhaseDiagram(omega_axis, lambda_axis, labels, diagnostics,
                        params, mode)


def two_sra_area(d: PhaseDiagram) -> float:
    """Total area (MHz^2) of certified coexistence cells."""
    if d.mode not in ("hybrid", "dynamic"):
        raise ValueError("two_sra_area needs a hybrid or dynamic diagram; "
                         "analytic mode cannot certify coexistence")
    return d.count("TWO_SRA") * d.cell_area()


def eta_sra_cells(d: PhaseDiagram) -> list[tuple[int, int]]:
    """(i_lambda, j_omega) indices of pump-created type-A cells."""
    return [(i, j) for i, row in enumerate(d.labels)
            for j, lab in enumerate(row) if lab == "ETA_SRA"]


# --- boundary tracing -----------------------------------------------------------

def srb_window(p: SystemParams) -> Optional[tuple[float, float]]:
    """Omega interval where the type-B normalization can be satisfied:
    |omega + 2 delta0 b1| <= |U| N/2 with b1 at the SRB photon number."""
    q = srb_quantities(p.replace(omega=0.0))
    if p.u >= 0.0 or not math.isfinite(q.photon_n):
        return None
    half = abs(p.u) * p.spin_length
    center = -2.0 * p.delta0 * q.b1
    return (center - half, center + half)


def srb_onset_lambda(p: SystemParams) -> Optional[float]:
    """Smallest collective coupling with an SRB solution at this omega."""
    if p.u >= 0.0:
        return None
    q = srb_quantities(p)
    room = p.spin_length ** 2 - q.sz2
    if not room > 0.0:
        return None
    g2 = -p.kappa ** 2 * p.omega_a / (4.0 * p.u * room)
    return math.sqrt(g2 * p.n_atoms)


def trace_boundary(p_base: SystemParams, branch: str, omega_range,
                   tol: float = 2e-3, n_init: int = 65,
                   max_points: int = 4000) -> list[list[tuple[float, float]]]:
    """Polyline(s) of the requested boundary over omega.

    Sampling refines until adjacent lambda values differ by less than
    ``tol``; omega intervals without a transition split the output into
    separate segments (gap markers).
    """
    if branch in ("sra_n", "sra_i"):
        br = "N" if branch == "sra_n" else "I"
        def f(w):
            return sra_boundary(p_base.replace(omega=float(w)), br)
    elif branch == "srb":
        def f(w):
            return srb_onset_lambda(p_base.replace(omega=float(w)))
    else:
        raise ValueError(f"unknown branch {branch!r}; "
                         "expected sra_n | sra_i | srb")
    lo, hi = float(omega_range[0]), float(omega_range[1])
    if not hi > lo:
        raise ValueError("omega_range must be increasing")
    pts = [(w, f(w)) for w in np.linspace(lo, hi, n_init)]
    while len(pts) < max_points:
        inserts = []
        for k in range(len(pts) - 1):
            (w1, l1), (w2, l2) = pts[k], pts[k + 1]
            if w2 - w1 < 1e-9:
                continue
            if l1 is not None and l2 is not None and abs(l2 - l1) >= tol:
                inserts.append(k)
            elif (l1 is None) != (l2 is None) and w2 - w1 > 1e-6:
                inserts.append(k)  # localize the window edge
        if not inserts:
            break
        for k in reversed(inserts):
            wm = 0.5 * (pts[k][0] + pts[k + 1][0])
            pts.insert(k + 1, (wm, f(wm)))
    segments: list[list[tuple[float, float]]] = []
    cur: list[tuple[float, float]] = []
    for w, lam in pts:
        if lam is None or not math.isfinite(lam):
            if cur:
                segments.append(cur)
                cur = []
        else:
            cur.append((float(w), float(lam)))
    if cur:
        segments.append(cur)
    return segments
