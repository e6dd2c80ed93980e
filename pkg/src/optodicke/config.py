"""Run configuration: JSON ingestion, validation and the bundled presets.

A config is one JSON document.  The ``params`` block accepts either the
per-atom couplings (g, u) or the aggregate aliases (uN/UN and
lambda/gsqrtN), which are expanded on load; unknown keys anywhere are
rejected.  Fixing rng_seed makes a run fully reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .dynamics import IntegratorConfig
from .model import SystemParams


class ConfigError(ValueError):
    """Invalid or unknown configuration content (CLI exit code 2)."""


_PARAM_KEYS = {"omega_a", "omega", "omega_m", "kappa", "gamma_m", "delta0",
               "eta_p", "n_atoms", "g", "u", "uN", "UN", "lambda", "gsqrtN"}
_PARAM_DEFAULTS = {"omega_a": 0.05, "omega": 8.1, "omega_m": 1.0,
                   "kappa": 8.1, "delta0": 0.05, "eta_p": 0.0,
                   "n_atoms": 1.0e6}

_INITIAL_KINDS = ("normal", "inverted", "explicit")


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "normal"        # normal | inverted | explicit
    tip: float = 1e-3           # sx = tip*N/2, sz adjusted to keep |S| = N/2
    state: Optional[tuple] = None  # explicit 7-vector

    def build(self, p: SystemParams):
        from .model import State, normal_state
        if self.kind == "explicit":
            return State.from_array(list(self.state))
        return normal_state(p, tip=self.tip, inverted=self.kind == "inverted")


@dataclass(frozen=True)
class EvolveConfig:
    initial: InitialCondition = field(default_factory=InitialCondition)
    band: float = 0.01          # relaxation-time band
    cycle_window: float = 0.25


@dataclass(frozen=True)
class SweepConfig:
    omega: tuple = (-40.0, 40.0)
    lam: tuple = (0.0, 3.0)
    resolution: tuple = (101, 101)
    mode: str = "hybrid"
    dynamic_t_end: float = 2000.0
    dynamic_dt: float = 2e-3
    cycle_tip: float = 0.6
    n_theta: int = 721


@dataclass(frozen=True)
class BoundaryConfig:
    branches: tuple = ("sra_n", "sra_i")
    omega: tuple = (-40.0, 40.0)
    tol: float = 2e-3


@dataclass(frozen=True)
class SelftestConfig:
    dt: float = 1e-3
    oracle_points: int = 20
    oracle_dt: float = 2e-3
    sweep_resolution: tuple = (7, 7)


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    selftest: SelftestConfig = field(default_factory=SelftestConfig)
    rng_seed: int = 1234
    threads: Optional[int] = None
    name: str = "run"

    def resolved_dict(self) -> dict:
        """Exact resolved configuration (aliases expanded) for provenance."""
        p = self.params
        return {
            "name": self.name,
            "params": {"omega_a": p.omega_a, "omega": p.omega,
                       "omega_m": p.omega_m, "kappa": p.kappa,
                       "gamma_m": p.gamma_m, "g": p.g, "u": p.u,
                       "delta0": p.delta0, "eta_p": p.eta_p,
                       "n_atoms": p.n_atoms,
                       "uN": p.uN, "lambda": p.lam},
            "integrator": {"method": self.integrator.method,
                           "dt": self.integrator.dt,
                           "t_end": self.integrator.t_end,
                           "sample_every": self.integrator.sample_every,
                           "abs_tol": self.integrator.abs_tol,
                           "rel_tol": self.integrator.rel_tol},
            "evolve": {"initial": {"kind": self.evolve.initial.kind,
                                   "tip": self.evolve.initial.tip,
                                   "state": list(self.evolve.initial.state)
                                   if self.evolve.initial.state else None},
                       "band": self.evolve.band,
                       "cycle_window": self.evolve.cycle_window},
            "sweep": {"omega": list(self.sweep.omega),
                      "lambda": list(self.sweep.lam),
                      "resolution": list(self.sweep.resolution),
                      "mode": self.sweep.mode,
                      "dynamic_t_end": self.sweep.dynamic_t_end,
                      "dynamic_dt": self.sweep.dynamic_dt,
                      "cycle_tip": self.sweep.cycle_tip,
                      "n_theta": self.sweep.n_theta},
            "boundary": {"branches": list(self.boundary.branches),
                         "omega": list(self.boundary.omega),
                         "tol": self.boundary.tol},
            "selftest": {"dt": self.selftest.dt,
                         "oracle_points": self.selftest.oracle_points,
                         "oracle_dt": self.selftest.oracle_dt,
                         "sweep_resolution": list(self.selftest.sweep_resolution)},
            "rng_seed": self.rng_seed,
            "threads": self.threads,
        }


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _params_from_dict(d: dict) -> SystemParams:
    _check_keys(d, _PARAM_KEYS, "params")
    vals = dict(_PARAM_DEFAULTS)
    vals.update({k: d[k] for k in d if k in
                 ("omega_a", "omega", "omega_m", "kappa", "gamma_m",
                  "delta0", "eta_p", "n_atoms")})
    if "gamma_m" not in vals:
        raise ConfigError("params.gamma_m is required")
    n = vals.get("n_atoms", 1.0e6)
    u_alias = [k for k in ("u", "uN", "UN") if k in d]
    g_alias = [k for k in ("g", "lambda", "gsqrtN") if k in d]
    if len(u_alias) != 1:
        raise ConfigError("params needs exactly one of u / uN / UN")
    if len(g_alias) != 1:
        raise ConfigError("params needs exactly one of g / lambda / gsqrtN")
    u = d[u_alias[0]] if u_alias[0] == "u" else d[u_alias[0]] / n
    g = d[g_alias[0]] if g_alias[0] == "g" else d[g_alias[0]] / math.sqrt(n)
    try:
        return SystemParams(g=float(g), u=float(u), **{k: float(v) for k, v
                                                       in vals.items()
                                                       if k != "n_atoms"},
                            n_atoms=float(n))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid params: {exc}") from exc


def _initial_from_dict(d: dict) -> InitialCondition:
    _check_keys(d, {"kind", "tip", "state"}, "evolve.initial")
    kind = d.get("kind", "normal")
    if kind not in _INITIAL_KINDS:
        raise ConfigError(f"initial.kind must be one of {_INITIAL_KINDS}")
    state = d.get("state")
    if kind == "explicit":
        if state is None or len(state) != 7:
            raise ConfigError("explicit initial state needs 7 components")
        state = tuple(float(v) for v in state)
    return InitialCondition(kind, float(d.get("tip", 1e-3)), state)


def config_from_dict(doc: dict, name: str = "run") -> RunConfig:
    _check_keys(doc, {"params", "integrator", "evolve", "sweep", "boundary",
                      "selftest", "rng_seed", "threads", "name"}, "config")
    if "params" not in doc:
        raise ConfigError("config requires a params block")
    params = _params_from_dict(doc["params"])

    integ = doc.get("integrator", {})
    _check_keys(integ, {"method", "dt", "t_end", "sample_every", "abs_tol",
                        "rel_tol"}, "integrator")
    try:
        integrator = IntegratorConfig(**integ)
    except ValueError as exc:
        raise ConfigError(f"invalid integrator block: {exc}") from exc

    ev = doc.get("evolve", {})
    _check_keys(ev, {"initial", "band", "cycle_window"}, "evolve")
    evolve = EvolveConfig(initial=_initial_from_dict(ev.get("initial", {})),
                          band=float(ev.get("band", 0.01)),
                          cycle_window=float(ev.get("cycle_window", 0.25)))

    sw = doc.get("sweep", {})
    _check_keys(sw, {"omega", "lambda", "resolution", "mode",
                     "dynamic_t_end", "dynamic_dt", "cycle_tip", "n_theta"},
                "sweep")
    mode = sw.get("mode", "hybrid")
    if mode not in ("analytic", "dynamic", "hybrid"):
        raise ConfigError(f"sweep.mode must be analytic|dynamic|hybrid, "
                          f"got {mode!r}")
    sweep = SweepConfig(omega=tuple(sw.get("omega", (-40.0, 40.0))),
                        lam=tuple(sw.get("lambda", (0.0, 3.0))),
                        resolution=tuple(sw.get("resolution", (101, 101))),
                        mode=mode,
                        dynamic_t_end=float(sw.get("dynamic_t_end", 2000.0)),
                        dynamic_dt=float(sw.get("dynamic_dt", 2e-3)),
                        cycle_tip=float(sw.get("cycle_tip", 0.6)),
                        n_theta=int(sw.get("n_theta", 721)))
    if len(sweep.resolution) != 2 or min(sweep.resolution) < 2:
        raise ConfigError("sweep.resolution must be two integers >= 2")

    bd = doc.get("boundary", {})
    _check_keys(bd, {"branches", "omega", "tol"}, "boundary")
    branches = tuple(bd.get("branches", ("sra_n", "sra_i")))
    for b in branches:
        if b not in ("sra_n", "sra_i", "srb"):
            raise ConfigError(f"unknown boundary branch {b!r}")
    boundary = BoundaryConfig(branches=branches,
                              omega=tuple(bd.get("omega", (-40.0, 40.0))),
                              tol=float(bd.get("tol", 2e-3)))

    st = doc.get("selftest", {})
    _check_keys(st, {"dt", "oracle_points", "oracle_dt", "sweep_resolution"},
                "selftest")
    selftest = SelftestConfig(dt=float(st.get("dt", 1e-3)),
                              oracle_points=int(st.get("oracle_points", 20)),
                              oracle_dt=float(st.get("oracle_dt", 2e-3)),
                              sweep_resolution=tuple(
                                  st.get("sweep_resolution", (7, 7))))

    threads = doc.get("threads")
    return RunConfig(params=params, integrator=integrator, evolve=evolve,
                     sweep=sweep, boundary=boundary, selftest=selftest,
                     rng_seed=int(doc.get("rng_seed", 1234)),
                     threads=None if threads is None else int(threads),
                     name=str(doc.get("name", name)))


def load_config(source) -> RunConfig:
    """Load a config from a bundled preset name or a JSON file path."""
    if isinstance(source, str) and source in BUNDLED:
        return config_from_dict(json.loads(json.dumps(BUNDLED[source])),
                                name=source)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"config {source!r} is neither a bundled preset "
                          f"({', '.join(sorted(BUNDLED))}) nor a file")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(doc, name=path.stem)


# --- bundled presets (one per figure-level result) -----------------------------

_FIG2_PARAMS = {"omega_a": 0.05, "omega_m": 1.0, "kappa": 8.1,
                "gamma_m": 0.05, "delta0": 0.05, "n_atoms": 1.0e6}

BUNDLED: dict = {
    # marker evolutions; coordinates are representative interior points
    "point_a": {
        "params": {**_FIG2_PARAMS, "omega": 0.0, "UN": -40.0, "lambda": 0.55},
        "integrator": {"method": "rk4", "dt": 1e-3, "t_end": 2000.0,
                       "sample_every": 100},
        "evolve": {"initial": {"kind": "normal", "tip": 1e-3}, "band": 0.01},
    },
    "point_b": {
        "params": {**_FIG2_PARAMS, "omega": 0.0, "UN": -40.0, "lambda": 0.55},
        "integrator": {"method": "rk4", "dt": 1e-3, "t_end": 2000.0,
                       "sample_every": 100},
        "evolve": {"initial": {"kind": "inverted", "tip": 1e-3}, "band": 0.01},
    },
    "point_c": {
        "params": {**_FIG2_PARAMS, "omega": 0.0, "UN": 40.0, "lambda": 0.675},
        "integrator": {"method": "rk4", "dt": 1e-3, "t_end": 2000.0,
                       "sample_every": 100},
        "evolve": {"initial": {"kind": "normal", "tip": 0.6}, "band": 0.01},
    },
    # phase-portrait sweeps
    "fig2_top": {
        "params": {**_FIG2_PARAMS, "omega": 0.0, "UN": 0.0, "lambda": 1.0},
        "sweep": {"omega": [-40.0, 40.0], "lambda": [0.0, 3.0],
                  "resolution": [61, 61], "mode": "hybrid",
                  "dynamic_t_end": 1200.0},
    },
    "fig2_mid": {
        "params": {**_FIG2_PARAMS, "omega": 0.0, "UN": -40.0, "lambda": 1.0},
        "sweep": {"omega": [-40.0, 40.0], "lambda": [0.0, 3.0],
                  "resolution": [61, 61], "mode": "hybrid",
                  "dynamic_t_end": 1200.0},
    },
    "fig2_bot": {
        "params": {**_FIG2_PARAMS, "omega": 0.0, "UN": 40.0, "lambda": 1.0},
        "sweep": {"omega": [-40.0, 40.0], "lambda": [0.0, 3.0],
                  "resolution": [61, 61], "mode": "hybrid",
                  "dynamic_t_end": 1200.0},
    },
    # coexistence region vs mirror frequency (magnified near the left
    # crossing of the two type-A boundaries)
    "fig3_wm02": {
        "params": {**_FIG2_PARAMS, "omega_m": 0.2, "gamma_m": 0.01,
                   "omega": 0.0, "UN": -30.0, "lambda": 0.6},
        "sweep": {"omega": [-13.4, -11.6], "lambda": [0.58, 0.68],
                  "resolution": [61, 61], "mode": "hybrid",
                  "dynamic_t_end": 1000.0},
    },
    "fig3_wm04": {
        "params": {**_FIG2_PARAMS, "omega_m": 0.4, "gamma_m": 0.02,
                   "omega": 0.0, "UN": -30.0, "lambda": 0.6},
        "sweep": {"omega": [-13.4, -11.6], "lambda": [0.58, 0.68],
                  "resolution": [61, 61], "mode": "hybrid",
                  "dynamic_t_end": 1000.0},
    },
    "fig3_wm08": {
        "params": {**_FIG2_PARAMS, "omega_m": 0.8, "gamma_m": 0.04,
                   "omega": 0.0, "UN": -30.0, "lambda": 0.6},
        "sweep": {"omega": [-13.4, -11.6], "lambda": [0.58, 0.68],
                  "resolution": [61, 61], "mode": "hybrid",
                  "dynamic_t_end": 1000.0},
    },
    # pumped phase boundaries; the sweep window sits on the steep limb of
    # the inverted-branch boundary where the pump-created region is widest
    "fig5_pump": {
        "params": {**_FIG2_PARAMS, "omega": 0.0, "UN": -20.0, "lambda": 0.6,
                   "eta_p": 1.0},
        "boundary": {"branches": ["sra_n", "sra_i", "srb"],
                     "omega": [-30.0, 30.0], "tol": 2e-3},
        "sweep": {"omega": [8.5, 9.8], "lambda": [0.7, 1.6],
                  "resolution": [61, 61], "mode": "analytic"},
    },
}
