"""Run configuration: flat JSON file plus CLI-flag overrides.

Field names carry units (angles in radians); unknown fields are rejected so a
typo cannot silently fall back to a default. All defaults are documented in
the README and frozen by CONFIG_VERSION: a given (config, version) pair must
reproduce output files byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from .angles import parse_angle
from .errors import ConfigError
from .linalg import SIGMA_X, SIGMA_Y, SIGMA_Z
from .protocol import (
    EXACT_QUBIT,
    FIRST_ORDER,
    CouplingSpec,
    MeterObservable,
    ProtocolConfig,
    SystemPreparation,
)
from .states import MeterState
from .tolerances import DEFAULT, Tolerances

CONFIG_VERSION = 1

_FORMS = {"exact_qubit": EXACT_QUBIT, "first_order": FIRST_ORDER}
_NAMED_OBSERVABLES = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}


@dataclass
class RunConfig:
    theta_rad: float = math.pi / 4
    alpha_rad: float = math.pi / 7
    gamma_inv_time: float = 0.001
    t_time: float = 1.0
    form: str = "exact_qubit"
    meter_dim: int = 2
    meter_obs: object = "sigma_x"
    #: Bloch triple [rx, ry, rz] for a qubit meter, else N amplitudes
    #: (entries may be numbers or [re, im] pairs)
    initial_state: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    n_list: list = field(default_factory=lambda: [1])
    #: trajectory length; falls back to max(n_list) when omitted
    steps: int | None = None
    #: single angle used by the trajectory command
    phi_rad: float | None = None
    phi_start_rad: float = 0.0
    phi_stop_rad: float = math.pi
    phi_points: int = 2001
    window_lo: float = 1e-4
    window_hi: float = 1e-2
    window_per_decade: int = 20
    jobs: int | None = None
    seed: int = 20260810
    trials: int = 200
    debug_flip_d: bool = False
    out: str | None = None
    tolerances: dict = field(default_factory=dict)

    # ------------------------------------------------------------------ load
    @staticmethod
    def load(path: str | None = None, overrides: dict | None = None) -> "RunConfig":
        """Build from an optional JSON file plus explicit overrides."""
        data: dict = {}
        if path is not None:
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    data = json.load(fh)
            except OSError as exc:
                raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config file must contain a JSON object")
        if overrides:
            data.update({k: v for k, v in overrides.items() if v is not None})

        known = {f.name for f in fields(RunConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")

        cfg = RunConfig()
        for key, value in data.items():
            if key.endswith("_rad") and value is not None:
                value = parse_angle(value)
            setattr(cfg, key, value)
        cfg.validate()
        return cfg

    # -------------------------------------------------------------- validate
    def validate(self) -> None:
        if self.form not in _FORMS:
            raise ConfigError(
                f"form must be one of {sorted(_FORMS)}, got {self.form!r}"
            )
        if not 0.0 <= float(self.theta_rad) <= math.pi / 2:
            raise ConfigError(f"theta_rad must lie in [0, pi/2], got {self.theta_rad}")
        if float(self.gamma_inv_time) < 0.0 or float(self.t_time) < 0.0:
            raise ConfigError("gamma_inv_time and t_time must be nonnegative")
        if int(self.meter_dim) < 2:
            raise ConfigError("meter_dim must be at least 2")
        if self.form == "exact_qubit" and int(self.meter_dim) != 2:
            raise ConfigError("the exact form needs meter_dim = 2")
        try:
            ns = [int(n) for n in self.n_list]
        except (TypeError, ValueError):
            raise ConfigError("n_list must be a list of integers") from None
        if not ns or any(n < 0 for n in ns):
            raise ConfigError("n_list must be a nonempty list of nonnegative integers")
        self.n_list = ns
        if int(self.phi_points) < 0:
            raise ConfigError("phi_points must be nonnegative")
        if int(self.phi_points) == 0:
            raise ConfigError("phi grid is empty (phi_points = 0)")
        if int(self.phi_points) > 1 and not self.phi_start_rad < self.phi_stop_rad:
            raise ConfigError("phi grid needs phi_start_rad < phi_stop_rad")
        if not 0.0 < float(self.window_lo) < float(self.window_hi):
            raise ConfigError("fit window needs 0 < window_lo < window_hi")
        if int(self.window_per_decade) < 2:
            raise ConfigError("window_per_decade must be at least 2")
        if self.steps is not None and int(self.steps) < 0:
            raise ConfigError("steps must be nonnegative")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("tolerances must be an object of field overrides")
        self.tolerance_set()  # raises on unknown tolerance fields

    # ------------------------------------------------------------ components
    def tolerance_set(self) -> Tolerances:
        try:
            return DEFAULT.override(**{k: float(v) for k, v in self.tolerances.items()})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def meter_observable(self) -> MeterObservable:
        tol = self.tolerance_set()
        if isinstance(self.meter_obs, str):
            name = self.meter_obs
            if name not in _NAMED_OBSERVABLES:
                raise ConfigError(
                    f"meter_obs must be one of {sorted(_NAMED_OBSERVABLES)} or a diagonal list"
                )
            if int(self.meter_dim) != 2:
                raise ConfigError(f"named observable {name!r} needs meter_dim = 2")
            return MeterObservable.from_matrix(_NAMED_OBSERVABLES[name], tol)
        diag = [float(x) for x in self.meter_obs]
        if len(diag) != int(self.meter_dim):
            raise ConfigError(
                f"diagonal meter_obs has {len(diag)} entries, meter_dim is {self.meter_dim}"
            )
        return MeterObservable.diagonal(diag, tol)

    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(
            prep=SystemPreparation(float(self.theta_rad)),
            alpha=float(self.alpha_rad),
            coupling=CouplingSpec(float(self.gamma_inv_time), float(self.t_time)),
            form=_FORMS[self.form],
            meter_obs=self.meter_observable() if self.form == "first_order" else None,
            tol=self.tolerance_set(),
            flip_d=bool(self.debug_flip_d),
        )

    def initial_meter(self) -> MeterState:
        tol = self.tolerance_set()
        entries = list(self.initial_state)
        n = int(self.meter_dim)
        if n == 2 and len(entries) == 3 and all(
            isinstance(x, (int, float)) for x in entries
        ):
            return MeterState.from_bloch(tuple(float(x) for x in entries), tol)
        if len(entries) != n:
            raise ConfigError(
                f"initial_state needs 3 Bloch components (qubit) or {n} amplitudes"
            )
        amps = []
        for x in entries:
            if isinstance(x, (int, float)):
                amps.append(complex(float(x)))
            elif isinstance(x, (list, tuple)) and len(x) == 2:
                amps.append(complex(float(x[0]), float(x[1])))
            else:
                raise ConfigError("amplitudes must be numbers or [re, im] pairs")
        return MeterState.pure(np.asarray(amps), tol)

    def phi_grid(self) -> np.ndarray:
        points = int(self.phi_points)
        if points == 1:
            return np.array([float(self.phi_start_rad)])
        return np.linspace(float(self.phi_start_rad), float(self.phi_stop_rad), points)

    def resolved_jobs(self) -> int:
        if self.jobs is not None:
            if int(self.jobs) < 1:
                raise ConfigError("jobs must be at least 1")
            return int(self.jobs)
        return os.cpu_count() or 1

    def trajectory_steps(self) -> int:
        return int(self.steps) if self.steps is not None else max(self.n_list)

    def trajectory_phi(self) -> float:
        if self.phi_rad is None:
            raise ConfigError("trajectory needs phi_rad (or --phi)")
        return float(self.phi_rad)
