"""YAML files for simulation settings and scenarios.

A settings file is a flat mapping. Keys that name :class:`SimConfig` fields
configure the simulation; ``n_aps``, ``n_stations``, ``area_xyz``,
``channels`` and ``seed`` describe random deployments. An optional
``mcs_table`` list overrides the default rate table, one mapping per entry
with ``index, n_m, n_c_num, n_c_den, min_rssi``. ``forced_reconfigs`` is a
list of ``[time_s, ap, channel]`` triples.

A scenario file stores one concrete deployment::

    seed: 7
    area_xyz: [30, 30, 2]
    channels: [36, 40, 44]
    aps:      [{id: 0, x: .., y: .., z: .., channel: 36}, ...]
    stations: [{id: 0, x: .., y: .., z: .., ap: 0}, ...]
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import yaml

from .engine import Scenario, ScenarioParams, SimConfig

SIM_KEYS = tuple(f.name for f in dataclasses.fields(SimConfig))
SCENARIO_KEYS = tuple(f.name for f in dataclasses.fields(ScenarioParams))


def _read(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return data


def _write(path, data: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(data, fh, sort_keys=False, default_flow_style=None)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def settings_from_dict(data: dict) -> tuple[SimConfig, ScenarioParams]:
    unknown = set(data) - set(SIM_KEYS) - set(SCENARIO_KEYS)
    if unknown:
        raise ValueError(f"unknown settings key(s): {', '.join(sorted(unknown))}")
    sim = {k: v for k, v in data.items() if k in SIM_KEYS}
    for key in ("fixed_aps", "forced_reconfigs", "mcs_table"):
        if key in sim and sim[key] is not None:
            sim[key] = tuple(tuple(x) if isinstance(x, list) else x for x in sim[key])
    scen = {k: v for k, v in data.items() if k in SCENARIO_KEYS}
    for key in ("area_xyz", "channels"):
        if key in scen:
            scen[key] = tuple(scen[key])
    return SimConfig(**sim), ScenarioParams(**scen)


def settings_to_dict(config: SimConfig, params: ScenarioParams | None = None) -> dict:
    out = {}
    if params is not None:
        p = dataclasses.asdict(params)
        p["area_xyz"] = [float(a) for a in p["area_xyz"]]
        p["channels"] = [int(c) for c in p["channels"]]
        out.update(p)
    for f in dataclasses.fields(SimConfig):
        v = getattr(config, f.name)
        if f.name == "forced_reconfigs":
            v = [[float(t), int(ap), int(ch)] for t, ap, ch in v]
        elif f.name == "fixed_aps":
            v = [int(j) for j in v]
        elif f.name == "mcs_table" and v is not None:
            v = [dict(r) for r in v]
        out[f.name] = v
    return out


def load_settings(path) -> tuple[SimConfig, ScenarioParams]:
    try:
        return settings_from_dict(_read(path))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


def save_settings(path, config: SimConfig, params: ScenarioParams | None = None) -> None:
    _write(path, settings_to_dict(config, params))


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "seed": int(s.seed),
        "area_xyz": [float(a) for a in s.area],
        "channels": [int(c) for c in s.channels],
        "aps": [
            {"id": j, "x": float(p[0]), "y": float(p[1]), "z": float(p[2]), "channel": int(c)}
            for j, (p, c) in enumerate(zip(s.ap_pos, s.ap_channels))
        ],
        "stations": [
            {"id": i, "x": float(p[0]), "y": float(p[1]), "z": float(p[2]), "ap": int(a)}
            for i, (p, a) in enumerate(zip(s.sta_pos, s.assoc))
        ],
    }


def scenario_from_dict(d: dict) -> Scenario:
    aps = sorted(d.get("aps", []), key=lambda r: r["id"])
    stas = sorted(d.get("stations", []), key=lambda r: r["id"])
    if [r["id"] for r in aps] != list(range(len(aps))) or [r["id"] for r in stas] != list(range(len(stas))):
        raise ValueError("node ids must be 0..k-1 without gaps")
    return Scenario(
        area=tuple(d["area_xyz"]),
        ap_pos=np.array([[r["x"], r["y"], r["z"]] for r in aps], dtype=float).reshape(-1, 3),
        sta_pos=np.array([[r["x"], r["y"], r["z"]] for r in stas], dtype=float).reshape(-1, 3),
        channels=tuple(d["channels"]),
        ap_channels=tuple(r["channel"] for r in aps),
        assoc=tuple(r["ap"] for r in stas),
        seed=int(d.get("seed", 0)),
    )


def load_scenario(path) -> Scenario:
    try:
        return scenario_from_dict(_read(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: invalid scenario ({exc})") from exc


def save_scenario(path, scenario: Scenario) -> None:
    _write(path, scenario_to_dict(scenario))
