"""Map-spec JSON documents (schema in docs/mapspec.md)."""

from __future__ import annotations

import json
import logging
from typing import Any, Mapping

from .annulus_maps import Composition, HamiltonianBump, LiftedMap, RadialShear, RigidRotation, TwistProfile
from .config import IntegratorSettings
from .errors import MapSpecError
from .profiles import profile_from_spec

LOGGER = logging.getLogger(__name__)


def map_from_spec(spec: Any, integrator: IntegratorSettings = IntegratorSettings()) -> LiftedMap:
    if isinstance(spec, list):
        return Composition(tuple(map_from_spec(item, integrator) for item in spec))
    if not isinstance(spec, Mapping):
        raise MapSpecError(f"map spec must be an object or a list, got {type(spec).__name__}")
    if "compose" in spec:
        return map_from_spec(list(spec["compose"]), integrator)
    kind = spec.get("kind")
    try:
        if kind == "rigid":
            return RigidRotation(float(spec["theta0"]))
        if kind == "twist":
            return TwistProfile(profile_from_spec(spec["profile"]))
        if kind == "radial_shear":
            return RadialShear(profile_from_spec(spec["profile"]))
        if kind == "hamiltonian_bump":
            cx, cy = spec["center"]
            return HamiltonianBump(
                center=(float(cx), float(cy)),
                radius=float(spec["radius"]),
                strength=float(spec["strength"]),
                time=float(spec.get("time", 1.0)),
                step=float(spec.get("step", integrator.step)),
                solver_tol=integrator.solver_tol,
                max_iter=integrator.max_iter,
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise MapSpecError(f"invalid {kind!r} map: {exc}") from exc
    raise MapSpecError(f"unknown map kind {kind!r}")


def map_to_spec(m: LiftedMap) -> Any:
    spec = m.to_spec()
    if isinstance(m, Composition):
        return spec
    return {"compose": [spec]}


def load_map_spec(path: str, integrator: IntegratorSettings = IntegratorSettings()) -> LiftedMap:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise MapSpecError(f"cannot read map spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MapSpecError(f"map spec {path} is not valid JSON: {exc}") from exc
    m = map_from_spec(data, integrator)
    LOGGER.debug("Loaded %s map from %s", m.kind, path)
    return m


def dump_map_spec(m: LiftedMap, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(map_to_spec(m), f, indent=2, sort_keys=True)
        f.write("\n")
