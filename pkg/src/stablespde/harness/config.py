"""Scenario files: YAML in, validated :class:`RunConfig` out."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..coefficients import diffusion_from_spec, drift_from_spec
from ..errors import ConfigError, StableSPDEError
from ..hilbert import GalerkinModel
from ..spde_solver import InitialLaw, Scenario, Scheme

TOP_KEYS = {"name", "seed", "alpha", "T", "model", "F", "G", "x0", "scheme", "p_report",
            "experiments", "verify"}
SCHEME_KEYS = {"n_cells", "noise_mode", "epsilon", "yosida_n", "series_budget"}


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not JSON serializable: {type(v).__name__}")


def config_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """A parsed scenario file.

    ``raw`` is the mapping as read (after defaults), ``scenario`` the
    validated model and ``experiments`` maps experiment names to their
    settings overrides, in file order.
    """

    name: str
    seed: int
    scenario: Scenario
    experiments: dict
    raw: dict
    source: str | None = None
    hash: str = field(default="")

    def build(self, **overrides) -> Scenario:
        """Rebuild the scenario with top-level or ``scheme.*`` overrides.

        ``dim`` resizes the model; profile-based coefficients are
        regenerated at the new size.  ``F`` and ``G`` replace the coefficient
        specs, ``x0`` and ``model`` are merged key by key.
        """
        raw = copy.deepcopy(self.raw)
        for key, val in overrides.items():
            if key == "dim":
                raw["model"]["dim"] = int(val)
                raw["model"].pop("eigenvalues", None)
                if isinstance(raw["x0"].get("mean"), list):
                    raw["x0"]["mean"] = "e1"
            elif key in SCHEME_KEYS:
                raw.setdefault("scheme", {})[key] = val
            elif key in ("F", "G"):
                raw[key] = dict(val)
            elif key in ("x0", "model"):
                raw[key] = {**raw.get(key, {}), **val}
            else:
                raw[key] = val
        return build_scenario(raw)


def _model(spec: dict, errors: list) -> GalerkinModel | None:
    kind = spec.get("type", "dirichlet_laplacian")
    try:
        if "eigenvalues" in spec:
            return GalerkinModel.from_eigenvalues(np.asarray(spec["eigenvalues"], float))
        if kind != "dirichlet_laplacian":
            errors.append(f"model.type: unknown '{kind}'")
            return None
        dim = spec.get("dim")
        if not isinstance(dim, int) or dim < 1:
            errors.append(f"model.dim: positive integer required, got {dim!r}")
            return None
        return GalerkinModel.dirichlet_laplacian(dim, float(spec.get("diffusivity", 1.0)))
    except StableSPDEError as exc:
        errors.append(f"model: {exc}")
        return None


def _initial(spec: dict, dim: int, errors: list) -> InitialLaw | None:
    mean = spec.get("mean", "zero")
    if mean == "zero":
        vec = np.zeros(dim)
    elif isinstance(mean, str) and mean.startswith("e") and mean[1:].isdigit():
        k = int(mean[1:])
        if not 1 <= k <= dim:
            errors.append(f"x0.mean: basis index {k} outside 1..{dim}")
            return None
        vec = np.zeros(dim)
        vec[k - 1] = 1.0
    else:
        vec = np.asarray(mean, float)
    vec = float(spec.get("amplitude", 1.0)) * vec
    try:
        return InitialLaw(vec, spec.get("kind", "deterministic"), float(spec.get("scale", 0.0)),
                          spec.get("alpha"))
    except ConfigError as exc:
        errors.extend(exc.errors)
        return None


def build_scenario(raw: dict) -> Scenario:
    """Validate ``raw`` and assemble the :class:`Scenario`; all field errors are collected."""
    errors = []
    unknown = set(raw) - TOP_KEYS
    if unknown:
        errors.append(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("alpha", "T", "model"):
        if key not in raw:
            errors.append(f"{key}: required")
    if errors:
        raise ConfigError(errors)
    model = _model(raw["model"], errors)
    if model is None:
        raise ConfigError(errors)
    d = model.dim
    F = G = None
    try:
        F = drift_from_spec(raw.get("F", {"type": "zero"}), d)
    except (ConfigError, KeyError, ValueError) as exc:
        errors.extend(getattr(exc, "errors", [f"F: {exc}"]))
    try:
        G = diffusion_from_spec(raw.get("G", {"type": "zero"}), d)
    except (ConfigError, KeyError, ValueError) as exc:
        errors.extend(getattr(exc, "errors", [f"G: {exc}"]))
    x0 = _initial(raw.get("x0", {}), d, errors)
    scheme_raw = raw.get("scheme", {})
    bad = set(scheme_raw) - SCHEME_KEYS
    if bad:
        errors.append(f"scheme: unknown keys {sorted(bad)}")
    scheme = None
    try:
        scheme = Scheme(**{k: v for k, v in scheme_raw.items() if k in SCHEME_KEYS})
    except (ConfigError, TypeError) as exc:
        errors.extend(getattr(exc, "errors", [f"scheme: {exc}"]))
    try:
        alpha, T = float(raw["alpha"]), float(raw["T"])
    except (TypeError, ValueError):
        errors.append("alpha, T: numbers required")
    if errors:
        raise ConfigError(errors)
    s = Scenario(alpha, T, model, F, G, x0, scheme, tuple(raw.get("p_report", (0.5, 1.0))),
                 str(raw.get("name", "scenario")))
    if raw.get("verify", True):
        s.verify()
    return s


def _experiments(spec, errors: list) -> dict:
    from .experiments import EXPERIMENTS

    if spec is None:
        return {}
    if isinstance(spec, list):
        spec = {name: {} for name in spec}
    if not isinstance(spec, dict):
        errors.append("experiments: list of names or mapping name -> settings required")
        return {}
    out = {}
    for name, settings in spec.items():
        if name not in EXPERIMENTS:
            errors.append(f"experiments.{name}: unknown experiment "
                          f"(known: {', '.join(EXPERIMENTS)})")
            continue
        settings = settings or {}
        allowed = EXPERIMENTS[name].defaults
        bad = set(settings) - set(allowed)
        if bad:
            errors.append(f"experiments.{name}: unknown settings {sorted(bad)}")
        out[name] = dict(settings)
    return out


def parse_config(raw: dict, source: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(["top level: mapping required"])
    errors = []
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errors.append(f"seed: non-negative integer required, got {seed!r}")
    experiments = _experiments(raw.get("experiments"), errors)
    try:
        scenario = build_scenario(raw)
    except ConfigError as exc:
        errors.extend(exc.errors)
        scenario = None
    if errors:
        raise ConfigError(errors)
    return RunConfig(str(raw.get("name", "scenario")), int(seed), scenario, experiments, raw,
                     source, config_hash(raw))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError([f"file: {path} not found"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"yaml: {exc}"]) from None
    return parse_config(raw, str(path))


def shipped_scenario(name: str = "heat") -> Path:
    return Path(__file__).resolve().parent.parent / "scenarios" / f"{name}.yaml"
