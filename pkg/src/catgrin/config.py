"""Run configuration: parsing, validation, and experiment construction.

Configs are TOML or JSON with nested sections.  Complex numbers are
written as [re, im] pairs (a bare number means a real value); matrices
are nested lists of such entries.  Amplitudes and operator matrices are
interpreted directly in the (L,+), (L,-), (R,+), (R,-) storage basis;
the splitter form is given in the lab H/V frame and rotated onto the
configured axis.

Every parse failure raises ConfigError with the dotted path of the
offending field.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import CatgrinError, ConfigError
from .hilbert import (
    BlochAxis,
    PureState,
    SystemOperator,
    make_postselection,
    make_preparation,
)
from .meters import GaussianMeter
from .sampler import SamplerConfig
from .statistics import Experiment


def load_config(path) -> dict:
    """Read a TOML or JSON config file into a plain dict."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        if p.suffix.lower() == ".json":
            with open(p, "rb") as fh:
                data = json.load(fh)
        elif p.suffix.lower() == ".toml":
            with open(p, "rb") as fh:
                data = tomllib.load(fh)
        else:
            raise ConfigError(f"config file must end in .toml or .json: {p}")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{p}: cannot parse: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be a table/object")
    return data


def _complex(value, path: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(float(value), 0.0)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{path}: expected a number or [re, im] pair, got {value!r}")


def _complex_vector(value, path: str, n: int) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{path}: expected a list of {n} entries")
    return np.array([_complex(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _complex_matrix(value, path: str, n: int) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"{path}: expected {n} rows")
    return np.array([_complex_vector(row, f"{path}[{i}]", n) for i, row in enumerate(value)])


def _real(value, path: str, minimum=None) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {v}")
    return v


def _section(cfg: dict, name: str, required: bool = True) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"{name}: section missing")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a table/object")
    return sec


def _one_of(sec: dict, path: str, keys: tuple[str, ...]) -> str:
    present = [k for k in keys if k in sec]
    if len(present) != 1:
        raise ConfigError(f"{path}: give exactly one of {'/'.join(keys)}")
    return present[0]


def _parse_axis(cfg: dict) -> BlochAxis:
    sec = _section(cfg, "axis", required=False)
    theta = _real(sec.get("theta", 0.0), "axis.theta")
    phi = _real(sec.get("phi", 0.0), "axis.phi")
    return BlochAxis.from_angles(theta, phi)


def _parse_splitter(sec: dict, path: str, axis: BlochAxis, role: str):
    amp_keys = ("r1", "t1") if role == "preparation" else ("r2", "t2")
    rot_keys = ("v1", "v2") if role == "preparation" else ("v3", "v4")
    vals = []
    for key in amp_keys:
        if key not in sec:
            raise ConfigError(f"{path}.{key}: missing")
        vals.append(_complex(sec[key], f"{path}.{key}"))
    rots = []
    for key in rot_keys:
        if key not in sec:
            raise ConfigError(f"{path}.{key}: missing")
        rots.append(_complex_matrix(sec[key], f"{path}.{key}", 2))
    build = make_preparation if role == "preparation" else make_postselection
    return build(vals[0], vals[1], rots[0], rots[1], axis=axis)


def _parse_preparation(cfg: dict, axis: BlochAxis) -> SystemOperator:
    sec = _section(cfg, "preparation")
    kind = _one_of(sec, "preparation", ("amplitudes", "density", "splitter"))
    try:
        if kind == "amplitudes":
            vec = _complex_vector(sec[kind], "preparation.amplitudes", 4)
            return PureState(vec).density()
        if kind == "density":
            return SystemOperator(_complex_matrix(sec[kind], "preparation.density", 4))
        splitter = sec[kind]
        if not isinstance(splitter, dict):
            raise ConfigError("preparation.splitter: expected a table/object")
        return _parse_splitter(splitter, "preparation.splitter", axis, "preparation").density()
    except CatgrinError:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        raise ConfigError(f"preparation: {exc}") from exc


def _parse_postselection(cfg: dict, axis: BlochAxis) -> SystemOperator:
    sec = _section(cfg, "postselection")
    kind = _one_of(sec, "postselection", ("amplitudes", "povm", "splitter"))
    if kind == "amplitudes":
        vec = _complex_vector(sec[kind], "postselection.amplitudes", 4)
        return PureState(vec).density()
    if kind == "povm":
        return SystemOperator(_complex_matrix(sec[kind], "postselection.povm", 4))
    splitter = sec[kind]
    if not isinstance(splitter, dict):
        raise ConfigError("postselection.splitter: expected a table/object")
    return _parse_splitter(
        splitter, "postselection.splitter", axis, "postselection"
    ).density()


def _parse_meter(sec: dict, path: str) -> GaussianMeter:
    if not isinstance(sec, dict):
        raise ConfigError(f"{path}: expected a table/object with epsilon, epsilon_tilde")
    if "epsilon" not in sec:
        raise ConfigError(f"{path}.epsilon: missing")
    eps = _real(sec["epsilon"], f"{path}.epsilon")
    if "epsilon_tilde" not in sec:
        raise ConfigError(f"{path}.epsilon_tilde: missing")
    epst = _real(sec["epsilon_tilde"], f"{path}.epsilon_tilde")
    try:
        return GaussianMeter(epsilon=eps, epsilon_tilde=epst)
    except CatgrinError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def coupling_metadata(cfg: dict) -> dict[str, float | None]:
    """Raw coupling constants a, b, if the config records them.

    Readouts are normalized (x = X/a, y = Y/b) throughout the engine;
    the couplings are carried as metadata only.
    """
    meters = _section(cfg, "meters", required=False)
    out: dict[str, float | None] = {}
    for name in ("x", "y"):
        sec = meters.get(name)
        value = sec.get("coupling") if isinstance(sec, dict) else None
        if value is not None:
            value = _real(value, f"meters.{name}.coupling")
            if value <= 0:
                raise ConfigError(f"meters.{name}.coupling: must be positive")
        out[name] = value
    return out


def _parse_sampler(cfg: dict) -> SamplerConfig | None:
    sec = _section(cfg, "sampler", required=False)
    if not sec:
        return None
    if "n_trials" not in sec:
        raise ConfigError("sampler.n_trials: missing")
    n = sec["n_trials"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"sampler.n_trials: expected a positive integer, got {n!r}")
    seed = sec.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"sampler.seed: expected a nonnegative integer, got {seed!r}")
    noise = None
    if "noise" in sec:
        nsec = sec["noise"]
        if not isinstance(nsec, dict):
            raise ConfigError("sampler.noise: expected a table/object")
        noise = (
            _real(nsec.get("nu_x", 0.0), "sampler.noise.nu_x", minimum=0.0),
            _real(nsec.get("nu_y", 0.0), "sampler.noise.nu_y", minimum=0.0),
        )
    try:
        return SamplerConfig(n_trials=n, seed=seed, noise=noise)
    except CatgrinError as exc:
        raise ConfigError(f"sampler: {exc}") from exc


def build_experiment(cfg: dict) -> tuple[Experiment, SamplerConfig | None]:
    """Construct the experiment (and sampler settings) a config describes."""
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a table/object")
    axis = _parse_axis(cfg)
    rho = _parse_preparation(cfg, axis)
    e_f = _parse_postselection(cfg, axis)
    meters = _section(cfg, "meters")
    if "x" not in meters or "y" not in meters:
        raise ConfigError("meters: need both meters.x and meters.y")
    meter_x = _parse_meter(meters["x"], "meters.x")
    meter_y = _parse_meter(meters["y"], "meters.y")
    sampler_cfg = _parse_sampler(cfg)
    try:
        exp = Experiment(
            rho_i=rho, e_f=e_f, axis=axis, meter_x=meter_x, meter_y=meter_y
        )
    except CatgrinError:
        raise
    return exp, sampler_cfg


def _matrix_to_pairs(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def echo_config(
    exp: Experiment,
    sampler_cfg: SamplerConfig | None,
    couplings: dict[str, float | None] | None = None,
) -> dict[str, Any]:
    """Canonical config dict that re-parses to exactly this experiment.

    States are echoed as resolved operator matrices, so the echo is
    independent of the input form (amplitudes / splitter / matrix).
    """
    n = exp.axis.n
    echo: dict[str, Any] = {
        "preparation": {"density": _matrix_to_pairs(exp.rho_i.entries)},
        "postselection": {"povm": _matrix_to_pairs(exp.e_f.entries)},
        "axis": {
            "theta": math.acos(min(1.0, max(-1.0, float(n[2])))),
            "phi": math.atan2(float(n[1]), float(n[0])),
        },
        "meters": {
            "x": {
                "epsilon": exp.meter_x.epsilon,
                "epsilon_tilde": exp.meter_x.epsilon_tilde,
            },
            "y": {
                "epsilon": exp.meter_y.epsilon,
                "epsilon_tilde": exp.meter_y.epsilon_tilde,
            },
        },
    }
    if couplings:
        for name in ("x", "y"):
            if couplings.get(name) is not None:
                echo["meters"][name]["coupling"] = couplings[name]
    if sampler_cfg is not None:
        echo["sampler"] = {
            "n_trials": sampler_cfg.n_trials,
            "seed": sampler_cfg.seed,
        }
        if sampler_cfg.noise is not None:
            echo["sampler"]["noise"] = {
                "nu_x": sampler_cfg.noise[0],
                "nu_y": sampler_cfg.noise[1],
            }
    return echo


def set_by_path(cfg: dict, dotted: str, value) -> None:
    """Assign into a nested config dict by dotted path (ints index lists)."""
    parts = dotted.split(".")
    if not all(parts):
        raise ConfigError(f"sweep parameter path {dotted!r} is malformed")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        key: Any = int(part) if part.lstrip("-").isdigit() else part
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError) as exc:
            raise ConfigError(
                f"sweep parameter path {dotted!r}: no element {'.'.join(parts[: i + 1])!r}"
            ) from exc
    last: Any = parts[-1]
    if isinstance(last, str) and last.lstrip("-").isdigit():
        last = int(last)
    try:
        node[last] = value
    except (IndexError, TypeError) as exc:
        raise ConfigError(f"sweep parameter path {dotted!r}: cannot assign") from exc
