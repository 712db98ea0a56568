"""Run configuration: a single JSON document with a versioned schema tag.

Example
-------
.. code-block:: json

    {"schema": "trajdist.run/1", "model": "qubit",
     "parameters": {"omega": 1.0, "gamma": 0.2},
     "times": {"t_max": 5.0, "samples": 1},
     "grid": {"bins": 2000},
     "monte_carlo": {"n_traj": 100000, "base_seed": 1}}
"""

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import MonitoredSystem
from .models import HoppingParams, QubitParams, hopping_system, qubit_system, ring_size

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "load_config", "save_config"]

SCHEMA = "trajdist.run/1"
MODELS = ("qubit", "hopping", "custom-matrix")


class ConfigError(ValueError):
    pass


def _positive(name, value, allow_zero=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigError(f"{name} must be finite and {bound}, got {value!r}")
    return int(value) if integer else float(value)


@dataclass
class RunConfig:
    """Validated run description. Build it with :meth:`from_dict`."""

    model: str
    parameters: dict
    times: dict
    grid: dict = field(default_factory=dict)
    monte_carlo: dict = field(default_factory=dict)
    volterra: dict = field(default_factory=dict)
    lindblad: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    schema: str = SCHEMA

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        raw = copy.deepcopy(raw)
        schema = raw.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise ConfigError(f"unsupported schema {schema!r}; expected {SCHEMA!r}")
        known = {"model", "parameters", "times", "grid", "monte_carlo", "volterra", "lindblad", "compare", "output"}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown configuration keys: {sorted(extra)}")
        for key in ("model", "parameters", "times"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        for key in known - {"model"}:
            if key in raw and not isinstance(raw[key], dict):
                raise ConfigError(f"{key} must be an object")
        cfg = cls(schema=schema, **raw)
        cfg._validate()
        return cfg

    def to_dict(self):
        d = asdict(self)
        return {"schema": d.pop("schema"), **d}

    def digest(self):
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    # -- validation -------------------------------------------------------

    def _validate(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        p = self.parameters
        allowed = {
            "qubit": {"omega", "J", "gamma"},
            "hopping": {"omega", "gamma", "ring_size"},
            "custom-matrix": {"hamiltonian", "hamiltonian_imag", "observable", "gamma", "initial_index"},
        }[self.model]
        extra = set(p) - allowed
        if extra:
            raise ConfigError(f"unknown parameters for {self.model}: {sorted(extra)}")
        _positive("parameters.gamma", p.get("gamma", None), allow_zero=True)
        if self.model == "qubit":
            if ("omega" in p) == ("J" in p):
                raise ConfigError("qubit needs exactly one of parameters.omega or parameters.J")
            _positive("parameters.omega" if "omega" in p else "parameters.J", p.get("omega", p.get("J")))
        elif self.model == "hopping":
            _positive("parameters.omega", p.get("omega"))
            if "ring_size" in p:
                size = _positive("parameters.ring_size", p["ring_size"], integer=True)
                if size < 3 or size % 2 == 0:
                    raise ConfigError("parameters.ring_size must be odd and >= 3")
        else:
            for key in ("hamiltonian", "observable"):
                if key not in p:
                    raise ConfigError(f"custom-matrix needs parameters.{key}")
            try:
                self.system()
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid custom system: {exc}") from exc

        t = self.times
        if set(t) - {"t_max", "samples", "values"}:
            raise ConfigError(f"unknown time keys: {sorted(set(t) - {'t_max', 'samples', 'values'})}")
        if "values" in t:
            vals = t["values"]
            if not isinstance(vals, list) or not vals:
                raise ConfigError("times.values must be a non-empty list")
            for v in vals:
                _positive("times.values[]", v, allow_zero=True)
        else:
            if "t_max" not in t:
                raise ConfigError("times needs t_max (or an explicit values list)")
            _positive("times.t_max", t["t_max"], allow_zero=True)
            samples = _positive("times.samples", t.get("samples", 1), integer=True)
            if samples > 1 and t["t_max"] == 0:
                raise ConfigError("several samples need t_max > 0")

        g = self.grid
        if set(g) - {"bins", "lo", "hi"}:
            raise ConfigError(f"unknown grid keys: {sorted(set(g) - {'bins', 'lo', 'hi'})}")
        if "bins" in g:
            _positive("grid.bins", g["bins"], integer=True)
        if ("lo" in g) != ("hi" in g):
            raise ConfigError("grid.lo and grid.hi go together")
        if "lo" in g:
            for k in ("lo", "hi"):
                if isinstance(g[k], bool) or not isinstance(g[k], (int, float)) or not math.isfinite(g[k]):
                    raise ConfigError(f"grid.{k} must be a finite number")
            if not g["hi"] > g["lo"]:
                raise ConfigError("grid.hi must exceed grid.lo")

        mc = self.monte_carlo
        if set(mc) - {"n_traj", "base_seed", "workers", "dump_trajectories"}:
            raise ConfigError(f"unknown monte_carlo keys: {sorted(set(mc) - {'n_traj', 'base_seed', 'workers', 'dump_trajectories'})}")
        if "n_traj" in mc:
            _positive("monte_carlo.n_traj", mc["n_traj"], integer=True)
        if "base_seed" in mc:
            seed = _positive("monte_carlo.base_seed", mc["base_seed"], allow_zero=True, integer=True)
            if seed >= 2**64:
                raise ConfigError("monte_carlo.base_seed must fit in 64 bits")
        if "workers" in mc:
            _positive("monte_carlo.workers", mc["workers"], integer=True)

        if set(self.volterra) - {"h"}:
            raise ConfigError("volterra accepts only h")
        h = _positive("volterra.h", self.volterra.get("h", 1e-3))
        if h * self.gamma >= 1:
            raise ConfigError(f"volterra.h * gamma = {h * self.gamma:.3g} must be below 1")
        if set(self.lindblad) - {"dt"}:
            raise ConfigError("lindblad accepts only dt")
        if "dt" in self.lindblad:
            _positive("lindblad.dt", self.lindblad["dt"])
        if set(self.compare) - {"against", "ks_max", "sigma_max", "lindblad_tol"}:
            raise ConfigError("unknown compare keys")
        if self.compare.get("against", "montecarlo") not in ("montecarlo", "self"):
            raise ConfigError("compare.against must be 'montecarlo' or 'self'")
        for k in ("ks_max", "sigma_max", "lindblad_tol"):
            if k in self.compare:
                _positive(f"compare.{k}", self.compare[k])
        if set(self.output) - {"prefix"}:
            raise ConfigError("output accepts only prefix")

    # -- derived quantities ----------------------------------------------

    @property
    def gamma(self):
        return float(self.parameters["gamma"])

    def time_values(self):
        t = self.times
        if "values" in t:
            return np.array(sorted(float(v) for v in t["values"]))
        n = int(t.get("samples", 1))
        if n == 1:
            return np.array([float(t["t_max"])])
        return np.linspace(0.0, float(t["t_max"]), n)

    @property
    def h(self):
        return float(self.volterra.get("h", 1e-3))

    @property
    def n_traj(self):
        return int(self.monte_carlo.get("n_traj", 10000))

    @property
    def base_seed(self):
        return int(self.monte_carlo.get("base_seed", 0))

    @property
    def prefix(self):
        return str(self.output.get("prefix", self.model))

    def model_params(self):
        """QubitParams or HoppingParams for the two built-in models."""
        p = self.parameters
        if self.model == "qubit":
            omega = float(p["omega"]) if "omega" in p else 2.0 * float(p["J"])
            return QubitParams(omega, self.gamma)
        if self.model == "hopping":
            return HoppingParams(float(p["omega"]), self.gamma)
        raise ConfigError("custom-matrix runs have no closed-form parameters")

    def system(self):
        p = self.parameters
        if self.model == "qubit":
            return qubit_system(self.model_params())
        if self.model == "hopping":
            params = self.model_params()
            size = int(p.get("ring_size", ring_size(params, float(self.time_values().max()))))
            return hopping_system(params, size)
        h = np.asarray(p["hamiltonian"], dtype=float)
        if "hamiltonian_imag" in p:
            h = h + 1j * np.asarray(p["hamiltonian_imag"], dtype=float)
        return MonitoredSystem(h, p["observable"], self.gamma, int(p.get("initial_index", 0)))

    def edges(self, system):
        from .analytic import observable_edges, uniform_edges

        g = self.grid
        if "lo" in g:
            return uniform_edges(float(g["lo"]), float(g["hi"]), int(g.get("bins", 400)))
        return observable_edges(system, int(g.get("bins", 400)))


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return RunConfig.from_dict(raw)


def save_config(config, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
