"""Run configuration: strict schema, defaults, environment overrides and hashing.

Unknown keys are rejected at every level. A configuration file is a complete
document; sections it omits take the schema defaults, except ``truth`` which
has no schema default (the built-in configuration returned by
:func:`default_config` fills it from :mod:`cellid.truth`).

Environment variables ``CELLID_<SECTION>__<KEY>=<value>`` override single
entries (double underscore separates nesting levels; values are parsed as
JSON when possible, else taken as strings). ``CELLID_SEED=7`` sets the seed.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import truth as truth_mod
from .errors import CellIdError
from .optimize import SolverOptions
from .protocols import IDENT_WN_SPEC, VALIDATION_SPECS

ENV_PREFIX = "CELLID_"
# Fixed factors applied to the truth to form the default kinetics start (+-30 %).
KINETICS_START_FACTORS = (1.3, 0.7, 1.3, 0.7, 0.7, 1.3, 1.3, 0.7, 1.3)


class ConfigError(CellIdError):
    """Invalid, incomplete or unreadable configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CellConfig(_Strict):
    q_nom_ah: float = Field(truth_mod.Q_NOM_AH, gt=0)
    c_smax_n_mol_per_m3: float = Field(truth_mod.C_SMAX_N, gt=0)
    c_smax_p_mol_per_m3: float = Field(truth_mod.C_SMAX_P, gt=0)
    c_e_avg_mol_per_m3: float = Field(truth_mod.C_E_AVG, gt=0)
    temperature_k: float = Field(truth_mod.TEMPERATURE, gt=0)
    n_nodes: int = Field(20, ge=4, le=200)


class CurvesConfig(_Strict):
    anode_literature: tuple[float, float, float, float, float, float, float, float, float] = \
        truth_mod.ANODE_LITERATURE
    cathode_literature: tuple[float, float, float, float, float, float, float] = \
        truth_mod.CATHODE_LITERATURE


class Kinetics(_Strict):
    v_n_m3: float = Field(gt=0)
    v_p_m3: float = Field(gt=0)
    r_sn_m: float = Field(gt=0)
    r_sp_m: float = Field(gt=0)
    d_sn_m2_per_s: float = Field(gt=0)
    d_sp_m2_per_s: float = Field(gt=0)
    k_n_m2p5_per_mol0p5_s: float = Field(gt=0)
    k_p_m2p5_per_mol0p5_s: float = Field(gt=0)
    r_f_ohm: float = Field(ge=0)

    def as_vector(self):
        return np.array(list(self.model_dump().values()), dtype=float)


class Limits(_Strict):
    theta_n_0: float = Field(gt=0, lt=1)
    theta_n_100: float = Field(gt=0, lt=1)
    theta_p_0: float = Field(gt=0, lt=1)
    theta_p_100: float = Field(gt=0, lt=1)


class Bump(_Strict):
    amplitude_v: float
    center_soc: float
    width_soc: float = Field(gt=0)


class Tail(_Strict):
    at_full_v: float
    rate: float = Field(ge=0, le=40)


class EcmTruth(_Strict):
    r0_base_ohm: float
    r0_amp_ohm: float
    r0_rate: float
    r1_ohm: float = Field(gt=0)
    c1_f: float = Field(gt=0)
    r2_ohm: float = Field(gt=0)
    c2_f: float = Field(gt=0)
    ocv_points: int = Field(41, ge=2)


class TruthConfig(_Strict):
    model: Literal["spm", "ecm"] = "spm"
    id: str = "truth"
    kinetics: Kinetics
    limits: Limits
    anode_bump: Bump | None = None
    cathode_tail: Tail | None = None
    ecm: EcmTruth | None = None


class PdtConfig(_Strict):
    pulse_c_rate: float = Field(1.0, gt=0)
    pulse_soc_step: float = Field(0.05, gt=0, le=1)
    rest_duration_s: float = Field(1800.0, ge=600)
    initial_rest_s: float = Field(60.0, ge=0)
    initial_soc: float = Field(1.0, ge=0, le=1)


class ConstantConfig(_Strict):
    c_rate: float = Field(1.0, gt=0)
    soc_span: float = Field(1.0, gt=0, le=1)
    initial_soc: float = Field(1.0, ge=0, le=1)


class NoiseProfile(_Strict):
    mean_c_rate: float = Field(ge=0)
    std_c_rate: float = Field(ge=0)
    peak_c_rate: float = Field(gt=0)
    duration_s: float = Field(gt=0)
    seed: int = Field(ge=0)
    initial_soc: float = Field(0.95, ge=0, le=1)


def _noise_profile(spec):
    mean, std, peak, duration, seed = spec
    return NoiseProfile(mean_c_rate=mean, std_c_rate=std, peak_c_rate=peak, duration_s=duration,
                        seed=seed)


class ProtocolsConfig(_Strict):
    dt_s: float = Field(1.0, gt=0)
    bandwidth_hz: float = Field(0.02, gt=0)
    pdt: PdtConfig = PdtConfig()
    constant: ConstantConfig = ConstantConfig()
    wn: NoiseProfile = _noise_profile(IDENT_WN_SPEC)
    validation: dict[str, NoiseProfile] = {k: _noise_profile(v) for k, v in VALIDATION_SPECS.items()}


class NoiseConfig(_Strict):
    sigma_v_v: float = Field(0.005, ge=0)
    sigma_i_a: float = Field(0.0, ge=0)


class SolverConfig(_Strict):
    gtol: float = Field(1e-8, gt=0)
    xtol: float = Field(1e-10, gt=0)
    ftol: float = Field(1e-15, ge=0)
    max_iter: int = Field(400, ge=1)
    fd_step: float = Field(1e-6, gt=0)
    lambda0: float = Field(1e-3, gt=0)

    def options(self, **changes):
        d = self.model_dump()
        d.update(changes)
        return SolverOptions(**d)


class EquilibriumConfig(_Strict):
    low_zone: float = Field(0.4, gt=0, lt=1)
    high_zone: float = Field(0.8, gt=0, lt=1)
    n_starts: int = Field(8, ge=1)


class KineticsFitConfig(_Strict):
    x0: Kinetics | None = None
    n_starts: int = Field(4, ge=1)
    bound_factor: float = Field(5.0, gt=1)
    start_spread: float = Field(0.3, gt=0, lt=1)
    ftol: float = Field(1e-9, ge=0)
    max_iter: int = Field(100, ge=1)
    datasets: tuple[str, ...] = ("1c", "wn")


class EcmFitConfig(_Strict):
    edge_fraction: float = Field(0.5, gt=0, le=1)
    ftol: float = Field(1e-9, ge=0)
    max_iter: int = Field(100, ge=1)
    datasets: tuple[str, ...] = ("pdt", "wn")


class IdentificationConfig(_Strict):
    equilibrium: EquilibriumConfig = EquilibriumConfig()
    kinetics: KineticsFitConfig = KineticsFitConfig()
    ecm: EcmFitConfig = EcmFitConfig()


class RunConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    cell: CellConfig = CellConfig()
    curves: CurvesConfig = CurvesConfig()
    truth: TruthConfig | None = None
    protocols: ProtocolsConfig = ProtocolsConfig()
    noise: NoiseConfig = NoiseConfig()
    solver: SolverConfig = SolverConfig()
    identification: IdentificationConfig = IdentificationConfig()

    def to_dict(self):
        return self.model_dump(mode="json")

    def hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _kinetics_from_truth():
    k = truth_mod.true_kinetics()
    return dict(v_n_m3=k["v_n"], v_p_m3=k["v_p"], r_sn_m=k["r_sn"], r_sp_m=k["r_sp"],
                d_sn_m2_per_s=k["d_sn"], d_sp_m2_per_s=k["d_sp"], k_n_m2p5_per_mol0p5_s=k["k_n"],
                k_p_m2p5_per_mol0p5_s=k["k_p"], r_f_ohm=k["r_f"])


def default_config_dict():
    """Built-in configuration: the synthetic cell of :mod:`cellid.truth`."""
    kin = _kinetics_from_truth()
    x0 = {k: v * f for (k, v), f in zip(kin.items(), KINETICS_START_FACTORS)}
    r0 = truth_mod.TRUE_ECM["r0"]
    truth = dict(
        model="spm",
        id="truth",
        kinetics=kin,
        limits=dict(truth_mod.TRUE_LIMITS),
        anode_bump=dict(amplitude_v=truth_mod.BUMP_AMPLITUDE_V, center_soc=truth_mod.BUMP_CENTER_SOC,
                        width_soc=truth_mod.BUMP_WIDTH_SOC),
        cathode_tail=dict(at_full_v=truth_mod.TAIL_AT_FULL_V, rate=truth_mod.TAIL_RATE),
        ecm=dict(r0_base_ohm=r0[0], r0_amp_ohm=r0[1], r0_rate=r0[2],
                 r1_ohm=truth_mod.TRUE_ECM["r1"], c1_f=truth_mod.TRUE_ECM["c1"],
                 r2_ohm=truth_mod.TRUE_ECM["r2"], c2_f=truth_mod.TRUE_ECM["c2"]),
    )
    return {"truth": truth, "identification": {"kinetics": {"x0": x0}}}


def _parse_env_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_env(doc, environ=None):
    """Return a copy of ``doc`` with ``CELLID_*`` overrides applied."""
    environ = os.environ if environ is None else environ
    doc = json.loads(json.dumps(doc))
    for name in sorted(environ):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        if not all(path):
            raise ConfigError(f"malformed override variable {name}")
        node = doc
        for key in path[:-1]:
            child = node.get(key)
            if child is None:
                child = node[key] = {}
            elif not isinstance(child, dict):
                raise ConfigError(f"{name}: config key {key!r} is not a section")
            node = child
        node[path[-1]] = _parse_env_value(environ[name])
    return doc


def _describe(exc):
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def load_config(path=None, seed=None, environ=None):
    """Resolve the run configuration.

    ``path=None`` starts from the built-in document; otherwise the JSON file
    is read as a complete document. Environment overrides come next and an
    explicit ``seed`` last.
    """
    if path is None:
        doc = default_config_dict()
    else:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    doc = apply_env(doc, environ)
    if seed is not None:
        doc["seed"] = seed
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_describe(exc)}") from exc


def default_config():
    return RunConfig.model_validate(default_config_dict())


def require(config, dotted):
    """Return the config entry at ``dotted`` or raise ConfigError naming it."""
    node = config
    for key in dotted.split("."):
        node = getattr(node, key, None)
        if node is None:
            raise ConfigError(f"missing config key: {dotted}")
    return node
