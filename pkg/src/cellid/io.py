"""Dataset CSV and parameter JSON formats.

Dataset files are UTF-8 text: ``#`` comment lines carrying metadata (the
``# dt=<seconds>`` line is mandatory), then the header
``time_s,current_a,voltage_v`` and one row per sample with six decimals.
Parameter files are JSON with unit-suffixed keys, sorted and indented, so a
rewrite of the same content is byte-identical.
"""

import json
import math
from pathlib import Path

import numpy as np

from .curves import EquilibriumCurve
from .ecm import EcmParameters
from .errors import InvalidArgumentError
from .protocols import CurrentProfile, Dataset, NoiseSpec
from .spm import CellParameters

HEADER = "time_s,current_a,voltage_v"
DECIMALS = 6

# CellParameters field -> key in parameter documents
SPM_KEYS = {
    "v_n": "v_n_m3",
    "v_p": "v_p_m3",
    "r_sn": "r_sn_m",
    "r_sp": "r_sp_m",
    "d_sn": "d_sn_m2_per_s",
    "d_sp": "d_sp_m2_per_s",
    "k_n": "k_n_m2p5_per_mol0p5_s",
    "k_p": "k_p_m2p5_per_mol0p5_s",
    "r_f": "r_f_ohm",
    "c_smax_n": "c_smax_n_mol_per_m3",
    "c_smax_p": "c_smax_p_mol_per_m3",
    "c_e_avg": "c_e_avg_mol_per_m3",
    "theta_n_0": "theta_n_0",
    "theta_n_100": "theta_n_100",
    "theta_p_0": "theta_p_0",
    "theta_p_100": "theta_p_100",
    "q_nom": "q_nom_ah",
    "temperature": "temperature_k",
    "n_nodes": "n_nodes",
}


def _fmt(x):
    return f"{x:.{DECIMALS}f}"


def write_dataset(path, dataset, meta=None):
    """Write ``dataset`` as CSV; ``meta`` adds ``# key=value`` lines (sorted)."""
    header = {
        "dt": repr(float(dataset.dt)),
        "initial_soc": repr(float(dataset.initial_soc)),
        "label": dataset.label,
        "provenance": dataset.provenance,
        "noise_sigma_v": repr(float(dataset.noise.sigma_v)),
        "noise_sigma_i": repr(float(dataset.noise.sigma_i)),
        "c_rate_base": repr(float(dataset.profile.c_rate_base)),
    }
    if dataset.profile.band is not None:
        header["band_c_rate"] = repr(float(dataset.profile.band))
    if dataset.seed is not None:
        header["seed"] = str(int(dataset.seed))
    for k, v in (meta or {}).items():
        if k in header:
            raise InvalidArgumentError(f"metadata key {k!r} is reserved")
        header[k] = str(v)
    for k, v in header.items():
        if "\n" in str(v) or "=" in k:
            raise InvalidArgumentError(f"metadata entry {k!r} cannot be written on one line")
    lines = [f"# dt={header.pop('dt')}"]
    lines += [f"# {k}={header[k]}" for k in sorted(header)]
    lines.append(HEADER)
    t = dataset.times
    lines += [f"{_fmt(a)},{_fmt(b)},{_fmt(c)}"
              for a, b, c in zip(t.tolist(), dataset.current.tolist(), dataset.voltage.tolist())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset_meta(path):
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = value.strip()
    return meta


def read_dataset(path, initial_soc=None):
    """Read a dataset CSV. Returns ``(dataset, extra_meta)``.

    ``initial_soc`` overrides (or supplies, for external files) the value in
    the metadata.
    """
    path = Path(path)
    meta = read_dataset_meta(path)
    if "dt" not in meta:
        raise InvalidArgumentError(f"{path}: missing '# dt=<seconds>' line")
    dt = float(meta.pop("dt"))
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                if line.strip() != HEADER:
                    raise InvalidArgumentError(f"{path}: expected header {HEADER!r}, got {line.strip()!r}")
                break
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, 3))
    if data.shape[1] != 3:
        raise InvalidArgumentError(f"{path}: expected 3 columns")
    t = data[:, 0]
    if t.size and np.max(np.abs(t - np.arange(t.size) * dt)) > 10 ** -DECIMALS:
        raise InvalidArgumentError(f"{path}: time column is not uniform at dt={dt}")
    soc = meta.pop("initial_soc", None)
    if initial_soc is None:
        if soc is None:
            raise InvalidArgumentError(f"{path}: initial_soc not in file, pass it explicitly")
        initial_soc = float(soc)
    band = meta.pop("band_c_rate", None)
    band = None if band is None else float(band)
    profile = CurrentProfile(dt, data[:, 1], meta.pop("label", path.stem),
                             float(meta.pop("c_rate_base", "1.0")), band)
    noise = NoiseSpec(float(meta.pop("noise_sigma_v", "0")), float(meta.pop("noise_sigma_i", "0")))
    seed = meta.pop("seed", None)
    ds = Dataset(profile, data[:, 2], float(initial_soc), noise,
                 meta.pop("provenance", "external-file"), None if seed is None else int(seed))
    return ds, meta


def _clean(obj):
    # numpy scalars/arrays -> plain JSON types; non-finite floats -> None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(doc):
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, doc):
    Path(path).write_text(dumps(doc), encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def cell_to_dict(params):
    d = {key: getattr(params, field) for field, key in SPM_KEYS.items()}
    d["anode_curve"] = params.anode.to_dict()
    d["cathode_curve"] = params.cathode.to_dict()
    return d


def cell_from_dict(d):
    missing = [k for k in list(SPM_KEYS.values()) + ["anode_curve", "cathode_curve"] if k not in d]
    if missing:
        raise InvalidArgumentError(f"parameter document lacks {missing}")
    kw = {field: d[key] for field, key in SPM_KEYS.items()}
    kw["n_nodes"] = int(kw["n_nodes"])
    return CellParameters(**kw, anode=EquilibriumCurve.from_dict(d["anode_curve"]),
                          cathode=EquilibriumCurve.from_dict(d["cathode_curve"]))


def model_to_dict(params):
    """Tagged parameter document for either model family."""
    if isinstance(params, EcmParameters):
        return {"model": params.variant, "parameters": params.to_dict()}
    return {"model": "spm", "parameters": cell_to_dict(params)}


def model_from_dict(d):
    kind = d.get("model")
    if kind == "spm":
        return cell_from_dict(d["parameters"])
    if kind in ("ecm", "ecm+"):
        return EcmParameters.from_dict(d["parameters"])
    raise InvalidArgumentError(f"unknown model kind {kind!r}")
