"""``cellid`` command line: gen, simulate, identify, validate, report.

Exit codes: 0 ok, 2 configuration, 3 simulation, 4 missing dependency
artifact, 5 optimizer failure, 1 anything else.
"""

import argparse
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, default_config_dict, load_config, require
from .curves import ANODE, CATHODE, EXPONENTIALS, GAUSSIANS, CorrectionTerm, EquilibriumCurve
from .ecm import EcmParameters, OcvMap, SocFunction
from .errors import (CellIdError, CurveDomainError, InsufficientDataError, InvalidArgumentError,
                     NumericalError, OptimizerError,
                     ProtocolMismatchError, RangeError, SaturationError)
from .ident.ecm_fit import ECM, ECM_PLUS, EcmStatic, ecm_static_characterize, fit_ecm_dynamics
from .ident.equilibrium import LIMIT_NAMES, identify_equilibrium
from .ident.kinetics import fit_kinetics
from .ident.metrics import validate
from .protocols import (Dataset, NoiseSpec, gen_constant, gen_noise_discharge, gen_pdt, simulate_model,
                        synthesize_dataset)
from .spm import CellParameters, simulate

log = logging.getLogger("cellid")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_SIM, EXIT_DEPENDENCY, EXIT_OPTIMIZER = 0, 1, 2, 3, 4, 5

IDENT_PROTOCOLS = ("pdt", "1c", "wn")
MODEL_FILES = {"spm": "spm_params.json", "ecm": "ecm_params.json", "ecm+": "ecm_plus_params.json"}
EQUILIBRIUM_FILE = "equilibrium.json"
ECM_STATIC_FILE = "ecm_static.json"
PHASES = ("equilibrium", "kinetics", "ecm-static", "ecm-dynamics")


class DependencyError(CellIdError):
    """A required input artifact is missing."""


# ---------------------------------------------------------------- building blocks

def literature_curves(config):
    return (EquilibriumCurve(ANODE, config.curves.anode_literature),
            EquilibriumCurve(CATHODE, config.curves.cathode_literature))


def _cell(config, kinetics, limits, anode, cathode):
    c = config.cell
    return CellParameters(
        v_n=kinetics.v_n_m3, v_p=kinetics.v_p_m3, r_sn=kinetics.r_sn_m, r_sp=kinetics.r_sp_m,
        d_sn=kinetics.d_sn_m2_per_s, d_sp=kinetics.d_sp_m2_per_s,
        k_n=kinetics.k_n_m2p5_per_mol0p5_s, k_p=kinetics.k_p_m2p5_per_mol0p5_s, r_f=kinetics.r_f_ohm,
        c_smax_n=c.c_smax_n_mol_per_m3, c_smax_p=c.c_smax_p_mol_per_m3, c_e_avg=c.c_e_avg_mol_per_m3,
        theta_n_0=limits["theta_n_0"], theta_n_100=limits["theta_n_100"],
        theta_p_0=limits["theta_p_0"], theta_p_100=limits["theta_p_100"],
        q_nom=c.q_nom_ah, anode=anode, cathode=cathode, temperature=c.temperature_k, n_nodes=c.n_nodes,
    )


def truth_cell(config):
    t = require(config, "truth")
    kin = require(config, "truth.kinetics")
    lim = require(config, "truth.limits").model_dump()
    anode, cathode = literature_curves(config)
    if t.anode_bump is not None:
        b = t.anode_bump
        anode = anode.with_changes(correction=CorrectionTerm(
            GAUSSIANS, lim["theta_n_0"], lim["theta_n_100"],
            gauss_params=[[b.amplitude_v, b.center_soc, b.width_soc]]))
    if t.cathode_tail is not None:
        tl = t.cathode_tail
        cathode = cathode.with_changes(correction=CorrectionTerm(
            EXPONENTIALS, lim["theta_p_0"], lim["theta_p_100"],
            exp_params=[tl.at_full_v * np.exp(-tl.rate), tl.rate, 0.0, 0.0]))
    return _cell(config, kin, lim, anode, cathode)


def truth_ecm(config):
    """ECM truth; its OCV map samples the SPM truth OCV on a uniform SoC grid."""
    e = require(config, "truth.ecm")
    cell = truth_cell(config)
    soc = np.linspace(0.0, 1.0, e.ocv_points)
    return EcmParameters(
        OcvMap(soc, cell.ocv(soc)),
        SocFunction.exponential(e.r0_base_ohm, e.r0_amp_ohm, e.r0_rate),
        SocFunction.constant(e.r1_ohm), SocFunction.constant(e.c1_f),
        SocFunction.constant(e.r2_ohm), SocFunction.constant(e.c2_f),
        config.cell.q_nom_ah,
    )


def protocol_names(config):
    return IDENT_PROTOCOLS + tuple(config.protocols.validation)


def expand_protocol(config, name):
    """Protocol name or group (lc, mc, hc, validation, identification, all) -> names."""
    names = protocol_names(config)
    val = tuple(config.protocols.validation)
    groups = {"all": names, "identification": IDENT_PROTOCOLS, "validation": val}
    if name in groups:
        return groups[name]
    if name in names:
        return (name,)
    prefix = tuple(v for v in val if v.rstrip("0123456789") == name)
    if prefix:
        return prefix
    raise ConfigError(f"unknown protocol {name!r}; choose from {', '.join(names + tuple(groups))}")


def build_protocol(config, name):
    """(profile, initial_soc) for a named protocol."""
    p = config.protocols
    q = config.cell.q_nom_ah
    if name == "pdt":
        c = p.pdt
        return gen_pdt(q, c.pulse_c_rate, c.pulse_soc_step, c.rest_duration_s, p.dt_s,
                       c.initial_rest_s), c.initial_soc
    if name == "1c":
        c = p.constant
        return gen_constant(c.c_rate, q, p.dt_s, c.soc_span, label="1c"), c.initial_soc
    spec = p.wn if name == "wn" else p.validation.get(name)
    if spec is None:
        raise ConfigError(f"unknown protocol {name!r}")
    prof = gen_noise_discharge(spec.seed, spec.mean_c_rate, spec.peak_c_rate, p.bandwidth_hz, p.dt_s,
                               spec.duration_s, q, std_c_rate=spec.std_c_rate, label=name)
    return prof, spec.initial_soc


def noise_seed(config, name):
    """Measurement-noise seed of one dataset, derived from the run seed and the name."""
    digest = hashlib.sha256(name.encode()).digest()
    words = [config.seed & 0xFFFFFFFF, config.seed >> 32, int.from_bytes(digest[:4], "little")]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def meta(config, command, inputs=()):
    """Provenance block embedded in every JSON output."""
    return {
        "command": command,
        "config_hash": config.hash(),
        "seed": config.seed,
        "config": config.to_dict(),
        "inputs": {Path(p).name: hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in inputs},
    }


def _csv_meta(config):
    return {"config_hash": config.hash(), "run_seed": config.seed}


def _need(path, what):
    path = Path(path)
    if not path.is_file():
        raise DependencyError(f"missing {what}: {path}")
    return path


def _load_datasets(paths):
    out = []
    for p in paths:
        ds, _ = io.read_dataset(p)
        out.append(ds)
    return out


def _dataset_paths(args, default_names, what):
    if args.data:
        return [_need(p, what) for p in args.data]
    return [_need(Path(args.out) / f"{n}.csv", what) for n in default_names]


def _write_config(config, out):
    io.write_json(Path(out) / f"config_{config.hash()}.json", config.to_dict())


# ---------------------------------------------------------------- commands

def cmd_gen(args, config):
    model = args.model or require(config, "truth").model
    if model not in ("spm", "ecm"):
        raise ConfigError(f"truth model must be spm or ecm, got {model!r}")
    try:
        truth = truth_ecm(config) if model == "ecm" else truth_cell(config)
    except InvalidArgumentError as exc:
        raise ConfigError(f"invalid truth parameters: {exc}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_config(config, out)
    noise = NoiseSpec(config.noise.sigma_v_v, config.noise.sigma_i_a)
    truth_id = f"{config.truth.id}:{model}"
    for name in expand_protocol(config, args.protocol):
        profile, soc0 = build_protocol(config, name)
        ds = synthesize_dataset(truth, profile, soc0, noise, seed=noise_seed(config, name),
                                truth_id=truth_id)
        path = out / f"{name}.csv"
        io.write_dataset(path, ds, _csv_meta(config))
        print(f"{name}: {len(profile)} samples, duration {profile.duration:.0f} s, "
              f"charge {profile.charge_ah:.4f} Ah, max {profile.max_c_rate:.3f}C -> {path}")
    return EXIT_OK


def _model_path(args, model):
    return Path(args.out) / MODEL_FILES[model]


def cmd_simulate(args, config):
    if args.params:
        params_path = _need(args.params, "parameter file")
    else:
        params_path = _need(_model_path(args, args.model or "spm"), "parameter file")
    model = io.model_from_dict(io.read_json(params_path))
    kind = "spm" if isinstance(model, CellParameters) else model.variant
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.data:
        sources = [(io.read_dataset(_need(p, "dataset"))[0], Path(p)) for p in args.data]
        jobs = [(ds.profile, ds.initial_soc, p) for ds, p in sources]
    else:
        jobs = [build_protocol(config, n) + (None,) for n in expand_protocol(config, args.protocol or "all")]
    for profile, soc0, src in jobs:
        res = simulate_model(model, soc0, profile)
        ds = Dataset(profile, res.voltage, soc0, provenance=f"simulated({kind})")
        extra = _csv_meta(config)
        extra["parameter_file_sha256"] = hashlib.sha256(params_path.read_bytes()).hexdigest()
        path = out / f"sim_{kind.replace('+', '_plus')}_{profile.label}.csv"
        io.write_dataset(path, ds, extra)
        print(f"{profile.label}: simulated {len(profile)} samples with {kind} -> {path}")
    return EXIT_OK


def _identify_equilibrium(args, config):
    pdt_path, = _dataset_paths(args, ["pdt"], "PDT dataset")
    pdt, = _load_datasets([pdt_path])
    anode, cathode = literature_curves(config)
    eq = config.identification.equilibrium
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = identify_equilibrium(pdt, config.cell.q_nom_ah, anode, cathode, eq.low_zone, eq.high_zone,
                                   config.solver.options(), eq.n_starts, config.seed)
    m = meta(config, "identify equilibrium", [pdt_path])
    limits = dict(zip(LIMIT_NAMES, rep.limits_final.as_array()))
    io.write_json(Path(args.out) / EQUILIBRIUM_FILE, {
        "meta": m, "limits": limits,
        "anode_curve": rep.anode.to_dict(), "cathode_curve": rep.cathode.to_dict(),
    })
    doc = rep.to_dict()
    doc["ocv_points"] = {"soc": rep.points.soc, "ocv_v": rep.points.ocv}
    io.write_json(Path(args.out) / "equilibrium_report.json", {"meta": m, "report": doc})
    print(f"equilibrium: OCV RMSE {rep.rmse_stage1 * 1e3:.3f} mV -> {rep.rmse_stage2 * 1e3:.3f} mV; "
          + ", ".join(f"{k}={v:.4f}" for k, v in limits.items()))


def _identify_kinetics(args, config):
    eq_path = _need(Path(args.out) / EQUILIBRIUM_FILE, "equilibrium output (run 'identify equilibrium')")
    kc = config.identification.kinetics
    paths = _dataset_paths(args, kc.datasets, "kinetics dataset")
    datasets = _load_datasets(paths)
    eq = io.read_json(eq_path)
    x0 = require(config, "identification.kinetics.x0")
    base = _cell(config, x0, eq["limits"], EquilibriumCurve.from_dict(eq["anode_curve"]),
                 EquilibriumCurve.from_dict(eq["cathode_curve"]))
    fit = fit_kinetics(datasets, base, n_starts=kc.n_starts, seed=config.seed,
                       options=config.solver.options(ftol=kc.ftol, max_iter=kc.max_iter),
                       start_spread=kc.start_spread, bound_factor=kc.bound_factor)
    m = meta(config, "identify kinetics", [eq_path, *paths])
    io.write_json(_model_path(args, "spm"), {"meta": m, **io.model_to_dict(fit.params)})
    doc = fit.to_dict()
    doc["datasets"] = [ds.label for ds in datasets]
    io.write_json(Path(args.out) / "kinetics_report.json", {"meta": m, "report": doc})
    print("kinetics: RMSE " + ", ".join(f"{ds.label} {r * 1e3:.2f} mV"
                                        for ds, r in zip(datasets, fit.rmse_per_dataset))
          + f" ({fit.result.iterations} iterations, {fit.result.termination})")


def _identify_ecm_static(args, config):
    pdt_path, = _dataset_paths(args, ["pdt"], "PDT dataset")
    pdt, = _load_datasets([pdt_path])
    st = ecm_static_characterize(pdt, config.cell.q_nom_ah, config.identification.ecm.edge_fraction)
    m = meta(config, "identify ecm-static", [pdt_path])
    io.write_json(Path(args.out) / ECM_STATIC_FILE, {"meta": m, "static": st.to_dict()})
    io.write_json(Path(args.out) / "ecm_static_report.json", {"meta": m, "report": {
        "n_edges": int(st.edge_soc.size), "n_ocv_points": int(st.ocv_map.soc.size),
        "r0": st.r0.to_dict("ohm"),
        "r0_fit_rmse_ohm": float(np.sqrt(np.mean((st.r0(st.edge_soc) - st.edge_r0) ** 2))),
    }})
    print(f"ecm-static: {st.edge_soc.size} edges, R0(soc) = {st.r0.base:.5f} + "
          f"{st.r0.amp:.5f} exp({st.r0.rate:.3f} soc) ohm, {st.ocv_map.soc.size} OCV points")


def _identify_ecm_dynamics(args, config):
    st_path = _need(Path(args.out) / ECM_STATIC_FILE, "ecm-static output (run 'identify ecm-static')")
    ec = config.identification.ecm
    paths = _dataset_paths(args, ec.datasets, "ECM dataset")
    datasets = _load_datasets(paths)
    static = EcmStatic.from_dict(io.read_json(st_path)["static"])
    q = config.cell.q_nom_ah
    opts = config.solver.options(ftol=ec.ftol, max_iter=ec.max_iter)
    variants = [args.model] if args.model else [ECM, ECM_PLUS]
    if any(v not in (ECM, ECM_PLUS) for v in variants):
        raise ConfigError("ecm-dynamics accepts --model ecm or ecm+")
    m = meta(config, "identify ecm-dynamics", [st_path, *paths])
    report = {}
    base = None
    if variants == [ECM_PLUS] and _model_path(args, ECM).is_file():
        base = io.model_from_dict(io.read_json(_model_path(args, ECM)))
    order = ([ECM] if base is None else []) + [ECM_PLUS] if ECM_PLUS in variants else [ECM]
    for variant in order:
        fit = fit_ecm_dynamics(datasets, static, q, variant, base=base, options=opts)
        if variant == ECM:
            base = fit.params
        io.write_json(_model_path(args, variant), {"meta": m, **io.model_to_dict(fit.params)})
        report[variant] = fit.to_dict()
        print(f"ecm-dynamics {variant}: RMSE " + ", ".join(
            f"{ds.label} {r * 1e3:.2f} mV" for ds, r in zip(datasets, fit.rmse_per_dataset)))
    report["datasets"] = [ds.label for ds in datasets]
    io.write_json(Path(args.out) / "ecm_dynamics_report.json", {"meta": m, "report": report})


def cmd_identify(args, config):
    Path(args.out).mkdir(parents=True, exist_ok=True)
    _write_config(config, args.out)
    {"equilibrium": _identify_equilibrium, "kinetics": _identify_kinetics,
     "ecm-static": _identify_ecm_static, "ecm-dynamics": _identify_ecm_dynamics}[args.phase](args, config)
    return EXIT_OK


def _fmt_row(values):
    return ",".join("nan" if v is None or not np.isfinite(v) else f"{v:.6f}" for v in values)


def _write_csv(path, config, columns, rows, comments=()):
    lines = [f"# {k}={v}" for k, v in sorted(_csv_meta(config).items())]
    lines += [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    lines += [_fmt_row(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _state_csv(path, config, params, ds):
    """SPM internal states: surface/bulk stoichiometry, overpotentials, radial profiles."""
    res = simulate(params, ds.initial_soc, ds.profile, keep_profiles=True)
    nn = params.n_nodes
    cols = ["time_s", "soc", "theta_surf_n", "theta_surf_p", "theta_bulk_n", "theta_bulk_p",
            "eta_n_v", "eta_p_v"]
    cols += [f"c_n_{k}_mol_per_m3" for k in range(nn)] + [f"c_p_{k}_mol_per_m3" for k in range(nn)]
    table = np.column_stack([res.times, res.soc, res.surface_stoich_n, res.surface_stoich_p,
                             res.bulk_stoich_n, res.bulk_stoich_p, res.overpotential_n,
                             res.overpotential_p, res.conc_n, res.conc_p])
    radii = params.operator(ANODE).r_nodes / params.r_sn
    note = "node_radius_fraction=" + " ".join(f"{r:.6f}" for r in radii)
    _write_csv(path, config, cols, table.tolist(), [note])


def cmd_validate(args, config):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_config(config, out)
    if args.params:
        files = [_need(p, "parameter file") for p in args.params]
    else:
        names = [args.model] if args.model else list(MODEL_FILES)
        files = [_model_path(args, n) for n in names if _model_path(args, n).is_file()]
    models = {}
    for f in files:
        params = io.model_from_dict(io.read_json(f))
        name = "spm" if isinstance(params, CellParameters) else params.variant
        if args.model and name != args.model:
            continue
        models[name] = params
    if not models:
        raise DependencyError("no identified model found (run 'identify' first or pass --params)")
    paths = _dataset_paths(args, tuple(config.protocols.validation), "validation dataset")
    datasets = {ds.label: ds for ds in _load_datasets(paths)}
    report, preds = validate(models, datasets)
    m = meta(config, "validate", [*files, *paths])
    io.write_json(out / "validation.json", {"meta": m, "cells": report.to_rows(),
                                            "table": report.format_table().splitlines()})
    (out / "validation_table.txt").write_text(
        f"# config_hash={config.hash()} seed={config.seed}\n# RMSE in mV (band)\n"
        + report.format_table() + "\n", encoding="utf-8")
    for dname, ds in datasets.items():
        cols = [ds.times, ds.current, ds.voltage]
        for mname in MODEL_FILES:
            v = preds.get((mname, dname))
            cols.append(np.full(len(ds.voltage), np.nan) if v is None else v)
        _write_csv(out / f"plot_{dname}.csv", config,
                   ["time_s", "current_a", "v_meas_v", "v_spm_v", "v_ecm_v", "v_ecm_plus_v"],
                   np.column_stack(cols).tolist())
        if "spm" in models:
            try:
                _state_csv(out / f"state_{dname}.csv", config, models["spm"], ds)
            except CellIdError as exc:
                log.warning("internal-state export for %s failed: %s", dname, exc)
    print(report.format_table())
    if report.failed:
        for c in report.cells:
            if c.error:
                print(f"FAILED {c.model} on {c.dataset}: {c.error}", file=sys.stderr)
        return EXIT_SIM
    return EXIT_OK


def _summary_lines(out):
    lines = []
    p = out / "equilibrium_report.json"
    if p.is_file():
        r = io.read_json(p)["report"]
        lines.append(f"equilibrium: OCV RMSE stage 1 {r['rmse_stage1_v'] * 1e3:.3f} mV, "
                     f"stage 2 {r['rmse_stage2_v'] * 1e3:.3f} mV")
        lines.append("  limits: " + ", ".join(f"{k}={v:.5f}" for k, v in sorted(r["limits_final"].items())))
    p = out / "kinetics_report.json"
    if p.is_file():
        r = io.read_json(p)["report"]
        lines.append("kinetics: RMSE " + ", ".join(f"{d} {v * 1e3:.3f} mV" for d, v in
                                                   zip(r["datasets"], r["rmse_per_dataset_v"])))
    p = out / MODEL_FILES["spm"]
    if p.is_file():
        prm = io.read_json(p)["parameters"]
        lines.append("  " + ", ".join(f"{k}={prm[k]:.4g}" for k in sorted(io.SPM_KEYS.values())
                                      if k not in ("n_nodes",)))
    p = out / "ecm_static_report.json"
    if p.is_file():
        r = io.read_json(p)["report"]["r0"]
        lines.append(f"ecm-static: R0 = {r['base_ohm']:.5f} + {r['amp_ohm']:.5f} exp({r['rate']:.3f} soc) ohm")
    p = out / "ecm_dynamics_report.json"
    if p.is_file():
        r = io.read_json(p)["report"]
        for v in (ECM, ECM_PLUS):
            if v in r:
                lines.append(f"{v}: RMSE " + ", ".join(f"{d} {x * 1e3:.3f} mV" for d, x in
                                                      zip(r["datasets"], r[v]["rmse_per_dataset_v"])))
    p = out / "validation.json"
    if p.is_file():
        lines.append("validation (RMSE mV):")
        lines += ["  " + row for row in io.read_json(p)["table"]]
    return lines


def cmd_report(args, config):
    if args.default_config:
        print(io.dumps(default_config_dict()), end="")
        return EXIT_OK
    out = Path(args.out)
    lines = _summary_lines(out)
    if not lines:
        raise DependencyError(f"no reports found in {out}")
    text = f"# config_hash={config.hash()} seed={config.seed}\n" + "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (default: built-in)")
    common.add_argument("--seed", type=_u64, help="run seed, overrides the config")
    common.add_argument("--out", default=".", help="output directory (also where inputs are looked up)")
    common.add_argument("--model", choices=("spm", "ecm", "ecm+"), help="restrict to one model")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cellid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate synthetic datasets from the truth cell")
    p.add_argument("protocol", help="pdt, 1c, wn, lc1..hc2, or a group: lc, mc, hc, validation, "
                                    "identification, all")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", parents=[common], help="simulate an identified model")
    p.add_argument("--params", help="parameter file (default: <out>/<model>_params.json)")
    p.add_argument("--data", action="append", help="dataset whose current profile is replayed")
    p.add_argument("--protocol", help="protocol name or group to simulate instead of --data")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", parents=[common], help="run one identification phase")
    p.add_argument("phase", choices=PHASES)
    p.add_argument("--data", action="append", help="dataset path (repeatable; default: files in --out)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("validate", parents=[common], help="RMSE table of models on validation data")
    p.add_argument("--params", action="append", help="parameter file (repeatable)")
    p.add_argument("--data", action="append", help="validation dataset (repeatable)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", parents=[common], help="summarize the reports in --out")
    p.add_argument("--default-config", action="store_true", help="print the built-in configuration")
    p.set_defaults(func=cmd_report)
    return parser


def exit_code(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DependencyError):
        return EXIT_DEPENDENCY
    if isinstance(exc, OptimizerError):
        return EXIT_OPTIMIZER
    if isinstance(exc, (SaturationError, NumericalError, RangeError, CurveDomainError,
                        ProtocolMismatchError, InsufficientDataError)):
        return EXIT_SIM
    return EXIT_OTHER


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, args.seed)
        return args.func(args, config)
    except CellIdError as exc:
        code = exit_code(exc)
        print(f"cellid: error: {exc}", file=sys.stderr)
        return code
    except json.JSONDecodeError as exc:
        print(f"cellid: error: malformed JSON input: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY


if __name__ == "__main__":
    sys.exit(main())
