"""Configuration-driven command line front end.

One YAML file describes one experiment (grid + damping + experiment block);
`run` executes it and writes a manifest echoing the fully resolved
configuration, the experiment outputs (CSV series, JSON reports), and a
summary with the headline quantities and the outcome of any declared
assertions.  Outputs contain no timestamps, so identical config + seed gives
bit-identical files.

Exit status: 0 all assertions pass, 1 an assertion failed, 2 configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__, damping, decay, evolution, observability, spectral
from .grid import (
    CellField,
    FaceField,
    Grid,
    State,
    build_grid,
    energy,
    pack,
    stream_velocity,
    unpack,
)
from .helmholtz import ConvergenceError, HelmholtzSolver

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3

EXPERIMENT_KINDS = ("simulate", "spectrum", "resolvent", "observability", "decay-fit")
DATA_KINDS = ("random", "smooth", "solenoidal_patch", "cosine_mode")
OPS = ("<", "<=", ">", ">=", "==", "!=", "approx")

THREADS_ENV = "ACOUSTICLAB_THREADS"


class ConfigError(ValueError):
    """Configuration problem; the message names the offending field."""


# --------------------------------------------------------------------------
# schema resolution


def _want(cfg: dict, key: str, typ, default=None, required: bool = False, path: str = ""):
    full = f"{path}.{key}" if path else key
    if key not in cfg or cfg[key] is None:
        if required:
            raise ConfigError(f"missing required field '{full}'")
        return default
    val = cfg[key]
    if typ is float and isinstance(val, int):
        val = float(val)
    if typ is not None and not isinstance(val, typ):
        raise ConfigError(f"field '{full}' has wrong type {type(val).__name__}")
    return val


def _check_known(cfg: dict, allowed: set, path: str) -> None:
    for k in cfg:
        if k not in allowed:
            raise ConfigError(f"unknown field '{path}.{k}'" if path else f"unknown field '{k}'")


def resolve_config(raw: dict) -> dict:
    """Validate the raw mapping and fill in every default."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    _check_known(raw, {"grid", "damping", "experiment", "output", "seed", "assertions"}, "")

    gblk = raw.get("grid") or {}
    _check_known(gblk, {"nx", "ny", "lx", "ly"}, "grid")
    grid = {
        "nx": _want(gblk, "nx", int, required=True, path="grid"),
        "ny": _want(gblk, "ny", int, required=True, path="grid"),
        "lx": _want(gblk, "lx", float, 1.0, path="grid"),
        "ly": _want(gblk, "ly", float, 1.0, path="grid"),
    }
    if grid["nx"] < 2 or grid["ny"] < 2:
        raise ConfigError("field 'grid.nx'/'grid.ny' must be at least 2")

    dblk = raw.get("damping") or {}
    _check_known(dblk, {"law", "profile"}, "damping")
    law = _want(dblk, "law", str, "none", path="damping")
    if law not in evolution.LAWS:
        raise ConfigError(f"field 'damping.law' must be one of {evolution.LAWS}, got {law!r}")
    pblk = dblk.get("profile") or {}
    _check_known(pblk, {"kind", "level", "width", "center", "radius"}, "damping.profile")
    kind = _want(pblk, "kind", str, "zero", path="damping.profile")
    if kind not in damping.KINDS:
        raise ConfigError(
            f"field 'damping.profile.kind' must be one of {damping.KINDS}, got {kind!r}"
        )
    center = pblk.get("center")
    if center is not None:
        if not (isinstance(center, (list, tuple)) and len(center) == 2):
            raise ConfigError("field 'damping.profile.center' must be a pair [x, y]")
        center = [float(center[0]), float(center[1])]
    profile = {
        "kind": kind,
        "level": _want(pblk, "level", float, 1.0, path="damping.profile"),
        "width": _want(pblk, "width", float, 0.25, path="damping.profile"),
        "center": center,
        "radius": _want(pblk, "radius", float, 0.25, path="damping.profile"),
    }

    eblk = raw.get("experiment") or {}
    ekind = _want(eblk, "kind", str, required=True, path="experiment")
    if ekind not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"field 'experiment.kind' must be one of {EXPERIMENT_KINDS}, got {ekind!r}"
        )
    experiment: dict[str, Any] = {"kind": ekind}
    if ekind in ("simulate", "decay-fit"):
        _check_known(eblk, {"kind", "dt", "nsteps", "data", "fit"}, "experiment")
        experiment["dt"] = _want(eblk, "dt", float, required=True, path="experiment")
        experiment["nsteps"] = _want(eblk, "nsteps", int, required=True, path="experiment")
        if experiment["dt"] <= 0:
            raise ConfigError("field 'experiment.dt' must be positive")
        if experiment["nsteps"] < 1:
            raise ConfigError("field 'experiment.nsteps' must be at least 1")
        datablk = eblk.get("data") or {}
        _check_known(
            datablk, {"kind", "project_h0", "amplitude", "box", "mode"}, "experiment.data"
        )
        dkind = _want(datablk, "kind", str, "random", path="experiment.data")
        if dkind not in DATA_KINDS:
            raise ConfigError(
                f"field 'experiment.data.kind' must be one of {DATA_KINDS}, got {dkind!r}"
            )
        box = datablk.get("box") or [0.1, 0.35, 0.1, 0.35]
        if not (isinstance(box, (list, tuple)) and len(box) == 4):
            raise ConfigError("field 'experiment.data.box' must be [x0, x1, y0, y1]")
        mode = datablk.get("mode") or [1, 0]
        if not (isinstance(mode, (list, tuple)) and len(mode) == 2):
            raise ConfigError("field 'experiment.data.mode' must be a pair [m, n]")
        experiment["data"] = {
            "kind": dkind,
            "project_h0": bool(datablk.get("project_h0", True)),
            "amplitude": _want(datablk, "amplitude", float, 1.0, path="experiment.data"),
            "box": [float(v) for v in box],
            "mode": [int(mode[0]), int(mode[1])],
        }
        fitblk = eblk.get("fit") or {}
        _check_known(fitblk, {"exp_window", "poly_window"}, "experiment.fit")
        experiment["fit"] = {
            "exp_window": fitblk.get("exp_window"),
            "poly_window": fitblk.get("poly_window"),
        }
    elif ekind == "spectrum":
        _check_known(eblk, {"kind", "dense_cap"}, "experiment")
        experiment["dense_cap"] = _want(eblk, "dense_cap", int, spectral.DENSE_CAP, path="experiment")
    elif ekind == "resolvent":
        _check_known(
            eblk,
            {"kind", "beta_min", "beta_max", "nsamples", "refine_peaks", "window", "dense_cap"},
            "experiment",
        )
        experiment["beta_min"] = _want(eblk, "beta_min", float, required=True, path="experiment")
        experiment["beta_max"] = _want(eblk, "beta_max", float, required=True, path="experiment")
        if not 0 < experiment["beta_min"] < experiment["beta_max"]:
            raise ConfigError("fields 'experiment.beta_min/beta_max' must satisfy 0 < min < max")
        experiment["nsamples"] = _want(eblk, "nsamples", int, 120, path="experiment")
        if experiment["nsamples"] < 8:
            raise ConfigError("field 'experiment.nsamples' must be at least 8")
        experiment["refine_peaks"] = bool(eblk.get("refine_peaks", True))
        win = eblk.get("window")
        if win is not None and not (isinstance(win, (list, tuple)) and len(win) == 2):
            raise ConfigError("field 'experiment.window' must be [beta_lo, beta_hi]")
        experiment["window"] = [float(w) for w in win] if win is not None else None
        experiment["dense_cap"] = _want(eblk, "dense_cap", int, spectral.DENSE_CAP, path="experiment")
    elif ekind == "observability":
        _check_known(eblk, {"kind", "T", "dt", "collar_widths"}, "experiment")
        experiment["T"] = _want(eblk, "T", float, required=True, path="experiment")
        if experiment["T"] <= 0:
            raise ConfigError("field 'experiment.T' must be positive")
        experiment["dt"] = _want(eblk, "dt", float, path="experiment")
        widths = eblk.get("collar_widths")
        if widths is not None:
            if not isinstance(widths, (list, tuple)) or not widths:
                raise ConfigError("field 'experiment.collar_widths' must be a nonempty list")
            widths = [float(w) for w in widths]
        experiment["collar_widths"] = widths

    oblk = raw.get("output") or {}
    _check_known(oblk, {"directory", "formats", "state_stride"}, "output")
    formats = oblk.get("formats") or ["csv", "json"]
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigError(f"field 'output.formats' entries must be csv/json, got {f!r}")
    output = {
        "directory": _want(oblk, "directory", str, "out", path="output"),
        "formats": list(formats),
        "state_stride": _want(oblk, "state_stride", int, 100, path="output"),
    }

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("field 'seed' must be an integer")

    assertions = raw.get("assertions") or []
    if not isinstance(assertions, list):
        raise ConfigError("field 'assertions' must be a list")
    resolved_asserts = []
    for i, a in enumerate(assertions):
        if not isinstance(a, dict):
            raise ConfigError(f"field 'assertions[{i}]' must be a mapping")
        _check_known(a, {"quantity", "op", "value", "tol"}, f"assertions[{i}]")
        q = _want(a, "quantity", str, required=True, path=f"assertions[{i}]")
        op = _want(a, "op", str, required=True, path=f"assertions[{i}]")
        if op not in OPS:
            raise ConfigError(f"field 'assertions[{i}].op' must be one of {OPS}")
        if "value" not in a:
            raise ConfigError(f"missing required field 'assertions[{i}].value'")
        resolved_asserts.append(
            {"quantity": q, "op": op, "value": a["value"], "tol": a.get("tol", 1e-9)}
        )

    return {
        "grid": grid,
        "damping": {"law": law, "profile": profile},
        "experiment": experiment,
        "output": output,
        "seed": seed,
        "assertions": resolved_asserts,
    }


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse configuration: {exc}")
    return resolve_config(raw or {})


def manifest_hash(resolved: dict) -> str:
    canon = json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(canon).hexdigest()[:12]


# --------------------------------------------------------------------------
# initial data


def _profile_from_config(p: dict) -> damping.DampingProfile:
    return damping.DampingProfile(
        kind=p["kind"],
        level=p["level"],
        width=p["width"],
        center=tuple(p["center"]) if p["center"] is not None else None,
        radius=p["radius"],
    )


def _kernel_basis_for(g: Grid, law: str, alpha, helm) -> np.ndarray:
    # The undamped and filtered-law kernels have a cheap structural basis;
    # the friction law's kernel depends on the support and needs the SVD.
    if law in ("none", "modified") or alpha is None or alpha.is_zero:
        return spectral.divfree_kernel_basis(g)
    M = spectral.assemble(g, alpha, law, helm)
    return spectral.kernel_basis(M)


def build_initial_state(
    g: Grid,
    data_cfg: dict,
    law: str,
    alpha,
    helm,
    seed: int,
) -> State:
    rng = np.random.default_rng(seed)
    kind = data_cfg["kind"]
    amp = data_cfg["amplitude"]
    if kind == "random":
        z = unpack(rng.standard_normal(g.nstate), g)
        if data_cfg["project_h0"]:
            basis = _kernel_basis_for(g, law, alpha, helm)
            z = spectral.project_H0(z, basis, g)
    elif kind == "smooth":
        # Mix of eigenmodes weighted by 1/(1+|lambda|): bounded graph norm,
        # rich in frequencies; the transient-decay experiments want this.
        M = spectral.assemble(g, alpha, law, helm)
        lam, vecs = np.linalg.eig(M.matrix)
        maxmod = np.max(np.abs(lam))
        sel = np.abs(lam) > spectral.KERNEL_TOL * maxmod
        coeff = (rng.standard_normal(int(sel.sum())) + 1j * rng.standard_normal(int(sel.sum())))
        coeff /= 1.0 + np.abs(lam[sel])
        z = unpack(np.real(vecs[:, sel] @ coeff), g)
        basis = _kernel_basis_for(g, law, alpha, helm)
        z = spectral.project_H0(z, basis, g)
    elif kind == "solenoidal_patch":
        # stream-function bump inside the box (fractions of the sides):
        # exactly divergence-free, velocity supported strictly in the box
        x0, x1, y0, y1 = data_cfg["box"]
        xv = np.arange(1, g.nx)[:, None] * g.hx / g.lx
        yv = np.arange(1, g.ny)[None, :] * g.hy / g.ly
        sx = np.clip((xv - x0) / max(x1 - x0, 1e-12), 0.0, 1.0)
        sy = np.clip((yv - y0) / max(y1 - y0, 1e-12), 0.0, 1.0)
        psi = (np.sin(np.pi * sx) ** 2) * (np.sin(np.pi * sy) ** 2)
        z = State(stream_velocity(psi, g), CellField(np.zeros((g.nx, g.ny))))
    elif kind == "cosine_mode":
        m, n = data_cfg["mode"]
        x, y = g.cell_xy()
        r = np.cos(m * np.pi * x / g.lx) * np.cos(n * np.pi * y / g.ly)
        z = State(
            FaceField(np.zeros((g.nx - 1, g.ny)), np.zeros((g.nx, g.ny - 1))),
            CellField(r),
        )
    else:
        raise ConfigError(f"unknown data kind {kind!r}")
    e = energy(z, g)
    if e <= 0:
        raise ConfigError("initial data came out identically zero; check data block")
    zv = pack(z, g) * (amp / np.sqrt(2.0 * e))
    return unpack(zv, g)  # normalized to energy amp^2/2


# --------------------------------------------------------------------------
# experiments


def _threads() -> Optional[int]:
    val = os.environ.get(THREADS_ENV)
    if not val:
        return None
    try:
        return max(1, int(val))
    except ValueError:
        return None


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _simulate_common(cfg: dict, outdir: str, mh: str, want_csv: bool) -> evolution.Trajectory:
    g = build_grid(**cfg["grid"])
    law = cfg["damping"]["law"]
    prof = _profile_from_config(cfg["damping"]["profile"])
    alpha = damping.sample_profile(prof, g)
    helm = HelmholtzSolver(g)
    exp = cfg["experiment"]
    z0 = build_initial_state(g, exp["data"], law, alpha, helm, cfg["seed"])
    evcfg = evolution.EvolutionConfig(
        dt=exp["dt"],
        nsteps=exp["nsteps"],
        law=law,
        state_stride=cfg["output"]["state_stride"],
    )
    traj = evolution.simulate(z0, evcfg, alpha, helm, g)
    if want_csv:
        evolution.write_trajectory_csv(traj, os.path.join(outdir, "energy.csv"), mh)
    if not traj.complete:
        raise ConvergenceError(f"simulation aborted: {traj.failure}", float("nan"))
    return traj


def _summary_from_traj(traj: evolution.Trajectory) -> dict:
    e0, eT = float(traj.energies[0]), float(traj.energies[-1])
    return {
        "E0": e0,
        "ET": eT,
        "energy_drop_rel": (e0 - eT) / e0 if e0 > 0 else 0.0,
        "max_ledger_residual": traj.max_ledger_violation,
        "monotone_energy": bool(np.all(np.diff(traj.energies) <= 1e-10 * max(e0, 1.0))),
    }


def _run_simulate(cfg: dict, outdir: str, mh: str, want_csv: bool, want_json: bool) -> dict:
    traj = _simulate_common(cfg, outdir, mh, want_csv)
    return _summary_from_traj(traj)


def _run_spectrum(cfg: dict, outdir: str, mh: str, want_csv: bool, want_json: bool) -> dict:
    g = build_grid(**cfg["grid"])
    law = cfg["damping"]["law"]
    prof = _profile_from_config(cfg["damping"]["profile"])
    alpha = damping.sample_profile(prof, g)
    helm = HelmholtzSolver(g) if law == "modified" else None
    M = spectral.assemble(g, alpha, law, helm, dense_cap=cfg["experiment"]["dense_cap"])
    rep = spectral.eigen(M)
    payload = spectral.report_dict(rep)
    payload["manifest"] = mh
    if want_json:
        _write_json(os.path.join(outdir, "spectrum.json"), payload)
    if want_csv:
        with open(os.path.join(outdir, "eigenvalues.csv"), "w") as fh:
            fh.write(f"# manifest: {mh}\n")
            fh.write("re,im\n")
            for l in rep.eigenvalues:
                fh.write(f"{float(l.real)!r},{float(l.imag)!r}\n")
    return {
        "kernel_dim": rep.kernel_dim,
        "abscissa_h0": rep.abscissa_h0,
        "n_axis_violations": int(len(rep.axis_violations)),
    }


def _run_resolvent(cfg: dict, outdir: str, mh: str, want_csv: bool, want_json: bool) -> dict:
    g = build_grid(**cfg["grid"])
    law = cfg["damping"]["law"]
    prof = _profile_from_config(cfg["damping"]["profile"])
    alpha = damping.sample_profile(prof, g)
    helm = HelmholtzSolver(g) if law == "modified" else None
    exp = cfg["experiment"]
    M = spectral.assemble(g, alpha, law, helm, dense_cap=exp["dense_cap"])
    basis = _kernel_basis_for(g, law, alpha, helm)
    M0, _ = spectral.deflate(M, basis)
    betas = np.linspace(exp["beta_min"], exp["beta_max"], exp["nsamples"])
    samples = spectral.resolvent_sweep(
        M0, betas, refine_peaks=exp["refine_peaks"], threads=_threads()
    )
    if want_csv:
        spectral.write_sweep_csv(samples, os.path.join(outdir, "resolvent.csv"), mh)
    window = tuple(exp["window"]) if exp["window"] else (exp["beta_min"], exp["beta_max"])
    band = spectral.resolved_band_limit(g)
    fit = spectral.fit_resolvent_exponent(samples, window, band_limit=band)
    if want_json:
        _write_json(
            os.path.join(outdir, "resolvent_fit.json"),
            {
                "manifest": mh,
                "exponent": fit.exponent,
                "residual_rms": fit.residual_rms,
                "n_peaks": fit.n_peaks,
                "peak_betas": list(map(float, fit.peak_betas)),
                "peak_norms": list(map(float, fit.peak_norms)),
                "window": list(fit.window),
                "band_limit": band,
            },
        )
    return {
        "l_hat": fit.exponent,
        "n_peaks": fit.n_peaks,
        "band_limit": band,
        "max_resolvent_norm": float(max(s.resolvent_norm for s in samples)),
    }


def _run_observability(cfg: dict, outdir: str, mh: str, want_csv: bool, want_json: bool) -> dict:
    g = build_grid(**cfg["grid"])
    exp = cfg["experiment"]
    prof = _profile_from_config(cfg["damping"]["profile"])
    if exp["collar_widths"]:
        rows = observability.collar_sweep(
            exp["collar_widths"], prof.level, exp["T"], g, exp["dt"]
        )
        if want_csv:
            observability.write_sweep_csv(
                [(w, rep.constant) for w, rep in rows],
                os.path.join(outdir, "observability.csv"),
                "width",
                mh,
            )
        if want_json:
            _write_json(
                os.path.join(outdir, "observability.json"),
                {
                    "manifest": mh,
                    "sweep": [
                        {"width": w, **observability.report_dict(rep)} for w, rep in rows
                    ],
                },
            )
        consts = [rep.constant for _, rep in rows]
        return {"C_min": min(consts), "C_max": max(consts), "n_widths": len(rows)}
    alpha = damping.sample_profile(prof, g)
    rep = observability.gramian_constant(alpha, exp["T"], g, exp["dt"])
    payload = observability.report_dict(rep)
    payload["manifest"] = mh
    if want_json:
        _write_json(os.path.join(outdir, "observability.json"), payload)
    if want_csv:
        observability.write_sweep_csv(
            [(rep.T, rep.constant)], os.path.join(outdir, "observability.csv"), "T", mh
        )
    return {"C": rep.constant, "T": rep.T, "dt_used": rep.dt}


def _run_decay_fit(cfg: dict, outdir: str, mh: str, want_csv: bool, want_json: bool) -> dict:
    traj = _simulate_common(cfg, outdir, mh, want_csv)
    summary = _summary_from_traj(traj)
    exp = cfg["experiment"]
    t, e = traj.times, traj.energies
    fits = {}
    ana = decay.analyze(t, e)
    fe, fp = ana.exponential, ana.polynomial
    if exp["fit"]["exp_window"]:
        fe = decay.fit_exponential(t, e, tuple(exp["fit"]["exp_window"]))
    if exp["fit"]["poly_window"]:
        fp = decay.fit_polynomial(t, e, tuple(exp["fit"]["poly_window"]))
    fits["exponential"] = decay.fit_dict(fe)
    fits["polynomial"] = decay.fit_dict(fp)
    if want_json:
        _write_json(
            os.path.join(outdir, "decay_fits.json"),
            {"manifest": mh, "classification": ana.label, "t_gap": ana.t_gap, "fits": fits},
        )
    if want_csv and fe is not None:
        decay.write_residuals_csv(fe, os.path.join(outdir, "residuals_exponential.csv"), mh)
    if want_csv and fp is not None:
        decay.write_residuals_csv(fp, os.path.join(outdir, "residuals_polynomial.csv"), mh)
    summary.update(
        {
            "classification": ana.label,
            "t_gap": ana.t_gap,
            "L": fe.rate if fe is not None else None,
            "p": fp.rate if fp is not None else None,
            "r2_exponential": fe.r2 if fe is not None else None,
            "r2_polynomial": fp.r2 if fp is not None else None,
        }
    )
    return summary


_RUNNERS = {
    "simulate": _run_simulate,
    "spectrum": _run_spectrum,
    "resolvent": _run_resolvent,
    "observability": _run_observability,
    "decay-fit": _run_decay_fit,
}


# --------------------------------------------------------------------------
# assertions, run, describe


def _eval_assertion(spec: dict, quantities: dict) -> tuple[bool, str]:
    q = spec["quantity"]
    if q not in quantities or quantities[q] is None:
        return False, f"quantity {q!r} not produced by this experiment"
    have = quantities[q]
    want = spec["value"]
    op = spec["op"]
    try:
        if op == "<":
            ok = have < want
        elif op == "<=":
            ok = have <= want
        elif op == ">":
            ok = have > want
        elif op == ">=":
            ok = have >= want
        elif op == "==":
            ok = have == want
        elif op == "!=":
            ok = have != want
        else:  # approx
            ok = abs(float(have) - float(want)) <= float(spec["tol"])
    except TypeError:
        return False, f"cannot compare {have!r} {op} {want!r}"
    return bool(ok), f"{q} = {have!r} {op} {want!r}"


def run(config_path: str, out_override: Optional[str] = None) -> int:
    # The override relocates artifacts but does not enter the manifest, so
    # identical config + seed stays bit-identical wherever it is written.
    cfg = load_config(config_path)
    mh = manifest_hash(cfg)
    outdir = out_override or cfg["output"]["directory"]
    os.makedirs(outdir, exist_ok=True)
    _write_json(
        os.path.join(outdir, "manifest.json"),
        {"manifest_hash": mh, "config": cfg, "package_version": __version__},
    )
    want_csv = "csv" in cfg["output"]["formats"]
    want_json = "json" in cfg["output"]["formats"]
    try:
        quantities = _RUNNERS[cfg["experiment"]["kind"]](cfg, outdir, mh, want_csv, want_json)
    except (ConvergenceError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        _write_json(
            os.path.join(outdir, "summary.json"),
            {"manifest": mh, "seed": cfg["seed"], "status": "numerical_failure",
             "error": str(exc)},
        )
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    results = []
    all_ok = True
    for spec in cfg["assertions"]:
        ok, detail = _eval_assertion(spec, quantities)
        all_ok &= ok
        results.append({**spec, "passed": ok, "detail": detail})
    _write_json(
        os.path.join(outdir, "summary.json"),
        {
            "manifest": mh,
            "seed": cfg["seed"],
            "quantities": quantities,
            "assertions": results,
            "status": "ok" if all_ok else "assertion_failure",
        },
    )
    return EXIT_OK if all_ok else EXIT_ASSERTION


def describe(config_path: str) -> str:
    cfg = load_config(config_path)
    g = build_grid(**cfg["grid"])
    exp = cfg["experiment"]
    lines = [
        f"experiment: {exp['kind']}",
        f"grid: {g.nx}x{g.ny} cells on {g.lx}x{g.ly}  (hx={g.hx:.4g}, hy={g.hy:.4g})",
        f"state dimension: {g.nstate}  (faces {g.nfaces}, cells {g.ncells})",
        f"damping: law={cfg['damping']['law']}, profile={cfg['damping']['profile']['kind']}",
        f"poisson solver: "
        + (
            "direct factorization"
            if g.nstate <= 20_000
            else "conjugate iteration"
        ),
        f"seed: {cfg['seed']}",
    ]
    if exp["kind"] in ("spectrum", "resolvent"):
        cap = exp["dense_cap"]
        mem = g.nstate**2 * 8 / 1e6
        if g.nstate <= cap:
            lines.append(
                f"dense generator: {g.nstate}x{g.nstate} (~{mem:.1f} MB), within cap {cap}"
            )
        else:
            side = int(np.sqrt(cap / 3))
            lines.append(
                f"dense cap exceeded: state dimension {g.nstate} > {cap}; "
                f"largest square grid within cap is about {side}x{side}"
            )
        if exp["kind"] == "resolvent":
            lines.append(
                f"resolved band: beta <= {spectral.resolved_band_limit(g):.4g}; "
                f"sweep [{exp['beta_min']}, {exp['beta_max']}] with {exp['nsamples']} samples"
            )
    if exp["kind"] == "observability":
        d = 2 * (g.ncells - 1)
        lines.append(
            f"data-space dimension: {d} (cap {observability.DATA_DENSE_CAP}); "
            f"horizon T={exp['T']}"
        )
        if exp["dt"] is None:
            lines.append(
                f"quadrature dt: auto <= {observability.DT_SAFETY / observability.max_frequency_bound(g):.3e}"
            )
    if exp["kind"] in ("simulate", "decay-fit"):
        lines.append(
            f"steps: {exp['nsteps']} x dt={exp['dt']} -> horizon T={exp['nsteps'] * exp['dt']:.4g}"
        )
        lines.append(f"initial data: {exp['data']['kind']} (project_h0={exp['data']['project_h0']})")
        lines.append(
            "stepper: cached direct factorization"
            if g.nstate <= evolution.DENSE_STEPPER_CAP or cfg["damping"]["law"] != "modified"
            else "stepper: matrix-free GMRES"
        )
    lines.append(f"output: {cfg['output']['directory']} formats={cfg['output']['formats']}")
    return "\n".join(lines)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="acousticlab",
        description="Run reproducible experiments on the damped acoustic system.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment configuration")
    p_run.add_argument("config", help="path to the YAML configuration")
    p_run.add_argument("--out", help="override the output directory")
    p_desc = sub.add_parser("describe", help="print the resolved plan without executing")
    p_desc.add_argument("config", help="path to the YAML configuration")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config, args.out)
        print(describe(args.config))
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
