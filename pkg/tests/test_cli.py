import json

import numpy as np
import pytest
import yaml

from acousticlab import build_grid, sample_profile
from acousticlab.cli import (
    ConfigError,
    describe,
    load_config,
    main,
    manifest_hash,
    resolve_config,
    run,
)
from acousticlab.damping import DampingProfile
from acousticlab.spectral import assemble, eigen


def write_cfg(tmp_path, payload, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload))
    return str(path)


def minimal_simulate(outdir):
    return {
        "grid": {"nx": 8, "ny": 8},
        "damping": {"law": "none", "profile": {"kind": "zero"}},
        "experiment": {
            "kind": "simulate",
            "dt": 0.02,
            "nsteps": 100,
            "data": {"kind": "random"},
        },
        "output": {"directory": str(outdir)},
        "seed": 7,
        "assertions": [
            {"quantity": "energy_drop_rel", "op": "<", "value": 1e-9},
        ],
    }


class TestSchema:
    def test_defaults_resolved(self):
        cfg = resolve_config(
            {"grid": {"nx": 4, "ny": 4}, "experiment": {"kind": "spectrum"}}
        )
        assert cfg["damping"]["law"] == "none"
        assert cfg["output"]["formats"] == ["csv", "json"]
        assert cfg["seed"] == 0

    def test_unknown_field_named(self):
        with pytest.raises(ConfigError, match="grid.nz"):
            resolve_config({"grid": {"nx": 4, "ny": 4, "nz": 2}, "experiment": {"kind": "spectrum"}})

    def test_unknown_damping_kind_named(self):
        with pytest.raises(ConfigError, match="damping.profile.kind"):
            resolve_config(
                {
                    "grid": {"nx": 4, "ny": 4},
                    "damping": {"profile": {"kind": "wiggle"}},
                    "experiment": {"kind": "spectrum"},
                }
            )

    def test_missing_required(self):
        with pytest.raises(ConfigError, match="experiment.kind"):
            resolve_config({"grid": {"nx": 4, "ny": 4}, "experiment": {}})
        with pytest.raises(ConfigError, match="grid.nx"):
            resolve_config({"grid": {"ny": 4}, "experiment": {"kind": "spectrum"}})

    def test_bad_assertion_op(self):
        with pytest.raises(ConfigError, match="op"):
            resolve_config(
                {
                    "grid": {"nx": 4, "ny": 4},
                    "experiment": {"kind": "spectrum"},
                    "assertions": [{"quantity": "x", "op": "~~", "value": 1}],
                }
            )

    def test_manifest_hash_stable(self):
        cfg = resolve_config({"grid": {"nx": 4, "ny": 4}, "experiment": {"kind": "spectrum"}})
        assert manifest_hash(cfg) == manifest_hash(json.loads(json.dumps(cfg)))


class TestRun:
    def test_minimal_simulate_passes(self, tmp_path):
        cfg = write_cfg(tmp_path, minimal_simulate(tmp_path / "out"))
        status = run(cfg)
        assert status == 0
        out = tmp_path / "out"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] == "ok"
        assert summary["seed"] == 7
        manifest = json.loads((out / "manifest.json").read_text())
        assert summary["manifest"] == manifest["manifest_hash"]
        first = (out / "energy.csv").read_text().splitlines()[0]
        assert manifest["manifest_hash"] in first

    def test_reproducible_bit_identical(self, tmp_path):
        payload = minimal_simulate(tmp_path / "unused")
        cfg = write_cfg(tmp_path, payload)
        run(cfg, out_override=str(tmp_path / "a"))
        run(cfg, out_override=str(tmp_path / "b"))
        for name in ("manifest.json", "summary.json", "energy.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_assertion_failure_status(self, tmp_path):
        payload = minimal_simulate(tmp_path / "out")
        payload["assertions"] = [{"quantity": "energy_drop_rel", "op": ">", "value": 0.5}]
        cfg = write_cfg(tmp_path, payload)
        assert run(cfg) == 1
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["status"] == "assertion_failure"

    def test_spectrum_matches_library_oracle(self, tmp_path):
        payload = {
            "grid": {"nx": 6, "ny": 6},
            "damping": {
                "law": "brinkman",
                "profile": {"kind": "boundary_collar", "level": 1.0, "width": 0.25},
            },
            "experiment": {"kind": "spectrum"},
            "output": {"directory": str(tmp_path / "out")},
        }
        cfg = write_cfg(tmp_path, payload)
        assert run(cfg) == 0
        data = json.loads((tmp_path / "out" / "spectrum.json").read_text())
        g = build_grid(6, 6)
        a = sample_profile(DampingProfile("boundary_collar", level=1.0, width=0.25), g)
        rep = eigen(assemble(g, a, "brinkman"))
        assert data["kernel_dim"] == rep.kernel_dim
        assert data["abscissa_h0"] == pytest.approx(rep.abscissa_h0, rel=1e-9)
        got = sorted(map(tuple, data["eigenvalues"]))
        want = sorted((float(l.real), float(l.imag)) for l in rep.eigenvalues)
        assert np.allclose(got, want, atol=1e-9)

    def test_observability_run(self, tmp_path):
        payload = {
            "grid": {"nx": 6, "ny": 6},
            "damping": {"law": "brinkman", "profile": {"kind": "boundary_collar", "width": 0.25}},
            "experiment": {"kind": "observability", "T": 2.0, "collar_widths": [0.2, 0.4]},
            "output": {"directory": str(tmp_path / "out")},
            "assertions": [{"quantity": "C_min", "op": ">", "value": 0.0}],
        }
        assert run(write_cfg(tmp_path, payload)) == 0
        table = (tmp_path / "out" / "observability.csv").read_text().splitlines()
        assert table[1] == "width,constant"
        assert len(table) == 4

    def test_resolvent_run_and_numerical_failure(self, tmp_path):
        base = {
            "grid": {"nx": 6, "ny": 6},
            "damping": {"law": "brinkman", "profile": {"kind": "constant"}},
            "experiment": {
                "kind": "resolvent",
                "beta_min": 1.0,
                "beta_max": 4.5,
                "nsamples": 30,
                "refine_peaks": False,
            },
            "output": {"directory": str(tmp_path / "out")},
        }
        assert run(write_cfg(tmp_path, base)) == 0
        fit = json.loads((tmp_path / "out" / "resolvent_fit.json").read_text())
        assert "exponent" in fit
        # window beyond the resolved band -> numerical/feasibility failure
        bad = dict(base)
        bad["experiment"] = dict(base["experiment"], beta_max=40.0)
        bad["output"] = {"directory": str(tmp_path / "out2")}
        assert run(write_cfg(tmp_path, bad, name="bad.yaml")) == 3
        summary = json.loads((tmp_path / "out2" / "summary.json").read_text())
        assert summary["status"] == "numerical_failure"

    def test_decay_fit_run(self, tmp_path):
        payload = {
            "grid": {"nx": 6, "ny": 6},
            "damping": {"law": "brinkman", "profile": {"kind": "constant"}},
            "experiment": {
                "kind": "decay-fit",
                "dt": 0.05,
                "nsteps": 400,
                "data": {"kind": "random", "project_h0": True},
            },
            "output": {"directory": str(tmp_path / "out")},
            "seed": 3,
            "assertions": [
                {"quantity": "classification", "op": "==", "value": "exponential"},
                {"quantity": "L", "op": ">", "value": 0.0},
            ],
        }
        assert run(write_cfg(tmp_path, payload)) == 0
        fits = json.loads((tmp_path / "out" / "decay_fits.json").read_text())
        assert fits["classification"] == "exponential"


class TestDescribe:
    def test_resolvent_plan_reports_dimensions(self, tmp_path):
        payload = {
            "grid": {"nx": 24, "ny": 24},
            "experiment": {"kind": "resolvent", "beta_min": 5.0, "beta_max": 12.0},
        }
        text = describe(write_cfg(tmp_path, payload))
        assert f"state dimension: {3 * 24 * 24 - 2 * 24}" in text
        assert "within cap" in text

    def test_dense_cap_exceeded_suggestion(self, tmp_path):
        payload = {
            "grid": {"nx": 512, "ny": 512},
            "experiment": {"kind": "spectrum"},
        }
        text = describe(write_cfg(tmp_path, payload))
        assert "dense cap exceeded" in text
        assert "suggest" in text or "largest square grid" in text

    def test_simulate_echoes_defaults(self, tmp_path):
        payload = {
            "grid": {"nx": 8, "ny": 8},
            "experiment": {"kind": "simulate", "dt": 0.01, "nsteps": 10},
        }
        text = describe(write_cfg(tmp_path, payload))
        assert "project_h0=True" in text
        assert "seed: 0" in text


class TestMain:
    def test_run_exit_codes(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, minimal_simulate(tmp_path / "out"))
        assert main(["run", cfg]) == 0
        assert main(["describe", cfg]) == 0
        bad = write_cfg(tmp_path, {"grid": {"nx": 2}, "experiment": {"kind": "simulate"}}, "b.yaml")
        assert main(["run", bad]) == 2
        err = capsys.readouterr().err
        assert "grid.ny" in err

    def test_missing_file(self, capsys):
        assert main(["run", "/nonexistent/conf.yaml"]) == 2
