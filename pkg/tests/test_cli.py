import json

import numpy as np
import pytest

from enkpf import read_matrix_csv, write_matrix_csv
from enkpf.cli import main


def _write_run_config(path, seed=7, out=None):
    payload = {
        "model": {"kind": "lorenz96", "q": 8, "lead_time": 0.05},
        "filter": {"kind": "enkpf", "policy": {"mode": "adaptive_ess", "band": [0.25, 0.5]}},
        "ensemble_size": 15,
        "cycles": 3,
        "observation": {"components": [1, 3, 5, 7], "noise_variance": 0.5},
        "seed": seed,
    }
    if out is not None:
        payload["output_dir"] = str(out)
    path.write_text(json.dumps(payload))
    return path


def test_run_writes_outputs(tmp_path, capsys):
    cfg = _write_run_config(tmp_path / "cfg.json")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert capsys.readouterr().err.strip() == "completed 3 cycles"
    for name in ("cycles.csv", "final_ensemble.csv", "truth.csv"):
        assert (out / name).exists()


def test_run_seed_flag_overrides_config(tmp_path):
    cfg = _write_run_config(tmp_path / "cfg.json", seed=7)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / "b")])
    main(["run", "--config", str(cfg), "--seed", "8", "--out", str(tmp_path / "c")])
    a = (tmp_path / "a" / "cycles.csv").read_bytes()
    b = (tmp_path / "b" / "cycles.csv").read_bytes()
    c = (tmp_path / "c" / "cycles.csv").read_bytes()
    assert a == b
    assert a != c


def test_run_rejects_unknown_config_keys(tmp_path):
    cfg = tmp_path / "cfg.json"
    payload = json.loads(_write_run_config(cfg).read_text())
    payload["parallel"] = True
    cfg.write_text(json.dumps(payload))
    with pytest.raises(ValueError):
        main(["run", "--config", str(cfg)])


def test_run_reports_divergence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "model": {"kind": "lorenz96", "q": 8, "dt": 0.25, "lead_time": 0.25},
                "observation": {"noise_variance": 0.5},
                "ensemble_size": 10,
                "cycles": 50,
                "seed": 1,
                "output_dir": str(tmp_path / "boom"),
            }
        )
    )
    with np.errstate(over="ignore", invalid="ignore"):
        assert main(["run", "--config", str(cfg)]) == 1
    assert "run aborted" in capsys.readouterr().err


def test_sweep_stdout_and_file_agree(tmp_path, capsys):
    payload = {
        "priors": ["gaussian"],
        "observations": ["y1"],
        "dims": [10],
        "ensemble_size": 40,
        "gamma_grid": [0.0, 0.5, 1.0],
        "seed": 3,
    }
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps(payload))
    assert main(["sweep", "--config", str(cfg)]) == 0
    stdout = capsys.readouterr().out
    lines = stdout.strip().splitlines()
    assert lines[0] == "prior,y,q,gamma,ess_frac,ess_frac_approx"
    assert len(lines) == 4
    # gamma=1 keeps full diversity (up to rounding in 1/sum(w^2) at w=1/N)
    assert abs(float(lines[-1].split(",")[4]) - 1.0) < 1e-12

    payload["output"] = str(tmp_path / "sweep.csv")
    cfg.write_text(json.dumps(payload))
    assert main(["sweep", "--config", str(cfg)]) == 0
    assert (tmp_path / "sweep.csv").read_text() == stdout

    # output paths in directories that do not exist yet are created
    payload["output"] = str(tmp_path / "fresh" / "dir" / "sweep.csv")
    cfg.write_text(json.dumps(payload))
    assert main(["sweep", "--config", str(cfg)]) == 0
    assert (tmp_path / "fresh" / "dir" / "sweep.csv").read_text() == stdout


def test_summarize_stdout(tmp_path, capsys):
    run_cfg = _write_run_config(tmp_path / "cfg.json", out=tmp_path / "out")
    main(["run", "--config", str(run_cfg)])
    capsys.readouterr()
    assert main(["summarize", "--in", str(tmp_path / "out" / "cycles.csv")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "score,p10,p50,mean,p90"
    assert {line.split(",")[0] for line in lines[1:]} == {"rmse", "crps_1", "crps_2"}
    summary = tmp_path / "summary.csv"
    main(["summarize", "--in", str(tmp_path / "out" / "cycles.csv"), "--out", str(summary)])
    assert summary.read_text().splitlines()[0] == "score,p10,p50,mean,p90"


def _write_update_inputs(tmp_path):
    gen = np.random.default_rng(12)
    write_matrix_csv(tmp_path / "ens.csv", gen.standard_normal((6, 25)))
    (tmp_path / "obs.csv").write_text(
        "component,value,noise_variance\n1,0.4,0.25\n4,-0.2,0.25\n"
    )
    return tmp_path / "ens.csv", tmp_path / "obs.csv"


def test_update_fixed_gamma(tmp_path, capsys):
    ens_csv, obs_csv = _write_update_inputs(tmp_path)
    out = tmp_path / "upd.csv"
    rc = main(
        ["update", "--ensemble", str(ens_csv), "--obs", str(obs_csv), "--gamma", "0.5", "--out", str(out)]
    )
    assert rc == 0
    err = capsys.readouterr().err
    assert err.startswith("gamma=0.5 ess_frac=")
    updated = read_matrix_csv(out)
    assert updated.shape == (6, 25)
    assert not np.array_equal(updated, read_matrix_csv(ens_csv))


def test_update_auto_gamma_stdout(tmp_path, capsys):
    ens_csv, obs_csv = _write_update_inputs(tmp_path)
    assert main(["update", "--ensemble", str(ens_csv), "--obs", str(obs_csv), "--gamma", "auto"]) == 0
    captured = capsys.readouterr()
    gamma = float(captured.err.split()[0].split("=")[1])
    assert 0.0 <= gamma <= 1.0
    lines = captured.out.strip().splitlines()
    assert lines[0] == "6,25"
    assert len(lines) == 7


def test_update_is_repeatable(tmp_path, capsys):
    ens_csv, obs_csv = _write_update_inputs(tmp_path)
    args = ["update", "--ensemble", str(ens_csv), "--obs", str(obs_csv), "--gamma", "0.3"]
    main(args)
    first = capsys.readouterr()
    main(args)
    second = capsys.readouterr()
    assert first.out == second.out
    main(args + ["--seed", "99"])
    third = capsys.readouterr()
    assert third.out != first.out


def test_update_rejects_bad_obs_file(tmp_path):
    ens_csv, _ = _write_update_inputs(tmp_path)
    bad = tmp_path / "bad_obs.csv"
    bad.write_text("site,value,noise_variance\n1,0.4,0.25\n")
    with pytest.raises(ValueError):
        main(["update", "--ensemble", str(ens_csv), "--obs", str(bad), "--gamma", "0.5"])
    out_of_range = tmp_path / "range_obs.csv"
    out_of_range.write_text("component,value,noise_variance\n7,0.4,0.25\n")
    with pytest.raises(ValueError):
        main(["update", "--ensemble", str(ens_csv), "--obs", str(out_of_range), "--gamma", "0.5"])
