"""File formats and the command-line surface: lossless round-trips, format
errors with line numbers, determinism, and the exit-code contract."""

import filecmp
import json
import os

import numpy as np
import pytest

from impactlab import (
    ConditionalResponse,
    FormatError,
    ImpactConfig,
    InputError,
    Kernel,
    LagCurve,
    ParameterError,
    SignSeries,
    TradeTape,
    VolumeSeries,
    cli,
    gen_iid_signs,
    gen_volumes,
    kyle_path,
)
from impactlab.experiment import ExperimentConfig
from impactlab.io import (
    config_sha256,
    read_curve,
    read_json,
    read_kernel,
    read_tape,
    write_curve,
    write_json,
    write_kernel,
    write_tape,
)


def _priced_tape(n=50, seed=3):
    tape = TradeTape(gen_iid_signs(n, 0.5, seed), gen_volumes(n, "lognormal", seed=seed + 1))
    p = kyle_path(tape, ImpactConfig(0.1, 1.0, None, 0.2, 100.0), seed=seed + 2)
    return TradeTape(tape.signs, tape.volumes, p)


def test_tape_round_trip_is_lossless(tmp_path):
    tape = _priced_tape()
    path = str(tmp_path / "tape.csv")
    write_tape(tape, path)
    back = read_tape(path)
    assert np.array_equal(back.eps, tape.eps)
    assert np.array_equal(back.v, tape.v)
    assert np.array_equal(back.prices, tape.prices)


def test_unpriced_tape_round_trip(tmp_path):
    tape = TradeTape(gen_iid_signs(20, 0.5, 1), gen_volumes(20))
    path = str(tmp_path / "bare.csv")
    write_tape(tape, path)
    back = read_tape(path)
    assert back.prices is None
    assert np.array_equal(back.eps, tape.eps)


def _write(path, text):
    path.write_text(text)
    return str(path)


def test_tape_format_errors_carry_line_numbers(tmp_path):
    cases = [
        ("head.csv", "x,epsilon,volume\n", "line 1"),
        ("eps.csv", "n,epsilon,volume\n0,0,1.0\n", "line 2"),
        ("vol.csv", "n,epsilon,volume\n0,1,-2.0\n", "line 2"),
        ("seq.csv", "n,epsilon,volume\n0,1,1.0\n5,1,1.0\n", "line 3"),
        ("width.csv", "n,epsilon,volume\n0,1\n", "line 2"),
        ("num.csv", "n,epsilon,volume\n0,1,abc\n", "line 2"),
        ("trail.csv", "n,epsilon,volume,price\n0,1,1.0,100.0\n", "line 3"),
        ("after.csv", "n,epsilon,volume,price\n0,1,1.0,100.0\n1,,,100.1\n2,1,1.0,100.2\n", "line 4"),
    ]
    for name, text, needle in cases:
        with pytest.raises(FormatError, match=needle):
            read_tape(_write(tmp_path / name, text))


def test_missing_files_are_input_errors(tmp_path):
    with pytest.raises(InputError):
        read_tape(str(tmp_path / "nope.csv"))
    with pytest.raises(InputError):
        read_json(str(tmp_path / "nope.json"))


def test_curve_round_trip_with_and_without_se(tmp_path):
    lags = np.arange(1, 9)
    c = LagCurve(lags, lags**-0.5, np.full(8, 100), "response", lags * 0.01)
    path = str(tmp_path / "curve.csv")
    write_curve(c, path)
    back = read_curve(path, "response")
    assert np.array_equal(back.lags, c.lags)
    assert np.array_equal(back.values, c.values)
    assert np.array_equal(back.se, c.se)
    bare = LagCurve(lags, lags**-0.5, np.full(8, 100), "sign_autocorr")
    write_curve(bare, str(tmp_path / "bare.csv"))
    back2 = read_curve(str(tmp_path / "bare.csv"), "sign_autocorr")
    assert back2.se is None and back2.role_tag == "sign_autocorr"


def test_kernel_round_trip_and_analytic_serialization(tmp_path):
    tab = Kernel.tabulated(np.arange(1, 9.0) ** -0.3)
    path = str(tmp_path / "kernel.csv")
    write_kernel(tab, path, se_proxy=np.full(8, 0.01))
    back, se = read_kernel(path)
    assert np.array_equal(back.values, tab.values)
    assert np.allclose(se, 0.01)
    power = Kernel.power_law(0.3)
    with pytest.raises(ParameterError):
        write_kernel(power, str(tmp_path / "p.csv"))  # needs max_lag
    write_kernel(power, str(tmp_path / "p.csv"), max_lag=16)
    back2, se2 = read_kernel(str(tmp_path / "p.csv"))
    assert se2 is None
    assert np.allclose(back2.values, power.eval(np.arange(1, 17)), rtol=0, atol=1e-15)


def test_json_round_trip_is_sorted_and_stable(tmp_path):
    p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    write_json({"b": 1, "a": [1, 2]}, p1)
    write_json({"a": [1, 2], "b": 1}, p2)
    assert open(p1).read() == open(p2).read()
    assert read_json(p1) == {"a": [1, 2], "b": 1}
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ParameterError):
        read_json(str(bad))


def test_config_hash_ignores_key_order():
    assert config_sha256({"x": 1, "y": 2}) == config_sha256({"y": 2, "x": 1})
    assert config_sha256({"x": 1}) != config_sha256({"x": 2})


def test_experiment_config_round_trips_losslessly():
    cfg = ExperimentConfig(
        n=100, seed=[1, 3],
        generator={"kind": "markov", "c1": 0.3},
        volumes={"dist": "lognormal", "mu": 0.0, "sigma": 0.5},
        model={"kind": "kyle", "lam": 0.5},
    )
    d = cfg.to_dict()
    assert ExperimentConfig.from_dict(d).to_dict() == d
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({})
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"n": 10, "bogus": 1})


def test_cli_simulate_is_byte_deterministic(tmp_path):
    argv = ["simulate", "--n", "300", "--model", "kyle", "--lam", "0.1",
            "--noise-sigma", "0.2", "--seed", "5"]
    da, db = str(tmp_path / "a"), str(tmp_path / "b")
    assert cli.main(argv + ["--out-dir", da]) == 0
    assert cli.main(argv + ["--out-dir", db]) == 0
    assert filecmp.cmp(os.path.join(da, "tape_seed5.csv"),
                       os.path.join(db, "tape_seed5.csv"), shallow=False)
    assert filecmp.cmp(os.path.join(da, "meta_seed5.json"),
                       os.path.join(db, "meta_seed5.json"), shallow=False)


def test_cli_simulate_seed_range_writes_per_seed_files(tmp_path):
    out = str(tmp_path / "multi")
    rc = cli.main(["simulate", "--n", "100", "--seed", "1:3", "--out-dir", out])
    assert rc == 0
    names = sorted(os.listdir(out))
    assert "simulate_summary.json" in names
    assert {"tape_seed1.csv", "tape_seed2.csv", "tape_seed3.csv"} <= set(names)


def test_cli_measure_then_invert_recovers_a_rough_kernel(tmp_path):
    out = str(tmp_path / "sim")
    rc = cli.main(["simulate", "--n", "16384", "--generator", "clipped_fractional",
                   "--gamma", "0.5", "--model", "propagator", "--beta", "0.25",
                   "--lam", "1", "--psi", "1", "--seed", "2", "--out-dir", out])
    assert rc == 0
    meas = str(tmp_path / "meas")
    rc = cli.main(["measure", os.path.join(out, "tape_seed2.csv"),
                   "--max-lag", "64", "--sign-max-lag", "128", "--out-dir", meas])
    assert rc == 0
    fits = json.load(open(os.path.join(meas, "tape_seed2_fits.json")))
    assert fits["errors"] == {}
    assert fits["notes"]["conditional"] == "skipped: constant volumes"
    assert 0.2 < fits["gamma_hat"]["exponent"] < 0.7
    inv = str(tmp_path / "inv")
    rc = cli.main(["invert",
                   "--response", os.path.join(meas, "tape_seed2_response.csv"),
                   "--autocorr", os.path.join(meas, "tape_seed2_sign_autocorr.csv"),
                   "--lam", "1", "--psi", "1", "--v", "1",
                   "--kernel-lags", "32", "--j-tail", "128", "--out-dir", inv])
    assert rc == 0
    report = json.load(open(os.path.join(inv, "invert_report.json")))
    assert 0.1 < report["beta_hat"] < 0.4
    kern, se = read_kernel(os.path.join(inv, "kernel.csv"))
    assert kern.values.size == 32 and se is not None


def test_cli_measure_partial_failure_keeps_other_curves(tmp_path):
    out = str(tmp_path / "sim")
    assert cli.main(["simulate", "--n", "60", "--seed", "1", "--model", "kyle",
                     "--lam", "0.1", "--out-dir", out]) == 0
    meas = str(tmp_path / "meas")
    rc = cli.main(["measure", os.path.join(out, "tape_seed1.csv"),
                   "--max-lag", "200", "--sign-max-lag", "16", "--out-dir", meas])
    assert rc == 3  # response lag range exceeds the tape; partial success
    fits = json.load(open(os.path.join(meas, "tape_seed1_fits.json")))
    assert "response" in fits["errors"]
    assert os.path.exists(os.path.join(meas, "tape_seed1_sign_autocorr.csv"))


def test_cli_invert_refuses_mismatched_grids(tmp_path):
    lags = np.arange(1, 9)
    write_curve(LagCurve(lags, lags**-0.3, np.full(8, 10), "response"),
                str(tmp_path / "r.csv"))
    write_curve(LagCurve(lags, 0.2 * lags**-0.5, np.full(8, 10), "sign_autocorr"),
                str(tmp_path / "c.csv"))
    rc = cli.main(["invert", "--response", str(tmp_path / "r.csv"),
                   "--autocorr", str(tmp_path / "c.csv"),
                   "--kernel-lags", "8", "--j-tail", "4096",
                   "--out-dir", str(tmp_path)])
    assert rc == 1  # C horizon shorter than j_tail demands


def test_cli_manip_writes_the_frontier_grid(tmp_path):
    out = str(tmp_path / "man")
    rc = cli.main(["manip", "--betas", "0,0.8", "--psis", "1,0.3",
                   "--max-len", "6", "--grid", "1,5", "--out-dir", out])
    assert rc == 0
    rows = open(os.path.join(out, "frontier.csv")).read().splitlines()
    assert rows[0] == "beta,psi,min_cost,argmin_strategy"
    assert len(rows) == 5
    cells = [r.split(",") for r in rows[1:]]
    concave = [c for c in cells if float(c[0]) == 0.0 and float(c[1]) == 0.3]
    assert concave and float(concave[0][2]) < 0
    assert concave[0][3].startswith("1:")  # strategies anchor at slot 1


def test_cli_manip_budget_refusal_exits_three(tmp_path):
    rc = cli.main(["manip", "--betas", "0", "--psis", "0.5", "--max-len", "10",
                   "--grid", "1,2,4,8,9", "--budget", "100",
                   "--out-dir", str(tmp_path)])
    assert rc == 3


def test_cli_report_runs_a_criterion(tmp_path):
    out = str(tmp_path / "rep")
    rc = cli.main(["report", "--criteria", "10", "--out-dir", out])
    assert rc == 0
    rep = json.load(open(os.path.join(out, "report.json")))
    assert rep["acceptance"][0]["number"] == 10
    assert rep["acceptance"][0]["passed"] is True


def test_cli_report_full_pipeline_with_config(tmp_path):
    cfg = {
        "n": 4096, "seed": [1, 2],
        "generator": {"kind": "clipped_fractional", "gamma": 0.5},
        "volumes": {"dist": "lognormal", "mu": 0.0, "sigma": 0.5},
        "model": {"kind": "propagator", "lam": 1.0, "psi": 0.5,
                  "kernel": {"form": "power_law", "beta": 0.25}},
        "estimator": {"max_lag": 16, "sign_max_lag": 32, "rho_window": 8,
                      "invert_lags": 8, "j_tail": 31},
    }
    cfg_path = str(tmp_path / "cfg.json")
    write_json(cfg, cfg_path)
    out = str(tmp_path / "pipe")
    rc = cli.main(["report", "--config", cfg_path, "--criteria", "none",
                   "--out-dir", out])
    assert rc == 0
    rep = json.load(open(os.path.join(out, "report.json")))
    assert rep["provenance"]["config_sha256"]
    assert rep["provenance"]["seeds"] == [1, 2]
    assert "pooled" in rep["fits"]
    assert os.path.exists(os.path.join(out, "pooled_response.csv"))
    assert os.path.exists(os.path.join(out, "kernel.csv"))


def test_cli_config_file_overrides_flags(tmp_path):
    cfg_path = str(tmp_path / "cfg.json")
    write_json({"generator": {"kind": "markov", "c1": 0.6}, "n": 64}, cfg_path)
    out = str(tmp_path / "o")
    rc = cli.main(["simulate", "--generator", "iid", "--p-buy", "0.9",
                   "--n", "999", "--config", cfg_path, "--seed", "1",
                   "--out-dir", out])
    assert rc == 0
    meta = json.load(open(os.path.join(out, "meta_seed1.json")))
    assert meta["generator"]["kind"] == "markov"
    assert meta["n"] == 64


def test_cli_out_dir_env_fallback(tmp_path, monkeypatch):
    env_dir = str(tmp_path / "from_env")
    monkeypatch.setenv("IMPACTLAB_OUT_DIR", env_dir)
    rc = cli.main(["simulate", "--n", "50", "--seed", "1"])
    assert rc == 0
    assert os.path.exists(os.path.join(env_dir, "tape_seed1.csv"))


def test_cli_usage_and_config_errors_exit_one(tmp_path):
    assert cli.main(["simulate", "--no-such-flag"]) == 1
    assert cli.main(["measure", str(tmp_path / "missing.csv")]) == 1
    assert cli.main(["simulate", "--n", "0", "--out-dir", str(tmp_path)]) == 1
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    assert cli.main(["report", "--config", str(empty),
                     "--out-dir", str(tmp_path)]) == 1


def test_cli_format_errors_exit_two(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("n,epsilon,volume\n0,0,1.0\n")
    assert cli.main(["measure", str(bad), "--out-dir", str(tmp_path)]) == 2


def test_write_conditional_round_trip(tmp_path):
    from impactlab.io import read_conditional, write_conditional

    edges = np.geomspace(0.5, 4.0, 5)
    cr = ConditionalResponse(edges[:-1], edges[1:], np.array([1.0, 2.0, 3.0, 4.0]),
                             np.array([10, 20, 30, 40]), 2,
                             np.array([0.1, 0.2, 0.3, 0.4]))
    path = str(tmp_path / "cond.csv")
    write_conditional(cr, path)
    back = read_conditional(path, T=2)
    assert np.array_equal(back.values, cr.values)
    assert np.array_equal(back.counts, cr.counts)
    assert np.allclose(back.bin_lo, cr.bin_lo)
    assert back.T == 2
