import argparse
import json
import math

import numpy as np
import pytest

from emitterlab import analysis, cli, io, photon_mc as mc, synthetic
from emitterlab.errors import ConvergenceError

SUBCOMMANDS = [[], ["simulate"], ["simulate", "spectrum"], ["simulate", "stream"],
               ["correlate"], ["fit"], ["fit", "peak"], ["fit", "fss"], ["fit", "saturation"],
               ["fit", "lifetime"], ["fit", "g2"], ["fit", "gamma-hist"], ["linewidth"],
               ["linewidth", "extrapolate"], ["sweep"]]


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("EMITTERLAB_SEED", raising=False)


@pytest.mark.parametrize("path", SUBCOMMANDS, ids=lambda p: " ".join(p) or "top")
def test_help_exits_zero_and_lists_flags(path, capsys):
    with pytest.raises(SystemExit) as exc:
        run(*path, "--help")
    assert exc.value.code == 0
    text = capsys.readouterr().out
    parser = cli.build_parser()
    for name in path:
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        parser = sub.choices[name]
    for action in parser._actions:
        for flag in action.option_strings:
            assert flag in text


def test_missing_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run("simulate", "spectrum", "--t1-ns", "1.57", "--out", "s.txt")
    assert exc.value.code == 2


def test_simulate_spectrum_examples(capsys, tmp_path):
    assert run("simulate", "spectrum", "--t1", 1.57, "--dephasing-mhz", 1495, "--power", 0,
               "--out", "s.txt") == 0
    assert "FWHM = 1596.4 MHz" in capsys.readouterr().out
    assert run("simulate", "spectrum", "--t1", 1.0, "--dephasing-mhz", 0, "--power", 0,
               "--out", "t.txt") == 0
    assert "FWHM = 159.2 MHz" in capsys.readouterr().out
    assert run("fit", "peak", "s.txt") == 0
    doc = io.read_report(tmp_path / "s.report.json")
    assert doc["parameters"]["fwhm"]["value"] == pytest.approx(1596.37, rel=1e-3)
    assert doc["parameters"]["fwhm"]["unit"] == "MHz"


def test_stream_is_deterministic(capsys):
    for name in ("a", "b"):
        assert run("simulate", "stream", "--kind", "hbt", "--seed", 9, "--n-pulses", 20000,
                   "--p-double", 0.01, "--jitter-ps", 30, "--out", f"{name}.ttag") == 0
    assert io.file_digest("a.ttag") == io.file_digest("b.ttag")
    run("simulate", "stream", "--kind", "hbt", "--seed", 10, "--n-pulses", 20000,
        "--out", "c.ttag")
    assert io.file_digest("a.ttag") != io.file_digest("c.ttag")


def test_env_seed_and_config_precedence(tmp_path, monkeypatch):
    run("simulate", "stream", "--kind", "hbt", "--seed", 5, "--n-pulses", 5000, "--out", "f.ttag")
    monkeypatch.setenv("EMITTERLAB_SEED", "5")
    run("simulate", "stream", "--kind", "hbt", "--n-pulses", 5000, "--out", "e.ttag")
    assert io.file_digest("f.ttag") == io.file_digest("e.ttag")
    (tmp_path / "c.cfg").write_text("seed = 6\nn_pulses = 5000\n")
    run("simulate", "stream", "--kind", "hbt", "--config", "c.cfg", "--out", "g.ttag")
    run("simulate", "stream", "--kind", "hbt", "--seed", 6, "--n-pulses", 5000, "--out", "h.ttag")
    assert io.file_digest("g.ttag") == io.file_digest("h.ttag")
    (tmp_path / "bad.cfg").write_text("sede = 6\n")
    assert run("simulate", "stream", "--kind", "hbt", "--config", "bad.cfg",
               "--out", "x.ttag") == 3


def test_hbt_pipeline_matches_oracle(tmp_path):
    assert run("simulate", "stream", "--kind", "hbt", "--seed", 1, "--n-pulses", 1_000_000,
               "--p-emit", 0.3, "--p-double", 0.01, "--out", "hbt.ttag") == 0
    assert run("correlate", "hbt.ttag", "--out", "hbt.hist", "--svg", "hbt.svg") == 0
    assert run("fit", "g2", "hbt.hist", "--t1-ns", 1.0) == 0
    doc = io.read_report(tmp_path / "hbt.report.json")
    g2 = doc["parameters"]["g2_zero"]
    oracle = mc.expected_g2_center(mc.PulseTrainConfig(p_emit=0.3, p_double=0.01))
    assert abs(g2["value"] - oracle) < 3 * g2["sigma"]
    assert (tmp_path / "hbt.svg").read_text().count("<svg") == 1


def test_cascade_histogram_is_asymmetric():
    run("simulate", "stream", "--kind", "cascade", "--seed", 2, "--n-pulses", 200_000,
        "--out", "c.ttag")
    run("correlate", "c.ttag", "--range-ps", 5000, "--bin-ps", 100, "--out", "c.hist")
    h = io.read_histogram("c.hist")
    pos = h.counts[h.centers > 0].mean()
    neg = h.counts[h.centers < 0].mean()
    assert pos > neg


def test_fit_g2_published_amplitudes(tmp_path, capsys):
    io.write_histogram(synthetic.g2_train_histogram(5.5, 428.1, 1.1, 1640.0), "low.hist")
    assert run("fit", "g2", "low.hist", "--t1-ns", 1.5, "--report", "low.json") == 0
    doc = io.read_report("low.json")
    assert doc["parameters"]["g2_zero"]["value"] == pytest.approx(0.0128, abs=1e-4)
    assert "g2(0) = 0.0128" in capsys.readouterr().out


def test_fit_gamma_hist_echoes_sample_statistics(tmp_path):
    values = synthetic.gamma_population(1175.0, 648.0, 2000, seed=3)
    (tmp_path / "w.txt").write_text("".join(f"{float(v)!r}\n" for v in values))
    assert run("fit", "gamma-hist", "w.txt", "--gamma-tl-mhz", 96) == 0
    doc = io.read_report("w.report.json")
    assert doc["parameters"]["mean"]["value"] == pytest.approx(values.mean(), rel=0.01)
    assert doc["parameters"]["sd"]["value"] == pytest.approx(values.std(ddof=1), rel=0.01)


def test_linewidth_extrapolate_report(capsys):
    argv = ["linewidth", "extrapolate", "--raw-mhz", 1800, "--raw-sigma", 400, "--irf-mhz", 175,
            "--irf-sigma", 25, "--p-over-psat", 1.2, "--n", 1.09, "--t1-ns", 1.57,
            "--coefficient", 1, "--seed", 3]
    assert run(*argv) == 0
    doc = io.read_report("linewidth.report.json")
    p = doc["parameters"]
    assert p["corrected_fwhm"]["value"] == pytest.approx(1625.0)
    assert p["dephasing"]["value"] == pytest.approx(1399.9, abs=0.1)
    assert p["zero_power_fwhm"]["value"] == pytest.approx(1501.3, abs=0.1)
    assert doc["diagnostics"]["closure_pass"] is True
    assert doc["seed"] == 3 and doc["invocation"][1:] == [str(a) for a in argv]
    assert any("coefficient 2" in n for n in doc["notes"])
    first = json.loads(open("linewidth.report.json").read())
    assert run(*argv) == 0
    second = json.loads(open("linewidth.report.json").read())
    first.pop("timestamp"), second.pop("timestamp")
    assert first == second


def test_infeasible_exit_code():
    assert run("linewidth", "extrapolate", "--raw-mhz", 150, "--irf-mhz", 175,
               "--p-over-psat", 0, "--n", 1, "--t1-ns", 1.57) == 5


def test_malformed_file_exit_code(tmp_path):
    (tmp_path / "bad.ttag").write_bytes(b"NOTATTAG" + bytes(16))
    assert run("correlate", "bad.ttag", "--out", "h.txt") == 3
    (tmp_path / "bad.txt").write_text("1550.0\t5\n1549.0\t4\n")
    assert run("fit", "peak", "bad.txt") == 3
    assert run("fit", "peak", "missing.txt") == 3


def test_non_convergence_exit_code(tmp_path, monkeypatch):
    io.write_series(synthetic.decay_trace(1.57, seed=1), "d.txt")

    def stuck(*a, **k):
        raise ConvergenceError("lifetime fit did not converge", {"reduced_chi2": 9.0})

    monkeypatch.setattr(analysis, "lifetime_fit", stuck)
    assert run("fit", "lifetime", "d.txt") == 4
    doc = io.read_report("d.report.json")
    assert doc["converged"] is False
    assert doc["diagnostics"]["reduced_chi2"] == 9.0


def test_fit_fss_auto(tmp_path, capsys):
    io.write_manifest(synthetic.polarization_series(74.0, 1544.8, 0.06, seed=1), "r.manifest")
    assert run("fit", "fss", "r.manifest") == 0
    assert "double_peak_separation" in capsys.readouterr().out
    sep = analysis.energy_wavelength_convert(25.0, 1547.0, "to_wavelength")
    io.write_manifest(synthetic.polarization_series(25.0, 1547.0, 8 * sep), "u.manifest",
                      prefix="u")
    assert run("fit", "fss", "u.manifest", "--svg", "u.svg") == 0
    doc = io.read_report("u.report.json")
    assert doc["parameters"]["fss"]["value"] == pytest.approx(25.0, abs=0.2)
    assert any("single-peak" in n for n in doc["notes"])


def test_fit_saturation_manifest(tmp_path):
    lines = []
    for i, (p, s) in enumerate(synthetic.power_series(16.4, 1.09, seed=2)):
        io.write_spectrum(s, tmp_path / f"p{i:02d}.txt")
        lines.append(f"{p!r}=p{i:02d}.txt")
    (tmp_path / "sat.sat").write_text("\n".join(lines) + "\n")
    assert run("fit", "saturation", "sat.sat") == 0
    doc = io.read_report("sat.report.json")
    assert doc["parameters"]["p_sat"]["value"] == pytest.approx(16.4, rel=0.02)


def test_fit_lifetime_bi(tmp_path):
    io.write_series(synthetic.decay_trace(0.54, tau2=10.0, fraction2=0.02, t_max=40.0, seed=4),
                    "bi.txt")
    assert run("fit", "lifetime", "bi.txt", "--model", "bi", "--svg", "bi.svg") == 0
    assert io.read_report("bi.report.json")["parameters"]["tau1"]["value"] == \
        pytest.approx(0.54, rel=0.1)


def test_batch_mode(tmp_path):
    d = tmp_path / "dots"
    d.mkdir()
    for i, tau in enumerate([1.2, 1.57, 1.9, 2.3]):
        io.write_series(synthetic.decay_trace(tau, seed=i), d / f"qd{i}.txt")
    assert run("fit", "lifetime", d, "--out-dir", tmp_path / "out", "--jobs", 3) == 0
    out = tmp_path / "out"
    names = sorted(p.name for p in out.iterdir())
    assert names == ["population.report.json"] + [f"qd{i}.report.json" for i in range(4)]
    pop = io.read_report(out / "population.report.json")
    assert list(pop["parameters"]) == [f"qd{i}:tau" for i in range(4)]
    assert pop["diagnostics"]["files"] == [f"qd{i}.txt" for i in range(4)]


def test_sweep_single_point(tmp_path, capsys):
    assert run("sweep", "--t1-ns", 1.0, "--dephasing-mhz", 100, "--p-over-psat", 0.5,
               "--out", "sw.txt") == 0
    table, _ = io.read_table("sw.txt")
    assert table.shape == (1, 7)
    assert abs(table[0, 5]) < 0.01 and abs(table[0, 6] - 1) < 0.01
