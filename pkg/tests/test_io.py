import json
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emitterlab import io, photon_mc as mc, synthetic
from emitterlab.data import DataSeries, Spectrum
from emitterlab.errors import ConfigError, DomainError, FormatError
from emitterlab.plotting import emit_svg_plot


def scratch():
    return tempfile.TemporaryDirectory()


# ------------------------------------------------------------ spectra

def test_two_line_spectrum(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1550.000000\t100\n1550.020000\t50\n")
    s = io.read_spectrum(p)
    assert len(s) == 2 and s.counts.tolist() == [100.0, 50.0]


def test_power_metadata_visible(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("# power_uW=16.4\n1550.000000\t100\n1550.020000\t50\n")
    assert io.read_spectrum(p).meta_float("power_uW") == 16.4


def test_descending_axis_names_line(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1550.020000\t100\n1550.000000\t50\n")
    with pytest.raises(FormatError) as err:
        io.read_spectrum(p)
    assert err.value.line == 2


@pytest.mark.parametrize("body, line", [
    ("1550.0\t1\n1550.1\t-3\n", 2),
    ("1550.0\t1,000\n", 1),
    ("1550.0\t1\t1\n1550.1\t1\n", 2),
    ("1550.0 1\n", 1),
    ("1550.0\tnan\n", 1),
])
def test_malformed_spectra(tmp_path, body, line):
    p = tmp_path / "s.txt"
    p.write_text(body)
    with pytest.raises(FormatError) as err:
        io.read_spectrum(p)
    assert err.value.line == line


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=50),
       st.floats(400.0, 2000.0), st.booleans())
@settings(max_examples=40)
def test_spectrum_byte_round_trip(counts, start, with_sigma):
    axis = np.round(start + 0.013 * np.arange(len(counts)), 6)
    sigma = np.sqrt(np.maximum(counts, 1)) if with_sigma else None
    s = Spectrum(axis, np.asarray(counts, float), sigma, metadata={"power_uW": "16.4"})
    with scratch() as d:
        a, b = Path(d, "a.txt"), Path(d, "b.txt")
        io.write_spectrum(s, a)
        back = io.read_spectrum(a)
        io.write_spectrum(back, b)
        assert a.read_bytes() == b.read_bytes()
    assert np.array_equal(back.counts, s.counts)
    assert back.metadata["power_uW"] == "16.4"
    if with_sigma:
        assert np.array_equal(back.sigma, sigma)


# ------------------------------------------------------------ timetags

def test_empty_stream_is_24_bytes(tmp_path):
    p = tmp_path / "e.ttag"
    io.write_timetags(mc.ClickStream([np.zeros(0, np.int64)] * 2, 0), p)
    assert p.stat().st_size == 24
    assert p.read_bytes()[:8] == b"EMLTTAG1"
    assert io.read_timetags(p).n_clicks == 0


def test_text_binary_twin(tmp_path):
    t, b = tmp_path / "t.txt", tmp_path / "b.ttag"
    t.write_text("0\t12500\n")
    io.write_timetags(mc.ClickStream([np.array([12500])], 12500), b)
    assert io.read_timetags(t).same_events(io.read_timetags(b))
    assert len(b.read_bytes()) == 24 + 16


channel_lists = st.lists(st.lists(st.integers(0, 2**62), max_size=30), min_size=1, max_size=4)


@given(channel_lists)
@settings(max_examples=40)
def test_timetag_round_trips(chans):
    stream = mc.ClickStream([np.sort(np.asarray(c, dtype=np.int64)) for c in chans],
                            max([max(c, default=0) for c in chans]))
    with scratch() as d:
        b1, b2, t = Path(d, "1.ttag"), Path(d, "2.ttag"), Path(d, "t.txt")
        io.write_timetags(stream, b1)
        back = io.read_timetags(b1)
        io.write_timetags(back, b2)
        assert b1.read_bytes() == b2.read_bytes()
        io.write_timetags(stream, t, format="text")
        twin = io.read_timetags(t)
    for x, y in zip(stream.channels, back.channels):
        assert np.array_equal(x, y)
    assert back.same_events(twin)


def test_simulated_stream_round_trip(tmp_path):
    s = mc.simulate_hbt(mc.PulseTrainConfig(n_pulses=50_000, p_emit=0.3, p_double=0.01,
                                            jitter_sigma=30, dark_rate=1e4, seed=3))
    p = tmp_path / "s.ttag"
    io.write_timetags(s, p)
    assert p.stat().st_size == 24 + 16 * s.n_clicks
    assert io.read_timetags(p).same_events(s)


def test_timetag_errors(tmp_path):
    good = tmp_path / "g.ttag"
    io.write_timetags(mc.ClickStream([np.array([1, 2, 3])], 3), good)
    raw = good.read_bytes()
    cases = {
        "magic": b"XXXXXXXX" + raw[8:],
        "version": raw[:8] + (7).to_bytes(4, "little") + raw[12:],
        "record": raw[:-5],
        "header": raw[:20],
    }
    for name, data in cases.items():
        p = tmp_path / f"{name}.ttag"
        p.write_bytes(data)
        with pytest.raises(FormatError):
            io.read_timetags(p)
    p = tmp_path / "order.txt"
    p.write_text("0\t20\n0\t10\n")
    with pytest.raises(FormatError):
        io.read_timetags(p)


# ------------------------------------------------------------ histograms, series, manifests

def test_histogram_round_trip(tmp_path):
    s = mc.simulate_hbt(mc.PulseTrainConfig(n_pulses=20_000, p_emit=0.3, seed=1))
    h = mc.correlate(s, 0, 1, 100, 50_000)
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    io.write_histogram(h, a)
    back = io.read_histogram(a)
    io.write_histogram(back, b)
    assert a.read_bytes() == b.read_bytes()
    assert np.array_equal(back.counts, h.counts)
    assert (back.bin_width, back.range, back.total_starts) == (100, 50_000, h.total_starts)


def test_series_round_trip(tmp_path):
    d = synthetic.decay_trace(1.57, seed=2)
    p = tmp_path / "d.txt"
    io.write_series(d, p)
    back = io.read_series(p)
    assert np.array_equal(back.x, d.x) and np.array_equal(back.y, d.y)
    assert np.array_equal(back.sigma, d.sigma)


def test_manifest_round_trip(tmp_path):
    series = synthetic.polarization_series(74.0, 1544.8, 0.06, seed=1,
                                           angles=[0.0, 22.5, 45.0, 90.0])
    io.write_manifest(series, tmp_path / "m.txt")
    back = io.read_manifest(tmp_path / "m.txt")
    assert back.angle_convention == "analyzer"
    assert back.angles.tolist() == [0.0, 22.5, 45.0, 90.0]
    for a, b in zip(series.spectra, back.spectra):
        assert np.array_equal(a.counts, b.counts)


def test_manifest_errors(tmp_path):
    series = synthetic.polarization_series(74.0, 1544.8, 0.06, angles=[0.0, 45.0])
    io.write_manifest(series, tmp_path / "m.txt")
    text = (tmp_path / "m.txt").read_text()
    (tmp_path / "dup.txt").write_text(text + "0=angle_000.000.txt\n")
    with pytest.raises(FormatError, match="duplicate"):
        io.read_manifest(tmp_path / "dup.txt")
    (tmp_path / "miss.txt").write_text(text + "90=nowhere.txt\n")
    with pytest.raises(FormatError, match="not found"):
        io.read_manifest(tmp_path / "miss.txt")


# ------------------------------------------------------------ config

def test_config_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# etalon\nirf_fwhm_mhz = 175\nseed = 4  # fixed\nbackground_mode = no\n")
    cfg = io.read_config(p)
    assert cfg.irf_fwhm_mhz == 175.0 and isinstance(cfg.irf_fwhm_mhz, float)
    assert cfg.seed == 4 and cfg.background_mode is False
    assert cfg.set() == {"irf_fwhm_mhz": 175.0, "seed": 4, "background_mode": False}


def test_config_errors(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="seed"):
        io.read_config(p)
    p.write_text("sead = 1\n")
    with pytest.raises(ConfigError, match="sead"):
        io.read_config(p)
    p.write_text("seed = 1.5\n")
    with pytest.raises(ConfigError):
        io.read_config(p)
    p.write_text("")
    assert io.read_config(p).set() == {}


# ------------------------------------------------------------ reports

def test_report_round_trip_and_schema(tmp_path):
    data = tmp_path / "in.txt"
    data.write_text("1\t2\n")
    doc = io.make_report("fit peak", ["emitterlab", "fit", "peak", str(data)], 7, [data],
                         {"fwhm": (1596.37, 0.5, "MHz"), "bad": (float("nan"), 0.0, "")},
                         diagnostics={"reduced_chi2": 1.02}, notes=["ok"],
                         timestamp="2026-01-01T00:00:00Z")
    p = tmp_path / "r.json"
    io.write_report(doc, p)
    back = io.read_report(p)
    assert back == doc
    assert back["parameters"]["bad"]["value"] is None
    assert back["inputs"][0]["sha256"] == io.file_digest(data)
    assert io.dump_report(back) == p.read_text()
    with pytest.raises(FormatError):
        io.write_report({**doc, "converged": "yes"}, tmp_path / "x.json")
    assert not (tmp_path / "x.json").exists()


def test_report_identical_on_rerun(tmp_path):
    data = tmp_path / "in.txt"
    data.write_text("1\t2\n")
    a = io.make_report("c", ["a"], 1, [data], {"x": (1.0, 0.1, "u")}, timestamp="t1")
    b = io.make_report("c", ["a"], 1, [data], {"x": (1.0, 0.1, "u")}, timestamp="t2")
    assert {**a, "timestamp": ""} == {**b, "timestamp": ""}


# ------------------------------------------------------------ SVG

@pytest.mark.parametrize("style", ["line", "scatter", "histogram", "log_y"])
def test_svg_is_deterministic(tmp_path, style):
    x = np.linspace(0, 10, 50)
    data = [("decay", x, 1 + 100 * np.exp(-x / 1.57)), ("fit", x, 1 + 99 * np.exp(-x / 1.6))]
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_svg_plot(data, style, a, "t (ns)", "counts")
    emit_svg_plot(data, style, b, "t (ns)", "counts")
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.lstrip().startswith("<?xml") and "</svg>" in text


def test_svg_empty_dataset(tmp_path):
    with pytest.raises(DomainError):
        emit_svg_plot([("x", [], [])], "line", tmp_path / "e.svg")
    with pytest.raises(DomainError):
        emit_svg_plot([("x", [1], [1])], "pie", tmp_path / "e.svg")


def test_million_record_file(tmp_path):
    times = np.arange(1_000_000, dtype=np.int64) * 37
    stream = mc.ClickStream([times[::2], times[1::2]], int(times[-1]))
    p = tmp_path / "big.ttag"
    io.write_timetags(stream, p)
    assert p.stat().st_size == 24 + 16 * 1_000_000
    assert io.read_timetags(p).same_events(stream)
