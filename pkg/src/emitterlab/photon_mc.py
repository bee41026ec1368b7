"""Seeded photon click streams and coincidence histograms.

Timestamps are integer picoseconds. Every random process draws from its own
named substream of :class:`emitterlab.rng.Stream`, so a stream is a pure
function of its config (seed included).
"""

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .rng import Stream

PS_PER_NS = 1000.0


def _check_prob(name, p):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p}")


def _pair(value):
    if np.ndim(value) == 0:
        return (float(value), float(value))
    a, b = value
    return (float(a), float(b))


@dataclass(frozen=True)
class PulseTrainConfig:
    rep_period: int = 12_500          # ps (80 MHz)
    n_pulses: int = 100_000
    p_emit: float = 0.3               # P(at least one photon per pulse)
    p_double: float = 0.0             # P(two photons per pulse)
    t1: float = 1.64                  # ns
    detector_efficiency: tuple = (1.0, 1.0)
    dark_rate: float = 0.0            # counts/s per channel
    jitter_sigma: float = 0.0         # ps
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "detector_efficiency", _pair(self.detector_efficiency))
        if self.rep_period <= 0 or self.n_pulses < 0:
            raise DomainError("rep_period must be positive and n_pulses non-negative")
        _check_prob("p_emit", self.p_emit)
        _check_prob("p_double", self.p_double)
        if self.p_double > self.p_emit:
            raise DomainError("p_double cannot exceed p_emit")
        for eta in self.detector_efficiency:
            _check_prob("detector_efficiency", eta)
        if self.t1 <= 0 or self.dark_rate < 0 or self.jitter_sigma < 0:
            raise DomainError("t1 must be positive; dark_rate and jitter non-negative")


@dataclass(frozen=True)
class CascadeConfig:
    rep_period: int = 12_500
    n_pulses: int = 100_000
    p_xx: float = 0.2
    p_x_only: float = 0.1
    tau_xx: float = 0.54              # ns
    tau_x: float = 1.59               # ns
    efficiencies: tuple = (1.0, 1.0)  # (XX channel, X channel)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "efficiencies", _pair(self.efficiencies))
        _check_prob("p_xx", self.p_xx)
        _check_prob("p_x_only", self.p_x_only)
        if self.p_xx + self.p_x_only > 1.0:
            raise DomainError("p_xx + p_x_only must not exceed 1")
        if self.tau_xx <= 0 or self.tau_x <= 0:
            raise DomainError("lifetimes must be positive")
        if self.rep_period <= 0 or self.n_pulses < 0:
            raise DomainError("rep_period must be positive and n_pulses non-negative")
        for eta in self.efficiencies:
            _check_prob("efficiency", eta)


@dataclass(frozen=True)
class BlinkingConfig:
    on_dwell: float = 250.0           # ns
    off_dwell: float = 250.0          # ns
    base: PulseTrainConfig = field(default_factory=PulseTrainConfig)

    def __post_init__(self):
        if self.on_dwell <= 0 or self.off_dwell <= 0:
            raise DomainError("dwell times must be positive")


@dataclass
class ClickStream:
    channels: list                    # sorted int64 timestamp arrays, ps
    duration: int                     # ps
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channels = [np.asarray(c, dtype=np.int64) for c in self.channels]

    def channel(self, index):
        if index < len(self.channels):
            return self.channels[index]
        return np.zeros(0, dtype=np.int64)

    @property
    def n_clicks(self):
        return sum(len(c) for c in self.channels)

    def same_events(self, other):
        n = max(len(self.channels), len(other.channels))
        return all(np.array_equal(self.channel(i), other.channel(i)) for i in range(n))


@dataclass
class CorrelationHistogram:
    bin_width: int                    # ps
    range: int                        # ps, histogram spans (-range, range)
    counts: np.ndarray
    total_starts: int = 0
    total_stops: int = 0

    @property
    def edges(self):
        return np.arange(-self.range, self.range + 1, self.bin_width)

    @property
    def centers(self):
        return -self.range + (np.arange(len(self.counts)) + 0.5) * self.bin_width

    def mirrored(self):
        return CorrelationHistogram(self.bin_width, self.range, self.counts[::-1].copy(),
                                    self.total_stops, self.total_starts)


def _finish(times_per_channel, n_pulses, rep_period, metadata):
    channels = []
    for t in times_per_channel:
        t = np.sort(np.maximum(np.floor(t), 0.0).astype(np.int64))
        channels.append(t)
    last = max((int(c[-1]) for c in channels if c.size), default=0)
    duration = max(int(n_pulses) * int(rep_period), last)
    return ClickStream(channels, duration, metadata)


def _photon_numbers(config, stream, gate=None):
    u = stream.uniform(config.n_pulses)
    n = (u < config.p_emit).astype(np.int64) + (u < config.p_double)
    if gate is not None:
        n[~gate] = 0
    return n


def _pulse_train_clicks(config, gate=None):
    names = ("number", "delay", "route", "detect", "jitter", "dark0", "dark1")
    s = {name: Stream(config.seed, name) for name in names}
    n = _photon_numbers(config, s["number"], gate)
    pulse_index = np.repeat(np.arange(config.n_pulses, dtype=np.int64), n)
    m = pulse_index.size
    t = pulse_index * float(config.rep_period) + s["delay"].exponential(m, config.t1 * PS_PER_NS)
    route = (s["route"].uniform(m) >= 0.5).astype(np.int64)
    eta = np.asarray(config.detector_efficiency)[route]
    kept = s["detect"].uniform(m) < eta
    if config.jitter_sigma > 0:
        t = t + s["jitter"].normal(m, config.jitter_sigma)
    span = config.n_pulses * float(config.rep_period)
    out = []
    for ch in (0, 1):
        clicks = t[kept & (route == ch)]
        dark = s[f"dark{ch}"].poisson_times(config.dark_rate * 1e-12, span)
        out.append(np.concatenate([clicks, dark]))
    meta = {"emitted_photons": int(m), "pulses_with_photons": int(np.count_nonzero(n))}
    return out, meta


def _echo(config):
    d = asdict(config)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


def simulate_hbt(config):
    """Pulsed source behind a 50:50 splitter and two detectors (channels 0, 1).

    Per pulse 0, 1 or 2 photons (probabilities 1 - p_emit, p_emit - p_double,
    p_double), each delayed by an independent exponential(t1), routed to
    either detector with probability 1/2, kept with the detector efficiency,
    and smeared by Gaussian jitter before truncation to integer ps.
    """
    times, meta = _pulse_train_clicks(config)
    meta.update(kind="hbt", config=_echo(config))
    return _finish(times, config.n_pulses, config.rep_period, meta)


def simulate_cascade(config):
    """Biexciton-exciton cascade: channel 0 carries XX photons, channel 1 X."""
    s = {name: Stream(config.seed, name)
         for name in ("kind", "xx_delay", "x_delay", "detect_xx", "detect_x")}
    u = s["kind"].uniform(config.n_pulses)
    cascade = u < config.p_xx
    lone = (u >= config.p_xx) & (u < config.p_xx + config.p_x_only)
    rep = float(config.rep_period)

    xx_pulses = np.nonzero(cascade)[0]
    t_xx = xx_pulses * rep + s["xx_delay"].exponential(xx_pulses.size, config.tau_xx * PS_PER_NS)
    x_from_xx = t_xx + s["x_delay"].exponential(xx_pulses.size, config.tau_x * PS_PER_NS)
    lone_pulses = np.nonzero(lone)[0]
    x_lone = lone_pulses * rep + s["x_delay"].exponential(lone_pulses.size,
                                                          config.tau_x * PS_PER_NS)
    t_x = np.concatenate([x_from_xx, x_lone])

    keep_xx = s["detect_xx"].uniform(t_xx.size) < config.efficiencies[0]
    keep_x = s["detect_x"].uniform(t_x.size) < config.efficiencies[1]
    meta = {"kind": "cascade", "config": _echo(config),
            "cascades": int(xx_pulses.size), "lone_excitons": int(lone_pulses.size)}
    return _finish([t_xx[keep_xx], t_x[keep_x]], config.n_pulses, config.rep_period, meta)


def telegraph_gate(config):
    """Boolean ON mask over pulses from a two-state exponential dwell process."""
    base = config.base
    s = Stream(base.seed, "telegraph")
    span_ns = base.n_pulses * base.rep_period / PS_PER_NS
    p_on = config.on_dwell / (config.on_dwell + config.off_dwell)
    state = bool(s.uniform(1)[0] < p_on)
    # batches hold an even number of dwells so ON/OFF alternation stays aligned
    batch = 2 * (int(span_ns / (config.on_dwell + config.off_dwell)) + 8)
    first, second = ((config.on_dwell, config.off_dwell) if state
                     else (config.off_dwell, config.on_dwell))
    means = np.tile([first, second], batch // 2)
    pieces, t = [], 0.0
    while t < span_ns:
        ends = t + np.cumsum(s.exponential(batch) * means)
        pieces.append(ends)
        t = ends[-1]
    switches = np.concatenate(pieces)
    pulse_times = np.arange(base.n_pulses) * base.rep_period / PS_PER_NS
    n_switches = np.searchsorted(switches, pulse_times, side="right")
    return np.where(n_switches % 2 == 0, state, not state)


def simulate_blinking(config):
    """Pulse train gated by a telegraph process; OFF pulses emit nothing."""
    gate = telegraph_gate(config)
    times, meta = _pulse_train_clicks(config.base, gate)
    meta.update(kind="blinking", config={"on_dwell": config.on_dwell,
                                         "off_dwell": config.off_dwell,
                                         "base": _echo(config.base)},
                on_pulses=int(np.count_nonzero(gate)))
    return _finish(times, config.base.n_pulses, config.base.rep_period, meta)


def correlate(stream, chan_a, chan_b, bin_width=100, range=None, chunk=200_000):
    """Full (all-pairs) coincidence histogram of delays t_b - t_a.

    Bins are mirror-symmetric about zero delay: positive delays fall in
    [k w, (k + 1) w), negative ones in (-(k + 1) w, -k w]. Exact zero delays
    count in the first positive bin. Only pairs with |delay| < range count.
    """
    if range is None:
        range = 16 * int(stream.metadata.get("config", {}).get("rep_period", 12_500))
    bin_width, range = int(bin_width), int(range)
    if bin_width <= 0 or range <= 0 or (2 * range) % bin_width:
        raise DomainError("bin_width must divide 2 * range")
    n_bins = 2 * range // bin_width
    half = n_bins // 2
    a = stream.channel(chan_a)
    b = stream.channel(chan_b)
    counts = np.zeros(n_bins, dtype=np.int64)
    if a.size and b.size:
        for start in np.arange(0, a.size, chunk):
            ta = a[start:start + chunk]
            lo = np.searchsorted(b, ta - range, side="right")
            hi = np.searchsorted(b, ta + range, side="left")
            per = hi - lo
            total = int(per.sum())
            if total == 0:
                continue
            owner = np.repeat(np.arange(ta.size), per)
            offsets = np.arange(total) - np.repeat(np.cumsum(per) - per, per)
            delay = b[lo[owner] + offsets] - ta[owner]
            idx = np.where(delay >= 0, half + delay // bin_width,
                           half - 1 - (-delay) // bin_width)
            counts += np.bincount(idx, minlength=n_bins)
    return CorrelationHistogram(bin_width, range, counts, int(a.size), int(b.size))


def _pulse_outcomes(config):
    """Exhaustive (probability, clicks_a, clicks_b) over one pulse's outcomes."""
    eta = config.detector_efficiency
    numbers = ((0, 1.0 - config.p_emit),
               (1, config.p_emit - config.p_double),
               (2, config.p_double))
    for n, p_n in numbers:
        if p_n == 0:
            continue
        for routes in itertools.product((0, 1), repeat=n):
            for detected in itertools.product((True, False), repeat=n):
                p = p_n * 0.5**n
                clicks = [0, 0]
                for ch, hit in zip(routes, detected):
                    p *= eta[ch] if hit else 1.0 - eta[ch]
                    clicks[ch] += hit
                yield p, clicks[0], clicks[1]


def expected_peak_areas(config):
    """Expected coincidences per pulse (centre peak) and per pulse pair (side peak)."""
    outcomes = list(_pulse_outcomes(config))
    center = sum(p * a * b for p, a, b in outcomes)
    mean_a = sum(p * a for p, a, _ in outcomes)
    mean_b = sum(p * b for p, _, b in outcomes)
    return center, mean_a * mean_b


def expected_g2_center(config):
    """Centre-to-side peak area ratio by enumeration of single-pulse outcomes."""
    center, side = expected_peak_areas(config)
    if side == 0:
        raise DomainError("no side-peak coincidences: nothing is detected")
    return center / side
