"""Time-tagged synthetic experiments and detection-log analytics.

One simulated experiment produces two event logs (Alice, Bob) of
(time ns, setting, result) triples.  Pair arrivals are Poisson over the
experiment duration; each observer re-chooses a setting every switching
cycle (100 ns by default, periodic or Poisson-renewal); joint outcomes are
drawn from the trace-rule probabilities for the current quadrant;
detection is thinned by a bin-dependent probability profile over the
cycle, pulses in the switching window of a cycle whose setting changed
are suppressed, and detections can be delayed per channel.  Bob's clock
carries a constant offset plus a slow drift relative to Alice's.

Analytics: coincidence matching by a timing-window test, per-cycle bin
histograms, the coincidence bin matrix, zero-time reconciliation between
logs, and the joint-detection ratio that quantifies how correlated arrival
phases break detection independence.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .counts import CountTable
from .errors import ConfigError, DegenerateInputError, InvalidInputError
from .quantum import geometry_for_experiment, probs_from_coincidence_ops, validate_density

DEFAULT_CYCLE_NS = 100
DEFAULT_SWITCH_NS = 14
DEFAULT_DURATION_NS = 5_000_000_000


# --- event logs -------------------------------------------------------------

@dataclass
class EventLog:
    """Detections of one observer, sorted by strictly increasing time."""

    times: np.ndarray     # int64 ns since experiment start
    settings: np.ndarray  # int8, 0 or 1
    results: np.ndarray   # int8, 0 or 1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.settings = np.asarray(self.settings, dtype=np.int8)
        self.results = np.asarray(self.results, dtype=np.int8)
        if not (len(self.times) == len(self.settings) == len(self.results)):
            raise InvalidInputError("log columns differ in length")
        if len(self.times) > 1 and not (np.diff(self.times) > 0).all():
            raise InvalidInputError("log times must be strictly increasing")
        for arr, name in ((self.settings, "settings"), (self.results, "results")):
            if len(arr) and (arr.min() < 0 or arr.max() > 1):
                raise InvalidInputError(f"{name} must be 0 or 1")

    def __len__(self):
        return len(self.times)


def write_event_log(path, log: EventLog) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_ns", "setting", "result"])
        for t, s, r in zip(log.times, log.settings, log.results):
            writer.writerow([int(t), int(s), int(r)])


def read_event_log(path) -> EventLog:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_ns", "setting", "result"]:
            raise InvalidInputError(f"unexpected event-log header in {path}")
        rows = [(int(t), int(s), int(r)) for t, s, r in reader]
    if rows:
        t, s, r = (np.array(col) for col in zip(*rows))
    else:
        t = s = r = np.array([], dtype=np.int64)
    return EventLog(times=t, settings=s, results=r)


# --- configuration ----------------------------------------------------------

def flat_profiles(p: float, cycle_ns: int = DEFAULT_CYCLE_NS) -> np.ndarray:
    """Constant per-channel detection-probability profile, shape (2, 2, cycle)."""
    return np.full((2, 2, cycle_ns), float(p))


@dataclass
class SimConfig:
    """Everything needed to simulate one experiment."""

    theta: float
    rho: np.ndarray
    pairs_per_quadrant: float
    duration_ns: float = DEFAULT_DURATION_NS
    cycle_ns: int = DEFAULT_CYCLE_NS
    switch_time_ns: int = DEFAULT_SWITCH_NS
    alice_profiles: np.ndarray | None = None   # (2, 2, cycle_ns) in [0, 1]
    bob_profiles: np.ndarray | None = None
    alice_prompt: np.ndarray = None            # (2, 2) prob of zero delay
    alice_delay_scale: np.ndarray = None       # (2, 2) exponential tail, ns
    bob_prompt: np.ndarray = None
    bob_delay_scale: np.ndarray = None
    offset_ns: float = 0.0                     # delta: Bob's log lags Alice's
    clock_drift_ns_per_s: float = 0.0          # Alice fast relative to Bob
    experiment_start_s: float = 0.0            # elapsed since series start
    alice_phase_ns: float = 0.0                # cycle phase at log zero time
    bob_phase_ns: float = 0.0
    periodic_switching: bool = True
    seed: int = 0

    def __post_init__(self):
        self.rho = validate_density(self.rho)
        if not 0 < self.switch_time_ns < self.cycle_ns:
            raise ConfigError("need 0 < switch_time_ns < cycle_ns")
        if self.duration_ns <= 0 or self.pairs_per_quadrant <= 0:
            raise ConfigError("duration and pair rate must be positive")
        if self.alice_profiles is None:
            self.alice_profiles = flat_profiles(0.05, self.cycle_ns)
        if self.bob_profiles is None:
            self.bob_profiles = flat_profiles(0.036, self.cycle_ns)
        for name, prof in (("alice_profiles", self.alice_profiles),
                           ("bob_profiles", self.bob_profiles)):
            prof = np.asarray(prof, dtype=float)
            if prof.shape != (2, 2, self.cycle_ns):
                raise ConfigError(f"{name} must have shape (2, 2, {self.cycle_ns}), "
                                  f"got {prof.shape}")
            if prof.min() < 0 or prof.max() > 1:
                raise ConfigError(f"{name} must lie in [0, 1]")
            setattr(self, name, prof)
        for name in ("alice_prompt", "bob_prompt"):
            if getattr(self, name) is None:
                setattr(self, name, np.ones((2, 2)))
        for name in ("alice_delay_scale", "bob_delay_scale"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros((2, 2)))
        for name in ("alice_prompt", "bob_prompt", "alice_delay_scale", "bob_delay_scale"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (2, 2) or arr.min() < 0:
                raise ConfigError(f"{name} must be a nonnegative (2, 2) array")
            setattr(self, name, arr)


@dataclass
class GroundTruth:
    """Per-run audit record: which log entries came from which photon pair."""

    n_pairs_generated: int
    quadrant_counts: np.ndarray       # (2, 2) pairs per (i, k)
    alice_pair_ids: np.ndarray        # int64, aligned with the Alice log
    bob_pair_ids: np.ndarray

    def detected_true_pairs(self) -> int:
        """Pairs with both photons present in the final logs."""
        return len(np.intersect1d(self.alice_pair_ids, self.bob_pair_ids))


# --- setting sequences ------------------------------------------------------

def _hash_bits(key: np.uint64, idx: np.ndarray) -> np.ndarray:
    """Deterministic pseudo-random bit per integer index (splitmix64 finalizer)."""
    z = idx.astype(np.uint64) + np.uint64(key)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z & np.uint64(1)).astype(np.int8)


def _settings_periodic(times: np.ndarray, cycle: int, switch: int, key: np.uint64):
    """Setting and switch-suppression flag per event (periodic cycles)."""
    cycles = np.floor_divide(times, cycle).astype(np.int64)
    pos = times - cycles * cycle
    settings = _hash_bits(key, cycles)
    prev = _hash_bits(key, cycles - 1)
    suppressed = (settings != prev) & (pos < switch)
    return settings, suppressed


def _settings_poisson(times: np.ndarray, cycle: int, switch: int,
                      rng: np.random.Generator):
    """Same contract with Poisson renewal switching (mean dwell = cycle)."""
    n = len(times)
    settings = np.empty(n, dtype=np.int8)
    suppressed = np.zeros(n, dtype=bool)
    if n == 0:
        return settings, suppressed
    chunk = 1_000_000
    cur_t = 0.0
    cur_set = np.int8(rng.integers(0, 2))
    last_boundary = -np.inf
    last_changed = False
    idx = 0
    while idx < n:
        gaps = rng.exponential(cycle, chunk)
        bounds = cur_t + np.cumsum(gaps)
        new_sets = rng.integers(0, 2, chunk).astype(np.int8)
        full = np.concatenate(([cur_set], new_sets))
        hi = int(np.searchsorted(times, bounds[-1], "right"))
        ev = times[idx:hi]
        pos = np.searchsorted(bounds, ev, "right")  # boundaries passed in this chunk
        settings[idx:hi] = full[pos]
        changed_here = np.empty(hi - idx, dtype=bool)
        start_here = np.empty(hi - idx, dtype=float)
        inside = pos > 0
        changed_here[inside] = full[pos[inside]] != full[pos[inside] - 1]
        start_here[inside] = bounds[pos[inside] - 1]
        changed_here[~inside] = last_changed
        start_here[~inside] = last_boundary
        suppressed[idx:hi] = changed_here & (ev - start_here < switch)
        idx = hi
        cur_t = float(bounds[-1])
        last_boundary = cur_t
        last_changed = bool(new_sets[-1] != full[-2])
        cur_set = new_sets[-1]
    return settings, suppressed


# --- simulation -------------------------------------------------------------

def simulate_experiment(config: SimConfig) -> tuple[EventLog, EventLog, GroundTruth]:
    """Generate the two detection logs for one experiment.

    Deterministic for a fixed config (all randomness flows from config.seed).
    """
    ss = np.random.SeedSequence(config.seed)
    ss_a, ss_b, ss_main = ss.spawn(3)
    key_a = np.uint64(ss_a.generate_state(1, dtype=np.uint64)[0])
    key_b = np.uint64(ss_b.generate_state(1, dtype=np.uint64)[0])
    rng = np.random.default_rng(ss_main)
    rng_sw_a = np.random.default_rng(ss_a)
    rng_sw_b = np.random.default_rng(ss_b)

    cycle, switch = config.cycle_ns, config.switch_time_ns
    T = config.duration_ns
    qc = probs_from_coincidence_ops(
        geometry_for_experiment(config.theta).coincidence_ops(), config.rho).qc
    qc = np.clip(qc, 0.0, None)

    # expected total pairs = 4 quadrants x pairs_per_quadrant
    n_pairs = int(rng.poisson(4.0 * config.pairs_per_quadrant))
    t = np.sort(rng.uniform(0.0, T, n_pairs))

    # Bob's local clock: constant offset plus slow drift over the series.
    elapsed_s = config.experiment_start_s + t * 1e-9
    t_bob = t - config.offset_ns + config.clock_drift_ns_per_s * elapsed_s

    def observer_settings(local_t, phase, key, rng_sw):
        shifted = local_t + phase
        if config.periodic_switching:
            return _settings_periodic(shifted, cycle, switch, key)
        return _settings_poisson(shifted, cycle, switch, rng_sw)

    set_a, sup_a = observer_settings(t, config.alice_phase_ns, key_a, rng_sw_a)
    set_b, sup_b = observer_settings(t_bob, config.bob_phase_ns, key_b, rng_sw_b)

    # Joint outcome per pair from the quadrant's normalized probabilities.
    probs = qc[set_a, :, set_b, :].reshape(n_pairs, 4)
    probs = probs / np.maximum(probs.sum(axis=1, keepdims=True), 1e-300)
    u = rng.random(n_pairs)
    jl = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1).clip(0, 3)
    res_a = (jl // 2).astype(np.int8)
    res_b = (jl % 2).astype(np.int8)

    def detect(local_t, phase, settings, results, suppressed, profiles,
               prompt, delay_scale):
        bins = ((local_t + phase) % cycle).astype(np.int64) % cycle
        p = profiles[settings, results, bins]
        det = (rng.random(n_pairs) < p) & ~suppressed
        delay = np.zeros(n_pairs)
        tail = rng.random(n_pairs) >= prompt[settings, results]
        scales = delay_scale[settings, results]
        draws = rng.exponential(1.0, n_pairs) * scales
        delay[tail] = draws[tail]
        rec = local_t + delay
        det &= (rec >= 0) & (rec < T)
        return det, rec

    det_a, rec_a = detect(t, config.alice_phase_ns, set_a, res_a, sup_a,
                          config.alice_profiles, config.alice_prompt,
                          config.alice_delay_scale)
    det_b, rec_b = detect(t_bob, config.bob_phase_ns, set_b, res_b, sup_b,
                          config.bob_profiles, config.bob_prompt,
                          config.bob_delay_scale)

    pair_ids = np.arange(n_pairs, dtype=np.int64)
    quadrant_counts = np.zeros((2, 2), dtype=np.int64)
    np.add.at(quadrant_counts, (set_a, set_b), 1)

    def build_log(det, rec, settings, results):
        idx = np.flatnonzero(det)
        t_int = np.round(rec[idx]).astype(np.int64)
        order = np.argsort(t_int, kind="stable")
        idx, t_int = idx[order], t_int[order]
        keep = np.ones(len(idx), dtype=bool)  # drop same-ns collisions
        if len(idx) > 1:
            keep[1:] = np.diff(t_int) > 0
        idx, t_int = idx[keep], t_int[keep]
        log = EventLog(times=t_int, settings=settings[idx], results=results[idx])
        return log, pair_ids[idx]

    log_a, ids_a = build_log(det_a, rec_a, set_a, res_a)
    log_b, ids_b = build_log(det_b, rec_b, set_b, res_b)
    truth = GroundTruth(n_pairs_generated=n_pairs, quadrant_counts=quadrant_counts,
                        alice_pair_ids=ids_a, bob_pair_ids=ids_b)
    return log_a, log_b, truth


def simulate_background_log(expected_events: float, duration_ns: float,
                            seed: int) -> EventLog:
    """An independent log of uniformly timed events with random labels."""
    rng = np.random.default_rng(seed)
    n = rng.poisson(expected_events)
    t = np.unique(np.round(np.sort(rng.uniform(0, duration_ns, n))).astype(np.int64))
    return EventLog(times=t, settings=rng.integers(0, 2, len(t)).astype(np.int8),
                    results=rng.integers(0, 2, len(t)).astype(np.int8))


# --- coincidence matching ---------------------------------------------------

@dataclass
class CoincidenceSet:
    """Matched detection pairs: column 0 indexes Alice's log, column 1 Bob's."""

    pairs: np.ndarray  # (n, 2) int64

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)

    def __len__(self):
        return len(self.pairs)


def match_coincidences(alice: EventLog, bob: EventLog, delta: float,
                       w: float) -> CoincidenceSet:
    """Pair detections whose synchronized times agree within the window.

    A pair (t_a, t_b) is a candidate when |t_b - (t_a - delta)| <= w/2
    (w is the full window width).  Alice's events are scanned in time
    order; each takes the nearest still-unused Bob candidate, so the
    matching is one-to-one.
    """
    if w <= 0:
        raise InvalidInputError("window width must be positive")
    ta = alice.times.astype(float)
    tb = bob.times.astype(float)
    targets = ta - delta
    half = w / 2.0
    lo = np.searchsorted(tb, targets - half, "left")
    hi = np.searchsorted(tb, targets + half, "right")
    used = np.zeros(len(tb), dtype=bool)
    pairs = []
    for ai in range(len(ta)):
        best, best_d = -1, np.inf
        for bi in range(lo[ai], hi[ai]):
            if used[bi]:
                continue
            d = abs(tb[bi] - targets[ai])
            if d < best_d:
                best, best_d = bi, d
        if best >= 0:
            used[best] = True
            pairs.append((ai, best))
    return CoincidenceSet(pairs=np.array(pairs, dtype=np.int64).reshape(-1, 2))


def tabulate_counts(alice: EventLog, bob: EventLog,
                    coincidences: CoincidenceSet) -> CountTable:
    """The 24 counts of one experiment from its logs and matching."""
    a = np.zeros((2, 2))
    b = np.zeros((2, 2))
    c = np.zeros((2, 2, 2, 2))
    np.add.at(a, (alice.settings, alice.results), 1.0)
    np.add.at(b, (bob.settings, bob.results), 1.0)
    if len(coincidences):
        ai = coincidences.pairs[:, 0]
        bi = coincidences.pairs[:, 1]
        np.add.at(c, (alice.settings[ai], alice.results[ai],
                      bob.settings[bi], bob.results[bi]), 1.0)
    return CountTable(a=a, b=b, c=c)


def coincidence_audit(truth: GroundTruth, coincidences: CoincidenceSet) -> dict:
    """False-positive/negative bookkeeping against the ground truth."""
    ai = coincidences.pairs[:, 0]
    bi = coincidences.pairs[:, 1]
    true_match = truth.alice_pair_ids[ai] == truth.bob_pair_ids[bi]
    matched_true = int(true_match.sum())
    detected_true = truth.detected_true_pairs()
    return {
        "matched_true_pairs": matched_true,
        "false_positives": int(len(coincidences) - matched_true),
        "false_negatives": detected_true - matched_true,
        "detected_true_pairs": detected_true,
    }


# --- log analytics ----------------------------------------------------------

def bin_histogram(log: EventLog, cycle_ns: int = DEFAULT_CYCLE_NS) -> np.ndarray:
    """Counts by (setting, result, time mod cycle), shape (2, 2, cycle)."""
    hist = np.zeros((2, 2, cycle_ns), dtype=np.int64)
    if len(log):
        bins = (log.times % cycle_ns).astype(np.int64)
        np.add.at(hist, (log.settings, log.results, bins), 1)
    return hist


def coincidence_bin_matrix(coincidences: CoincidenceSet, alice: EventLog,
                           bob: EventLog,
                           cycle_ns: int = DEFAULT_CYCLE_NS) -> np.ndarray:
    """Coincidences by (alice bin, bob bin) per quadrant, shape (2, 2, cycle, cycle)."""
    out = np.zeros((2, 2, cycle_ns, cycle_ns), dtype=np.int64)
    if len(coincidences):
        ai = coincidences.pairs[:, 0]
        bi = coincidences.pairs[:, 1]
        np.add.at(out, (alice.settings[ai], bob.settings[bi],
                        alice.times[ai] % cycle_ns, bob.times[bi] % cycle_ns), 1)
    return out


def reconcile_zero_times(hist_a: np.ndarray, hist_b: np.ndarray,
                         step: int = 20) -> tuple[int, float]:
    """Best multiple-of-`step` circular shift aligning two cycle histograms.

    Returns (shift, correlation) where rolling hist_b forward by `shift`
    bins maximizes the Pearson correlation with hist_a.
    """
    ha = np.asarray(hist_a, dtype=float).reshape(-1)
    hb = np.asarray(hist_b, dtype=float).reshape(-1)
    if ha.shape != hb.shape:
        raise InvalidInputError("histograms must have equal length")
    if ha.std() == 0 or hb.std() == 0:
        raise DegenerateInputError("correlation undefined for a constant histogram")
    best_shift, best_corr = 0, -np.inf
    for shift in range(0, len(ha), step):
        corr = float(np.corrcoef(ha, np.roll(hb, shift))[0, 1])
        if corr > best_corr:
            best_shift, best_corr = shift, corr
    return best_shift, best_corr


def diagonal_bin_distribution(offset: int, cycle_ns: int = DEFAULT_CYCLE_NS,
                              value: float | None = None) -> np.ndarray:
    """Joint arrival-bin distribution concentrated on beta - alpha = offset."""
    if value is None:
        value = 1.0 / cycle_ns
    lam = np.zeros((cycle_ns, cycle_ns))
    alpha = np.arange(cycle_ns)
    lam[alpha, (alpha + offset) % cycle_ns] = value
    return lam


def joint_detection_ratio(pa_profile: np.ndarray, pb_profile: np.ndarray,
                          lam: np.ndarray) -> float:
    """Joint detection probability over the product of marginal means.

    Equals 1 when arrival bins are independent/uniform; deviates when the
    joint bin distribution is concentrated (correlated arrival phases).
    """
    pa = np.asarray(pa_profile, dtype=float).reshape(-1)
    pb = np.asarray(pb_profile, dtype=float).reshape(-1)
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (len(pa), len(pb)):
        raise InvalidInputError("lambda shape must match the two profiles")
    if abs(lam.sum() - 1.0) > 1e-9:
        raise InvalidInputError("lambda must sum to 1")
    if pa.min() < 0 or pa.max() > 1 or pb.min() < 0 or pb.max() > 1:
        raise InvalidInputError("profiles must lie in [0, 1]")
    mean_a, mean_b = pa.mean(), pb.mean()
    if mean_a == 0 or mean_b == 0:
        raise DegenerateInputError("zero-mean profile in joint detection ratio")
    joint = float(np.einsum("a,b,ab->", pa, pb, lam))
    return joint / (mean_a * mean_b)


def drift_offset_scan(delta0: float, drift_ns_per_s: float, elapsed_s,
                      cycle_ns: int = DEFAULT_CYCLE_NS):
    """Predicted synchronization offset after elapsed seconds of clock drift.

    offset(t) = delta0 - drift * t, wrapped into [-cycle/2, cycle/2).
    """
    if not np.all(np.isfinite(drift_ns_per_s)):
        raise InvalidInputError("drift must be finite")
    off = delta0 - drift_ns_per_s * np.asarray(elapsed_s, dtype=float)
    half = cycle_ns / 2.0
    return ((off + half) % cycle_ns) - half
