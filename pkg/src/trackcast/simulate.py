"""Synthetic track degradation simulator.

The simulator maintains an absolute vertical alignment u per track side
(mm, zero = design level) and observes it through the 10 m chord offset:
v(l) = u(l) - (u(l-5) + u(l+5))/2 + measurement noise.

Degradation is local: settlement concentrates at weak spots (rail joints,
structure boundaries, and scattered random spots), because settlement
spread uniformly over long stretches is invisible to the chord
measurement. Each weak spot is a narrow bump in the settlement-rate field;
its amplitude grows with ballast age and is modulated in time by tonnage
and rainfall. u decreases pointwise at the rate field times elapsed days,
plus an optional random-walk roughness. The chord image of a settling spot
is the usual versine signature: a trough at the spot and half-amplitude
rises 5 m to each side.

Maintenance is corrective: when the measured alignment drops below the
trigger threshold at an inspection, the contiguous run of offending
positions (dilated by a margin) is scheduled for repair before the next
inspection and flagged at the scheduling inspection. A repair scales the
patch of u toward zero by the drawn category's effectiveness (an
effectiveness of 1 restores u to exactly 0 there). Ballast replacement
additionally resets ballast age.

Eight auxiliary input channels (lateral alignments, gauge, cross level,
twist, two vibrations, speed) are low-order autoregressive processes
loosely coupled to the vertical channels; they exist so the measured panel
has its full 10 channels, not to model their physics.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import CHANNELS, TrackDataset
from .errors import ConfigurationError, DimensionError
from .exogenous import (MAINTENANCE_CATEGORIES, STRUCTURE_CATEGORIES,
                        ExogenousBundle)
from .rng import substream

CHORD_HALF = 5  # the 10 m chord measures against points 5 m away
BRIDGE_RATE_FACTOR = 0.25  # bridges are not ballasted and barely settle
SIDE_FACTOR = (1.0, 0.92)  # left rail settles slightly faster than right


def chord_offset(u: np.ndarray, sigma: float = 0.0, rng=None) -> np.ndarray:
    """Measured relative alignment v(l) = u(l) - (u(l-5) + u(l+5))/2 + noise.

    Ends are extended by point reflection (odd mirror), which keeps the
    measurement exactly zero for affine u at every position, including the
    first and last five.
    """
    u = np.asarray(u, dtype=np.float64)
    length = u.shape[-1]
    if length < 2 * CHORD_HALF + 1:
        raise DimensionError(
            f"chord_offset needs at least {2 * CHORD_HALF + 1} positions, got {length}")
    pad = [(0, 0)] * (u.ndim - 1) + [(CHORD_HALF, CHORD_HALF)]
    up = np.pad(u, pad, mode="reflect", reflect_type="odd")
    v = u - 0.5 * (up[..., :length] + up[..., 2 * CHORD_HALF:])
    if sigma > 0.0:
        if rng is None:
            raise ConfigurationError("chord_offset: sigma > 0 requires an rng")
        v = v + rng.normal(0.0, sigma, size=v.shape)
    return v


@dataclass
class TrackScenario:
    """Simulator configuration; defaults define the desk-scale scenario."""

    positions: int = 512
    inspections: int = 120
    interval_days: float = 10.0
    interval_jitter_days: float = 2.0

    # settlement model (rates in mm/day of absolute alignment)
    base_rate: float = 0.002      # slow uniform settlement, chord-invisible
    spot_rate: float = 0.05       # peak rate of a unit-amplitude weak spot
    sens_joint: float = 1.0       # weak-spot amplitude at rail joints
    sens_boundary: float = 0.8    # weak-spot amplitude at structure boundaries
    weak_spot_density: float = 0.02  # expected extra weak spots per position
    sens_ballast_age: float = 0.04   # amplitude gain per year of ballast age
    sens_tonnage: float = 0.3     # rate modulation per unit of tonnage anomaly
    sens_rainfall: float = 0.15   # rate modulation per unit of rainfall anomaly

    maintenance_threshold: float = -4.0  # schedule repair when v < threshold
    repair_margin: int = 4               # positions added on each side of a run
    scheduling_delay: int = 0            # inspections between trigger and work
    category_weights: tuple = (0.18, 0.30, 0.14, 0.08, 0.05, 0.05, 0.08, 0.06, 0.06)
    category_effectiveness: tuple = (0.9, 0.97, 0.8, 0.95, 0.5, 0.5, 0.75, 0.9, 0.45)

    measurement_sigma: float = 0.25  # mm, added to the two vertical channels
    process_sigma: float = 0.015     # mm/sqrt(day) random-walk roughness of u
    tonnage_per_day: float = 1.0
    rain_rate: float = 3.0           # mean mm/day, seasonally modulated
    seed: int = 0

    def validate(self):
        if self.positions < 2 * CHORD_HALF + 1:
            raise ConfigurationError(
                f"positions must be >= {2 * CHORD_HALF + 1}, got {self.positions}")
        if self.inspections < 2:
            raise ConfigurationError("inspections must be >= 2")
        if not 0 < self.interval_days:
            raise ConfigurationError("interval_days must be positive")
        if not 0 <= self.interval_jitter_days < self.interval_days:
            raise ConfigurationError(
                "interval jitter must be non-negative and below the interval")
        if len(self.category_weights) != len(MAINTENANCE_CATEGORIES):
            raise ConfigurationError("category_weights needs 9 entries")
        if abs(sum(self.category_weights) - 1.0) > 1e-9:
            raise ConfigurationError("category_weights must sum to 1")
        if len(self.category_effectiveness) != len(MAINTENANCE_CATEGORIES):
            raise ConfigurationError("category_effectiveness needs 9 entries")
        for e in self.category_effectiveness:
            if not 0.0 < e <= 1.0:
                raise ConfigurationError(f"effectiveness {e} outside (0, 1]")
        for name in ("measurement_sigma", "process_sigma", "base_rate",
                     "spot_rate", "sens_ballast_age", "sens_tonnage",
                     "sens_rainfall", "sens_boundary", "sens_joint",
                     "weak_spot_density"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.scheduling_delay < 0:
            raise ConfigurationError("scheduling_delay must be >= 0")
        if self.repair_margin < 0:
            raise ConfigurationError("repair_margin must be >= 0")

    def content_hash(self) -> str:
        payload = repr(sorted(asdict(self).items())).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def _segment_labels(rng, length: int, mean_run: int, n_labels: int,
                    weights=None) -> np.ndarray:
    """Piecewise-constant integer labels with geometric run lengths."""
    labels = np.empty(length, dtype=np.int64)
    pos = 0
    prev = -1
    while pos < length:
        run = int(rng.geometric(1.0 / mean_run))
        lab = int(rng.choice(n_labels, p=weights))
        if lab == prev:  # force a change so boundaries are real
            lab = (lab + 1) % n_labels
        labels[pos:pos + run] = lab
        prev = lab
        pos += run
    return labels


def _add_bumps(profile: np.ndarray, centers, amplitudes, half_widths):
    """Accumulate triangular bumps into a rate-amplitude profile."""
    length = profile.shape[0]
    for c, amp, hw in zip(centers, amplitudes, half_widths):
        lo = max(0, int(c) - int(hw))
        hi = min(length, int(c) + int(hw) + 1)
        for l in range(lo, hi):
            profile[l] += amp * (1.0 - abs(l - int(c)) / (int(hw) + 1.0))


def _merge_intervals(intervals):
    """Merge overlapping [lo, hi) intervals, preserving order."""
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


@dataclass
class _Event:
    """A scheduled repair: flagged at inspection t, applied before t+1."""
    t: int
    lo: int
    hi: int
    category: int


def simulate(scenario: TrackScenario) -> TrackDataset:
    """Run the scenario and return the full synthetic dataset."""
    scenario.validate()
    L = scenario.positions
    T = scenario.inspections
    n_cat = len(MAINTENANCE_CATEGORIES)

    r_dates = substream(scenario.seed, "sim.dates")
    r_struct = substream(scenario.seed, "sim.structure")
    r_joint = substream(scenario.seed, "sim.joints")
    r_spots = substream(scenario.seed, "sim.spots")
    r_ballast = substream(scenario.seed, "sim.ballast")
    r_rain = substream(scenario.seed, "sim.rain")
    r_ton = substream(scenario.seed, "sim.tonnage")
    r_proc = substream(scenario.seed, "sim.process")
    r_meas = substream(scenario.seed, "sim.measure")
    r_maint = substream(scenario.seed, "sim.maintenance")
    r_aux = substream(scenario.seed, "sim.aux")

    # inspection dates: unequal intervals, strictly increasing integer days
    gaps = np.maximum(1.0, np.round(
        scenario.interval_days + r_dates.uniform(
            -scenario.interval_jitter_days, scenario.interval_jitter_days, size=T)))
    gaps[0] = 0.0
    dates = np.cumsum(gaps)

    # static spatial context
    structure = _segment_labels(r_struct, L, mean_run=max(16, L // 10),
                                n_labels=len(STRUCTURE_CATEGORIES),
                                weights=[0.10, 0.15, 0.10, 0.40, 0.25])
    boundaries = np.nonzero(np.diff(structure) != 0)[0]

    joint_positions = np.cumsum(r_joint.integers(18, 42, size=max(1, L // 18)))
    joint_positions = joint_positions[joint_positions < L]
    joint_types = r_joint.integers(0, 4, size=joint_positions.size)
    rail_joint = np.zeros((4, L))
    rail_joint[joint_types, joint_positions] = 1.0

    # weak-spot amplitude profile: settlement concentrates here
    spot_profile = np.zeros(L)
    _add_bumps(spot_profile, joint_positions,
               scenario.sens_joint * r_spots.uniform(0.7, 1.3, joint_positions.size),
               r_spots.integers(2, 5, joint_positions.size))
    _add_bumps(spot_profile, boundaries,
               scenario.sens_boundary * r_spots.uniform(0.7, 1.3, boundaries.size),
               r_spots.integers(3, 7, boundaries.size))
    n_extra = int(round(scenario.weak_spot_density * L))
    if n_extra:
        extra_pos = np.sort(r_spots.choice(L, size=n_extra, replace=False))
        _add_bumps(spot_profile, extra_pos,
                   r_spots.uniform(0.4, 1.2, n_extra),
                   r_spots.integers(2, 7, n_extra))

    bridge = structure == STRUCTURE_CATEGORIES.index("bridge")
    ballast_segments = _segment_labels(r_ballast, L, mean_run=max(12, L // 12),
                                       n_labels=12)
    segment_ages = r_ballast.uniform(0.0, 25.0, size=12)
    age = segment_ages[ballast_segments]
    age[bridge] = 0.0

    # temporal drivers (uniform along the track, like the mainline data)
    daily_ton = scenario.tonnage_per_day * np.maximum(
        0.0, 1.0 + 0.15 * r_ton.standard_normal(T))
    tonnage = daily_ton * np.maximum(gaps, 1.0)
    tonnage[0] = scenario.tonnage_per_day * scenario.interval_days

    rainfall = np.zeros((T, 4))
    for t in range(1, T):
        n_days = int(gaps[t])
        season = 1.0 + 0.8 * np.sin(2.0 * np.pi * dates[t] / 365.0)
        daily = r_rain.gamma(0.6, scenario.rain_rate * max(season, 0.05),
                             size=max(n_days, 1))
        acc = daily.sum()
        mx_day = daily.max()
        mx_hour = mx_day * r_rain.uniform(0.15, 0.45)
        mx_10min = mx_hour * r_rain.uniform(0.25, 0.60)
        rainfall[t] = (acc, mx_10min, mx_hour, mx_day)
    rainfall[0] = rainfall[1]

    u = np.zeros((2, L))
    v_true = np.zeros((T, 2, L))
    u_hist = np.zeros((T, 2, L))
    maintenance = np.zeros((T, n_cat, L))
    ballast_age = np.zeros((T, L))
    pending: list[_Event] = []

    for t in range(T):
        ballast_age[t] = age
        u_hist[t] = u
        v_true[t] = chord_offset(u)

        # corrective policy: schedule repairs for runs below the threshold
        worst = v_true[t].min(axis=0)
        low = worst < scenario.maintenance_threshold
        if np.any(low):
            idx = np.nonzero(low)[0]
            run_breaks = np.nonzero(np.diff(idx) > 1)[0]
            starts = np.concatenate([[0], run_breaks + 1])
            ends = np.concatenate([run_breaks, [idx.size - 1]])
            patches = [(max(0, idx[s] - scenario.repair_margin),
                        min(L, idx[e] + scenario.repair_margin + 1))
                       for s, e in zip(starts, ends)]
            t_event = t + scenario.scheduling_delay
            if t_event < T:
                for lo, hi in _merge_intervals(patches):
                    cat = int(r_maint.choice(n_cat, p=scenario.category_weights))
                    pending.append(_Event(t=t_event, lo=lo, hi=hi, category=cat))

        due = [ev for ev in pending if ev.t == t]
        for ev in due:
            maintenance[t, ev.category, ev.lo:ev.hi] = 1.0

        if t == T - 1:
            break

        # settle over the interval (t, t+1]
        dt_days = gaps[t + 1]
        ton_anomaly = daily_ton[t + 1] / scenario.tonnage_per_day - 1.0
        rain_anomaly = rainfall[t + 1, 0] / max(dt_days, 1.0) \
            / (0.6 * scenario.rain_rate) - 1.0
        temporal = max(0.0, 1.0 + scenario.sens_tonnage * ton_anomaly
                       + scenario.sens_rainfall * rain_anomaly)
        age_mult = 1.0 + scenario.sens_ballast_age * age
        rate = scenario.base_rate + scenario.spot_rate * spot_profile * age_mult * temporal
        rate = np.where(bridge, rate * BRIDGE_RATE_FACTOR, rate)
        for side in range(2):
            u[side] -= SIDE_FACTOR[side] * rate * dt_days
        if scenario.process_sigma > 0:
            u += (scenario.process_sigma * np.sqrt(dt_days)
                  * r_proc.standard_normal((2, L)))

        # repairs flagged at t take effect before inspection t+1
        for ev in due:
            eff = scenario.category_effectiveness[ev.category]
            u[:, ev.lo:ev.hi] *= 1.0 - eff
            if MAINTENANCE_CATEGORIES[ev.category] == "ballast_replacement":
                age[ev.lo:ev.hi] = 0.0
        pending = [ev for ev in pending if ev.t > t]

        age = age + dt_days / 365.0
        age[bridge] = 0.0

    # measured panel: vertical channels are noisy chord offsets, the other
    # eight are AR processes loosely coupled to them
    panel = np.zeros((T, len(CHANNELS), L))
    panel[:, 0:2, :] = v_true
    if scenario.measurement_sigma > 0:
        panel[:, 0:2, :] += r_meas.normal(0.0, scenario.measurement_sigma,
                                          size=(T, 2, L))

    def smooth_noise(shape, width=5):
        eta = r_aux.standard_normal(shape)
        kernel = np.ones(width) / width
        return np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="same"),
                                   -1, eta)

    lat = np.zeros((2, L))
    gauge = np.zeros(L)
    cross = np.zeros(L)
    vib_v = np.zeros(L)
    vib_l = np.zeros(L)
    speed_profile = 1.0 + 0.05 * smooth_noise((L,), width=15)
    for t in range(T):
        vl, vr = panel[t, 0], panel[t, 1]
        lat = 0.75 * lat + 0.20 * panel[t, 0:2] + 0.10 * smooth_noise((2, L))
        gauge = 0.80 * gauge - 0.05 * (vl - vr) + 0.05 * smooth_noise((L,))
        cross = 0.60 * cross + 0.30 * (vl - vr) + 0.05 * smooth_noise((L,))
        twist = cross - np.roll(cross, 3)
        twist[:3] = twist[3]
        rough = np.abs(np.diff(0.5 * (vl + vr), n=2, prepend=0.0, append=0.0))
        rough = rough[:L]
        vib_v = 0.30 * vib_v + 0.50 * rough * speed_profile + 0.05 * smooth_noise((L,))
        vib_l = 0.30 * vib_l + 0.40 * np.abs(lat[0] - lat[1]) + 0.05 * smooth_noise((L,))
        speed = speed_profile + 0.02 * r_aux.standard_normal()
        panel[t, 2:4] = lat
        panel[t, 4] = gauge
        panel[t, 5] = cross
        panel[t, 6] = twist
        panel[t, 7] = vib_v
        panel[t, 8] = vib_l
        panel[t, 9] = speed

    bundle = ExogenousBundle(
        maintenance=maintenance,
        under_structure=structure,
        rail_joint=rail_joint,
        ballast_age=ballast_age,
        tonnage=np.repeat(tonnage[:, None], L, axis=1),
        rainfall=np.repeat(rainfall[:, :, None], L, axis=2),
    )
    bundle.check()
    return TrackDataset(
        dates=dates,
        irregularities=panel,
        exogenous=bundle,
        ground_truth_u=u_hist,
        provenance=f"scenario:{scenario.content_hash()}",
    )
