"""AIS-style track processing: vessel-following event extraction and the
lognormal fit of the bow-stern time gap used by the safety reward.

Input tracks are CSV files with along-river coordinates, one row per
position report:

    vessel_id,timestamp_s,x_m,y_m,speed_mps,length_m,beam_m[,stream_mps]

The optional ``stream_mps`` column switches the time-gap computation
from ground speed to water-relative speed.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TRACK_COLUMNS = ("vessel_id", "timestamp_s", "x_m", "y_m",
                 "speed_mps", "length_m", "beam_m")
TRACK_STREAM_COLUMN = "stream_mps"

EVENT_COLUMNS = ("follower_id", "leader_id", "timestamp_s", "gap_m", "time_gap_s")

#: nearest-sample pair alignment tolerance, s
ALIGN_TOLERANCE = 5.0


class TrackFormatError(ValueError):
    """Malformed track file; the message carries the offending line."""


@dataclass(frozen=True)
class TrackPoint:
    """One AIS-style position report."""

    vessel_id: str
    timestamp: float            # s
    longitudinal_position: float  # m along the river axis
    lateral_position: float     # m across the river axis
    speed_ground: float         # m/s
    length: float               # m
    beam: float                 # m
    stream_speed: float | None = None  # m/s, local water speed


@dataclass
class Track:
    """All reports of one vessel, time-sorted."""

    vessel_id: str
    timestamps: np.ndarray
    x: np.ndarray
    y: np.ndarray
    speed: np.ndarray
    length: float
    beam: float
    stream: np.ndarray | None = None


@dataclass
class TrackSet:
    """A corpus of vessel tracks plus whether a stream column is present."""

    vessels: dict[str, Track]
    has_stream: bool

    @property
    def speed_reference(self) -> str:
        return "stream" if self.has_stream else "ground"


@dataclass(frozen=True)
class FollowingEvent:
    """One aligned sample pair that satisfies the following criteria."""

    follower_id: str
    leader_id: str
    timestamp: float
    gap: float       # m, bow-to-stern
    time_gap: float  # s


@dataclass(frozen=True)
class LognormalFit:
    """Maximum-likelihood lognormal parameters of a positive sample."""

    mu: float
    sigma: float
    sample_count: int


def tracks_from_points(points) -> TrackSet:
    """Group TrackPoints by vessel into a TrackSet (sorted by time)."""
    by_vessel: dict[str, list[TrackPoint]] = {}
    for p in points:
        by_vessel.setdefault(p.vessel_id, []).append(p)
    has_stream = all(p.stream_speed is not None
                     for pts in by_vessel.values() for p in pts) and bool(by_vessel)
    vessels = {}
    for vid, pts in by_vessel.items():
        pts.sort(key=lambda p: p.timestamp)
        ts = np.array([p.timestamp for p in pts], dtype=float)
        if np.any(np.diff(ts) <= 0):
            raise TrackFormatError(f"vessel {vid}: timestamps not strictly increasing")
        vessels[vid] = Track(
            vessel_id=vid,
            timestamps=ts,
            x=np.array([p.longitudinal_position for p in pts], dtype=float),
            y=np.array([p.lateral_position for p in pts], dtype=float),
            speed=np.array([p.speed_ground for p in pts], dtype=float),
            length=pts[0].length,
            beam=pts[0].beam,
            stream=(np.array([p.stream_speed for p in pts], dtype=float)
                    if has_stream else None),
        )
    return TrackSet(vessels=vessels, has_stream=has_stream)


def load_tracks(path) -> TrackSet:
    """Parse a track CSV; raises TrackFormatError with the line number."""
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TrackFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(header[:7]) != TRACK_COLUMNS or len(header) > 8 or (
                len(header) == 8 and header[7] != TRACK_STREAM_COLUMN):
            raise TrackFormatError(
                f"{path}: line 1: expected header "
                f"{','.join(TRACK_COLUMNS)}[,{TRACK_STREAM_COLUMN}]")
        has_stream = len(header) == 8
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TrackFormatError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                points.append(TrackPoint(
                    vessel_id=row[0].strip(),
                    timestamp=float(row[1]),
                    longitudinal_position=float(row[2]),
                    lateral_position=float(row[3]),
                    speed_ground=float(row[4]),
                    length=float(row[5]),
                    beam=float(row[6]),
                    stream_speed=float(row[7]) if has_stream else None,
                ))
            except ValueError as exc:
                raise TrackFormatError(f"{path}: line {lineno}: {exc}") from None
    if not points:
        raise TrackFormatError(f"{path}: no track rows")
    return tracks_from_points(points)


def _nearest_sample(timestamps: np.ndarray, t: float) -> int:
    """Index of the sample closest to t; ties resolve to the earlier one."""
    right = int(np.searchsorted(timestamps, t))
    if right == 0:
        return 0
    if right == len(timestamps):
        return right - 1
    left = right - 1
    if t - timestamps[left] <= timestamps[right] - t:
        return left
    return right


def extract_events(tracks: TrackSet, speed_threshold: float = 0.2,
                   window_length: float = 60000.0,
                   window_duration: float = 86400.0) -> list[FollowingEvent]:
    """Find all per-sample vessel-following events in a track corpus.

    For every ordered vessel pair, each follower sample is aligned with
    the leader sample nearest in time (within ALIGN_TOLERANCE seconds).
    An aligned pair is an event when the speed difference is below
    ``speed_threshold``, the lateral beam intervals overlap, and the
    leader is ahead with a positive bow-to-stern gap.  Only samples
    inside the observation window, anchored at the corpus minimum
    position and time, are considered.

    The time gap divides the gap by the follower's water-relative speed
    when a stream column is present, otherwise by ground speed
    (``tracks.speed_reference`` says which); pairs with non-positive
    reference speed are skipped.
    """
    vessels = tracks.vessels
    if not vessels:
        return []
    x_min = min(float(tr.x.min()) for tr in vessels.values())
    t_min = min(float(tr.timestamps.min()) for tr in vessels.values())
    x_max = x_min + window_length
    t_max = t_min + window_duration

    events = []
    for fid, follower in vessels.items():
        for lid, leader in vessels.items():
            if lid == fid:
                continue
            for i in range(len(follower.timestamps)):
                t = follower.timestamps[i]
                if not (t_min <= t <= t_max):
                    continue
                if not (x_min <= follower.x[i] <= x_max):
                    continue
                j = _nearest_sample(leader.timestamps, t)
                if abs(leader.timestamps[j] - t) > ALIGN_TOLERANCE:
                    continue
                if not (t_min <= leader.timestamps[j] <= t_max):
                    continue
                if not (x_min <= leader.x[j] <= x_max):
                    continue
                if abs(follower.speed[i] - leader.speed[j]) >= speed_threshold:
                    continue
                if abs(follower.y[i] - leader.y[j]) >= 0.5 * (follower.beam + leader.beam):
                    continue
                gap = leader.x[j] - leader.length - follower.x[i]
                if gap <= 0.0:
                    continue
                v_ref = follower.speed[i]
                if tracks.has_stream:
                    v_ref = v_ref - follower.stream[i]
                if v_ref <= 0.0:
                    continue
                events.append(FollowingEvent(
                    follower_id=fid, leader_id=lid, timestamp=float(t),
                    gap=float(gap), time_gap=float(gap / v_ref)))
    events.sort(key=lambda e: (e.follower_id, e.leader_id, e.timestamp))
    return events


def fit_lognormal(samples) -> LognormalFit:
    """Maximum-likelihood lognormal fit of positive samples.

    mu is the mean of the log samples, sigma the population (1/n)
    standard deviation of the logs.

    Raises:
        ValueError: on fewer than two samples or any non-positive sample.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise ValueError(f"need at least 2 samples to fit, got {samples.size}")
    if np.any(samples <= 0.0):
        raise ValueError("all samples must be positive for a lognormal fit")
    logs = np.log(samples)
    mu = float(np.mean(logs))
    sigma = float(np.sqrt(np.mean((logs - mu) ** 2)))
    if sigma == 0.0:
        warnings.warn("all samples equal: degenerate fit with sigma = 0",
                      stacklevel=2)
    return LognormalFit(mu=mu, sigma=sigma, sample_count=int(samples.size))


def lognormal_pdf(t: float, mu: float, sigma: float) -> float:
    """Density of the fitted distribution; 0 at and below t = 0."""
    if t <= 0.0 or sigma <= 0.0:
        return 0.0
    log_t = math.log(t)
    return math.exp(-log_t - math.log(sigma * math.sqrt(2.0 * math.pi))
                    - (log_t - mu) ** 2 / (2.0 * sigma ** 2))


class HistogramReport(NamedTuple):
    """Binned time gaps on [0, 1000] s plus the fitted density curve."""

    centers: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    fit: LognormalFit | None


def histogram_report(samples, bin_width: float) -> HistogramReport:
    """Bin time-gap samples on [0, 1000] s and attach the fitted density.

    The density column is the lognormal fit of the full sample list
    evaluated at the bin centers (NaN when the fit preconditions fail,
    e.g. a single sample).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("histogram needs at least one sample")
    if bin_width <= 0:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    edges = np.arange(0.0, 1000.0 + bin_width, bin_width)
    if edges[-1] > 1000.0:
        edges = np.append(edges[edges < 1000.0], 1000.0)
    counts, _ = np.histogram(samples, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    try:
        fit = fit_lognormal(samples)
        density = np.array([lognormal_pdf(c, fit.mu, fit.sigma) for c in centers])
    except ValueError:
        fit = None
        density = np.full(centers.shape, np.nan)
    return HistogramReport(centers=centers, counts=counts, density=density, fit=fit)


def write_events(path, events: list[FollowingEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(EVENT_COLUMNS) + "\n")
        for e in events:
            fh.write(f"{e.follower_id},{e.leader_id},{e.timestamp!r},"
                     f"{e.gap!r},{e.time_gap!r}\n")


def write_histogram(path, report: HistogramReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_center_s,count,fitted_density\n")
        for c, n, d in zip(report.centers, report.counts, report.density):
            fh.write(f"{c!r},{int(n)},{d!r}\n")
