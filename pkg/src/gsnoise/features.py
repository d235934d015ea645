"""Cluster-feature extraction for noise sequences.

Three physical similarity metrics for bursty noise: the amplitude histogram,
the impulsive cluster length distribution (ICL: maximal runs of consecutive
samples with |n| above a threshold) and the cluster interarrival length
distribution (CIL: run lengths strictly between the end of one cluster and
the start of the next).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampler import NoiseSequence


class ComparisonError(ValueError):
    """Feature sets built with different bin specs or thresholds."""


@dataclass(frozen=True)
class HistogramSpec:
    lo: float = -500.0
    hi: float = 500.0
    bins: int = 1000

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("histogram range must be ordered")
        if self.bins < 1:
            raise ValueError("at least one bin required")


@dataclass(frozen=True)
class ClusterFeatures:
    threshold: float
    bin_edges: np.ndarray
    densities: np.ndarray
    icl_counts: dict
    cil_counts: dict
    n_clusters: int
    n_samples: int
    leading_run: int
    trailing_run: int

    def icl_pmf(self):
        return _counts_to_pmf(self.icl_counts)

    def cil_pmf(self):
        return _counts_to_pmf(self.cil_counts)


def _counts_to_pmf(counts):
    total = sum(counts.values())
    if total == 0:
        return {}
    return {k: v / total for k, v in sorted(counts.items())}


def default_threshold(samples):
    """10 x robust amplitude scale (median |n| / 0.6745)."""
    x = np.asarray(samples, dtype=np.float64)
    return 10.0 * float(np.median(np.abs(x))) / 0.6745


def _run_lengths(mask):
    """Lengths and start flags of maximal constant runs of a boolean mask."""
    if mask.size == 0:
        return np.array([], dtype=np.int64), np.array([], dtype=bool)
    change = np.flatnonzero(np.diff(mask))
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [mask.size]))
    return ends - starts, mask[starts]


def extract_features(seq, a_t=None, bins=HistogramSpec()):
    """Amplitude histogram, ICL and CIL distributions at threshold a_t.

    Clusters touching either sequence end are counted in the ICL but produce
    no CIL entry; leading/trailing sub-threshold runs are recorded so that
    sum(ICL) + sum(CIL) + leading + trailing covers the sequence exactly.
    The amplitude histogram is over |n| with the given bin spec; bin
    densities are normalized so the discrete integral over in-range samples
    is 1 (empty histogram for no in-range samples).
    """
    x = seq.samples if isinstance(seq, NoiseSequence) else np.asarray(seq, dtype=np.float64)
    if x.size < 1:
        raise ValueError("sequence must contain at least one sample")
    if a_t is None:
        a_t = default_threshold(x)
    if not a_t > 0:
        raise ValueError("threshold must be positive")
    amp = np.abs(x)
    counts, edges = np.histogram(amp, bins=bins.bins, range=(bins.lo, bins.hi))
    total = counts.sum()
    widths = np.diff(edges)
    densities = counts / (total * widths) if total > 0 else np.zeros_like(widths)

    above = amp > a_t
    lengths, is_cluster = _run_lengths(above)
    icl = {}
    cil = {}
    leading = trailing = 0
    n_runs = lengths.size
    for idx in range(n_runs):
        length = int(lengths[idx])
        if is_cluster[idx]:
            icl[length] = icl.get(length, 0) + 1
        elif idx == 0:
            leading = length
        elif idx == n_runs - 1:
            trailing = length
        else:
            cil[length] = cil.get(length, 0) + 1
    return ClusterFeatures(
        threshold=float(a_t),
        bin_edges=edges,
        densities=densities,
        icl_counts=icl,
        cil_counts=cil,
        n_clusters=sum(icl.values()),
        n_samples=int(x.size),
        leading_run=leading,
        trailing_run=trailing,
    )


@dataclass(frozen=True)
class FeatureDistance:
    amplitude: float
    icl: float
    cil: float


def _pmf_l1(a, b):
    if not a and not b:
        return 0.0
    keys = set(a) | set(b)
    return sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def feature_distance(a, b):
    """L1 distances between the normalized feature distributions (each in [0, 2])."""
    if a.bin_edges.shape != b.bin_edges.shape or not np.array_equal(a.bin_edges, b.bin_edges):
        raise ComparisonError("amplitude histograms use different bin specs")
    if a.threshold != b.threshold:
        raise ComparisonError("feature sets use different thresholds")
    widths = np.diff(a.bin_edges)
    amp = float(np.sum(np.abs(a.densities - b.densities) * widths))
    return FeatureDistance(
        amplitude=amp,
        icl=_pmf_l1(a.icl_pmf(), b.icl_pmf()),
        cil=_pmf_l1(a.cil_pmf(), b.cil_pmf()),
    )
