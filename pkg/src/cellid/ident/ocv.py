"""Open-circuit points from the rests of a pulse discharge test."""

from dataclasses import dataclass

import numpy as np

from ..errors import ProtocolMismatchError

MIN_REST_S = 300.0
OCV_WINDOW_S = 30.0
SLOPE_WINDOW_S = 60.0


@dataclass(frozen=True)
class OcvPointSet:
    """One point per detected rest, in discharge order (SoC decreasing)."""

    soc: np.ndarray
    ocv: np.ndarray
    rest_quality: np.ndarray  # V/s slope over the end of each rest
    rest_end_index: np.ndarray

    def __post_init__(self):
        for name in ("soc", "ocv", "rest_quality", "rest_end_index"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))

    def __len__(self):
        return int(self.soc.size)

    @property
    def count(self):
        return len(self)

    @property
    def points(self):
        return list(zip(self.soc.tolist(), self.ocv.tolist(), self.rest_quality.tolist()))

    def subset(self, mask):
        mask = np.asarray(mask)
        return OcvPointSet(self.soc[mask], self.ocv[mask], self.rest_quality[mask],
                           self.rest_end_index[mask])


def find_rests(current, dt, min_duration=MIN_REST_S, tol=None):
    """(start, stop) index pairs of zero-current spans lasting >= ``min_duration``.

    ``stop`` is exclusive. Samples with |I| <= ``tol`` count as rest; the
    default tolerance is 1% of the largest current magnitude.
    """
    current = np.asarray(current, dtype=float)
    if tol is None:
        tol = 0.01 * float(np.max(np.abs(current))) if current.size else 0.0
    idle = np.abs(current) <= tol
    edges = np.diff(np.concatenate(([0], idle.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    min_len = int(np.ceil(min_duration / dt - 1e-9))
    return [(int(a), int(b)) for a, b in zip(starts, stops) if b - a >= min_len]


def extract_ocv_points(dataset, q_nom, min_rest=MIN_REST_S, window=OCV_WINDOW_S,
                       slope_window=SLOPE_WINDOW_S):
    """Mean voltage over the last ``window`` seconds of every long rest.

    SoC comes from coulomb counting at the end of the rest; ``rest_quality``
    is the least-squares slope (V/s) over the last ``slope_window`` seconds.
    """
    rests = find_rests(dataset.current, dataset.dt, min_rest)
    if not rests:
        raise ProtocolMismatchError(
            f"no zero-current rest of at least {min_rest:g} s found in {dataset.label or 'dataset'}"
        )
    soc_all = dataset.soc(q_nom)
    v = dataset.voltage
    n_avg = max(1, int(round(window / dataset.dt)))
    n_slope = max(2, int(round(slope_window / dataset.dt)))
    soc, ocv, quality, ends = [], [], [], []
    for start, stop in rests:
        last = stop - 1
        seg = v[max(start, stop - n_avg):stop]
        tail = slice(max(start, stop - n_slope), stop)
        t = dataset.times[tail]
        slope = np.polyfit(t - t[0], v[tail], 1)[0] if t.size >= 2 else 0.0
        soc.append(soc_all[last])
        ocv.append(float(np.mean(seg)))
        quality.append(float(slope))
        ends.append(last)
    return OcvPointSet(np.array(soc), np.array(ocv), np.array(quality), np.array(ends))
