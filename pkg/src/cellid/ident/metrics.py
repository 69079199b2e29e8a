"""Error metrics and the validation table."""

from dataclasses import dataclass

import numpy as np

from ..errors import CellIdError, InvalidArgumentError

GOOD_V = 0.020
ACCEPTABLE_V = 0.050
POOR_V = 0.100
FAILED = "failed"


def rmse(measured, predicted):
    a = np.asarray(measured, dtype=float)
    b = np.asarray(predicted, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise InvalidArgumentError("rmse of empty series")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def band(value):
    """Band label for an RMSE in volts (thresholds 20/50/100 mV)."""
    if value is None or not np.isfinite(value):
        return FAILED
    if value < GOOD_V:
        return "good"
    if value < ACCEPTABLE_V:
        return "acceptable"
    if value < POOR_V:
        return "poor"
    return "out-of-band"


@dataclass(frozen=True)
class ValidationCell:
    model: str
    dataset: str
    rmse: float | None
    band: str
    error: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    cells: tuple
    models: tuple
    datasets: tuple

    def get(self, model, dataset):
        for c in self.cells:
            if c.model == model and c.dataset == dataset:
                return c
        raise KeyError((model, dataset))

    def rmse(self, model, dataset):
        return self.get(model, dataset).rmse

    @property
    def failed(self):
        return any(c.band == FAILED for c in self.cells)

    def to_rows(self):
        return [
            {"model": c.model, "dataset": c.dataset,
             "rmse_mv": None if c.rmse is None else round(c.rmse * 1e3, 6),
             "band": c.band, "error": c.error}
            for c in self.cells
        ]

    def format_table(self):
        """Model x dataset grid of RMSE in mV with the band label of each cell."""
        width = max(18, *(len(d) for d in self.datasets))
        head = "model".ljust(8) + "".join(d.rjust(width + 2) for d in self.datasets)
        lines = [head]
        for m in self.models:
            row = m.ljust(8)
            for d in self.datasets:
                c = self.get(m, d)
                txt = "FAILED" if c.rmse is None else f"{c.rmse * 1e3:.1f} ({c.band})"
                row += txt.rjust(width + 2)
            lines.append(row)
        return "\n".join(lines)


def validate(models, datasets, simulate=None):
    """RMSE of every model on every dataset.

    ``models`` maps a name to SPM or ECM parameters, ``datasets`` maps a name
    to a Dataset. Simulation failures are recorded as failed cells.
    Returns ``(report, predictions)`` where predictions[(model, dataset)] is
    the simulated voltage (or None).
    """
    if simulate is None:
        from ..protocols import simulate_model as simulate
    cells, preds = [], {}
    for mname, params in models.items():
        for dname, ds in datasets.items():
            try:
                v = simulate(params, ds.initial_soc, ds.profile).voltage
                if not np.all(np.isfinite(v)):
                    raise CellIdError("non-finite simulated voltage")
                err = rmse(ds.voltage, v)
                cells.append(ValidationCell(mname, dname, err, band(err)))
                preds[(mname, dname)] = v
            except CellIdError as exc:
                cells.append(ValidationCell(mname, dname, None, FAILED, str(exc)))
                preds[(mname, dname)] = None
    return ValidationReport(tuple(cells), tuple(models), tuple(datasets)), preds
