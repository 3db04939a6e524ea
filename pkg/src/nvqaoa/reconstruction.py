"""Population recovery from flip-pattern readout means.

Appending the bit-flip pattern x before readout makes state s fluoresce with
intensity I_{s XOR x}, so the recorded mean for pattern x is

    m_x = sum_s I_{s XOR x} * pops_s.

Writing the intensity table in its Walsh spectrum c_t = 2^{-n} sum_s I_s (-1)^{s.t}
diagonalizes that XOR convolution: each parity correlator <Z^t> is read off as

    <Z^t> = (2^n c_t)^{-1} sum_x (-1)^{x.t} m_x,

and an inverse transform of the correlators gives the populations. The t = 0
correlator estimates the total population and should sit near 1; it is
reported as ``norm`` and deliberately never used to rescale anything.
Reconstruction is exactly linear in the means, so shot noise propagates
without bias. It fails only when some |c_t| is (near) zero, i.e. when the
calibration carries no signal along parity t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._bitstrings import index_to_bits
from .readout import CalibrationTable

DEGENERACY_TOLERANCE = 1e-9


class DegenerateCalibrationError(ValueError):
    """Raised when a Walsh coefficient of the calibration is too small to divide by."""

    def __init__(self, t_label: str, value: float, tolerance: float):
        self.t_label = t_label
        self.value = float(value)
        self.tolerance = float(tolerance)
        super().__init__(
            f"calibration is degenerate along parity t={t_label}: "
            f"|c_t| = {abs(value):.3e} <= {tolerance:.3e}"
        )


@dataclass(frozen=True, eq=False)
class WalshCoefficients:
    """Normalized Walsh spectrum of an intensity table, indexed by parity mask t."""

    c: np.ndarray

    def __post_init__(self):
        arr = np.array(self.c, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    @property
    def num_qubits(self) -> int:
        return int(self.c.size).bit_length() - 1


@dataclass(frozen=True, eq=False)
class PopulationEstimate:
    """Reconstructed populations plus the parity correlators they came from."""

    pops: np.ndarray
    correlators: np.ndarray
    norm: float

    def __post_init__(self):
        pops = np.array(self.pops, dtype=float)
        corr = np.array(self.correlators, dtype=float)
        pops.setflags(write=False)
        corr.setflags(write=False)
        object.__setattr__(self, "pops", pops)
        object.__setattr__(self, "correlators", corr)
        object.__setattr__(self, "norm", float(self.norm))


def fwht(values) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform: out[t] = sum_s (-1)^(s.t) in[s].

    Involution up to the factor 2^n. Input length must be a power of two.
    """
    v = np.array(values, dtype=float)
    if v.ndim != 1 or v.size == 0 or v.size & (v.size - 1):
        raise ValueError(f"transform needs a power-of-two length vector, got shape {v.shape}")
    h = 1
    while h < v.size:
        blocks = v.reshape(-1, 2 * h)
        left = blocks[:, :h].copy()
        right = blocks[:, h:].copy()
        blocks[:, :h] = left + right
        blocks[:, h:] = left - right
        h *= 2
    return v


def walsh_coefficients(calibration: CalibrationTable) -> WalshCoefficients:
    n = calibration.num_qubits
    return WalshCoefficients(fwht(calibration.intensities) / (1 << n))


def forward_means(calibration: CalibrationTable, pops) -> np.ndarray:
    """Exact readout means for every flip pattern: m_x = sum_s I_{s XOR x} pops_s."""
    size = calibration.intensities.size
    p = np.asarray(pops, dtype=float)
    if p.shape != (size,):
        raise ValueError(f"populations must have shape ({size},), got {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p < -DEGENERACY_TOLERANCE):
        raise ValueError("populations must be finite and nonnegative")
    if abs(float(p.sum()) - 1.0) > 1e-9:
        raise ValueError("populations must sum to 1")
    c = walsh_coefficients(calibration).c
    # XOR convolution via the spectrum: transform, multiply, transform back.
    return fwht(c * fwht(p))


def reconstruct(
    calibration: CalibrationTable,
    means,
    degeneracy_tolerance: float = DEGENERACY_TOLERANCE,
) -> PopulationEstimate:
    """Invert flip-pattern means to populations and parity correlators.

    Raises :class:`DegenerateCalibrationError` (naming the offending parity
    mask) when any |c_t| <= degeneracy_tolerance. No clipping and no
    renormalization: negative entries and norm != 1 are honest noise
    indicators that callers may inspect.
    """
    n = calibration.num_qubits
    size = calibration.intensities.size
    m = np.asarray(means, dtype=float)
    if m.shape != (size,):
        raise ValueError(f"means must have shape ({size},), got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("means must be finite")
    c = walsh_coefficients(calibration).c
    small = np.abs(c) <= degeneracy_tolerance
    if small.any():
        t = int(np.argmax(small))
        raise DegenerateCalibrationError(index_to_bits(t, n), c[t], degeneracy_tolerance)
    correlators = fwht(m) / (size * c)
    pops = fwht(correlators) / size
    return PopulationEstimate(pops=pops, correlators=correlators, norm=float(correlators[0]))
