"""Unit conversions used at configuration and file boundaries.

Everything inside the solvers is linear: powers in mW per tone, gains as
power ratios. Decibel quantities only appear when reading or writing files.
"""

from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]


def _unwrap(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def db_to_linear(db: ArrayLike) -> ArrayLike:
    """Convert a dB power ratio (or dBm) to linear (or mW)."""
    return _unwrap(np.power(10.0, np.asarray(db, dtype=float) / 10.0))


def linear_to_db(value: ArrayLike) -> ArrayLike:
    """Convert a linear power ratio to dB. Zero maps to ``-inf``."""
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0):
        raise ValueError("Cannot express a negative power in dB")
    with np.errstate(divide="ignore"):
        return _unwrap(10.0 * np.log10(arr))


dbm_to_mw = db_to_linear
mw_to_dbm = linear_to_db


def psd_to_tone_power(psd_dbm_hz: ArrayLike, tone_spacing_hz: float) -> ArrayLike:
    """Convert a PSD in dBm/Hz into mW on one tone of width ``tone_spacing_hz``."""
    return _unwrap(np.asarray(db_to_linear(psd_dbm_hz)) * tone_spacing_hz)


def tone_power_to_psd(power_mw: ArrayLike, tone_spacing_hz: float) -> ArrayLike:
    """Inverse of :func:`psd_to_tone_power`."""
    return linear_to_db(np.asarray(power_mw, dtype=float) / tone_spacing_hz)


# JSON has no -inf; documents write zero powers and gains at this level.
ZERO_DB = -400.0


def linear_to_finite_db(value: ArrayLike) -> ArrayLike:
    """:func:`linear_to_db` with zero written as :data:`ZERO_DB`."""
    return _unwrap(np.maximum(np.asarray(linear_to_db(value)), ZERO_DB))


def finite_db_to_linear(db: ArrayLike) -> ArrayLike:
    """Inverse of :func:`linear_to_finite_db`; :data:`ZERO_DB` and below read as zero."""
    arr = np.asarray(db, dtype=float)
    return _unwrap(np.where(arr <= ZERO_DB, 0.0, np.asarray(db_to_linear(arr))))
