"""Scalar diffraction, amplitude-hologram recording and intensity reconstruction.

Images are 2-D ``float64`` arrays indexed ``[row, column]``; complex fields
carry their sampling pitch and wavelength in :class:`ComplexField`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class OpticalConfig:
    """Recording geometry. Defaults are the 1000 x 1000 page-data setup."""

    pixels_x: int = 1000
    pixels_y: int = 1000
    pitch: float = 4e-6
    wavelength: float = 633e-9
    distance_z: float = 0.05
    pad: bool = False

    def __post_init__(self):
        if self.pixels_x < 1 or self.pixels_y < 1:
            raise ValueError(f"pixel counts must be positive, got {self.pixels_x}x{self.pixels_y}")
        for name in ("pitch", "wavelength", "distance_z"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.pixels_y, self.pixels_x)


@dataclass(frozen=True)
class ComplexField:
    """Sampled complex amplitude on a regular grid.

    Parameters
    ----------
    data : ndarray
        Complex amplitudes, shape ``(height, width)``.
    pitch : float
        Sampling pitch [m].
    wavelength : float
        Wavelength [m].
    """

    data: np.ndarray
    pitch: float
    wavelength: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"field data must be a non-empty 2-D array, got shape {data.shape}")
        if not (self.pitch > 0 and self.wavelength > 0):
            raise ValueError("pitch and wavelength must be strictly positive")
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def energy(self) -> float:
        return float(np.sum(np.abs(self.data) ** 2))


def check_image(image, name="image") -> np.ndarray:
    """Return ``image`` as a float64 2-D array, rejecting negatives and NaNs."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise ValueError(f"{name} contains negative values")
    return arr


def random_phase_object(image, seed, *, pitch=4e-6, wavelength=633e-9) -> ComplexField:
    """Attach a uniform random phase ``exp(i 2 pi p)``, ``p ~ U[0, 1)``, to each pixel."""
    amp = check_image(image)
    if np.any(amp > 1):
        raise ValueError("image values must lie in [0, 1]; normalize before recording")
    rng = np.random.default_rng(seed)
    phase = rng.random(amp.shape)
    return ComplexField(amp * np.exp(2j * np.pi * phase), pitch, wavelength)


def transfer_function(shape, pitch, wavelength, z) -> np.ndarray:
    """Angular-spectrum transfer function on the FFT frequency grid.

    Evanescent components are zeroed.
    """
    ny, nx = shape
    fx = np.fft.fftfreq(nx, d=pitch)
    fy = np.fft.fftfreq(ny, d=pitch)
    arg = 1.0 / wavelength**2 - fy[:, None] ** 2 - fx[None, :] ** 2
    propagating = arg > 0
    kz = np.sqrt(np.where(propagating, arg, 0.0))
    return np.where(propagating, np.exp(2j * np.pi * z * kz), 0.0)


def propagate(field: ComplexField, z: float, *, pad: bool = False) -> ComplexField:
    """Propagate ``field`` by a signed distance ``z`` with the angular spectrum method.

    Uses orthonormal FFTs on the periodic grid, so propagation is unitary
    whenever no sampled frequency is evanescent. With ``pad=True`` the field
    is zero-padded to twice its size before the transform and cropped back
    afterwards, which suppresses wraparound but is no longer unitary.
    """
    u = field.data
    h, w = u.shape
    if pad:
        u = np.pad(u, ((0, h), (0, w)))
    H = transfer_function(u.shape, field.pitch, field.wavelength, z)
    out = np.fft.ifft2(np.fft.fft2(u, norm="ortho") * H, norm="ortho")
    if pad:
        out = out[:h, :w]
    return replace(field, data=out)


def record_hologram(obj: ComplexField) -> np.ndarray:
    """Interfere the object wave with an on-axis unit plane wave; return ``|O + 1|^2``."""
    return np.abs(obj.data + 1.0) ** 2


def reconstruct(hologram, config: OpticalConfig) -> np.ndarray:
    """Back-propagate a real hologram by ``-z`` and return the intensity.

    The result keeps the direct light, twin image and speckle; no
    normalization is applied.
    """
    holo = check_image(hologram, "hologram")
    field = ComplexField(holo.astype(np.complex128), config.pitch, config.wavelength)
    back = propagate(field, -config.distance_z, pad=config.pad)
    return np.abs(back.data) ** 2


def simulate_reconstruction(image, config: OpticalConfig, seed) -> np.ndarray:
    """Full channel: random phase, forward propagation, recording, reconstruction."""
    obj = random_phase_object(image, seed, pitch=config.pitch, wavelength=config.wavelength)
    obj = propagate(obj, config.distance_z, pad=config.pad)
    return reconstruct(record_hologram(obj), config)
