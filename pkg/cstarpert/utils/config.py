"""Numeric tolerances and environment settings."""

import os
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Thresholds shared by every numerical check in the package."""

    rank_cutoff: float = 1e-10
    window_pad: float = 1e-12
    invertibility_floor: float = 1e-12
    closure: float = 1e-9
    reconstruction: float = 1e-8
    index: float = 1e-8
    positivity: float = 1e-9
    faithful_floor: float = 1e-10
    frame_floor: float = 1e-10
    compatibility: float = 1e-8
    homomorphism: float = 1e-7
    unital: float = 1e-8
    fixes_c: float = 1e-8
    commutation: float = 1e-8
    readback: float = 1e-7
    conjugation: float = 1e-7
    membership: float = 1e-7
    bound_slack: float = 1e-7
    ill_defined: float = 1e-8


DEFAULT_TOLERANCES = Tolerances()

TOLERANCE_PRESETS = {
    "strict": replace(
        DEFAULT_TOLERANCES,
        closure=1e-11,
        reconstruction=1e-10,
        compatibility=1e-10,
        conjugation=1e-9,
    ),
    "default": DEFAULT_TOLERANCES,
    "loose": replace(
        DEFAULT_TOLERANCES,
        closure=1e-7,
        reconstruction=1e-6,
        compatibility=1e-6,
        homomorphism=1e-5,
        conjugation=1e-5,
        bound_slack=1e-5,
    ),
}


def get_preset(name: str) -> Tolerances:
    """
    Get a tolerance preset by name.

    Args:
        name: Name of the preset

    Returns:
        The matching Tolerances instance

    Raises:
        KeyError: If the preset name is not found
    """
    if name not in TOLERANCE_PRESETS:
        available = ", ".join(TOLERANCE_PRESETS.keys())
        raise KeyError(f"Preset '{name}' not found. Available presets: {available}")
    return TOLERANCE_PRESETS[name]


@dataclass(frozen=True)
class Settings:
    """Process-level settings read from the environment."""

    tol: float = 1e-9
    audit_samples: int = 100
    log_level: str = "WARNING"
    api_key: str = ""
    allowed_origins: tuple = ("*",)

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from CSTARPERT_* variables and the server variables."""
        origins = os.getenv("ALLOWED_ORIGINS", "*").split(",")
        origins = tuple(origin.strip() for origin in origins if origin.strip())
        return cls(
            tol=float(os.getenv("CSTARPERT_TOL", "1e-9")),
            audit_samples=int(os.getenv("CSTARPERT_AUDIT_SAMPLES", "100")),
            log_level=os.getenv("CSTARPERT_LOG_LEVEL", "WARNING").upper(),
            api_key=os.getenv("API_KEY", ""),
            allowed_origins=origins or ("*",),
        )
