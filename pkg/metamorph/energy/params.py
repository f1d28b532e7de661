"""Material parameters of the deformation energy."""

import logging
from enum import Enum
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from metamorph.utils.errors import ParameterError

logger = logging.getLogger(__name__)


class ModelKind(str, Enum):
    """Available energy densities."""
    OGDEN = "ogden"
    SIMPLIFIED = "simplified"


def ogden_coeffs(lam: float, mu: float, q: float, r: float, s: float) -> Tuple[float, float, float, float]:
    """
    Coefficients a1..a4 of the Ogden-type density.

    Args:
        lam: First Lamé-type constant λ
        mu: Second Lamé-type constant μ
        q, r, s: Exponents of tr(AᵀA), det A and the compression barrier

    Returns:
        Tuple (a1, a2, a3, a4)
    """
    if q < 1 or r < 1 or s <= 0:
        raise ParameterError(f"Exponents need q >= 1, r >= 1, s > 0 (got q={q}, r={r}, s={s})")
    if r * r + r * s == 0 or r * s + s * s == 0:
        raise ParameterError("Exponents give a zero denominator")

    a1 = 2.0 ** (-q) * mu / q
    a2 = (lam + mu - mu * q - mu * s) / (r * r + r * s)
    a3 = (lam + mu - mu * q + mu * r) / (r * s + s * s)
    a4 = (mu * (q * q - r * s - q * (1 + r - s)) - lam * q) / (q * r * s)

    if a1 <= 0 or a2 <= 0 or a3 <= 0:
        raise ParameterError(
            f"Ogden coefficients must be positive, got a1={a1:.4g}, a2={a2:.4g}, a3={a3:.4g}"
        )
    return a1, a2, a3, a4


class MaterialParams(BaseModel):
    """All constants of the deformation and matching energy."""
    model_config = ConfigDict(frozen=True)

    kind: ModelKind = ModelKind.SIMPLIFIED
    lam: float = Field(1.0, description="Lamé-type constant λ")
    mu: float = Field(0.5, description="Lamé-type constant μ")
    gamma: float = Field(1e-3, ge=0.0, description="weight of the higher-order term")
    delta: float = Field(1e-2, gt=0.0, description="matching weight, enters as 1/δ")
    q: float = 1.5
    r: float = 1.5
    s: float = 0.5
    m: Optional[int] = Field(None, description="even derivative order; 4 (ogden) or 2 (simplified) by default")
    identity_offset: bool = Field(False, description="add 2|D| per segment to the simplified density")
    channel_weights: Optional[Tuple[float, ...]] = None

    @model_validator(mode="before")
    @classmethod
    def default_order(cls, data: Any) -> Any:
        """Pick the default derivative order for the chosen model."""
        if isinstance(data, dict) and data.get("m") is None:
            kind = data.get("kind", ModelKind.SIMPLIFIED)
            data = {**data, "m": 4 if ModelKind(kind) == ModelKind.OGDEN else 2}
        return data

    @field_validator("m")
    @classmethod
    def even_order(cls, v):
        if v is not None and (v < 2 or v % 2 != 0):
            raise ParameterError(f"Derivative order m must be even and >= 2, got {v}")
        return v

    @field_validator("channel_weights")
    @classmethod
    def positive_weights(cls, v):
        if v is not None and any(w <= 0 for w in v):
            raise ValueError("Channel weights must be positive")
        return v

    @model_validator(mode="after")
    def admissible_ogden(self) -> "MaterialParams":
        if self.kind == ModelKind.OGDEN:
            ogden_coeffs(self.lam, self.mu, self.q, self.r, self.s)
        return self

    @property
    def coefficients(self) -> Tuple[float, float, float, float]:
        return ogden_coeffs(self.lam, self.mu, self.q, self.r, self.s)

    @property
    def order(self) -> int:
        """The derivative order m (always set after validation)."""
        return int(self.m)

    def summary(self) -> Dict[str, Any]:
        """Parameters relevant to the chosen model, for logging."""
        keys = ["kind", "gamma", "delta", "m"]
        if self.kind == ModelKind.OGDEN:
            keys += ["lam", "mu", "q", "r", "s"]
        return {k: getattr(self, k) for k in keys}
