"""Ordered heterogeneous vehicle strings."""

from __future__ import annotations

from dataclasses import dataclass, field

from .idm import IdmParams, LinearCoeffs, linearize

__all__ = ["VehicleChain"]


@dataclass
class VehicleChain:
    """Vehicles 1..m behind a virtual constant-speed leader (vehicle 0).

    ``automated[k]`` flags whether vehicle k+1 is an automated vehicle whose
    parameters may be tuned.
    """

    params: list[IdmParams]
    v_eq: float
    automated: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.params:
            raise ValueError("chain must contain at least one vehicle")
        if not self.automated:
            self.automated = [False] * len(self.params)
        if len(self.automated) != len(self.params):
            raise ValueError("automated flags must match vehicle count")
        for p in self.params:
            if not (0.0 < self.v_eq < p.v_max):
                raise ValueError(
                    f"equilibrium speed {self.v_eq} outside (0, {p.v_max})"
                )

    def __len__(self) -> int:
        return len(self.params)

    def coeffs(self) -> list[LinearCoeffs]:
        """Linearised coefficients of every vehicle at the chain equilibrium."""
        return [linearize(p, self.v_eq) for p in self.params]

    def replace_vehicle(self, index: int, p: IdmParams) -> "VehicleChain":
        """Copy of the chain with vehicle ``index`` (1-based) swapped out."""
        params = list(self.params)
        params[index - 1] = p
        return VehicleChain(params, self.v_eq, list(self.automated))
