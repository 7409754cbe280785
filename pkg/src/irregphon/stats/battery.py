"""The six regression specifications (response, focal predictor, controls, random slopes)."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class RegressionSpec:
    response: str
    fixed: tuple[str, ...]
    random_slopes: tuple[str, ...]
    per_language_controls: tuple[str, ...] = ()
    grouping: str = "language"

    def __post_init__(self):
        if not self.fixed:
            raise ValueError("a regression needs at least one fixed predictor")
        if not set(self.random_slopes) <= set(self.fixed):
            raise ValueError("random slopes must be fixed predictors too")
        if not set(self.per_language_controls) <= set(self.fixed):
            raise ValueError("per-language controls must be fixed predictors too")

    @property
    def focal(self) -> str:
        """The predictor whose effect the regression is about."""
        return self.fixed[0]

    @property
    def controls(self) -> tuple[str, ...]:
        return self.fixed[1:]

    @property
    def name(self) -> str:
        return f"{self.response}~{self.focal}"

    @property
    def slug(self) -> str:
        return f"{self.response}-{self.focal}"

    @property
    def per_language_predictors(self) -> tuple[str, ...]:
        return (self.focal, *self.per_language_controls)


def build_spec_battery() -> list[RegressionSpec]:
    # Language means of FR are never a predictor: languages should not differ there.
    return [
        RegressionSpec("MI", ("PC", "FR", "mean(PC)", "WL", "mean(WL)"), ("PC", "FR", "WL"), ("FR", "WL")),
        RegressionSpec("PC", ("WL", "mean(WL)"), ("WL",)),
        RegressionSpec("MI", ("FR",), ("FR",)),
        RegressionSpec("PC", ("FR", "WL", "mean(WL)"), ("FR", "WL"), ("WL",)),
        RegressionSpec("MI", ("WL", "FR", "mean(WL)"), ("WL", "FR"), ("FR",)),
        RegressionSpec("WL", ("FR",), ("FR",)),
    ]
