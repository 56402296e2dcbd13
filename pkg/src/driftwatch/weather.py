"""Deterministic per-location weather schedules.

A schedule maps (location, day index) to one of four labels. Generated
schedules lean seasonal: snow-heavy early in the year, rain and fog later,
with roughly a third of location-days carrying drift weather. Schedules
round-trip through JSON files so runs can be replayed exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, InvalidInputError

CLEAR = "clear-day"
DRIFT_WEATHERS = ("rain", "snow", "fog")
ALL_WEATHERS = (CLEAR,) + DRIFT_WEATHERS

# (clear, rain, snow, fog) by season; ~33% of days carry drift weather.
_WINTER_WEIGHTS = (0.66, 0.07, 0.19, 0.08)
_SPRING_WEIGHTS = (0.67, 0.16, 0.06, 0.11)
_WINTER_DAYS = 59  # day 0 = January 1; winter = January + February


@dataclass(frozen=True)
class WeatherSchedule:
    locations: tuple[str, ...]
    n_days: int
    table: Mapping[str, tuple[str, ...]]  # location -> weather per day

    def weather(self, location: str, day: int) -> str:
        if location not in self.table:
            raise InvalidInputError(f"location {location!r} not in schedule")
        if not (0 <= day < self.n_days):
            raise InvalidInputError(f"day {day} outside schedule range 0..{self.n_days - 1}")
        return self.table[location][day]

    def drift_day_fraction(self) -> float:
        total = self.n_days * len(self.locations)
        drifted = sum(
            1 for loc in self.locations for w in self.table[loc] if w != CLEAR
        )
        return drifted / total

    @staticmethod
    def generate(locations: Sequence[str], n_days: int, seed: int) -> "WeatherSchedule":
        if n_days < 1 or not locations:
            raise ConfigError("schedule needs at least one location and one day")
        table = {}
        for li, loc in enumerate(locations):
            rng = np.random.default_rng([seed, 7919, li])
            days = []
            for day in range(n_days):
                weights = _WINTER_WEIGHTS if day <= _WINTER_DAYS else _SPRING_WEIGHTS
                days.append(ALL_WEATHERS[rng.choice(4, p=weights)])
            table[loc] = tuple(days)
        return WeatherSchedule(locations=tuple(locations), n_days=n_days, table=table)

    def to_file(self, path: Path) -> None:
        payload = {
            "locations": list(self.locations),
            "n_days": self.n_days,
            "table": {loc: list(days) for loc, days in self.table.items()},
        }
        Path(path).write_text(json.dumps(payload, indent=1))

    @staticmethod
    def from_file(path: Path) -> "WeatherSchedule":
        payload = json.loads(Path(path).read_text())
        table = {loc: tuple(days) for loc, days in payload["table"].items()}
        for loc, days in table.items():
            if len(days) != payload["n_days"]:
                raise ConfigError(f"schedule for {loc!r} does not cover every day")
            for w in days:
                if w not in ALL_WEATHERS:
                    raise ConfigError(f"unknown weather label {w!r}")
        return WeatherSchedule(
            locations=tuple(payload["locations"]),
            n_days=payload["n_days"],
            table=table,
        )
