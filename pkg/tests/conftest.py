from __future__ import annotations

import numpy as np
import pytest

from driftwatch.driftlog import DriftLog, DriftLogEntry
from driftwatch.toymodel import default_task, train_clean

SCHEMA = ("device_id", "location", "weather")


def _hms(h: int, m: int, s: int) -> float:
    return float(h * 3600 + m * 60 + s)


# The five-row toy drift log: two devices, two cities, one snowy morning.
# Row 3 is a detector false positive on a clear day.
TOY_ROWS = [
    (_hms(6, 2, 1), "android_42", "clear-day", "Helsinki", False),
    (_hms(6, 2, 23), "android_21", "clear-day", "New York", False),
    (_hms(6, 4, 55), "android_21", "clear-day", "New York", True),
    (_hms(8, 3, 32), "android_21", "snow", "New York", True),
    (_hms(11, 5, 1), "android_42", "snow", "Helsinki", True),
]


def make_toy_log(path=None) -> DriftLog:
    log = DriftLog(schema=SCHEMA, path=path)
    for ts, device, weather, location, drift in TOY_ROWS:
        log.append(
            DriftLogEntry(
                timestamp=ts,
                device_id=device,
                model_version_id="m0",
                attributes={"device_id": device, "weather": weather, "location": location},
                drift=drift,
            )
        )
    return log


@pytest.fixture
def toy_log() -> DriftLog:
    return make_toy_log()


@pytest.fixture
def toy_window(toy_log):
    return toy_log.window(0.0, 86400.0)


@pytest.fixture(scope="session")
def task():
    return default_task(seed=0)


@pytest.fixture(scope="session")
def base_model(task):
    return train_clean(task, seed=7)


def scenario_window(causes, seed, n_days=14, tpr=0.85, fpr=0.02):
    """Synthetic drift-log window with planted weather causes.

    Entries carry (device, location, weather) attributes; the drift flag
    comes from a Bernoulli detector with the given true/false positive
    rates. Returns the window plus the ground-truth partition of entry
    indices into cause groups ("clean" for undrifted entries).
    """
    rng = np.random.default_rng(seed)
    locations = ["Helsinki", "New York", "Tibet", "Quebec"]
    weathers = ["clear-day", "rain", "snow", "fog"]
    log = DriftLog(schema=SCHEMA)
    truth: dict[int, str] = {}
    idx = 0
    for day in range(n_days):
        for li, loc in enumerate(locations):
            weather = weathers[rng.integers(4)] if rng.random() < 0.45 else "clear-day"
            for dev in range(6):
                device = f"android_{li}{dev}"
                for _ in range(int(rng.poisson(3))):
                    drifted = weather in causes
                    flag = bool(rng.random() < (tpr if drifted else fpr))
                    log.append(
                        DriftLogEntry(
                            timestamp=day * 86400.0 + idx * 1e-3,
                            device_id=device,
                            model_version_id="m0",
                            attributes={
                                "device_id": device,
                                "location": loc,
                                "weather": weather,
                            },
                            drift=flag,
                        )
                    )
                    truth[idx] = weather if drifted else "clean"
                    idx += 1
    return log.window(0.0, n_days * 86400.0), truth


def synthetic_window(n_entries, seed, causes=("snow",), tpr=0.85, fpr=0.02):
    """Flat synthetic window of a given size for scalability runs."""
    rng = np.random.default_rng(seed)
    locations = ["Helsinki", "New York", "Tibet", "Quebec"]
    weathers = ["clear-day", "rain", "snow", "fog"]
    log = DriftLog(schema=SCHEMA)
    for i in range(n_entries):
        loc = locations[rng.integers(len(locations))]
        weather = weathers[rng.integers(4)] if rng.random() < 0.4 else "clear-day"
        device = f"android_{rng.integers(48):03d}"
        drifted = weather in causes
        flag = bool(rng.random() < (tpr if drifted else fpr))
        log.append(
            DriftLogEntry(
                timestamp=float(i),
                device_id=device,
                model_version_id="m0",
                attributes={"device_id": device, "location": loc, "weather": weather},
                drift=flag,
            )
        )
    return log.window(0.0, float(n_entries) + 1.0)
