"""Age-of-information aware MDP laboratory for underwater data collection.

The package is organised bottom-up:

* :mod:`aoimdp.aoi_core` -- sawtooth AoI process and its time average.
* :mod:`aoimdp.estimation` -- replica-correlation delay and periodogram heading estimators.
* :mod:`aoimdp.delay_models` -- SDM and parametric observation-delay samplers.
* :mod:`aoimdp.env_underwater` -- multi-AUV data-collection environment.
* :mod:`aoimdp.rl_harness` -- tabular Q-learning, evaluation and paired comparisons.
* :mod:`aoimdp.cli` -- ``aoimdp`` command-line runner.
"""

from .aoi_core import (
    AoiSummary,
    UpdateRecord,
    UpdateTimeline,
    append_update,
    instantaneous_aoi,
    integrate_sawtooth,
    time_averaged_aoi,
)

__all__ = [
    "AoiSummary",
    "UpdateRecord",
    "UpdateTimeline",
    "append_update",
    "instantaneous_aoi",
    "integrate_sawtooth",
    "time_averaged_aoi",
]

__version__ = "0.1.0"
