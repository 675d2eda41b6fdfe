"""
Named scenario presets for the reference DSL experiment families.

Band plans are reconstructions: ADSL downstream uses tones 32-255, VDSL
upstream uses the two upstream bands of the 998 plan (tones 870-1205 and
1972-2782, 1147 tones in total). ``tone_stride`` thins the band plan for
quick runs.
"""

from typing import Callable, Dict, List, Tuple

from ..core.exceptions import UnknownPresetError
from ..core.model import ADSL_BUDGET_DBM, VDSL_BUDGET_DBM, Scenario
from ..preprocessing.channel_model import synth_scenario
from ..preprocessing.schema import ChannelModelSpec

VDSL_UPSTREAM_BANDS = [(870, 1205), (1972, 2782)]
ADSL_DOWNSTREAM_BAND = (32, 255)

# Masks chosen so the total-power budgets bind.
VDSL_MASK_DBM_HZ = -52.5
ADSL_MASK_DBM_HZ = -36.5


def _upstream_paths(lengths: List[float]) -> List[List[float]]:
    # upstream crosstalk travels along the disturber's line
    return [list(lengths) for _ in lengths]


def _vdsl_upstream(name: str, lengths: List[float], tone_stride: int) -> Scenario:
    return synth_scenario(
        ChannelModelSpec(
            name=name,
            lengths_m=lengths,
            fext_path_lengths_m=_upstream_paths(lengths),
            bands=VDSL_UPSTREAM_BANDS,
            tone_stride=tone_stride,
            attenuation_db_per_m_sqrt_mhz=0.02,
            mask_dbm_hz=VDSL_MASK_DBM_HZ,
            budget_dbm=VDSL_BUDGET_DBM,
        )
    )


def adsl_nearfar_2(tone_stride: int = 1) -> Scenario:
    """CO line of 5 km and a remote-terminal line of 3 km sharing the last 3 km."""
    co, rt = 5000.0, 3000.0
    return synth_scenario(
        ChannelModelSpec(
            name="adsl-nearfar-2",
            lengths_m=[co, rt],
            coupling_lengths_m=[[0.0, rt], [rt, 0.0]],
            # downstream: RT crosstalk only crosses the RT segment, CO crosstalk the full loop
            fext_path_lengths_m=[[co, rt], [co, rt]],
            bands=[ADSL_DOWNSTREAM_BAND],
            tone_stride=tone_stride,
            attenuation_db_per_m_sqrt_mhz=0.015,
            mask_dbm_hz=ADSL_MASK_DBM_HZ,
            budget_dbm=ADSL_BUDGET_DBM,
        )
    )


def vdsl_up_4(tone_stride: int = 1) -> Scenario:
    """Two far users at 1200 m and two near users at 300 m."""
    return _vdsl_upstream("vdsl-up-4", [1200.0, 1200.0, 300.0, 300.0], tone_stride)


def vdsl_up_6(tone_stride: int = 1) -> Scenario:
    return _vdsl_upstream(
        "vdsl-up-6", [1200.0, 1000.0, 800.0, 600.0, 450.0, 300.0], tone_stride
    )


def vdsl_up_6sym(tone_stride: int = 1) -> Scenario:
    """Six users, the last three identical 300 m lines (symmetric crosstalkers)."""
    return _vdsl_upstream(
        "vdsl-up-6sym", [1200.0, 900.0, 600.0, 300.0, 300.0, 300.0], tone_stride
    )


PRESETS: Dict[str, Tuple[str, Callable[[int], Scenario]]] = {
    "adsl-nearfar-2": ("2-user near-far ADSL downstream", adsl_nearfar_2),
    "vdsl-up-4": ("4-user VDSL upstream, 2 far + 2 near", vdsl_up_4),
    "vdsl-up-6": ("6-user VDSL upstream, 1200 m down to 300 m", vdsl_up_6),
    "vdsl-up-6sym": ("6-user VDSL upstream with 3 symmetric 300 m lines", vdsl_up_6sym),
}


def list_presets() -> List[Tuple[str, str]]:
    return [(name, description) for name, (description, _) in PRESETS.items()]


def preset(name: str, tone_stride: int = 1) -> Scenario:
    """Build the named preset scenario."""
    if name not in PRESETS:
        raise UnknownPresetError(
            f"Unknown preset '{name}'. Available: {', '.join(sorted(PRESETS))}"
        )
    return PRESETS[name][1](tone_stride)
