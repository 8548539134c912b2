import logging

from ..atomic_model import LevelState
from ..pulse_engine import achievable_ratio_interval, solve_horn_phase, two_pulse_shelving_solve

logger = logging.getLogger(__name__)


class ShelvingHorn:
    """Horn phase giving the requested Rabi ratio for polarization-based shelving."""

    COMMAND = "shelving horn"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "ratio": ("FLOAT", {"default": None, "min": 0.0,
                                    "help": "target Omega(4,0-3,-1) / Omega(3,0-4,-1) (default: calibration)"}),
                "rabi": ("QUANTITY", {"dimension": "frequency", "default": None,
                                      "help": "|3,0>-|4,-1> Rabi frequency (default: calibration)"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Shelving"

    @classmethod
    def VALIDATE_INPUTS(cls, ratio=None, **kwargs):
        if ratio is not None and ratio <= 0:
            return "--ratio must be > 0"
        return True

    def run(self, config, run_dir, ratio=None, rabi=None):
        drive = config.horn_drive()
        ratio = config.calibration.shelving_ratio if ratio is None else ratio
        rabi = config.rabi(LevelState(3, 0), LevelState(4, -1)) if rabi is None else rabi
        low, high = achievable_ratio_interval(drive)
        solution = solve_horn_phase(drive, ratio, rabi)
        logger.info("horn phase %.6f rad for ratio %.4f", solution.phase, solution.ratio)
        return ({"target_ratio": ratio, "phase_rad": solution.phase, "achieved_ratio": solution.ratio,
                 "duration_s": solution.duration, "achievable_interval": [low, high]},)


class ShelvingTwoPulse:
    """Detuning, duration and second-pulse phase of the two-pulse shelving scheme."""

    COMMAND = "shelving two-pulse"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "ratio": ("FLOAT", {"default": None, "min": 0.0, "help": "Omega1 / Omega2 in [1/4, 3/4]"}),
            },
            "optional": {
                "rabi": ("QUANTITY", {"dimension": "frequency", "default": None,
                                      "help": "Omega2 on |3,0>-|4,-1> (default: calibration)"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Shelving"

    @classmethod
    def VALIDATE_INPUTS(cls, **kwargs):
        return True

    def run(self, config, run_dir, ratio, rabi=None):
        rabi = config.rabi(LevelState(3, 0), LevelState(4, -1)) if rabi is None else rabi
        solution = two_pulse_shelving_solve(ratio, rabi)
        return ({"ratio": ratio, "detuning_rad_s": solution.detuning, "duration_s": solution.duration,
                 "phase_rad": solution.phase, "transfer": solution.transfer,
                 "return_probability": solution.return_probability},)


COMMAND_CLASS_MAPPINGS = {
    ShelvingHorn.COMMAND: ShelvingHorn,
    ShelvingTwoPulse.COMMAND: ShelvingTwoPulse,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    ShelvingHorn.COMMAND: "Shelving: Horn Phase",
    ShelvingTwoPulse.COMMAND: "Shelving: Two-Pulse Solver",
}
