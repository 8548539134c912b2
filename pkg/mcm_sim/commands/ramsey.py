import logging

from ..readout import RAMSEY_MIN_POINTS, ramsey_phases, ramsey_scan

logger = logging.getLogger(__name__)


class RamseyScan:
    """Data-qubit Ramsey fringe across the mid-circuit measurement.

    Without --shots the fringe is the noise-averaged expectation value; with
    --shots every phase point is a Monte-Carlo experiment.
    """

    COMMAND = "ramsey"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "points": ("INT", {"default": 16, "min": RAMSEY_MIN_POINTS, "help": "phase points over 2 pi"}),
                "shots": ("INT", {"default": None, "min": 1, "help": "Monte-Carlo shots per phase point"}),
                "seed": ("INT", {"default": None, "min": 0, "help": "seed (default: execution.seed)"}),
                "no_mcm": ("BOOLEAN", {"default": False, "help": "plain Ramsey without the measurement"}),
                "noiseless": ("BOOLEAN", {"default": False, "help": "switch off quasi-static noise"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Readout"

    @classmethod
    def VALIDATE_INPUTS(cls, points=16, **kwargs):
        if points < RAMSEY_MIN_POINTS:
            return f"--points must be >= {RAMSEY_MIN_POINTS}"
        return True

    def run(self, config, run_dir, points=16, shots=None, seed=None, no_mcm=False, noiseless=False):
        phases = ramsey_phases(points)
        fit = ramsey_scan(config, phases, shots=shots, seed=seed, include_mcm=not no_mcm,
                          noise=not noiseless)
        run_dir.write_csv("ramsey.csv", [("phase_rad", "p_f3")] + list(zip(fit.phases, fit.values)))
        report = {"mode": "expectation" if shots is None else "monte-carlo",
                  "include_mcm": not no_mcm, "noise": not noiseless,
                  "shots": shots, "seed": seed, "fit": fit.to_document()}
        return (report,)


COMMAND_CLASS_MAPPINGS = {
    RamseyScan.COMMAND: RamseyScan,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    RamseyScan.COMMAND: "Ramsey: Fringe Through MCM",
}
