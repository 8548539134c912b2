import logging
from dataclasses import replace

from ..cooling import (
    CoolingParams,
    mean_cooling_rate,
    mean_scattering_rate,
    molasses_heating,
    rate_half_width,
    scan,
    scan_grid,
)
from ..units import parse_quantity

logger = logging.getLogger(__name__)


def _molasses(config):
    return [parse_quantity(text, "rate") for text in config.cooling.molasses_rates]


class CoolingRate:
    """Sisyphus cooling rate on the 685-nm line at one trap frequency."""

    COMMAND = "cooling rate"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "ratio": ("FLOAT", {"default": None, "min": 0.0, "help": "omega_g / gamma (default: cooling block)"}),
                "no_saturation": ("BOOLEAN", {"default": False, "help": "drop s from the Lorentzian denominator"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Cooling"

    @classmethod
    def VALIDATE_INPUTS(cls, ratio=None, **kwargs):
        if ratio is not None and ratio <= 0:
            return "--ratio must be > 0"
        return True

    def run(self, config, run_dir, ratio=None, no_saturation=False):
        params = CoolingParams.from_config(config, ratio)
        if no_saturation:
            params = replace(params, saturate=False)
        energy_rate = mean_cooling_rate(params)
        report = {
            "params": params.to_dict(),
            "omega_g_over_gamma": params.omega_g / params.gamma,
            "x_m": params.x_m,
            "sigma": params.sigma,
            "rate_half_width": rate_half_width(params),
            "energy_rate_uK_per_ms": energy_rate,
            "cooling_rate_uK_per_ms": -energy_rate,
            "scattering_rate_per_s": mean_scattering_rate(params),
            "molasses_heating_uK_per_ms": {text: molasses_heating(r)
                                           for text, r in zip(config.cooling.molasses_rates, _molasses(config))},
        }
        logger.info("cooling rate %.2f uK/ms at omega_g/gamma = %.3f", -energy_rate, params.omega_g / params.gamma)
        return (report,)


class CoolingScanCommand:
    """Cooling and scattering rate versus omega_g / gamma with molasses crossovers."""

    COMMAND = "cooling scan"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "start": ("FLOAT", {"default": None, "min": 0.0, "help": "first omega_g / gamma"}),
                "stop": ("FLOAT", {"default": None, "min": 0.0, "help": "last omega_g / gamma"}),
                "points": ("INT", {"default": None, "min": 1, "help": "log-spaced grid points"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Cooling"

    @classmethod
    def VALIDATE_INPUTS(cls, start=None, stop=None, **kwargs):
        if start is not None and start <= 0 or stop is not None and stop <= 0:
            return "scan range must be positive"
        if start is not None and stop is not None and stop < start:
            return "--stop must be >= --start"
        return True

    def run(self, config, run_dir, start=None, stop=None, points=None):
        block = config.cooling
        grid = scan_grid(block.scan_min if start is None else start,
                         block.scan_max if stop is None else stop,
                         block.scan_points if points is None else points)
        result = scan(CoolingParams.from_config(config), grid, _molasses(config))
        run_dir.write_csv("curve.csv", result.csv_rows())
        best = result.best
        logger.info("max cooling rate %.2f uK/ms at omega_g/gamma = %.3f",
                    best.cooling_rate, best.omega_g_over_gamma)
        return (result.to_document(),)


COMMAND_CLASS_MAPPINGS = {
    CoolingRate.COMMAND: CoolingRate,
    CoolingScanCommand.COMMAND: CoolingScanCommand,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    CoolingRate.COMMAND: "Cooling: Sisyphus Rate",
    CoolingScanCommand.COMMAND: "Cooling: Scan omega_g/gamma",
}
