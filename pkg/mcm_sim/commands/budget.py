import logging
import math

from ..budget import (
    BudgetParams,
    branching_weights,
    light_shifts,
    optimize_total_error,
    p_scat,
    population_errors,
    rotation_error,
    shelved_cost,
    shiftout_settings,
)

logger = logging.getLogger(__name__)


class BudgetShiftout:
    """Scattering error, light shifts and rotation errors of the shelving shift-out pulse."""

    COMMAND = "budget shiftout"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "lifetime": ("QUANTITY", {"dimension": "time", "default": None,
                                          "help": "excited-state lifetime, e.g. '165 ns'"}),
                "detuning": ("QUANTITY", {"dimension": "frequency", "default": None,
                                          "help": "shift-out detuning from f=4, e.g. '-24 GHz'"}),
                "rabi": ("QUANTITY", {"dimension": "frequency", "default": None,
                                      "help": "microwave Rabi frequency, e.g. '44.8 kHz'"}),
                "epsilon": ("FLOAT", {"default": None, "min": 0.0, "help": "|Omega_mu / Delta_DLS| (default: optimum)"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Budget"

    @classmethod
    def VALIDATE_INPUTS(cls, epsilon=None, **kwargs):
        if epsilon is not None and not 0.0 < epsilon < 1.0:
            return f"--epsilon must be in (0, 1), got {epsilon}"
        return True

    def run(self, config, run_dir, lifetime=None, detuning=None, rabi=None, epsilon=None):
        lifetime = config.shiftout.si("lifetime") if lifetime is None else lifetime
        detuning = config.shiftout.si("detuning") if detuning is None else detuning
        rabi = config.budget.si("microwave_rabi") if rabi is None else rabi
        omega_q = config.physics.si("hyperfine")
        settings = shiftout_settings(epsilon, rabi, lifetime, detuning, omega_q)
        params = BudgetParams.from_epsilon(settings["epsilon"], gamma=1.0 / lifetime, omega_q=omega_q,
                                           detuning=detuning, omega_mu=rabi)
        shifts = light_shifts(params)
        scatter = p_scat(params)
        errors = population_errors(settings["epsilon"], leading=settings["epsilon"] < 1.0)
        report = {
            "settings": settings,
            "light_shifts": {"delta4": shifts.delta4, "delta3": shifts.delta3, "dls": shifts.dls,
                             "dls_large_detuning": shifts.dls_large_detuning,
                             "exact_over_large": shifts.exact_over_large},
            "p_scat": {"exact": scatter.exact, "large_detuning": scatter.large_detuning,
                       "from_dls": scatter.from_dls,
                       "exact_over_large": scatter.exact / scatter.large_detuning
                       if scatter.large_detuning else math.nan},
            "population_errors": {"c0": errors.c0, "c1": errors.c1, "c0_leading": errors.c0_leading,
                                  "c1_leading": errors.c1_leading, "average": errors.average},
            "rotation_error": rotation_error(settings["epsilon"]),
            "regime": scatter.regime,
        }
        return (report,)


class BudgetPhotons:
    """Photon and time budget of a readout window and its shelved-qubit scattering cost."""

    COMMAND = "budget photons"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "duration": ("QUANTITY", {"dimension": "time", "default": None,
                                          "help": "readout window (default: readout.exposure)"}),
                "target": ("FLOAT", {"default": None, "min": 0.0,
                                     "help": "photoelectron target; derives the window instead"}),
                "efficiency": ("FLOAT", {"default": None, "min": 0.0, "max": 1.0,
                                         "help": "collection efficiency"}),
                "column": (["mid-circuit", "occupation"], {"default": "mid-circuit",
                                                           "help": "readout light column"}),
                "exact": ("BOOLEAN", {"default": False, "help": "1 - exp(-r t) instead of r t"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Budget"

    @classmethod
    def VALIDATE_INPUTS(cls, duration=None, target=None, **kwargs):
        if duration is not None and target is not None:
            return "give at most one of --duration and --target"
        return True

    def run(self, config, run_dir, duration=None, target=None, efficiency=None, column="mid-circuit",
            exact=False):
        scatter = config.scatter_params(column)
        if target is None:
            if duration is None:
                block = config.readout if column == "mid-circuit" else config.occupation
                duration = block.si("exposure")
            eff = config.readout.collection_efficiency if efficiency is None else efficiency
            cost = shelved_cost(scatter, eff, duration=duration, exact=exact)
        else:
            eff = config.budget.target_efficiency if efficiency is None else efficiency
            cost = shelved_cost(scatter, eff, target_photoelectrons=target, exact=exact)
        logger.info("%.0f photons in %.3g s, shelved error %.3g", cost.photons, cost.duration, cost.error)
        report = {"column": column, "cost": cost.to_dict(), "branching": branching_weights()}
        return (report,)


class BudgetOptimize:
    """Optimal epsilon and minimum total error for both shift-out lines."""

    COMMAND = "budget optimize"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "lifetime": ("QUANTITY", {"dimension": "time", "default": None,
                                          "help": "extra lifetime to optimize for, e.g. '500 ns'"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Budget"

    @classmethod
    def VALIDATE_INPUTS(cls, **kwargs):
        return True

    def run(self, config, run_dir, lifetime=None):
        omega_q = config.physics.si("hyperfine")
        lifetimes = {"7p": config.shiftout.si("lifetime"), "5d": config.budget.si("alt_lifetime")}
        if lifetime is not None:
            lifetimes["custom"] = lifetime
        rows = [("line", "lifetime_s", "epsilon_opt", "p_min", "epsilon_numeric", "p_min_numeric")]
        report = {}
        for name, tau in lifetimes.items():
            opt = optimize_total_error(1.0 / tau, omega_q)
            report[name] = {"lifetime_s": tau, "epsilon_opt": opt.epsilon, "p_min": opt.p_min,
                            "epsilon_numeric": opt.epsilon_numeric, "p_min_numeric": opt.p_min_numeric,
                            "relative_gap": opt.relative_gap}
            rows.append((name, tau, opt.epsilon, opt.p_min, opt.epsilon_numeric, opt.p_min_numeric))
            logger.info("%s: p_min = %.4f%% at epsilon = %.4f", name, 100 * opt.p_min, opt.epsilon)
        run_dir.write_csv("optimum.csv", rows)
        return ({"optimum": report},)


COMMAND_CLASS_MAPPINGS = {
    BudgetShiftout.COMMAND: BudgetShiftout,
    BudgetPhotons.COMMAND: BudgetPhotons,
    BudgetOptimize.COMMAND: BudgetOptimize,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    BudgetShiftout.COMMAND: "Budget: Shift-out Errors",
    BudgetPhotons.COMMAND: "Budget: Photon/Time Budget",
    BudgetOptimize.COMMAND: "Budget: Optimize Total Error",
}
