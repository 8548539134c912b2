import logging

from ..readout import (
    ABSENT,
    BRIGHT,
    DARK,
    ancilla_fidelities,
    occupation_image,
    process_experiment,
    run_experiment,
    spam_experiments,
)
from ..sequence import CARDINAL_INPUTS

logger = logging.getLogger(__name__)

EXPERIMENTS = ["single", "ancilla", "process", "retention", "occupation"]


def _histogram_files(run_dir, histogram, prefix=""):
    run_dir.write_csv(f"{prefix}histogram.csv", [("count", "shots")] + histogram.to_csv_rows())
    summary = histogram.class_summary()
    if BRIGHT in summary and (DARK in summary or ABSENT in summary):
        run_dir.write_csv(f"{prefix}threshold_sweep.csv",
                          [("threshold", "misclassification")] + histogram.sweep())


class MCMRun:
    """Monte-Carlo shots of the mid-circuit measurement and its auxiliary experiments.

    ``single`` runs one input state; ``ancilla`` reports P(D | |0>) and P(B | |1>);
    ``process`` the raw P_DB of the six cardinal inputs; ``retention`` the
    SPAM retention experiments; ``occupation`` an occupation-image histogram.
    """

    COMMAND = "mcm run"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "experiment": (EXPERIMENTS, {"default": "single", "help": "which experiment to run"}),
                "input": (list(CARDINAL_INPUTS), {"default": "0", "help": "input state for 'single'"}),
                "shots": ("INT", {"default": None, "min": 1, "help": "shots (default: execution.shots)"}),
                "seed": ("INT", {"default": None, "min": 0, "help": "seed (default: execution.seed)"}),
                "spam": ("BOOLEAN", {"default": False, "help": "inject the configured SPAM errors"}),
                "present": ("FLOAT", {"default": 0.5, "min": 0.0, "max": 1.0,
                                      "help": "loading probability for 'occupation'"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Readout"

    @classmethod
    def VALIDATE_INPUTS(cls, shots=None, **kwargs):
        if shots is not None and shots < 1:
            return f"--shots must be >= 1, got {shots}"
        return True

    def run(self, config, run_dir, experiment="single", input="0", shots=None, seed=None, spam=False,
            present=0.5):
        if spam:
            config = config.updated(spam={"enabled": True})
        shots = config.execution.shots if shots is None else shots
        seed = config.execution.seed if seed is None else seed
        report = {"experiment": experiment, "shots": shots, "seed": seed, "spam": spam}

        if experiment == "single":
            result = run_experiment(config, input, shots, seed)
            report["result"] = result.to_document()
            _histogram_files(run_dir, result.histogram)
        elif experiment == "ancilla":
            fid = ancilla_fidelities(config, shots, seed)
            report["P1_D"] = fid["P1_D"].to_dict()
            report["P2_B"] = fid["P2_B"].to_dict()
            if spam:
                report["true_P_D_given_0"] = fid["true_dark"].to_dict()
                report["true_P_B_given_1"] = fid["true_bright"].to_dict()
            report["histogram"] = fid["histogram"].to_document()
            _histogram_files(run_dir, fid["histogram"])
        elif experiment == "process":
            raw = process_experiment(config, shots, seed)
            report["P_DB"] = {label: est.to_dict() for label, est in raw.items()}
            run_dir.write_csv("process.csv", [("input", "P_DB", "sigma")]
                              + [(label, est.value, est.sigma) for label, est in raw.items()])
        elif experiment == "retention":
            values = spam_experiments(config, shots, seed)
            report["retention"] = {name: est.to_dict() for name, est in values.items()}
            run_dir.write_csv("retention.csv", [("experiment", "value", "sigma")]
                              + [(name, est.value, est.sigma) for name, est in values.items()])
        else:
            histogram = occupation_image(config, shots, seed, present)
            report["histogram"] = histogram.to_document()
            _histogram_files(run_dir, histogram)
        logger.info("%s experiment finished (%d shots)", experiment, shots)
        return (report,)


COMMAND_CLASS_MAPPINGS = {
    MCMRun.COMMAND: MCMRun,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    MCMRun.COMMAND: "MCM: Run Experiment",
}
