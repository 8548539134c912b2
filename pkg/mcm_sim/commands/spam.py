import logging

from ..spam import correct_all, data_table, load_spam_inputs

logger = logging.getLogger(__name__)


class SpamCorrect:
    """SPAM-corrected data-qubit and ancilla fidelities from measured retention probabilities."""

    COMMAND = "spam correct"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "inputs": ("PATH", {"default": None, "help": "YAML/JSON inputs (default: shipped measured set)"}),
                "independent": ("BOOLEAN", {"default": False,
                                            "help": "average uncertainty with independent inputs instead of shared"}),
                "propagation": (["joint", "staged"], {"default": "joint",
                                                      "help": "ancilla uncertainty propagation"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Analysis"

    @classmethod
    def VALIDATE_INPUTS(cls, **kwargs):
        return True

    def run(self, config, run_dir, inputs=None, independent=False, propagation="joint"):
        correlated = not independent
        spam_inputs = load_spam_inputs(inputs)
        report = correct_all(spam_inputs, correlated=correlated, propagation=propagation)
        if spam_inputs.data is not None:
            run_dir.write_csv("table.csv", data_table(spam_inputs.data, correlated).csv_rows())
        if "ancilla" in report:
            a = report["ancilla"]
            logger.info("P(D|0) = %.4f(%.4f), P(B|1) = %.4f(%.4f)",
                        a["P_D_given_0"]["value"], a["P_D_given_0"]["sigma"],
                        a["P_B_given_1"]["value"], a["P_B_given_1"]["sigma"])
        return (report,)


COMMAND_CLASS_MAPPINGS = {
    SpamCorrect.COMMAND: SpamCorrect,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    SpamCorrect.COMMAND: "SPAM: Correct Fidelities",
}
