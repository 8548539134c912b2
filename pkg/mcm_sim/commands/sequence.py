import logging
import re

from ..errors import SequenceError
from ..sequence import CARDINAL_INPUTS, build_mcm_sequence, build_reinit_sequence, validate

logger = logging.getLogger(__name__)

ARRAY_PATTERN = re.compile(r"^(\d+)x(\d+)$")


def _array_size(array):
    if not array:
        return None
    match = ARRAY_PATTERN.match(array.strip().lower())
    if not match:
        return None
    rows, cols = int(match.group(1)), int(match.group(2))
    return rows if rows == cols else None


def _check_array(array):
    if array and _array_size(array) is None:
        return f"--array must look like 7x7 (square), got '{array}'"
    return True


def _compile(config, input, array, preset, include_mcm):
    size = _array_size(array)
    if size is not None:
        config = config.updated(sequence={"array_size": size})
    if preset == "reinit":
        return build_reinit_sequence(config)
    return build_mcm_sequence(config, input, include_mcm=include_mcm)


class SequenceDump:
    """Compile the characterization circuit and write its event list."""

    COMMAND = "sequence dump"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "input": (list(CARDINAL_INPUTS), {"default": "0", "help": "data-qubit input state"}),
                "array": ("STRING", {"default": "", "help": "array size, e.g. 7x7 (scales the trap plan)"}),
                "preset": (["mcm", "reinit"], {"default": "mcm", "help": "circuit to compile"}),
                "no_mcm": ("BOOLEAN", {"default": False, "help": "leave the measurement section out"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Sequence"

    @classmethod
    def VALIDATE_INPUTS(cls, array="", **kwargs):
        return _check_array(array)

    def run(self, config, run_dir, input="0", array="", preset="mcm", no_mcm=False):
        ir = _compile(config, input, array, preset, not no_mcm)
        run_dir.write_text("sequence.json", ir.to_json())
        counts = ir.counts()
        logger.info("compiled %d events, %d microwave pulses", len(ir.events), counts["microwave_pulses"])
        report = {"counts": counts, "duration_ns": ir.duration, "ancilla": ir.ancilla,
                  "data_sites": list(ir.data_sites), "metadata": dict(ir.metadata)}
        if ir.trap_plan is not None:
            report["trap_plan"] = ir.trap_plan.summary()
        return (report,)


class SequenceValidate:
    """Check channel exclusivity, transition frames and pulse counts of the compiled circuit."""

    COMMAND = "sequence validate"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "input": (list(CARDINAL_INPUTS), {"default": "0", "help": "data-qubit input state"}),
                "array": ("STRING", {"default": "", "help": "array size, e.g. 7x7"}),
                "echoes": ("INT", {"default": None, "min": 0, "help": "expected echo count"}),
                "repumps": ("INT", {"default": None, "min": 0, "help": "expected repump cycles"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Sequence"

    @classmethod
    def VALIDATE_INPUTS(cls, array="", **kwargs):
        return _check_array(array)

    def run(self, config, run_dir, input="0", array="", echoes=None, repumps=None):
        ir = _compile(config, input, array, "mcm", True)
        expected = {}
        if echoes is not None:
            expected["echoes"] = echoes
        if repumps is not None:
            expected["repump_cycles"] = repumps
        result = validate(ir, expected)
        report = {"counts": ir.counts(), **result.to_document()}
        run_dir.write_json("validation.json", report)
        if not result.ok:
            raise SequenceError(f"{len(result.failures)} sequence check(s) failed",
                                details={"failures": result.failures})
        logger.info("all %d sequence checks passed", len(result.checks))
        return (report,)


COMMAND_CLASS_MAPPINGS = {
    SequenceDump.COMMAND: SequenceDump,
    SequenceValidate.COMMAND: SequenceValidate,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    SequenceDump.COMMAND: "Sequence: Dump IR",
    SequenceValidate.COMMAND: "Sequence: Validate IR",
}
