import json
import logging
from pathlib import Path

from ..calibration import calibrate
from ..config import config_schema, dump_document, save_document

logger = logging.getLogger(__name__)


class ConfigShow:
    """Print the resolved configuration as YAML, optionally with its calibrated constants."""

    COMMAND = "config show"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "calibrated": ("BOOLEAN", {"default": False,
                                           "help": "also solve and report the calibrated noise constants"}),
                "save": ("PATH", {"default": None, "help": "also write the resolved config to this file"}),
            },
        }

    RETURN_NAMES = ("report", "text")
    FUNCTION = "run"
    CATEGORY = "MCM/Config"

    @classmethod
    def VALIDATE_INPUTS(cls, **kwargs):
        return True

    def run(self, config, run_dir, calibrated=False, save=None):
        document = config.to_document()
        text = dump_document(document)
        run_dir.write_text("config.yaml", text)
        report = {"config": document}
        if save:
            report["saved"] = str(save_document(Path(save), document))
            logger.info("config written to %s", report["saved"])
        if calibrated:
            report["calibration"] = calibrate(config).to_dict()
            logger.info("calibration: %s", report["calibration"])
        return (report, text)


class ConfigSchema:
    """Print the JSON schema of the run configuration."""

    COMMAND = "config schema"

    @classmethod
    def INPUT_TYPES(cls):
        return {"required": {}, "optional": {}}

    RETURN_NAMES = ("report", "text")
    FUNCTION = "run"
    CATEGORY = "MCM/Config"

    @classmethod
    def VALIDATE_INPUTS(cls, **kwargs):
        return True

    def run(self, config, run_dir):
        schema = config_schema()
        text = json.dumps(schema, indent=2, sort_keys=True) + "\n"
        run_dir.write_text("schema.json", text)
        return ({"schema": "schema.json"}, text)


COMMAND_CLASS_MAPPINGS = {
    ConfigShow.COMMAND: ConfigShow,
    ConfigSchema.COMMAND: ConfigSchema,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    ConfigShow.COMMAND: "Config: Show",
    ConfigSchema.COMMAND: "Config: JSON Schema",
}
