"""Pulse-level simulation and analytics for mid-circuit measurement on Cs atom arrays."""
from importlib import import_module
from pathlib import Path

__version__ = "0.1.0"

COMMAND_CLASS_MAPPINGS = {}
COMMAND_DISPLAY_NAME_MAPPINGS = {}

# every commands/*.py contributes its command classes
for py in sorted((Path(__file__).parent / "commands").glob("*.py")):
    if py.stem.startswith("_"):
        continue
    mod = import_module(f"{__name__}.commands.{py.stem}")
    COMMAND_CLASS_MAPPINGS.update(mod.COMMAND_CLASS_MAPPINGS)
    COMMAND_DISPLAY_NAME_MAPPINGS.update(mod.COMMAND_DISPLAY_NAME_MAPPINGS)
