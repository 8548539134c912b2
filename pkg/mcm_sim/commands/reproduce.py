import logging

from ..acceptance import CRITERIA, run_acceptance
from ..errors import MCMError

logger = logging.getLogger(__name__)


class AcceptanceFailed(MCMError):
    """One or more acceptance criteria failed."""

    exit_code = 1
    kind = "acceptance"


class ReproducePaper:
    """Run every acceptance criterion and tabulate measured vs target vs tolerance."""

    COMMAND = "reproduce-paper"

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {},
            "optional": {
                "only": ("STRING", {"default": None,
                                    "help": "comma-separated criterion ids or modules, e.g. 'spam' or '3,4'"}),
                "seed": ("INT", {"default": None, "min": 0, "help": "seed (default: execution.seed)"}),
                "shots": ("INT", {"default": None, "min": 1,
                                  "help": "shots per experiment of the statistical check (default 10000)"}),
                "fast": ("BOOLEAN", {"default": False, "help": "skip the Monte-Carlo statistical check"}),
            },
        }

    RETURN_NAMES = ("report",)
    FUNCTION = "run"
    CATEGORY = "MCM/Acceptance"

    @classmethod
    def VALIDATE_INPUTS(cls, only=None, **kwargs):
        if only is None:
            return True
        known = {str(c.id) for c in CRITERIA} | {c.module for c in CRITERIA} \
            | {c.module.split("-")[0] for c in CRITERIA}
        unknown = [t for t in (s.strip() for s in only.split(",")) if t and t not in known]
        if unknown:
            return f"--only: unknown criterion or module {', '.join(unknown)}"
        return True

    def run(self, config, run_dir, only=None, seed=None, shots=None, fast=False):
        tokens = only.split(",") if only else None
        report = run_acceptance(config, tokens, seed=seed, shots=shots, fast=fast)
        document = report.to_document()
        run_dir.write_csv("summary.csv", report.csv_rows())
        if not report.ok:
            failed = [f"{r.id} {r.name}" for r in report.failures]
            run_dir.write_json("report.json", document)
            raise AcceptanceFailed(f"{len(failed)} criterion(s) failed: {'; '.join(failed)}",
                                   details={"failed": [r.id for r in report.failures]})
        return (document,)


COMMAND_CLASS_MAPPINGS = {
    ReproducePaper.COMMAND: ReproducePaper,
}

COMMAND_DISPLAY_NAME_MAPPINGS = {
    ReproducePaper.COMMAND: "Acceptance: Reproduce Published Numbers",
}
