"""Command classes behind the ``mcm-sim`` subcommands."""
