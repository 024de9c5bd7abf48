"""Command-line configuration and subcommands."""
