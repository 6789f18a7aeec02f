"""
Repair command module for the a11yfix CLI.
"""

import argparse

from commands.core import add_run_options, command, config_from_args, handle_command_error, print_header
from dataset import load_dataset
from logic import run_repair


@command(name='repair', description='Repair violating pages with the zero-shot and/or agent strategy')
@handle_command_error
def repair_command(args: argparse.Namespace):
    """
    Handle the repair command.

    Args:
        args: Parsed command line arguments
    """
    config = config_from_args(args)
    dataset = load_dataset(args.dataset)

    strategies = ", ".join(s.value for s in config.strategy.strategies())
    print_header(f"🔧 Repairing {len(dataset.pairs)} pages ({strategies})")

    outcome = run_repair(config, dataset)

    for strategy, stats in outcome['strategies'].items():
        print(f"   {strategy.value:<10} repaired {stats['repaired']:>4}  accepted {stats['accepted']:>4}  "
              f"skipped {stats['skipped']:>4}  calls {stats['calls']:>5}")
    print("=" * 60)
    print(f"✅ Repaired pages and reports written to {config.out}")


def add_arguments(parser: argparse.ArgumentParser):
    """Add repair command arguments to the parser."""
    add_run_options(parser)
