"""
Detect command module for the a11yfix CLI.
"""

import argparse

from commands.core import add_run_options, command, config_from_args, handle_command_error, print_header
from dataset import load_dataset
from logic import run_detection


@command(name='detect', description='Classify every page with the rule engine and, optionally, an LLM')
@handle_command_error
def detect_command(args: argparse.Namespace):
    """
    Handle the detect command.

    Args:
        args: Parsed command line arguments
    """
    config = config_from_args(args)
    dataset = load_dataset(args.dataset)

    print_header(f"🔍 Detecting violations in {len(dataset.samples)} pages")
    if dataset.detection_only:
        print("ℹ️  No fixed pages found; every sample is labelled as violating")

    outcome = run_detection(config, dataset)

    print(f"📊 {'System':<14}{'Precision':>10}{'Recall':>10}{'F1':>10}")
    print("-" * 44)
    for system, scores in outcome['scores'].items():
        flag = " (degenerate)" if scores.degenerate else ""
        print(f"   {system:<14}{scores.precision:>10.2f}{scores.recall:>10.2f}{scores.f1:>10.2f}{flag}")
    print("=" * 60)
    print(f"✅ Detection reports written to {outcome['out']}")


def add_arguments(parser: argparse.ArgumentParser):
    """Add detect command arguments to the parser."""
    add_run_options(parser)
