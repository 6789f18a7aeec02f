"""
Evaluate command module for the a11yfix CLI.
"""

import argparse
from pathlib import Path

from commands.core import command, handle_command_error, print_header
from logic import run_evaluation


@command(name='evaluate', description='Summarize a repair run: remediation rates, deltas and new violations')
@handle_command_error
def evaluate_command(args: argparse.Namespace):
    """Handle the evaluate command."""
    outcome = run_evaluation(Path(args.out), max_iterations=args.max_iterations)

    print_header(f"📊 Remediation summary ({outcome['files']} files)")
    for strategy, summary in outcome['summaries'].items():
        print(f"   {strategy.value}")
        print(f"      violations      {summary.avg_violations_before:.2f} -> {summary.avg_violations_after:.2f}")
        print(f"      improved        {summary.compliance_improved_rate:.1%}")
        print(f"      fully fixed     {summary.fully_fixed_rate:.1%}")
        print(f"      accepted        {summary.accepted_rate:.1%}")
        print(f"      similarity      {summary.avg_structure_similarity:.2f}")
        print(f"      avg iterations  {summary.avg_iterations:.2f}")
    if outcome['new_violations']:
        print(f"\n⚠️  {outcome['new_violations']} violations were introduced by repairs (see new_violations.csv)")
    print("=" * 60)
    print(f"✅ Evaluation tables written to {outcome['out']}")


def add_arguments(parser: argparse.ArgumentParser):
    """Add evaluate command arguments to the parser."""
    parser.add_argument('--out', type=Path, default=Path('a11yfix_out'), help='Output directory of a repair run')
    parser.add_argument('--max-iterations', type=int, help='Bucket count for the iteration distribution')
