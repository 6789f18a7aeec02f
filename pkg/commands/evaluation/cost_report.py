"""
Cost report command module for the a11yfix CLI.
"""

import argparse
from pathlib import Path

from commands.core import command, handle_command_error, print_header
from config import load_run_config
from cost import PriceTable
from logic import run_cost_report


@command(name='cost-report', description='Token, call, latency and cost tables for usage ledgers')
@handle_command_error
def cost_report_command(args: argparse.Namespace):
    """Handle the cost-report command."""
    config = load_run_config(args.config, {'price_table': args.prices, 'out': args.out})
    prices = PriceTable.load(config.price_table)
    outcome = run_cost_report(args.ledgers, config.out, prices, args.files)

    print_header("💰 Cost and resource utilization")
    for summary in outcome['aggregate']:
        print(f"   {summary.label:<28} calls {summary.calls:>6}  tokens {summary.total_tokens:>11,}  "
              f"${summary.cost:.4f}  {summary.mean_latency_ms:.0f} ms")
    for row in outcome['ratios']:
        ratio = "n/a" if row.ratio is None else f"{row.ratio:.2f}x"
        print(f"   {row.metric:<20} {ratio}")
    for per_file in outcome['per_file']:
        print(f"   {per_file.label:<20} ${per_file.cost_per_file:.3f}/file  "
              f"{per_file.tokens_per_file:,.0f} tokens/file  {per_file.calls_per_file:.2f} calls/file")
    print("=" * 60)
    print(f"✅ Cost tables written to {outcome['out']}")


def add_arguments(parser: argparse.ArgumentParser):
    """Add cost-report command arguments to the parser."""
    parser.add_argument('ledgers', type=Path, nargs='+', help='NDJSON ledgers; the first two are compared')
    parser.add_argument('--config', type=Path, help='YAML run configuration (its price_table is used)')
    parser.add_argument('--prices', type=Path, help='Price table (overrides the config; defaults to data/prices.yaml)')
    parser.add_argument('--files', type=int, nargs='+', help='File count per ledger for per-file figures')
    parser.add_argument('--out', type=Path, help='Output directory (defaults to the config value)')
