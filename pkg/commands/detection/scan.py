"""
Scan command module for the a11yfix CLI.
"""

import argparse
from pathlib import Path

from commands.core import command, handle_command_error, print_header
from errors import DatasetError
from logic import scan_file


@command(name='scan', description='Run the rule engine over one HTML file')
@handle_command_error
def scan_command(args: argparse.Namespace):
    """Handle the scan command."""
    path = Path(args.file)
    if not path.is_file():
        raise DatasetError(f"File not found: {path}")

    report = scan_file(path)
    print_header(f"🔍 {path.name}: {report.violation_count} violations")

    for violation in report.violations:
        print(f"   [{violation.impact.value:<8}] {violation.rule_id:<28} {violation.node_path}")
        if args.verbose:
            print(f"              {violation.message}")

    print("\n📊 By category")
    for category, count in report.category_counts.items():
        print(f"   {category.value:<10}: {count}")

    if report.skipped_rules:
        print("\nℹ️  Not statically checkable")
        for skipped in report.skipped_rules:
            print(f"   {skipped.rule_id}: {skipped.reason} ({skipped.count}x)")

    if args.json:
        print(report.model_dump_json(indent=2))


def add_arguments(parser: argparse.ArgumentParser):
    """Add scan command arguments to the parser."""
    parser.add_argument('file', type=str, help='HTML file to scan')
    parser.add_argument('-v', '--verbose', action='store_true', help='Show violation messages')
    parser.add_argument('--json', action='store_true', help='Also print the full scan report as JSON')
