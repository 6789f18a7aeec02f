"""
Core command functionality for the a11yfix CLI: the command decorator, error handling and the
run options shared by the pipeline commands.
"""

import argparse
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Dict

from config import load_run_config
from errors import A11yFixError, PartialFailureError
from schemas import ProviderKind, RunConfig, StrategyChoice

logger = logging.getLogger(__name__)


def command(name: str = None, description: str = None):
    """Decorator to mark functions as commands."""
    def decorator(func):
        func._is_command = True
        func._command_name = name or func.__name__
        func._command_description = description or func.__doc__ or f'Execute {func.__name__}'
        return func
    return decorator


def handle_command_error(func):
    """Decorator to print errors and exit with the code their type maps to."""
    @wraps(func)
    def wrapper(args: argparse.Namespace):
        try:
            return func(args)
        except PartialFailureError as e:
            print(f"❌ Error: {e}")
            for name, error in e.failed_files:
                print(f"   {name}: {error}")
            sys.exit(e.exit_code)
        except A11yFixError as e:
            print(f"❌ Error: {e}")
            sys.exit(e.exit_code)
        except KeyboardInterrupt:
            print("\n❌ Interrupted; completed per-file reports were kept")
            sys.exit(130)
        except Exception as e:
            logger.debug("Unexpected failure", exc_info=True)
            print(f"❌ Error: {e}")
            sys.exit(1)
    return wrapper


def add_run_options(parser: argparse.ArgumentParser, dataset: bool = True):
    """Flags shared by the pipeline commands; unset flags fall back to the config file."""
    if dataset:
        parser.add_argument('--dataset', type=Path, required=True,
                            help='Dataset root holding scraped_sites/ (and optionally scraped_sites_fixed/)')
    parser.add_argument('--config', type=Path, help='YAML run configuration')
    parser.add_argument('--strategy', choices=[c.value for c in StrategyChoice], help='Repair strategy')
    parser.add_argument('--provider', choices=[k.value for k in ProviderKind], help='LLM provider kind')
    parser.add_argument('--mock-script', type=Path, help='Script file for the mock provider')
    parser.add_argument('--max-iterations', type=int, help='Agent loop iteration limit')
    parser.add_argument('--chunk-budget', type=int, help='Token budget per chunk')
    parser.add_argument('--similarity-threshold', type=float, help='Minimum structural similarity for acceptance')
    parser.add_argument('--workers', type=int, help='Files processed in parallel')
    parser.add_argument('--out', type=Path, help='Output directory')
    parser.add_argument('--freeze-clock', action='store_true', default=None,
                        help='Pin all timestamps to the epoch for reproducible reports')


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {
        'strategy': getattr(args, 'strategy', None),
        'provider.kind': getattr(args, 'provider', None),
        'provider.script': getattr(args, 'mock_script', None),
        'max_iterations': getattr(args, 'max_iterations', None),
        'chunk_budget': getattr(args, 'chunk_budget', None),
        'similarity_threshold': getattr(args, 'similarity_threshold', None),
        'workers': getattr(args, 'workers', None),
        'out': getattr(args, 'out', None),
        'freeze_clock': getattr(args, 'freeze_clock', None),
    }
    return load_run_config(getattr(args, 'config', None), overrides)


def print_header(title: str):
    print(title)
    print("=" * 60)
