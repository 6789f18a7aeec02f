#!/usr/bin/env python3
"""
a11yfix - Command Line Interface
Detect, repair and evaluate accessibility violations in static HTML.
"""

import argparse
import importlib
import inspect
import logging
import sys
from pathlib import Path
from typing import Callable, Dict

# Add the project root to the Python path
project_root = Path(__file__).resolve().parent
sys.path.append(str(project_root))

import config  # noqa: E402  (loads .env)

logger = logging.getLogger(__name__)


class CommandModule:
    """A discovered command: its handler plus the argument hook of the module that defines it."""

    def __init__(self, name: str, description: str, func: Callable):
        self.name = name
        self.description = description
        self.func = func

    def add_arguments(self, parser: argparse.ArgumentParser):
        """Add command-specific arguments to the parser."""
        pass

    def execute(self, args: argparse.Namespace):
        """Execute the command with the given arguments."""
        return self.func(args)


class CommandRouter:
    """Router for discovering and executing command modules."""

    def __init__(self):
        self.commands: Dict[str, CommandModule] = {}
        self.commands_dir = Path(__file__).parent / "commands"

    def discover_commands(self):
        """Import every commands/<group>/<module>.py and register the functions marked with @command."""
        if not self.commands_dir.exists():
            logger.warning(f"Commands directory not found: {self.commands_dir}")
            return

        for subdir in sorted(self.commands_dir.iterdir()):
            if not subdir.is_dir() or not (subdir / "__init__.py").exists():
                continue
            self._register(f"commands.{subdir.name}")
            for py_file in sorted(subdir.glob("*.py")):
                if py_file.name != "__init__.py":
                    self._register(f"commands.{subdir.name}.{py_file.stem}")

    def _register(self, module_name: str):
        try:
            module = importlib.import_module(module_name)
        except ImportError as e:
            logger.warning(f"Could not import {module_name}: {e}")
            return

        for name, obj in inspect.getmembers(module, inspect.isfunction):
            if not getattr(obj, '_is_command', False) or obj.__module__ != module.__name__:
                continue
            command_name = getattr(obj, '_command_name', name)
            cmd_module = CommandModule(
                name=command_name,
                description=getattr(obj, '_command_description', f'Execute {name}'),
                func=obj,
            )
            if hasattr(module, 'add_arguments'):
                cmd_module.add_arguments = module.add_arguments
            self.commands[command_name] = cmd_module

    def create_parser(self) -> argparse.ArgumentParser:
        """Create the main argument parser with discovered commands."""
        parser = argparse.ArgumentParser(
            prog='a11yfix',
            description='a11yfix - accessibility detection and LLM repair for static HTML',
            epilog='Use "a11yfix <command> --help" for more information about a command.'
        )

        subparsers = parser.add_subparsers(
            dest='command',
            help='Available commands',
            metavar='COMMAND'
        )

        for command_name in sorted(self.commands):
            command_module = self.commands[command_name]
            subparser = subparsers.add_parser(command_name, help=command_module.description)
            command_module.add_arguments(subparser)
            subparser.set_defaults(func=command_module.execute)

        return parser

    def execute_command(self, args: argparse.Namespace):
        """Execute the specified command; command handlers exit with their own codes on error."""
        if args.command not in self.commands:
            logger.error(f"Unknown command: {args.command}")
            sys.exit(1)
        self.commands[args.command].execute(args)


def main():
    """
    Main entry point for the a11yfix CLI.
    """
    logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)

    router = CommandRouter()
    router.discover_commands()

    if not router.commands:
        logger.error("No commands discovered. Please check the commands directory.")
        sys.exit(1)

    parser = router.create_parser()
    args = parser.parse_args()

    if not args.command:
        parser.print_help()
        sys.exit(1)

    router.execute_command(args)
    sys.exit(0)


if __name__ == "__main__":
    main()
