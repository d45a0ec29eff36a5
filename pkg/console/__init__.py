"""Командная строка fluidbeam"""

from console.cli import ConsoleBeamRunner, build_parser, main, run_cli

__all__ = ["ConsoleBeamRunner", "build_parser", "main", "run_cli"]
