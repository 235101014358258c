#!/usr/bin/env python3
"""
AWVA simulator - command-line runner
"""

from awva.experiments.cli import cli


def main():
    """Main application entry point"""
    cli(prog_name='awva')


if __name__ == '__main__':
    main()
