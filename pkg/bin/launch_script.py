#!/usr/bin/env python3

"""
Launch the blowrate cli without installing the console script,
eg  $ bin/launch_script.py check --config run.toml
"""
import sys

# NB this import does not work until blowrate has been installed, and is
# available in the PYTHONPATH
from blowrate.cli import main


def launch():
    return main()


if __name__ == "__main__":
    sys.exit(launch())
